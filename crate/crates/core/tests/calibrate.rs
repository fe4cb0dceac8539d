//! Manual calibration probes (ignored by default; run explicitly while
//! tuning desk-scale defaults). Each prints timing and accuracy numbers.

use std::time::Instant;
use uepurify_core::attacks::{apply_poison, gen_classwise_smooth, gen_error_minimizing, gen_one_pixel, EMAttackConfig};
use uepurify_core::data::{generate_synthetic_dataset, psnr, SynthConfig};
use uepurify_core::dvae::{infer_dvae, train_dvae, DVAEConfig};
use uepurify_core::eval::{evaluate, train_classifier, ClassifierConfig};

fn desk_data(seed: u64) -> (uepurify_core::data::LabeledImageSet, uepurify_core::data::LabeledImageSet) {
    let cfg = SynthConfig { seed, ..Default::default() };
    generate_synthetic_dataset(&cfg).unwrap()
}

#[test]
#[ignore]
fn probe_victim_speed_and_clean_accuracy() {
    let (train, test) = desk_data(0);
    let t0 = Instant::now();
    let cfg = ClassifierConfig { seed: 1, ..Default::default() };
    let mut model = train_classifier(&train, &cfg).unwrap();
    let train_time = t0.elapsed();
    let acc_test = evaluate(&mut model, &test).unwrap();
    let acc_train = evaluate(&mut model, &train).unwrap();
    println!(
        "victim: {:?} for {} epochs; clean test acc {acc_test:.4}, train acc {acc_train:.4}",
        train_time, cfg.epochs
    );
}

#[test]
#[ignore]
fn probe_attack_effectiveness() {
    let (train, test) = desk_data(0);
    let clf = ClassifierConfig { seed: 1, ..Default::default() };

    for (name, perturb) in [
        ("smooth", gen_classwise_smooth(&train, 1.0, 4, 11).unwrap()),
        ("onepixel", gen_one_pixel(&train, 12)),
    ] {
        let (poisoned, _) = apply_poison(&train, &perturb, 1.0, 13).unwrap();
        let t0 = Instant::now();
        let mut victim = train_classifier(&poisoned, &clf).unwrap();
        let clean_acc = evaluate(&mut victim, &test).unwrap();
        let memorized = evaluate(&mut victim, &poisoned).unwrap();
        println!(
            "{name}: victim in {:?}; clean test {clean_acc:.4}, poisoned-train {memorized:.4}",
            t0.elapsed()
        );
    }
}

#[test]
#[ignore]
fn probe_em_attack() {
    let (train, test) = desk_data(0);
    let clf = ClassifierConfig { seed: 1, ..Default::default() };
    let t0 = Instant::now();
    let (perturb, report) = gen_error_minimizing(&train, &EMAttackConfig { seed: 5, ..Default::default() }).unwrap();
    println!(
        "em generation: {:?}; converged {} after {} rounds (surrogate acc {:.4})",
        t0.elapsed(),
        report.converged,
        report.rounds_used,
        report.surrogate_accuracy
    );
    let (poisoned, _) = apply_poison(&train, &perturb, 1.0, 13).unwrap();
    let mut victim = train_classifier(&poisoned, &clf).unwrap();
    let clean_acc = evaluate(&mut victim, &test).unwrap();
    let memorized = evaluate(&mut victim, &poisoned).unwrap();
    println!("em: clean test {clean_acc:.4}, poisoned-train {memorized:.4}");
}

#[test]
#[ignore]
fn probe_dvae_rate_distortion() {
    let (train, _) = desk_data(0);
    let perturb = gen_classwise_smooth(&train, 1.0, 4, 11).unwrap();
    let (poisoned, _) = apply_poison(&train, &perturb, 1.0, 13).unwrap();
    println!("psnr(clean, poisoned) = {:.2} dB", psnr(&train.images, &poisoned.images).unwrap());

    for target in [0.25, 0.5, 1.0, 2.0, 3.0, 6.0] {
        let cfg = DVAEConfig { kld_target: target, seed: 3, ..Default::default() };
        let t0 = Instant::now();
        let (mut state, log) = train_dvae(&poisoned, &cfg).unwrap();
        let (recon, p_hat) = infer_dvae(&mut state, &poisoned).unwrap();
        let full_psnr = psnr(&poisoned.images, &recon.images).unwrap();
        println!(
            "kld_target {target}: {:?}; probe psnr {:.2}, full psnr {:.2}, final kld {:.3}, mean |p_hat| l2 {:.3}",
            t0.elapsed(),
            log.probe_psnr.last().unwrap(),
            full_psnr,
            log.kld.last().unwrap(),
            p_hat.mean_l2()
        );
    }
}
