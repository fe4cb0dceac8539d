use uepurify_core::attacks::{apply_poison, gen_classwise_smooth, gen_error_minimizing, EMAttackConfig};
use uepurify_core::data::{generate_synthetic_dataset, SynthConfig};
use uepurify_core::eval::{evaluate, train_classifier, ClassifierConfig};

#[test]
#[ignore]
fn probe_patch8_and_em() {
    let cfg = SynthConfig { ..Default::default() };
    let (train, test) = generate_synthetic_dataset(&cfg).unwrap();
    let ccfg = ClassifierConfig { seed: 1, ..Default::default() };

    let smooth8 = gen_classwise_smooth(&train, 1.0, 8, 11).unwrap();
    let (p8, _) = apply_poison(&train, &smooth8, 1.0, 13).unwrap();
    let mut m = train_classifier(&p8, &ccfg).unwrap();
    println!(
        "smooth patch=8: clean {:.3} mem {:.3}",
        evaluate(&mut m, &test).unwrap(),
        evaluate(&mut m, &p8).unwrap()
    );

    let t0 = std::time::Instant::now();
    let (em, rep) = gen_error_minimizing(&train, &EMAttackConfig { seed: 5, ..Default::default() }).unwrap();
    println!(
        "em gen: {:?} converged {} rounds {} acc {:.3}",
        t0.elapsed(), rep.converged, rep.rounds_used, rep.surrogate_accuracy
    );
    let (pem, _) = apply_poison(&train, &em, 1.0, 13).unwrap();
    let mut m = train_classifier(&pem, &ccfg).unwrap();
    println!(
        "em: clean {:.3} mem {:.3}",
        evaluate(&mut m, &test).unwrap(),
        evaluate(&mut m, &pem).unwrap()
    );
}
