use uepurify_core::attacks::{apply_poison, gen_classwise_smooth, gen_one_pixel};
use uepurify_core::data::{generate_synthetic_dataset, SynthConfig};
use uepurify_core::eval::{evaluate, train_classifier, ClassifierConfig};

#[test]
#[ignore]
fn probe_epoch_dynamics() {
    let cfg = SynthConfig { ..Default::default() };
    let (train, test) = generate_synthetic_dataset(&cfg).unwrap();
    let smooth = gen_classwise_smooth(&train, 1.0, 4, 11).unwrap();
    let (poisoned, _) = apply_poison(&train, &smooth, 1.0, 13).unwrap();
    let onep = gen_one_pixel(&train, 12);
    let (poisoned1p, _) = apply_poison(&train, &onep, 1.0, 13).unwrap();
    for epochs in [8usize, 10, 12] {
        let ccfg = ClassifierConfig { epochs, seed: 1, ..Default::default() };
        let mut clean_m = train_classifier(&train, &ccfg).unwrap();
        let mut smooth_m = train_classifier(&poisoned, &ccfg).unwrap();
        let mut onep_m = train_classifier(&poisoned1p, &ccfg).unwrap();
        println!(
            "epochs {epochs}: clean {:.3} | smooth-poisoned {:.3} (mem {:.3}) | onepixel {:.3} (mem {:.3})",
            evaluate(&mut clean_m, &test).unwrap(),
            evaluate(&mut smooth_m, &test).unwrap(),
            evaluate(&mut smooth_m, &poisoned).unwrap(),
            evaluate(&mut onep_m, &test).unwrap(),
            evaluate(&mut onep_m, &poisoned1p).unwrap(),
        );
    }
}
