use uepurify_core::attacks::{apply_poison, gen_one_pixel};
use uepurify_core::data::{generate_synthetic_dataset, SynthConfig};
use uepurify_core::eval::{train_classifier, ClassifierConfig};

#[test]
#[ignore]
fn probe_onepixel_per_class() {
    let cfg = SynthConfig { ..Default::default() };
    let (train, test) = generate_synthetic_dataset(&cfg).unwrap();
    let onep = gen_one_pixel(&train, 12);
    let (poisoned, _) = apply_poison(&train, &onep, 1.0, 13).unwrap();
    let ccfg = ClassifierConfig { epochs: 12, seed: 1, ..Default::default() };
    let mut m = train_classifier(&poisoned, &ccfg).unwrap();
    let flags = m.correct_flags(&test).unwrap();

    // per-class delta amplitude on the train set
    let mut amp = vec![(0f64, 0usize); 10];
    for i in 0..train.len() {
        let l = train.labels[i] as usize;
        let a: f64 = onep.delta(i).iter().map(|&v| (v as f64).powi(2)).sum::<f64>().sqrt();
        amp[l].0 += a;
        amp[l].1 += 1;
    }
    let mut acc = vec![(0usize, 0usize); 10];
    for (i, &ok) in flags.iter().enumerate() {
        let l = test.labels[i] as usize;
        acc[l].0 += ok as usize;
        acc[l].1 += 1;
    }
    for c in 0..10 {
        println!(
            "class {c}: mean|delta|_2 {:.3}, poisoned-victim test acc {:.3}",
            amp[c].0 / amp[c].1 as f64,
            acc[c].0 as f64 / acc[c].1 as f64
        );
    }
}
