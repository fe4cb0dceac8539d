use std::time::Instant;
use uepurify_core::data::{generate_synthetic_dataset, SynthConfig};
use uepurify_core::eval::{train_classifier, ClassifierConfig};
use uepurify_core::nn::{loss::softmax_cross_entropy, optim::Sgd, Layer, Rng, Tensor};

#[test]
#[ignore]
fn bench_phases() {
    let cfg = SynthConfig { ..Default::default() };
    let (train, _) = generate_synthetic_dataset(&cfg).unwrap();
    let idx: Vec<usize> = (0..128).collect();
    let (x, labels) = train.batch_tensor(&idx);

    // raw layer stack timing via a tiny training loop on one batch
    let ccfg = ClassifierConfig { epochs: 1, ..Default::default() };
    let t0 = Instant::now();
    let _ = train_classifier(&train, &ccfg).unwrap();
    println!("1 epoch full train: {:?}", t0.elapsed());

    // isolate fwd/bwd on a standalone net
    let mut rng = Rng::new(1);
    let mut net = uepurify_core::eval::bench_net(train.channels, train.class_count, &mut rng);
    // warmup
    let logits = net.forward(&x, true);
    let (_, dl) = softmax_cross_entropy(&logits, &labels);
    net.backward(&dl);

    let t0 = Instant::now();
    for _ in 0..20 {
        let _ = net.forward(&x, true);
    }
    println!("fwd train x20: {:?}", t0.elapsed());

    let t0 = Instant::now();
    for _ in 0..20 {
        let _ = net.forward(&x, false);
    }
    println!("fwd eval x20: {:?}", t0.elapsed());

    let logits = net.forward(&x, true);
    let (_, dl) = softmax_cross_entropy(&logits, &labels);
    let t0 = Instant::now();
    for _ in 0..20 {
        net.zero_grad();
        let _ = net.backward(&dl);
    }
    println!("bwd x20: {:?}", t0.elapsed());

    let mut sgd = Sgd::new(0.05, 0.9);
    let t0 = Instant::now();
    for _ in 0..20 {
        sgd.step(&mut net);
    }
    println!("sgd x20: {:?}", t0.elapsed());
}
