use std::time::Instant;
use uepurify_core::nn::{BatchNorm2d, Conv2d, Layer, Relu, Rng, Tensor};

fn time_layer<L: Layer<f32>>(name: &str, l: &mut L, x: &Tensor<f32>, iters: usize) {
    let y = l.forward(x, true);
    let t0 = Instant::now();
    for _ in 0..iters {
        let _ = l.forward(x, true);
    }
    let fwd = t0.elapsed();
    let t0 = Instant::now();
    for _ in 0..iters {
        let _ = l.backward(&y);
    }
    println!("{name}: fwd {:?}/iter, bwd {:?}/iter", fwd / iters as u32, t0.elapsed() / iters as u32);
}

#[test]
#[ignore]
fn bench_layers() {
    let mut rng = Rng::new(1);
    let x16 = Tensor::from_vec([128, 12, 16, 16], (0..128*12*256).map(|i| (i % 97) as f32 * 0.01).collect());
    let x8 = Tensor::from_vec([128, 24, 8, 8], (0..128*24*64).map(|i| (i % 97) as f32 * 0.01).collect());

    let mut conv_stem = Conv2d::new(12, 12, 3, 1, 1, &mut rng);
    time_layer("conv12->12@16x16", &mut conv_stem, &x16, 20);
    let mut conv_res = Conv2d::new(24, 24, 3, 1, 1, &mut rng);
    time_layer("conv24->24@8x8", &mut conv_res, &x8, 20);
    let mut bn = BatchNorm2d::new(24);
    time_layer("bn24@8x8", &mut bn, &x8, 20);
    let mut relu = Relu::new();
    time_layer("relu@8x8", &mut relu, &x8, 20);
}
