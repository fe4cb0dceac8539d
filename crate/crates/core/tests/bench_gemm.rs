use std::time::Instant;
use uepurify_core::nn::gemm::gemm;
use uepurify_core::nn::dot;

#[test]
#[ignore]
fn bench_gemm() {
    // conv-like GEMM: cout=24, K=216, ohw=64 (res24 layer), batch of 128 sequential
    let (m, k, n) = (24usize, 216usize, 64usize);
    let a = vec![0.5f32; m * k];
    let b = vec![0.25f32; k * n];
    let mut c = vec![0f32; m * n];
    let iters = 128 * 40 * 12; // batches x epochs worth
    let t0 = Instant::now();
    for _ in 0..iters {
        gemm(m, k, n, &a, &b, &mut c);
    }
    let el = t0.elapsed().as_secs_f64();
    let flops = 2.0 * (m * k * n * iters) as f64;
    println!("gemm single-thread: {:.2} GFLOP/s ({el:.2}s)", flops / el / 1e9);

    let x = vec![0.5f32; 4096];
    let y = vec![0.25f32; 4096];
    let t0 = Instant::now();
    let mut acc = 0f32;
    for _ in 0..200_000 {
        acc += dot(&x, &y);
    }
    let el = t0.elapsed().as_secs_f64();
    println!("dot: {:.2} GFLOP/s (acc {acc})", 2.0 * 4096.0 * 200_000.0 / el / 1e9);
}
