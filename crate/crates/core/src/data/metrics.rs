//! Image-quality metrics.

use super::DataError;

/// Cap reported when MSE underflows; keeps reports free of infinities.
pub const PSNR_CAP_DB: f64 = 120.0;

/// Mean squared error between two equal-shape arrays.
pub fn mse(a: &[f32], b: &[f32]) -> Result<f64, DataError> {
    if a.len() != b.len() || a.is_empty() {
        return Err(DataError::ShapeMismatch(format!("mse over {} vs {} values", a.len(), b.len())));
    }
    let mut acc = 0f64;
    for (&x, &y) in a.iter().zip(b) {
        let d = x as f64 - y as f64;
        acc += d * d;
    }
    Ok(acc / a.len() as f64)
}

/// Peak signal-to-noise ratio in dB with peak 1.0.
pub fn psnr(a: &[f32], b: &[f32]) -> Result<f64, DataError> {
    let m = mse(a, b)?;
    if m < 1e-12 {
        return Ok(PSNR_CAP_DB);
    }
    Ok(10.0 * (1.0 / m).log10())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Rng;

    #[test]
    fn identical_inputs_hit_the_cap() {
        let a = vec![0.3f32; 64];
        assert_eq!(psnr(&a, &a).unwrap(), PSNR_CAP_DB);
    }

    #[test]
    fn closed_form_value() {
        // MSE exactly 1e-3 -> 30 dB
        let a = vec![0.0f32; 1000];
        let mut b = vec![0.0f32; 1000];
        b[0] = 1.0; // single unit error over 1000 values
        let p = psnr(&a, &b).unwrap();
        assert!((p - 30.0).abs() < 1e-9, "got {p}");
    }

    #[test]
    fn symmetry_is_exact() {
        let mut rng = Rng::new(11);
        let a: Vec<f32> = (0..512).map(|_| rng.uniform() as f32).collect();
        let b: Vec<f32> = (0..512).map(|_| rng.uniform() as f32).collect();
        assert_eq!(psnr(&a, &b).unwrap().to_bits(), psnr(&b, &a).unwrap().to_bits());
    }

    #[test]
    fn more_noise_never_raises_psnr() {
        for seed in 0..10 {
            let mut rng = Rng::new(seed);
            let a: Vec<f32> = (0..768).map(|_| rng.uniform() as f32).collect();
            let mut prev = f64::INFINITY;
            for std in [0.01, 0.03, 0.1, 0.3] {
                let mut noise_rng = Rng::new(1000 + seed);
                let b: Vec<f32> = a
                    .iter()
                    .map(|&v| (v as f64 + std * noise_rng.normal()).clamp(0.0, 1.0) as f32)
                    .collect();
                let p = psnr(&a, &b).unwrap();
                assert!(p <= prev + 1e-9, "seed {seed} std {std}: {p} > {prev}");
                prev = p;
            }
        }
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        assert!(matches!(psnr(&[0.0; 3], &[0.0; 4]), Err(DataError::ShapeMismatch(_))));
    }
}
