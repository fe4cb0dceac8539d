//! Bayes classification of Gaussian mixtures, hyperplane shift under
//! poisoning, KL-divergence bounds for normalized two-component mixtures,
//! and mixture conditional entropy.
//!
//! All routines are pure functions in 64-bit floats. [`verify`] holds the
//! independent numerical oracles used to cross-check every closed form.

pub mod quad;
pub mod verify;

pub use quad::QuadratureConfig;

use crate::nn::Rng;
use nalgebra::{DMatrix, DVector};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TheoryError {
    #[error("degenerate spec: {0}")]
    DegenerateSpec(String),
    #[error("covariance is not symmetric positive definite")]
    NotSpd,
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("quadrature did not converge to the requested tolerance")]
    QuadratureNonconvergence,
    #[error("hyperplane shift undefined: clean spec has zero normal")]
    UndefinedDistance,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

fn check_symmetric(cov: &DMatrix<f64>) -> Result<(), TheoryError> {
    if !cov.is_square() {
        return Err(TheoryError::InvalidParameter("covariance must be square".into()));
    }
    let scale = cov.amax().max(1e-300);
    for i in 0..cov.nrows() {
        for j in (i + 1)..cov.ncols() {
            if (cov[(i, j)] - cov[(j, i)]).abs() > 1e-9 * scale {
                return Err(TheoryError::InvalidParameter("covariance not symmetric".into()));
            }
        }
    }
    Ok(())
}

/// A single Gaussian N(mean, cov).
#[derive(Clone, Debug)]
pub struct GaussianSpec {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

impl GaussianSpec {
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self, TheoryError> {
        check_symmetric(&cov)?;
        if cov.nrows() != mean.len() {
            return Err(TheoryError::DimensionMismatch { expected: mean.len(), found: cov.nrows() });
        }
        Ok(GaussianSpec { mean, cov })
    }
}

/// Equal-prior two-class Gaussian with a shared covariance.
#[derive(Clone, Debug)]
pub struct BinaryGaussianSpec {
    pub mean0: DVector<f64>,
    pub mean1: DVector<f64>,
    pub cov: DMatrix<f64>,
}

impl BinaryGaussianSpec {
    pub fn new(
        mean0: DVector<f64>,
        mean1: DVector<f64>,
        cov: DMatrix<f64>,
    ) -> Result<Self, TheoryError> {
        if mean0.len() != mean1.len() {
            return Err(TheoryError::DimensionMismatch {
                expected: mean0.len(),
                found: mean1.len(),
            });
        }
        check_symmetric(&cov)?;
        if cov.nrows() != mean0.len() {
            return Err(TheoryError::DimensionMismatch {
                expected: mean0.len(),
                found: cov.nrows(),
            });
        }
        Ok(BinaryGaussianSpec { mean0, mean1, cov })
    }

    pub fn dim(&self) -> usize {
        self.mean0.len()
    }

    fn cholesky(&self) -> Result<nalgebra::Cholesky<f64, nalgebra::Dyn>, TheoryError> {
        nalgebra::Cholesky::new(self.cov.clone()).ok_or(TheoryError::NotSpd)
    }
}

/// Separating hyperplane through `anchor` with the given normal.
#[derive(Clone, Debug)]
pub struct Hyperplane {
    pub normal: DVector<f64>,
    pub anchor: DVector<f64>,
}

/// One scalar feature modeled as an equal-weight two-Gaussian mixture.
#[derive(Clone, Copy, Debug)]
pub struct ScalarMixtureSpec {
    pub mu0: f64,
    pub mu1: f64,
    pub sigma: f64,
}

impl ScalarMixtureSpec {
    pub fn new(mu0: f64, mu1: f64, sigma: f64) -> Result<Self, TheoryError> {
        if !(sigma > 0.0) {
            return Err(TheoryError::InvalidParameter(format!("sigma {sigma} must be > 0")));
        }
        Ok(ScalarMixtureSpec { mu0, mu1, sigma })
    }
}

/// Parameters of the standardized mixture: components at ±delta_hat with
/// std sigma_hat, and the separation ratio r.
#[derive(Clone, Copy, Debug)]
pub struct NormalizedMixture {
    pub delta_hat: f64,
    pub sigma_hat: f64,
    pub r: f64,
}

/// Normal w = cov^-1 (mean0 - mean1) anchored at the midpoint of the means.
///
/// Decision rule: label 0 iff w . (v - anchor) > 0; ties go to label 1.
pub fn bayes_hyperplane(spec: &BinaryGaussianSpec) -> Result<Hyperplane, TheoryError> {
    let diff = &spec.mean0 - &spec.mean1;
    if diff.iter().all(|&v| v == 0.0) {
        return Err(TheoryError::DegenerateSpec("mean0 == mean1 gives a zero normal".into()));
    }
    let chol = spec.cholesky()?;
    let normal = chol.solve(&diff);
    let anchor = (&spec.mean0 + &spec.mean1) / 2.0;
    Ok(Hyperplane { normal, anchor })
}

/// 0 on the positive side of the plane, 1 otherwise (ties to 1).
pub fn bayes_decision(v: &DVector<f64>, plane: &Hyperplane) -> Result<u8, TheoryError> {
    if v.len() != plane.normal.len() {
        return Err(TheoryError::DimensionMismatch {
            expected: plane.normal.len(),
            found: v.len(),
        });
    }
    let s = plane.normal.dot(&(v - &plane.anchor));
    Ok(if s > 0.0 { 0 } else { 1 })
}

/// Displacement of the Bayes boundary caused by making the injected block
/// predictive, evaluated at `eval_point` in the injected subspace:
/// d = |w_s . (eval - mid_s)| / ||w_c||.
pub fn hyperplane_shift_distance(
    clean: &BinaryGaussianSpec,
    poison: &BinaryGaussianSpec,
    eval_point: &DVector<f64>,
) -> Result<f64, TheoryError> {
    if eval_point.len() != poison.dim() {
        return Err(TheoryError::DimensionMismatch {
            expected: poison.dim(),
            found: eval_point.len(),
        });
    }
    let w_c = {
        let diff = &clean.mean0 - &clean.mean1;
        if diff.iter().all(|&v| v == 0.0) {
            return Err(TheoryError::UndefinedDistance);
        }
        clean.cholesky()?.solve(&diff)
    };
    let w_c_norm = w_c.norm();
    if w_c_norm == 0.0 {
        return Err(TheoryError::UndefinedDistance);
    }
    let diff_s = &poison.mean0 - &poison.mean1;
    let w_s = if diff_s.iter().all(|&v| v == 0.0) {
        DVector::zeros(poison.dim())
    } else {
        poison.cholesky()?.solve(&diff_s)
    };
    let mid_s = (&poison.mean0 + &poison.mean1) / 2.0;
    Ok(w_s.dot(&(eval_point - mid_s)).abs() / w_c_norm)
}

/// Standardize the mixture to zero mean, unit variance.
pub fn normalize_mixture(spec: &ScalarMixtureSpec) -> NormalizedMixture {
    let delta = (spec.mu0 - spec.mu1).abs() / 2.0;
    let scale = (spec.sigma * spec.sigma + delta * delta).sqrt();
    NormalizedMixture {
        delta_hat: delta / scale,
        sigma_hat: spec.sigma / scale,
        r: delta / spec.sigma,
    }
}

/// KLD between the standardized mixture with ratio r and N(0, 1), in nats.
pub fn mixture_kld_to_standard_normal(
    r: f64,
    quadrature: &QuadratureConfig,
) -> Result<f64, TheoryError> {
    if r < 0.0 {
        return Err(TheoryError::InvalidParameter(format!("r {r} must be >= 0")));
    }
    let scale = (1.0 + r * r).sqrt();
    let delta_hat = r / scale;
    let sigma_hat = 1.0 / scale;
    let ln_sigma = sigma_hat.ln();
    let half_ln_2pi = 0.5 * (2.0 * std::f64::consts::PI).ln();
    let integrand = move |v: f64| {
        let za = (v + delta_hat) / sigma_hat;
        let zb = (v - delta_hat) / sigma_hat;
        let la = -0.5 * za * za - ln_sigma - half_ln_2pi;
        let lb = -0.5 * zb * zb - ln_sigma - half_ln_2pi;
        let lmax = la.max(lb);
        if lmax < -700.0 {
            return 0.0;
        }
        let ln_mix = lmax + (0.5 * ((la - lmax).exp() + (lb - lmax).exp())).ln();
        let ln_phi = -0.5 * v * v - half_ln_2pi;
        ln_mix.exp() * (ln_mix - ln_phi)
    };
    let kld = quad::adaptive_gauss_kronrod(&integrand, quadrature)
        .ok_or(TheoryError::QuadratureNonconvergence)?;
    // the integral is nonnegative analytically; clip quadrature dust
    Ok(kld.max(0.0))
}

/// (lo, hi) = (ln(1+r^2)/2 - ln 2, ln(1+r^2)/2).
pub fn kld_bounds(r: f64) -> (f64, f64) {
    let hi = 0.5 * (1.0 + r * r).ln();
    (hi - std::f64::consts::LN_2, hi)
}

/// H(v|y) = (D/2)(1 + ln 2pi) + ln|cov| / 2.
pub fn mixture_conditional_entropy(spec: &BinaryGaussianSpec) -> Result<f64, TheoryError> {
    let chol = spec.cholesky()?;
    let ln_det: f64 = chol.l().diagonal().iter().map(|&d| d.ln()).sum::<f64>() * 2.0;
    let d = spec.dim() as f64;
    Ok(0.5 * d * (1.0 + (2.0 * std::f64::consts::PI).ln()) + 0.5 * ln_det)
}

/// Misclassification rate of the Bayes rule over n samples per class.
pub fn monte_carlo_bayes_error(
    spec: &BinaryGaussianSpec,
    n: usize,
    seed: u64,
) -> Result<f64, TheoryError> {
    if n == 0 {
        return Err(TheoryError::InvalidParameter("n must be positive".into()));
    }
    let plane = bayes_hyperplane(spec)?;
    let chol = spec.cholesky()?;
    let l = chol.l();
    let d = spec.dim();
    let mut rng = Rng::new(seed);
    let mut errors = 0usize;
    let mut xi = DVector::zeros(d);
    for class in 0..2u8 {
        let mean = if class == 0 { &spec.mean0 } else { &spec.mean1 };
        for _ in 0..n {
            for i in 0..d {
                xi[i] = rng.normal();
            }
            let v = mean + &l * &xi;
            if bayes_decision(&v, &plane)? != class {
                errors += 1;
            }
        }
    }
    Ok(errors as f64 / (2 * n) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{dmatrix, dvector};

    fn spec_2d() -> BinaryGaussianSpec {
        BinaryGaussianSpec::new(
            dvector![1.0, 0.0],
            dvector![-1.0, 0.0],
            DMatrix::identity(2, 2),
        )
        .unwrap()
    }

    #[test]
    fn identity_cov_hyperplane() {
        let plane = bayes_hyperplane(&spec_2d()).unwrap();
        assert_eq!(plane.normal, dvector![2.0, 0.0]);
        assert_eq!(plane.anchor, dvector![0.0, 0.0]);
    }

    #[test]
    fn scalar_hyperplane() {
        let spec =
            BinaryGaussianSpec::new(dvector![2.0], dvector![0.0], dmatrix![4.0]).unwrap();
        let plane = bayes_hyperplane(&spec).unwrap();
        assert!((plane.normal[0] - 0.5).abs() < 1e-15);
        assert!((plane.anchor[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn degenerate_means_error() {
        let spec = BinaryGaussianSpec::new(
            dvector![1.0, 2.0],
            dvector![1.0, 2.0],
            DMatrix::identity(2, 2),
        )
        .unwrap();
        assert!(matches!(bayes_hyperplane(&spec), Err(TheoryError::DegenerateSpec(_))));
    }

    #[test]
    fn non_spd_cov_error() {
        let spec = BinaryGaussianSpec::new(
            dvector![1.0, 0.0],
            dvector![0.0, 0.0],
            dmatrix![1.0, 2.0; 2.0, 1.0], // symmetric, indefinite
        )
        .unwrap();
        assert!(matches!(bayes_hyperplane(&spec), Err(TheoryError::NotSpd)));
    }

    #[test]
    fn decision_tie_break_and_sides() {
        let plane = bayes_hyperplane(&spec_2d()).unwrap();
        assert_eq!(bayes_decision(&plane.anchor.clone(), &plane).unwrap(), 1);
        let v = &plane.anchor + &plane.normal;
        assert_eq!(bayes_decision(&v, &plane).unwrap(), 0);
        let bad = dvector![0.0, 0.0, 0.0];
        assert!(matches!(
            bayes_decision(&bad, &plane),
            Err(TheoryError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn shift_trivial_cases() {
        let clean = spec_2d();
        // equal poison means -> w_s = 0 -> d = 0
        let poison = BinaryGaussianSpec::new(
            dvector![0.3, 0.3],
            dvector![0.3, 0.3],
            DMatrix::identity(2, 2),
        )
        .unwrap();
        let d = hyperplane_shift_distance(&clean, &poison, &dvector![5.0, -2.0]).unwrap();
        assert_eq!(d, 0.0);

        // midpoint eval -> d = 0
        let poison = BinaryGaussianSpec::new(
            dvector![1.0, 0.0],
            dvector![0.0, 1.0],
            DMatrix::identity(2, 2),
        )
        .unwrap();
        let mid = dvector![0.5, 0.5];
        let d = hyperplane_shift_distance(&clean, &poison, &mid).unwrap();
        assert!(d.abs() < 1e-15);

        // degenerate clean spec -> undefined
        let degenerate = BinaryGaussianSpec::new(
            dvector![0.0, 0.0],
            dvector![0.0, 0.0],
            DMatrix::identity(2, 2),
        )
        .unwrap();
        assert!(matches!(
            hyperplane_shift_distance(&degenerate, &poison, &mid),
            Err(TheoryError::UndefinedDistance)
        ));
    }

    #[test]
    fn normalize_degenerate_and_symmetric() {
        let nm = normalize_mixture(&ScalarMixtureSpec::new(0.7, 0.7, 2.0).unwrap());
        assert_eq!(nm.delta_hat, 0.0);
        assert_eq!(nm.sigma_hat, 1.0);
        assert_eq!(nm.r, 0.0);

        let nm = normalize_mixture(&ScalarMixtureSpec::new(1.0, -1.0, 1.0).unwrap());
        let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
        assert!((nm.delta_hat - inv_sqrt2).abs() < 1e-15);
        assert!((nm.sigma_hat - inv_sqrt2).abs() < 1e-15);
        assert!((nm.r - 1.0).abs() < 1e-15);
    }

    #[test]
    fn normalization_identity_holds() {
        let mut rng = Rng::new(2);
        for _ in 0..200 {
            let spec = ScalarMixtureSpec::new(
                rng.range(-5.0, 5.0),
                rng.range(-5.0, 5.0),
                rng.range(0.05, 4.0),
            )
            .unwrap();
            let nm = normalize_mixture(&spec);
            let s = nm.delta_hat * nm.delta_hat + nm.sigma_hat * nm.sigma_hat;
            assert!((s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn kld_zero_at_r_zero() {
        let q = QuadratureConfig::default();
        let v = mixture_kld_to_standard_normal(0.0, &q).unwrap();
        assert!(v.abs() <= 1e-9, "got {v}");
    }

    #[test]
    fn kld_r1_inside_paper_interval() {
        let q = QuadratureConfig::default();
        let v = mixture_kld_to_standard_normal(1.0, &q).unwrap();
        let (lo, hi) = kld_bounds(1.0);
        assert!(v > lo && v < hi, "{lo} < {v} < {hi}");
    }

    #[test]
    fn kld_strictly_increasing() {
        let q = QuadratureConfig::default();
        let mut prev = -1.0;
        for r in [0.25, 0.5, 1.0, 2.0, 4.0, 8.0] {
            let v = mixture_kld_to_standard_normal(r, &q).unwrap();
            assert!(v > prev, "S({r}) = {v} <= {prev}");
            prev = v;
        }
    }

    #[test]
    fn bounds_formulas() {
        let (lo, hi) = kld_bounds(0.0);
        assert!((lo + std::f64::consts::LN_2).abs() < 1e-15);
        assert_eq!(hi, 0.0);
        for r in [0.1, 0.7, 3.0, 12.0] {
            let (lo, hi) = kld_bounds(r);
            assert!((hi - lo - std::f64::consts::LN_2).abs() < 1e-15);
            assert!((hi - 0.5 * (1.0 + r * r).ln()).abs() < 1e-15);
        }
    }

    #[test]
    fn entropy_closed_forms() {
        let spec =
            BinaryGaussianSpec::new(dvector![0.0], dvector![1.0], dmatrix![1.0]).unwrap();
        let h = mixture_conditional_entropy(&spec).unwrap();
        let want = 0.5 * (1.0 + (2.0 * std::f64::consts::PI).ln());
        assert!((h - want).abs() < 1e-12);

        let (s1, s2) = (0.7, 2.3);
        let spec = BinaryGaussianSpec::new(
            dvector![0.0, 0.0],
            dvector![1.0, 1.0],
            dmatrix![s1 * s1, 0.0; 0.0, s2 * s2],
        )
        .unwrap();
        let h = mixture_conditional_entropy(&spec).unwrap();
        let want = (1.0 + (2.0 * std::f64::consts::PI).ln()) + s1.ln() + s2.ln();
        assert!((h - want).abs() < 1e-12);
    }

    #[test]
    fn entropy_additivity_exact() {
        let sigmas = [0.4, 1.7, 3.1];
        let spec = BinaryGaussianSpec::new(
            dvector![0.0, 0.0, 0.0],
            dvector![1.0, -1.0, 0.5],
            DMatrix::from_diagonal(&dvector![
                sigmas[0] * sigmas[0],
                sigmas[1] * sigmas[1],
                sigmas[2] * sigmas[2]
            ]),
        )
        .unwrap();
        let joint = mixture_conditional_entropy(&spec).unwrap();
        let mut sum = 0.0;
        for (i, &s) in sigmas.iter().enumerate() {
            let spec1 = BinaryGaussianSpec::new(
                dvector![0.0],
                dvector![i as f64],
                dmatrix![s * s],
            )
            .unwrap();
            sum += mixture_conditional_entropy(&spec1).unwrap();
        }
        assert!((joint - sum).abs() < 1e-12);
    }

    #[test]
    fn mc_bayes_error_deterministic_and_separated() {
        // Mahalanobis distance 10 -> near-perfect separation
        let spec = BinaryGaussianSpec::new(
            dvector![5.0, 0.0],
            dvector![-5.0, 0.0],
            DMatrix::identity(2, 2),
        )
        .unwrap();
        let a = monte_carlo_bayes_error(&spec, 20_000, 4).unwrap();
        let b = monte_carlo_bayes_error(&spec, 20_000, 4).unwrap();
        assert_eq!(a, b);
        assert!(a < 1e-4, "rate {a}");
    }

    #[test]
    fn mc_bayes_error_matches_gaussian_tail() {
        let spec =
            BinaryGaussianSpec::new(dvector![1.0], dvector![-1.0], dmatrix![1.0]).unwrap();
        let rate = monte_carlo_bayes_error(&spec, 1_000_000, 11).unwrap();
        let phi_minus_1 = 0.158_655_253_931_457_07; // standard normal CDF at -1
        assert!((rate - phi_minus_1).abs() < 0.005, "rate {rate}");
    }
}
