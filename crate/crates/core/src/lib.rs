//! Purification of unlearnable examples with rate-constrained disentangling VAEs.
//!
//! The crate is organized around the stages of a poisoning/defense study at
//! desk scale:
//!
//! - [`theory`] — closed-form results for Bayes classification of Gaussian
//!   mixtures, hyperplane shift under poisoning, and KL-divergence bounds,
//!   each checked against independent numerical oracles.
//! - [`data`] — synthetic labeled image sets, a bit-exact on-disk container,
//!   and image-quality metrics.
//! - [`attacks`] — availability-poisoning generators (error-minimizing noise,
//!   class-wise smooth patches, one-pixel shortcuts) and norm projections.
//! - [`nn`] — a small CPU tensor/layer/optimizer stack used by everything
//!   that trains.
//! - [`dvae`] — the disentangling VAE: encoder, reconstruction decoder,
//!   auxiliary perturbation decoder with class-wise embeddings, and the
//!   rate-constrained losses.
//! - [`eval`] — victim-classifier training and the evaluation experiments.
//! - [`pipeline`] — the two-stage purification, KLD-target selection,
//!   detection, and amplification routines.
//! - [`config`] / [`report`] — flat key/value run configuration and
//!   structured-text reports.

pub mod attacks;
pub mod config;
pub mod data;
pub mod dvae;
pub mod eval;
pub mod nn;
pub mod pipeline;
pub mod report;
pub mod theory;

use std::sync::Once;

static THREAD_INIT: Once = Once::new();

/// Cap worker parallelism. `0` keeps the automatic per-machine default.
///
/// Honors the `UEPURIFY_THREADS` convention used by the CLI; callers that
/// never invoke this get rayon's default pool. Only the first call has an
/// effect.
pub fn init_threads(n: usize) {
    THREAD_INIT.call_once(|| {
        if n > 0 {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    });
}

/// Read the `UEPURIFY_THREADS` environment variable (0 or unset = auto).
pub fn threads_from_env() -> usize {
    std::env::var("UEPURIFY_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .unwrap_or(0)
}
