//! Dataset model: labeled image sets, perturbation sets, on-disk container,
//! and image-quality metrics.

mod container;
mod metrics;
mod synth;

pub use container::{read_container, write_container};
pub use metrics::{mse, psnr, PSNR_CAP_DB};
pub use synth::{generate_synthetic_dataset, SynthConfig};

use crate::nn::Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("bad magic bytes (not a UEPD container)")]
    BadMagic,
    #[error("unsupported container version {0}")]
    VersionMismatch(u32),
    #[error("truncated or length-inconsistent container file")]
    TruncatedFile,
    #[error("invariant violation: {0}")]
    InvariantViolation(String),
    #[error("fraction {0} outside (0, 1) or selects no samples")]
    InvalidFraction(f64),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// N x C x H x W images in [0, 1] with one label per sample.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledImageSet {
    pub images: Vec<f32>,
    pub labels: Vec<u16>,
    pub class_count: usize,
    pub channels: usize,
    pub height: usize,
    pub width: usize,
}

impl LabeledImageSet {
    pub fn new(
        images: Vec<f32>,
        labels: Vec<u16>,
        class_count: usize,
        channels: usize,
        height: usize,
        width: usize,
    ) -> Result<Self, DataError> {
        let set = LabeledImageSet { images, labels, class_count, channels, height, width };
        set.validate()?;
        Ok(set)
    }

    pub fn validate(&self) -> Result<(), DataError> {
        if self.len() == 0 {
            return Err(DataError::InvariantViolation("empty dataset (N >= 1)".into()));
        }
        if self.class_count < 2 {
            return Err(DataError::InvariantViolation("class_count must be >= 2".into()));
        }
        if self.images.len() != self.len() * self.sample_len() {
            return Err(DataError::ShapeMismatch(format!(
                "images length {} != N*C*H*W {}",
                self.images.len(),
                self.len() * self.sample_len()
            )));
        }
        if let Some(&l) = self.labels.iter().find(|&&l| l as usize >= self.class_count) {
            return Err(DataError::InvariantViolation(format!(
                "label {l} outside [0, {})",
                self.class_count
            )));
        }
        if self.images.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
            return Err(DataError::InvariantViolation("pixel outside [0, 1]".into()));
        }
        Ok(())
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    #[inline]
    pub fn sample_len(&self) -> usize {
        self.channels * self.height * self.width
    }

    #[inline]
    pub fn image(&self, i: usize) -> &[f32] {
        &self.images[i * self.sample_len()..(i + 1) * self.sample_len()]
    }

    #[inline]
    pub fn image_mut(&mut self, i: usize) -> &mut [f32] {
        let len = self.sample_len();
        &mut self.images[i * len..(i + 1) * len]
    }

    pub fn same_geometry(&self, other: &LabeledImageSet) -> bool {
        self.class_count == other.class_count
            && self.channels == other.channels
            && self.height == other.height
            && self.width == other.width
    }

    /// New set formed from the given sample indices, in order.
    pub fn gather(&self, indices: &[usize]) -> LabeledImageSet {
        let len = self.sample_len();
        let mut images = Vec::with_capacity(indices.len() * len);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            images.extend_from_slice(self.image(i));
            labels.push(self.labels[i]);
        }
        LabeledImageSet {
            images,
            labels,
            class_count: self.class_count,
            channels: self.channels,
            height: self.height,
            width: self.width,
        }
    }

    /// Append all samples of `other` (same geometry) after this set's.
    pub fn concat(&self, other: &LabeledImageSet) -> Result<LabeledImageSet, DataError> {
        if !self.same_geometry(other) {
            return Err(DataError::ShapeMismatch("concat geometry differs".into()));
        }
        let mut out = self.clone();
        out.images.extend_from_slice(&other.images);
        out.labels.extend_from_slice(&other.labels);
        Ok(out)
    }

    /// Per-class sample indices, each list in ascending order.
    pub fn indices_by_class(&self) -> Vec<Vec<usize>> {
        let mut by_class = vec![Vec::new(); self.class_count];
        for (i, &l) in self.labels.iter().enumerate() {
            by_class[l as usize].push(i);
        }
        by_class
    }

    /// Gather the given samples into an NCHW tensor (plus their labels).
    pub fn batch_tensor(&self, indices: &[usize]) -> (crate::nn::Tensor<f32>, Vec<u16>) {
        let len = self.sample_len();
        let mut data = Vec::with_capacity(indices.len() * len);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            data.extend_from_slice(self.image(i));
            labels.push(self.labels[i]);
        }
        (
            crate::nn::Tensor::from_vec(
                [indices.len(), self.channels, self.height, self.width],
                data,
            ),
            labels,
        )
    }
}

/// Perturbation feasible-region descriptor.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NormKind {
    LInf,
    L2,
    L0,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NormBound {
    pub kind: NormKind,
    /// Radius for linf/l2; pixel-position count for l0.
    pub epsilon: f32,
}

impl NormBound {
    pub fn linf(epsilon: f32) -> Self {
        NormBound { kind: NormKind::LInf, epsilon }
    }
    pub fn l2(epsilon: f32) -> Self {
        NormBound { kind: NormKind::L2, epsilon }
    }
    pub fn l0(pixels: u32) -> Self {
        NormBound { kind: NormKind::L0, epsilon: pixels as f32 }
    }
}

/// Additive perturbations, same layout as the image set they apply to.
#[derive(Clone, Debug, PartialEq)]
pub struct PerturbationSet {
    pub deltas: Vec<f32>,
    pub bound: NormBound,
    /// True when deltas (or, for one-pixel, position/target) are a pure
    /// function of the label.
    pub classwise: bool,
    pub channels: usize,
    pub height: usize,
    pub width: usize,
}

impl PerturbationSet {
    #[inline]
    pub fn sample_len(&self) -> usize {
        self.channels * self.height * self.width
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.deltas.len() / self.sample_len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.deltas.is_empty()
    }

    #[inline]
    pub fn delta(&self, i: usize) -> &[f32] {
        &self.deltas[i * self.sample_len()..(i + 1) * self.sample_len()]
    }

    /// Check the per-sample bound invariant for this set's declared kind.
    pub fn validate(&self) -> Result<(), DataError> {
        let hw = self.height * self.width;
        for i in 0..self.len() {
            let d = self.delta(i);
            match self.bound.kind {
                NormKind::LInf => {
                    let max = d.iter().fold(0f32, |m, &v| m.max(v.abs()));
                    if max > self.bound.epsilon * (1.0 + 1e-6) {
                        return Err(DataError::InvariantViolation(format!(
                            "sample {i}: linf {max} > {}",
                            self.bound.epsilon
                        )));
                    }
                }
                NormKind::L2 => {
                    let norm = d.iter().map(|&v| (v as f64).powi(2)).sum::<f64>().sqrt() as f32;
                    if norm > self.bound.epsilon * (1.0 + 1e-5) {
                        return Err(DataError::InvariantViolation(format!(
                            "sample {i}: l2 {norm} > {}",
                            self.bound.epsilon
                        )));
                    }
                }
                NormKind::L0 => {
                    let mut count = 0usize;
                    for pos in 0..hw {
                        if (0..self.channels).any(|c| d[c * hw + pos] != 0.0) {
                            count += 1;
                        }
                    }
                    if count > self.bound.epsilon as usize {
                        return Err(DataError::InvariantViolation(format!(
                            "sample {i}: l0 {count} > {}",
                            self.bound.epsilon
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Label-stratified disjoint split; deterministic per seed.
pub fn split_dataset(
    set: &LabeledImageSet,
    fraction: f64,
    seed: u64,
) -> Result<(LabeledImageSet, LabeledImageSet), DataError> {
    if !(0.0..1.0).contains(&fraction) || fraction == 0.0 {
        return Err(DataError::InvalidFraction(fraction));
    }
    if fraction * (set.len() as f64) < 1.0 {
        return Err(DataError::InvalidFraction(fraction));
    }
    let mut rng = Rng::new(seed);
    let mut a_idx = Vec::new();
    let mut b_idx = Vec::new();
    for mut class_indices in set.indices_by_class() {
        rng.shuffle(&mut class_indices);
        let take = ((fraction * class_indices.len() as f64).round() as usize).min(class_indices.len());
        a_idx.extend_from_slice(&class_indices[..take]);
        b_idx.extend_from_slice(&class_indices[take..]);
    }
    a_idx.sort_unstable();
    b_idx.sort_unstable();
    Ok((set.gather(&a_idx), set.gather(&b_idx)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_set() -> LabeledImageSet {
        let per_class = 10usize;
        let k = 4usize;
        let sample = 3 * 8 * 8;
        let n = per_class * k;
        let images = vec![0.5f32; n * sample];
        let labels: Vec<u16> = (0..n).map(|i| (i / per_class) as u16).collect();
        LabeledImageSet::new(images, labels, k, 3, 8, 8).unwrap()
    }

    #[test]
    fn split_is_stratified_and_deterministic() {
        let set = tiny_set();
        let (a, b) = split_dataset(&set, 0.5, 9).unwrap();
        assert_eq!(a.len(), 20);
        assert_eq!(b.len(), 20);
        for counts in [a.indices_by_class(), b.indices_by_class()] {
            for c in counts {
                assert_eq!(c.len(), 5);
            }
        }
        let (a2, _) = split_dataset(&set, 0.5, 9).unwrap();
        assert_eq!(a.labels, a2.labels);
        assert_eq!(a.images, a2.images);
    }

    #[test]
    fn split_small_fraction() {
        let set = tiny_set();
        let (a, _) = split_dataset(&set, 0.1, 3).unwrap();
        assert_eq!(a.len(), 4); // one per class
    }

    #[test]
    fn split_rejects_bad_fraction() {
        let set = tiny_set();
        assert!(matches!(split_dataset(&set, 0.0, 1), Err(DataError::InvalidFraction(_))));
        assert!(matches!(split_dataset(&set, 1.0, 1), Err(DataError::InvalidFraction(_))));
        assert!(matches!(split_dataset(&set, 0.001, 1), Err(DataError::InvalidFraction(_))));
    }

    #[test]
    fn rejects_out_of_range_pixels() {
        let mut set = tiny_set();
        set.images[3] = 1.5;
        assert!(matches!(set.validate(), Err(DataError::InvariantViolation(_))));
    }
}
