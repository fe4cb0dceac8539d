//! Victim-classifier training and the evaluation experiments built on it.

use crate::data::{psnr, DataError, LabeledImageSet};
use crate::dvae::{self, DVAEConfig, DvaeError};
use crate::nn::{
    loss::{predictions, softmax_cross_entropy},
    optim::{cosine_lr, Sgd},
    BatchNorm2d, Conv2d, GlobalAvgPool, Layer, Linear, Relu, Rng, Sequential, Tensor,
};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("empty evaluation set")]
    EmptySet,
    #[error("training diverged: non-finite loss at epoch {0}")]
    Divergence(usize),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Dvae(#[from] DvaeError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ClassifierArch {
    /// Residual conv net around 100k parameters; the only desk-scale arch.
    SmallResNet,
}

#[derive(Clone, Debug)]
pub struct ClassifierConfig {
    pub arch: ClassifierArch,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub cosine_schedule: bool,
    pub momentum: f64,
    pub seed: u64,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        ClassifierConfig {
            arch: ClassifierArch::SmallResNet,
            epochs: 10,
            batch_size: 128,
            learning_rate: 0.1,
            cosine_schedule: true,
            momentum: 0.9,
            seed: 0,
        }
    }
}

impl ClassifierConfig {
    pub fn validate(&self) -> Result<(), EvalError> {
        if self.epochs == 0 {
            return Err(EvalError::InvalidConfig("epochs must be >= 1".into()));
        }
        if self.batch_size == 0 {
            return Err(EvalError::InvalidConfig("batch_size must be >= 1".into()));
        }
        if !(self.learning_rate > 0.0) {
            return Err(EvalError::InvalidConfig("learning_rate must be > 0".into()));
        }
        Ok(())
    }
}

struct ResBlock<F: crate::nn::Scalar> {
    path: Sequential<F>,
    relu_out: Relu<F>,
}

impl<F: crate::nn::Scalar> ResBlock<F> {
    fn new(c: usize, rng: &mut Rng) -> Self {
        ResBlock {
            path: Sequential::new(vec![
                Box::new(Conv2d::new(c, c, 3, 1, 1, rng)),
                Box::new(BatchNorm2d::new(c)),
                Box::new(Relu::new()),
                Box::new(Conv2d::new(c, c, 3, 1, 1, rng)),
                Box::new(BatchNorm2d::new(c)),
            ]),
            relu_out: Relu::new(),
        }
    }
}

impl<F: crate::nn::Scalar> Layer<F> for ResBlock<F> {
    fn forward(&mut self, x: &Tensor<F>, train: bool) -> Tensor<F> {
        let mut y = self.path.forward(x, train);
        for (a, &b) in y.data.iter_mut().zip(&x.data) {
            *a += b;
        }
        self.relu_out.forward(&y, train)
    }

    fn backward(&mut self, dy: &Tensor<F>) -> Tensor<F> {
        let d = self.relu_out.backward(dy);
        let mut dx = self.path.backward(&d);
        for (a, &b) in dx.data.iter_mut().zip(&d.data) {
            *a += b;
        }
        dx
    }

    fn visit_params(&mut self, f: &mut dyn FnMut(&mut crate::nn::Param<F>)) {
        self.path.visit_params(f);
    }

    fn visit_buffers(&mut self, f: &mut dyn FnMut(&mut Vec<F>)) {
        self.path.visit_buffers(f);
    }
}

fn build_small_resnet(channels: usize, classes: usize, rng: &mut Rng) -> Sequential<f32> {
    // 16x16 -> 8x8 -> 4x4 -> 2x2; ~98k parameters
    Sequential::new(vec![
        Box::new(Conv2d::new(channels, 12, 3, 1, 1, rng)),
        Box::new(BatchNorm2d::new(12)),
        Box::new(Relu::new()),
        Box::new(Conv2d::new(12, 24, 3, 2, 1, rng)),
        Box::new(BatchNorm2d::new(24)),
        Box::new(Relu::new()),
        Box::new(Conv2d::new(24, 48, 3, 2, 1, rng)),
        Box::new(BatchNorm2d::new(48)),
        Box::new(Relu::new()),
        Box::new(ResBlock::new(48, rng)),
        Box::new(Conv2d::new(48, 96, 3, 2, 1, rng)),
        Box::new(BatchNorm2d::new(96)),
        Box::new(Relu::new()),
        Box::new(GlobalAvgPool::new()),
        Box::new(Linear::new(96, classes, rng)),
    ])
}

/// Bare victim network for throughput probes.
#[doc(hidden)]
pub fn bench_net(channels: usize, classes: usize, rng: &mut Rng) -> Sequential<f32> {
    build_small_resnet(channels, classes, rng)
}

/// A trained victim classifier.
pub struct ClassifierState {
    net: Sequential<f32>,
    pub class_count: usize,
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub config: ClassifierConfig,
}

/// Random horizontal flip plus a circular +-2 px shift, per sample. The
/// wrap keeps every pixel in frame, so shifts never erase image content.
fn augment_batch(
    set: &LabeledImageSet,
    indices: &[usize],
    rng: &mut Rng,
) -> (Tensor<f32>, Vec<u16>) {
    let (c, h, w) = (set.channels, set.height, set.width);
    let hw = h * w;
    let mut data = vec![0f32; indices.len() * c * hw];
    let mut labels = Vec::with_capacity(indices.len());
    for (bi, &i) in indices.iter().enumerate() {
        let src = set.image(i);
        let flip = rng.flip();
        let dy = rng.below(5) as isize - 2;
        let dx = rng.below(5) as isize - 2;
        let dst = &mut data[bi * c * hw..(bi + 1) * c * hw];
        for ci in 0..c {
            let sp = &src[ci * hw..(ci + 1) * hw];
            let dp = &mut dst[ci * hw..(ci + 1) * hw];
            for y in 0..h as isize {
                let sy = (y - dy).rem_euclid(h as isize) as usize;
                for x in 0..w as isize {
                    let mut sx = (x - dx).rem_euclid(w as isize);
                    if flip {
                        sx = w as isize - 1 - sx;
                    }
                    dp[y as usize * w + x as usize] = sp[sy * w + sx as usize];
                }
            }
        }
        labels.push(set.labels[i]);
    }
    (
        Tensor::from_vec([indices.len(), c, h, w], data),
        labels,
    )
}

/// Momentum-SGD training with a cosine-annealed rate and light augmentation
/// (random horizontal flip + 2 px shift). Returns the final-epoch weights.
pub fn train_classifier(
    set: &LabeledImageSet,
    cfg: &ClassifierConfig,
) -> Result<ClassifierState, EvalError> {
    cfg.validate()?;
    set.validate()?;
    let mut rng = Rng::new(cfg.seed ^ 0xC1A5_51F1_ED00_0001);
    let mut net = build_small_resnet(set.channels, set.class_count, &mut rng);
    let mut sgd = Sgd::new(cfg.learning_rate, cfg.momentum);
    let mut order: Vec<usize> = (0..set.len()).collect();
    for epoch in 0..cfg.epochs {
        sgd.lr = if cfg.cosine_schedule {
            cosine_lr(cfg.learning_rate, epoch, cfg.epochs)
        } else {
            cfg.learning_rate
        };
        rng.shuffle(&mut order);
        for chunk in order.chunks(cfg.batch_size) {
            let (x, labels) = augment_batch(set, chunk, &mut rng);
            let logits = net.forward(&x, true);
            let (loss, dlogits) = softmax_cross_entropy(&logits, &labels);
            if !loss.is_finite() {
                return Err(EvalError::Divergence(epoch));
            }
            net.zero_grad();
            net.backward(&dlogits);
            sgd.step(&mut net);
        }
    }
    Ok(ClassifierState {
        net,
        class_count: set.class_count,
        channels: set.channels,
        height: set.height,
        width: set.width,
        config: cfg.clone(),
    })
}

impl ClassifierState {
    fn check_set(&self, set: &LabeledImageSet) -> Result<(), EvalError> {
        if set.is_empty() {
            return Err(EvalError::EmptySet);
        }
        if set.channels != self.channels || set.height != self.height || set.width != self.width {
            return Err(EvalError::ShapeMismatch("set geometry vs classifier".into()));
        }
        Ok(())
    }

    /// Raw logits for a batch tensor (evaluation mode).
    pub fn logits(&mut self, x: &Tensor<f32>) -> Tensor<f32> {
        self.net.forward(x, false)
    }

    /// Training-mode forward/backward returning the input gradient; used by
    /// gradient-based attack generators. Parameter gradients are discarded.
    pub fn input_gradient(&mut self, x: &Tensor<f32>, labels: &[u16]) -> (f32, Tensor<f32>) {
        let logits = self.net.forward(x, false);
        let (loss, dlogits) = softmax_cross_entropy(&logits, labels);
        self.net.zero_grad();
        let dx = self.net.backward(&dlogits);
        self.net.zero_grad();
        (loss, dx)
    }

    /// One SGD epoch over the set (used by alternating attack optimizers).
    pub fn train_epoch(
        &mut self,
        set: &LabeledImageSet,
        sgd: &mut Sgd<f32>,
        rng: &mut Rng,
    ) -> Result<f32, EvalError> {
        self.check_set(set)?;
        let mut order: Vec<usize> = (0..set.len()).collect();
        rng.shuffle(&mut order);
        let mut last = 0f32;
        for chunk in order.chunks(self.config.batch_size) {
            let (x, labels) = augment_batch(set, chunk, rng);
            let logits = self.net.forward(&x, true);
            let (loss, dlogits) = softmax_cross_entropy(&logits, &labels);
            if !loss.is_finite() {
                return Err(EvalError::Divergence(self.config.epochs));
            }
            self.net.zero_grad();
            self.net.backward(&dlogits);
            sgd.step(&mut self.net);
            last = loss;
        }
        Ok(last)
    }

    /// Fresh untrained classifier with this state's geometry (for attacks).
    pub fn fresh_like(set: &LabeledImageSet, cfg: &ClassifierConfig) -> ClassifierState {
        let mut rng = Rng::new(cfg.seed ^ 0xC1A5_51F1_ED00_0001);
        ClassifierState {
            net: build_small_resnet(set.channels, set.class_count, &mut rng),
            class_count: set.class_count,
            channels: set.channels,
            height: set.height,
            width: set.width,
            config: cfg.clone(),
        }
    }

    /// Per-sample booleans: does the model predict the sample's own label?
    pub fn correct_flags(&mut self, set: &LabeledImageSet) -> Result<Vec<bool>, EvalError> {
        self.check_set(set)?;
        let mut flags = Vec::with_capacity(set.len());
        let all: Vec<usize> = (0..set.len()).collect();
        for chunk in all.chunks(512) {
            let (x, labels) = set.batch_tensor(chunk);
            let logits = self.net.forward(&x, false);
            let preds = predictions(&logits);
            flags.extend(preds.iter().zip(&labels).map(|(p, l)| p == l));
        }
        Ok(flags)
    }
}

/// Top-1 accuracy, no augmentation.
pub fn evaluate(model: &mut ClassifierState, set: &LabeledImageSet) -> Result<f64, EvalError> {
    let flags = model.correct_flags(set)?;
    Ok(flags.iter().filter(|&&b| b).count() as f64 / flags.len() as f64)
}

/// The T/D/P accuracy triple of the disentanglement validation.
#[derive(Clone, Copy, Debug)]
pub struct EvalReport {
    pub accuracy_on_clean_train: f64,
    pub accuracy_on_clean_test: f64,
    pub accuracy_on_unlearnable: f64,
}

/// Train on P-hat = clamp(T + p-hat) and evaluate on the clean train set,
/// the clean test set, and the original unlearnable set.
pub fn disentanglement_validation(
    t_clean: &LabeledImageSet,
    d_test: &LabeledImageSet,
    p_hat_deltas: &[f32],
    p_original: &LabeledImageSet,
    cfg: &ClassifierConfig,
) -> Result<EvalReport, EvalError> {
    if p_hat_deltas.len() != t_clean.images.len() {
        return Err(EvalError::ShapeMismatch("p_hat vs clean train".into()));
    }
    let mut p_hat_set = t_clean.clone();
    for (px, &d) in p_hat_set.images.iter_mut().zip(p_hat_deltas) {
        *px = (*px + d).clamp(0.0, 1.0);
    }
    let mut model = train_classifier(&p_hat_set, cfg)?;
    Ok(EvalReport {
        accuracy_on_clean_train: evaluate(&mut model, t_clean)?,
        accuracy_on_clean_test: evaluate(&mut model, d_test)?,
        accuracy_on_unlearnable: evaluate(&mut model, p_original)?,
    })
}

/// One point of the KLD-target sweep.
#[derive(Clone, Copy, Debug)]
pub struct SweepPoint {
    pub kld_target: f64,
    pub probe_psnr: f64,
    pub clean_test_accuracy: f64,
}

/// For each target: train a plain rate-constrained VAE (aux branch off),
/// purify by reconstruction only, train a victim, and record accuracy.
pub fn kld_sweep(
    p0: &LabeledImageSet,
    d_test: &LabeledImageSet,
    targets: &[f64],
    dvae_cfg: &DVAEConfig,
    clf_cfg: &ClassifierConfig,
) -> Result<Vec<SweepPoint>, EvalError> {
    if targets.len() < 3 {
        return Err(EvalError::InvalidConfig("sweep needs at least 3 targets".into()));
    }
    let mut points = Vec::with_capacity(targets.len());
    for &target in targets {
        let cfg = DVAEConfig { kld_target: target, aux_weight: 0.0, ..dvae_cfg.clone() };
        let (mut state, _) = dvae::train_dvae(p0, &cfg)?;
        let (recon, _) = dvae::infer_dvae(&mut state, p0)?;
        let probe = psnr(&p0.images, &recon.images)?;
        let mut model = train_classifier(&recon, clf_cfg)?;
        let acc = evaluate(&mut model, d_test)?;
        points.push(SweepPoint { kld_target: target, probe_psnr: probe, clean_test_accuracy: acc });
    }
    Ok(points)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_synthetic_dataset, SynthConfig};

    fn small_data() -> (LabeledImageSet, LabeledImageSet) {
        let cfg = SynthConfig {
            class_count: 4,
            train_per_class: 40,
            test_per_class: 20,
            seed: 2,
            ..Default::default()
        };
        generate_synthetic_dataset(&cfg).unwrap()
    }

    #[test]
    fn short_training_learns_something_and_is_deterministic() {
        let (train, test) = small_data();
        let cfg = ClassifierConfig { epochs: 4, seed: 1, ..Default::default() };
        let mut m1 = train_classifier(&train, &cfg).unwrap();
        let a1 = evaluate(&mut m1, &test).unwrap();
        let mut m2 = train_classifier(&train, &cfg).unwrap();
        let a2 = evaluate(&mut m2, &test).unwrap();
        assert_eq!(a1, a2, "same seed must reproduce accuracy exactly");
        assert!(a1 > 0.5, "4-class toy task should beat 0.5, got {a1}");
    }

    #[test]
    fn evaluation_is_order_invariant() {
        let (train, test) = small_data();
        let cfg = ClassifierConfig { epochs: 2, seed: 3, ..Default::default() };
        let mut model = train_classifier(&train, &cfg).unwrap();
        let a = evaluate(&mut model, &test).unwrap();
        // reversed order
        let idx: Vec<usize> = (0..test.len()).rev().collect();
        let reversed = test.gather(&idx);
        let b = evaluate(&mut model, &reversed).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn sweep_rejects_too_few_targets() {
        let (train, test) = small_data();
        let err = kld_sweep(
            &train,
            &test,
            &[1.0, 2.0],
            &DVAEConfig::default(),
            &ClassifierConfig::default(),
        );
        assert!(matches!(err, Err(EvalError::InvalidConfig(_))));
    }
}
