//! Availability-poisoning generators and norm projections.
//!
//! Three unlearnable-example families at desk scale: error-minimizing noise
//! (alternating surrogate/perturbation optimization under an l-inf bound),
//! class-wise smooth color patches (l2-bounded), and one-pixel shortcuts
//! (l0 = 1 pixel driven to channel extremes).

use crate::data::{DataError, LabeledImageSet, NormBound, NormKind, PerturbationSet};
use crate::eval::{ClassifierConfig, ClassifierState, EvalError};
use crate::nn::{optim::Sgd, Rng, Tensor};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AttackError {
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("patch size {patch} does not divide {h}x{w}")]
    PatchMismatch { patch: usize, h: usize, w: usize },
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// Which samples received perturbations.
#[derive(Clone, Debug)]
pub struct PoisonMask {
    pub flags: Vec<bool>,
    pub ratio: f64,
}

impl PoisonMask {
    pub fn density(&self) -> f64 {
        self.flags.iter().filter(|&&f| f).count() as f64 / self.flags.len() as f64
    }
}

/// Error-minimizing attack hyperparameters.
#[derive(Clone, Debug)]
pub struct EMAttackConfig {
    pub bound: NormBound,
    /// Outer alternation rounds.
    pub rounds: usize,
    pub surrogate_epochs: usize,
    /// Signed-gradient steps on the perturbations per round.
    pub perturb_steps: usize,
    pub step_size: f32,
    /// Stop once surrogate train accuracy on the poisoned data reaches this.
    pub stop_accuracy: f64,
    pub seed: u64,
}

impl Default for EMAttackConfig {
    fn default() -> Self {
        EMAttackConfig {
            bound: NormBound::linf(8.0 / 255.0),
            rounds: 10,
            surrogate_epochs: 2,
            perturb_steps: 5,
            step_size: 8.0 / 255.0 / 5.0,
            stop_accuracy: 0.99,
            seed: 0,
        }
    }
}

impl EMAttackConfig {
    pub fn validate(&self) -> Result<(), AttackError> {
        if self.rounds == 0 || self.perturb_steps == 0 {
            return Err(AttackError::InvalidConfig("rounds and perturb_steps must be >= 1".into()));
        }
        if !(self.step_size > 0.0) {
            return Err(AttackError::InvalidConfig("step_size must be > 0".into()));
        }
        if !(0.0 < self.stop_accuracy && self.stop_accuracy <= 1.0) {
            return Err(AttackError::InvalidConfig("stop_accuracy must be in (0, 1]".into()));
        }
        if self.bound.kind != NormKind::LInf {
            return Err(AttackError::InvalidConfig("error-minimizing noise uses the linf bound".into()));
        }
        Ok(())
    }
}

/// Project per-sample deltas onto the feasible region.
///
/// linf: clamp entries; l2: rescale offending samples onto the sphere;
/// l0: keep the epsilon strongest pixel positions (max |delta| across
/// channels, ties to the lowest linear index), zero the rest. Idempotent
/// bit-exactly: a second projection leaves the data unchanged.
pub fn project_to_bound(
    deltas: &mut [f32],
    bound: &NormBound,
    channels: usize,
    height: usize,
    width: usize,
) {
    let sample = channels * height * width;
    let hw = height * width;
    assert_eq!(deltas.len() % sample, 0, "deltas not a whole number of samples");
    for d in deltas.chunks_mut(sample) {
        match bound.kind {
            NormKind::LInf => {
                for v in d.iter_mut() {
                    *v = v.clamp(-bound.epsilon, bound.epsilon);
                }
            }
            NormKind::L2 => {
                let norm = d.iter().map(|&v| (v as f64).powi(2)).sum::<f64>().sqrt();
                // the slack keeps re-projection a no-op despite f32 rounding
                if norm > bound.epsilon as f64 * (1.0 + 1e-6) {
                    let scale = (bound.epsilon as f64 / norm) as f32;
                    for v in d.iter_mut() {
                        *v *= scale;
                    }
                }
            }
            NormKind::L0 => {
                let keep = bound.epsilon as usize;
                let mut mags: Vec<(f32, usize)> = (0..hw)
                    .map(|pos| {
                        let m = (0..channels).map(|c| d[c * hw + pos].abs()).fold(0f32, f32::max);
                        (m, pos)
                    })
                    .collect();
                mags.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
                let mut keep_mask = vec![false; hw];
                for &(m, pos) in mags.iter().take(keep) {
                    if m > 0.0 {
                        keep_mask[pos] = true;
                    }
                }
                for c in 0..channels {
                    for (pos, keep) in keep_mask.iter().enumerate() {
                        if !keep {
                            d[c * hw + pos] = 0.0;
                        }
                    }
                }
            }
        }
    }
}

/// Class-wise smooth color patches: a coarse uniform[-1,1] grid per class,
/// nearest-neighbor upsampled and rescaled to an exact l2 norm.
pub fn gen_classwise_smooth(
    set: &LabeledImageSet,
    epsilon_l2: f32,
    patch: usize,
    seed: u64,
) -> Result<PerturbationSet, AttackError> {
    let (c, h, w) = (set.channels, set.height, set.width);
    if patch == 0 || h % patch != 0 || w % patch != 0 {
        return Err(AttackError::PatchMismatch { patch, h, w });
    }
    if !(epsilon_l2 > 0.0) {
        return Err(AttackError::InvalidConfig("epsilon_l2 must be > 0".into()));
    }
    let (gh, gw) = (h / patch, w / patch);
    let hw = h * w;
    let mut rng = Rng::new(seed);
    let mut class_patterns: Vec<Vec<f32>> = Vec::with_capacity(set.class_count);
    for _ in 0..set.class_count {
        let grid: Vec<f64> = (0..c * gh * gw).map(|_| rng.range(-1.0, 1.0)).collect();
        let mut pattern = vec![0f32; c * hw];
        for ci in 0..c {
            for y in 0..h {
                for x in 0..w {
                    pattern[ci * hw + y * w + x] =
                        grid[ci * gh * gw + (y / patch) * gw + (x / patch)] as f32;
                }
            }
        }
        let norm = pattern.iter().map(|&v| (v as f64).powi(2)).sum::<f64>().sqrt();
        let scale = (epsilon_l2 as f64 / norm) as f32;
        for v in pattern.iter_mut() {
            *v *= scale;
        }
        class_patterns.push(pattern);
    }
    let mut deltas = vec![0f32; set.images.len()];
    for (i, &y) in set.labels.iter().enumerate() {
        deltas[i * c * hw..(i + 1) * c * hw].copy_from_slice(&class_patterns[y as usize]);
    }
    Ok(PerturbationSet {
        deltas,
        bound: NormBound::l2(epsilon_l2),
        classwise: true,
        channels: c,
        height: h,
        width: w,
    })
}

/// One-pixel shortcut: each class picks one position and per-channel targets
/// in {0, 1}; the delta drives that pixel from its current value to the
/// target, so positions/targets are class-wise while values are per sample.
pub fn gen_one_pixel(set: &LabeledImageSet, seed: u64) -> PerturbationSet {
    let (c, h, w) = (set.channels, set.height, set.width);
    let hw = h * w;
    let mut rng = Rng::new(seed);
    let placements: Vec<(usize, Vec<f32>)> = (0..set.class_count)
        .map(|_| {
            let pos = rng.below(hw);
            let targets: Vec<f32> =
                (0..c).map(|_| if rng.flip() { 1.0 } else { 0.0 }).collect();
            (pos, targets)
        })
        .collect();
    let mut deltas = vec![0f32; set.images.len()];
    for (i, &y) in set.labels.iter().enumerate() {
        let (pos, targets) = &placements[y as usize];
        let img = set.image(i);
        let d = &mut deltas[i * c * hw..(i + 1) * c * hw];
        for ci in 0..c {
            d[ci * hw + pos] = targets[ci] - img[ci * hw + pos];
        }
    }
    PerturbationSet {
        deltas,
        bound: NormBound::l0(1),
        classwise: true,
        channels: c,
        height: h,
        width: w,
    }
}

/// Convergence metadata for the error-minimizing generator.
#[derive(Clone, Copy, Debug)]
pub struct EMReport {
    pub converged: bool,
    pub rounds_used: usize,
    pub surrogate_accuracy: f64,
}

fn poisoned_clone(set: &LabeledImageSet, deltas: &[f32]) -> LabeledImageSet {
    let mut poisoned = set.clone();
    for (px, &d) in poisoned.images.iter_mut().zip(deltas) {
        *px = (*px + d).clamp(0.0, 1.0);
    }
    poisoned
}

/// Error-minimizing noise via alternating optimization: train the surrogate
/// on the current poisoned data, then take signed-gradient steps on the
/// perturbations that minimize the surrogate's loss, projecting to the
/// l-inf bound after each step.
pub fn gen_error_minimizing(
    set: &LabeledImageSet,
    cfg: &EMAttackConfig,
) -> Result<(PerturbationSet, EMReport), AttackError> {
    cfg.validate()?;
    let (c, h, w) = (set.channels, set.height, set.width);
    let sample = c * h * w;
    let mut deltas = vec![0f32; set.images.len()];
    let clf_cfg = ClassifierConfig { seed: cfg.seed, ..Default::default() };
    let mut surrogate = ClassifierState::fresh_like(set, &clf_cfg);
    let mut sgd = Sgd::new(clf_cfg.learning_rate, clf_cfg.momentum);
    let mut rng = Rng::new(cfg.seed ^ 0xE31A_77AC_0000_0001);
    let mut report = EMReport { converged: false, rounds_used: 0, surrogate_accuracy: 0.0 };

    for round in 0..cfg.rounds {
        report.rounds_used = round + 1;
        let poisoned = poisoned_clone(set, &deltas);
        for _ in 0..cfg.surrogate_epochs {
            surrogate.train_epoch(&poisoned, &mut sgd, &mut rng)?;
        }
        let flags = surrogate.correct_flags(&poisoned)?;
        report.surrogate_accuracy =
            flags.iter().filter(|&&f| f).count() as f64 / flags.len() as f64;
        if report.surrogate_accuracy >= cfg.stop_accuracy {
            report.converged = true;
            break;
        }

        for _ in 0..cfg.perturb_steps {
            let all: Vec<usize> = (0..set.len()).collect();
            for chunk in all.chunks(256) {
                let mut data = Vec::with_capacity(chunk.len() * sample);
                let mut labels = Vec::with_capacity(chunk.len());
                for &i in chunk {
                    let img = set.image(i);
                    let d = &deltas[i * sample..(i + 1) * sample];
                    data.extend(img.iter().zip(d).map(|(&x, &dx)| x + dx));
                    labels.push(set.labels[i]);
                }
                let x = Tensor::from_vec([chunk.len(), c, h, w], data);
                let (_, grad) = surrogate.input_gradient(&x, &labels);
                for (local, &i) in chunk.iter().enumerate() {
                    let g = grad.sample(local);
                    let d = &mut deltas[i * sample..(i + 1) * sample];
                    for (dv, &gv) in d.iter_mut().zip(g) {
                        *dv -= cfg.step_size * gv.signum();
                    }
                }
            }
            project_to_bound(&mut deltas, &cfg.bound, c, h, w);
        }
    }

    Ok((
        PerturbationSet {
            deltas,
            bound: cfg.bound,
            classwise: false,
            channels: c,
            height: h,
            width: w,
        },
        report,
    ))
}

/// Perturb a stratified `ratio` of the samples: x := clamp(x + delta, 0, 1).
pub fn apply_poison(
    set: &LabeledImageSet,
    perturb: &PerturbationSet,
    ratio: f64,
    seed: u64,
) -> Result<(LabeledImageSet, PoisonMask), AttackError> {
    if perturb.len() != set.len()
        || perturb.channels != set.channels
        || perturb.height != set.height
        || perturb.width != set.width
    {
        return Err(AttackError::ShapeMismatch("perturbation vs dataset".into()));
    }
    if !(0.0 < ratio && ratio <= 1.0) {
        return Err(AttackError::InvalidConfig(format!("ratio {ratio} outside (0, 1]")));
    }
    let n = set.len();
    let target_total = (ratio * n as f64).round() as usize;

    // largest-remainder allocation keeps the overall density within 1/N
    let by_class = set.indices_by_class();
    let mut base: Vec<usize> = Vec::with_capacity(by_class.len());
    let mut remainders: Vec<(f64, usize)> = Vec::with_capacity(by_class.len());
    for (class, indices) in by_class.iter().enumerate() {
        let exact = ratio * indices.len() as f64;
        let b = (exact.floor() as usize).min(indices.len());
        base.push(b);
        remainders.push((exact - b as f64, class));
    }
    let mut leftover = target_total.saturating_sub(base.iter().sum::<usize>());
    remainders.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
    for &(_, class) in &remainders {
        if leftover == 0 {
            break;
        }
        if base[class] < by_class[class].len() {
            base[class] += 1;
            leftover -= 1;
        }
    }

    let mut rng = Rng::new(seed);
    let mut flags = vec![false; n];
    for (class, indices) in by_class.iter().enumerate() {
        let mut shuffled = indices.clone();
        rng.shuffle(&mut shuffled);
        for &i in shuffled.iter().take(base[class]) {
            flags[i] = true;
        }
    }
    let mut poisoned = set.clone();
    for (i, flag) in flags.iter().enumerate() {
        if *flag {
            let d = perturb.delta(i);
            for (px, &dv) in poisoned.image_mut(i).iter_mut().zip(d) {
                *px = (*px + dv).clamp(0.0, 1.0);
            }
        }
    }
    Ok((poisoned, PoisonMask { flags, ratio }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_synthetic_dataset, SynthConfig};

    fn small_set() -> LabeledImageSet {
        let cfg = SynthConfig {
            class_count: 4,
            train_per_class: 25,
            test_per_class: 5,
            seed: 21,
            ..Default::default()
        };
        generate_synthetic_dataset(&cfg).unwrap().0
    }

    #[test]
    fn projection_clamps_and_is_idempotent() {
        let mut d = vec![0.1f32, -0.2, 0.01, 0.0, 0.5, -0.03];
        let bound = NormBound::linf(8.0 / 255.0);
        project_to_bound(&mut d, &bound, 1, 2, 3);
        let eps = 8.0 / 255.0;
        assert!((d[0] - eps).abs() < 1e-7);
        assert!((d[1] + eps).abs() < 1e-7);
        assert_eq!(d[2], 0.01);
        let snapshot = d.clone();
        project_to_bound(&mut d, &bound, 1, 2, 3);
        assert_eq!(d, snapshot);
    }

    #[test]
    fn l2_projection_hits_sphere_and_is_idempotent() {
        let mut d = vec![4.0f32, 0.0, 0.0, 0.0];
        let bound = NormBound::l2(1.0);
        project_to_bound(&mut d, &bound, 1, 2, 2);
        let norm = d.iter().map(|&v| (v as f64).powi(2)).sum::<f64>().sqrt();
        assert!((norm - 1.0).abs() < 1e-6, "norm {norm}");
        let snapshot = d.clone();
        project_to_bound(&mut d, &bound, 1, 2, 2);
        assert_eq!(d, snapshot);
    }

    #[test]
    fn l0_keeps_strongest_positions() {
        // two channels, 2x2: position magnitudes (max over channels)
        let mut d = vec![
            0.5, 0.1, 0.0, 0.2, // channel 0
            0.0, 0.3, 0.0, 0.1, // channel 1
        ];
        let bound = NormBound::l0(2);
        project_to_bound(&mut d, &bound, 2, 2, 2);
        // positions 0 (0.5) and 1 (0.3) survive; both channels kept there
        assert_eq!(d, vec![0.5, 0.1, 0.0, 0.0, 0.0, 0.3, 0.0, 0.0]);
        let snapshot = d.clone();
        project_to_bound(&mut d, &bound, 2, 2, 2);
        assert_eq!(d, snapshot);
    }

    #[test]
    fn smooth_patches_are_classwise_and_exactly_bounded() {
        let set = small_set();
        let p = gen_classwise_smooth(&set, 1.0, 4, 3).unwrap();
        assert!(p.classwise);
        p.validate().unwrap();
        let by_class = set.indices_by_class();
        for indices in &by_class {
            let first = p.delta(indices[0]);
            for &i in indices {
                assert_eq!(p.delta(i), first, "class-wise deltas must be bit-exact");
            }
        }
        for i in 0..set.len() {
            let norm = p.delta(i).iter().map(|&v| (v as f64).powi(2)).sum::<f64>().sqrt();
            assert!((norm - 1.0).abs() < 1e-5, "sample {i} norm {norm}");
        }
        // degenerate patch = whole image: flat tint per class
        let flat = gen_classwise_smooth(&set, 1.0, 16, 3).unwrap();
        let d = flat.delta(0);
        let hw = set.height * set.width;
        for plane in d.chunks(hw) {
            for &v in plane {
                assert_eq!(v, plane[0]);
            }
        }
        assert!(matches!(
            gen_classwise_smooth(&set, 1.0, 5, 3),
            Err(AttackError::PatchMismatch { .. })
        ));
    }

    #[test]
    fn one_pixel_touches_one_position_with_classwise_placement() {
        let set = small_set();
        let p = gen_one_pixel(&set, 9);
        p.validate().unwrap();
        let hw = set.height * set.width;
        let mut class_pos = vec![None; set.class_count];
        for (i, &y) in set.labels.iter().enumerate() {
            let d = p.delta(i);
            let mut touched: Vec<usize> = Vec::new();
            for pos in 0..hw {
                if (0..set.channels).any(|c| d[c * hw + pos] != 0.0) {
                    touched.push(pos);
                }
            }
            assert!(touched.len() <= 1, "sample {i} touches {} positions", touched.len());
            if let Some(&pos) = touched.first() {
                match class_pos[y as usize] {
                    None => class_pos[y as usize] = Some(pos),
                    Some(prev) => assert_eq!(prev, pos, "position must be class-wise"),
                }
                // the poisoned pixel lands exactly on a {0,1} target
                for c in 0..set.channels {
                    let v = set.image(i)[c * hw + pos] + d[c * hw + pos];
                    assert!(v.abs() < 1e-6 || (v - 1.0).abs() < 1e-6);
                }
            }
        }
    }

    #[test]
    fn apply_poison_full_and_partial() {
        let set = small_set();
        let p = gen_classwise_smooth(&set, 1.0, 4, 3).unwrap();
        let (poisoned, mask) = apply_poison(&set, &p, 1.0, 5).unwrap();
        assert!(mask.flags.iter().all(|&f| f));
        assert!(poisoned.images.iter().all(|&v| (0.0..=1.0).contains(&v)));

        let (_, mask) = apply_poison(&set, &p, 0.4, 5).unwrap();
        assert!((mask.density() - 0.4).abs() <= 1.0 / set.len() as f64 + 1e-12);
        // stratified: per class 10 of 25
        let by_class = set.indices_by_class();
        for indices in by_class {
            let count = indices.iter().filter(|&&i| mask.flags[i]).count();
            assert_eq!(count, 10);
        }
        // determinism
        let (_, mask2) = apply_poison(&set, &p, 0.4, 5).unwrap();
        assert_eq!(mask.flags, mask2.flags);
    }
}
