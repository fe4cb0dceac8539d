//! Two-stage purification, PSNR-guided KLD-target selection, unlearnable
//! -sample detection, and UE amplification.
//!
//! The purification schedule: stage 1 trains a fresh D-VAE on P0 under the
//! tight target kld1 and subtracts the estimated perturbations
//! (x1 = clamp(x0 - p̂0)); stage 2 trains a fresh D-VAE on P1 under the
//! looser kld2, subtracts again (x2 = clamp(x1 - p̂1)), then reuses the same
//! stage-2 model to reconstruct P2 (x3 = x̂2). Labels pass through unchanged.

use crate::attacks::PoisonMask;
use crate::data::{psnr, LabeledImageSet};
use crate::dvae::{
    infer_dvae, train_dvae, DVAEConfig, DVAEState, DvaeError, PerturbationEstimate, TrainLog,
};
use crate::eval::{evaluate, train_classifier, ClassifierConfig, EvalError};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("no candidate KLD targets supplied")]
    EmptyCandidates,
    #[error("unknown ablation variant {0}")]
    UnknownVariant(String),
    #[error("class/geometry mismatch between the poisoned split and the clean rest")]
    ClassMismatch,
    #[error(transparent)]
    Dvae(#[from] DvaeError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Data(#[from] crate::data::DataError),
}

/// Two-stage purification parameters.
#[derive(Clone, Debug)]
pub struct PurifyConfig {
    pub kld1: f64,
    pub kld2: f64,
    /// Probe-PSNR window the stage-1 target should land in.
    pub stage1_window: (f64, f64),
    pub stage2_window: (f64, f64),
    /// Per-stage trainer settings; kld_target and seed are overwritten.
    pub stage1: DVAEConfig,
    pub stage2: DVAEConfig,
    /// Clamp images to [0, 1] after each subtraction.
    pub clamp: bool,
}

impl Default for PurifyConfig {
    fn default() -> Self {
        PurifyConfig {
            kld1: 1.0,
            kld2: 3.0,
            stage1_window: (18.0, 24.0),
            stage2_window: (26.0, 32.0),
            stage1: DVAEConfig::default(),
            stage2: DVAEConfig::default(),
            clamp: true,
        }
    }
}

impl PurifyConfig {
    pub fn validate(&self) -> Result<(), PipelineError> {
        if !(self.kld1 < self.kld2) {
            return Err(PipelineError::InvalidConfig(format!(
                "kld1 {} must be below kld2 {}",
                self.kld1, self.kld2
            )));
        }
        for (lo, hi) in [self.stage1_window, self.stage2_window] {
            if !(lo < hi) {
                return Err(PipelineError::InvalidConfig(format!(
                    "PSNR window ({lo}, {hi}) must have lo < hi"
                )));
            }
        }
        Ok(())
    }
}

/// Numbers and traces of one purification run.
#[derive(Clone, Debug)]
pub struct PurifyReport {
    pub kld1: f64,
    pub kld2: f64,
    pub stage1_log: TrainLog,
    pub stage2_log: TrainLog,
    pub psnr_x0_xhat0: f64,
    pub psnr_x1_xhat1: f64,
    pub psnr_x2_xhat2: f64,
    /// Paths filled in when the CLI persists P1..P3.
    pub p1_path: Option<String>,
    pub p2_path: Option<String>,
    pub p3_path: Option<String>,
}

/// Everything a purification run produces; ablation variants and the
/// disentanglement experiments reuse these pieces without retraining.
pub struct PurifyArtifacts {
    pub p1: LabeledImageSet,
    pub p2: LabeledImageSet,
    pub p3: LabeledImageSet,
    pub p_hat0: PerturbationEstimate,
    pub p_hat1: PerturbationEstimate,
    /// Stage-1 reconstruction of P0 (the low-rate x̂0).
    pub x_hat0: LabeledImageSet,
    /// Stage-2 reconstruction of P1 (skipping the second subtraction).
    pub x_hat1: LabeledImageSet,
    pub stage1: DVAEState,
    pub stage2: DVAEState,
    pub report: PurifyReport,
}

fn subtract(set: &LabeledImageSet, est: &PerturbationEstimate, clamp: bool) -> LabeledImageSet {
    let mut out = set.clone();
    for (px, &d) in out.images.iter_mut().zip(&est.deltas) {
        let v = *px - d;
        *px = if clamp { v.clamp(0.0, 1.0) } else { v };
    }
    out
}

/// Run Algorithm 1 keeping every intermediate artifact.
pub fn run_two_stage(
    p0: &LabeledImageSet,
    cfg: &PurifyConfig,
    seed: u64,
) -> Result<PurifyArtifacts, PipelineError> {
    cfg.validate()?;
    let stage1_cfg = DVAEConfig { kld_target: cfg.kld1, seed: seed ^ 0x51A6_E001, ..cfg.stage1.clone() };
    let stage2_cfg = DVAEConfig { kld_target: cfg.kld2, seed: seed ^ 0x51A6_E002, ..cfg.stage2.clone() };

    let (mut stage1, stage1_log) = train_dvae(p0, &stage1_cfg)?;
    let (xhat0, p_hat0) = infer_dvae(&mut stage1, p0)?;
    let psnr_x0_xhat0 = psnr(&p0.images, &xhat0.images)?;
    let p1 = subtract(p0, &p_hat0, cfg.clamp);

    let (mut stage2, stage2_log) = train_dvae(&p1, &stage2_cfg)?;
    let (xhat1, p_hat1) = infer_dvae(&mut stage2, &p1)?;
    let psnr_x1_xhat1 = psnr(&p1.images, &xhat1.images)?;
    let p2 = subtract(&p1, &p_hat1, cfg.clamp);

    let (xhat2, _) = infer_dvae(&mut stage2, &p2)?;
    let psnr_x2_xhat2 = psnr(&p2.images, &xhat2.images)?;
    let p3 = xhat2;

    Ok(PurifyArtifacts {
        p1,
        p2,
        p3,
        p_hat0,
        p_hat1,
        x_hat0: xhat0,
        x_hat1: xhat1,
        stage1,
        stage2,
        report: PurifyReport {
            kld1: cfg.kld1,
            kld2: cfg.kld2,
            stage1_log,
            stage2_log,
            psnr_x0_xhat0,
            psnr_x1_xhat1,
            psnr_x2_xhat2,
            p1_path: None,
            p2_path: None,
            p3_path: None,
        },
    })
}

/// Algorithm 1: returns the purified dataset P3 and the run report.
pub fn two_stage_purify(
    p0: &LabeledImageSet,
    cfg: &PurifyConfig,
    seed: u64,
) -> Result<(LabeledImageSet, PurifyReport), PipelineError> {
    let artifacts = run_two_stage(p0, cfg, seed)?;
    Ok((artifacts.p3, artifacts.report))
}

/// Ablations of the two-stage schedule.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AblationVariant {
    /// Skip stage 1 entirely.
    NoS1,
    /// Skip the second subtraction; reconstruct P1 directly.
    NoI2,
    /// Stop after stage 1 (return P1).
    NoS2,
    /// Skip the final reconstruction (return P2).
    NoI3,
    /// Return the stage-1 reconstruction x̂0.
    S1Recon,
}

impl std::str::FromStr for AblationVariant {
    type Err = PipelineError;
    fn from_str(s: &str) -> Result<Self, PipelineError> {
        match s {
            "no_s1" => Ok(AblationVariant::NoS1),
            "no_i2" => Ok(AblationVariant::NoI2),
            "no_s2" => Ok(AblationVariant::NoS2),
            "no_i3" => Ok(AblationVariant::NoI3),
            "s1_recon" => Ok(AblationVariant::S1Recon),
            other => Err(PipelineError::UnknownVariant(other.into())),
        }
    }
}

/// Variant outputs that need no training beyond an existing full run.
pub fn ablation_from_artifacts(
    artifacts: &PurifyArtifacts,
    variant: AblationVariant,
) -> Option<LabeledImageSet> {
    match variant {
        AblationVariant::NoI2 => Some(artifacts.x_hat1.clone()),
        AblationVariant::NoS2 => Some(artifacts.p1.clone()),
        AblationVariant::NoI3 => Some(artifacts.p2.clone()),
        AblationVariant::S1Recon => Some(artifacts.x_hat0.clone()),
        AblationVariant::NoS1 => None,
    }
}

/// Stage 2 only, fed directly with P0 (ablation variant "no_s1").
pub fn stage2_only(
    p0: &LabeledImageSet,
    cfg: &PurifyConfig,
    seed: u64,
) -> Result<LabeledImageSet, PipelineError> {
    cfg.validate()?;
    let stage2_cfg = DVAEConfig { kld_target: cfg.kld2, seed: seed ^ 0x51A6_E002, ..cfg.stage2.clone() };
    let (mut stage2, _) = train_dvae(p0, &stage2_cfg)?;
    let (_, p_hat) = infer_dvae(&mut stage2, p0)?;
    let p2 = subtract(p0, &p_hat, cfg.clamp);
    let (xhat, _) = infer_dvae(&mut stage2, &p2)?;
    Ok(xhat)
}

/// One ablation variant end to end.
pub fn ablation_variant(
    p0: &LabeledImageSet,
    variant: AblationVariant,
    cfg: &PurifyConfig,
    seed: u64,
) -> Result<LabeledImageSet, PipelineError> {
    match variant {
        AblationVariant::NoS1 => stage2_only(p0, cfg, seed),
        other => {
            let artifacts = run_two_stage(p0, cfg, seed)?;
            Ok(ablation_from_artifacts(&artifacts, other).expect("non-NoS1 variant"))
        }
    }
}

/// Outcome of the PSNR-window target selection.
#[derive(Clone, Debug)]
pub struct KldSelection {
    pub chosen: f64,
    pub probe_psnr: f64,
    pub in_window: bool,
    /// Set when no candidate landed inside the window.
    pub warning: Option<String>,
}

/// Probe-train each candidate and pick per the stage rule: among candidates
/// whose probe PSNR falls in the window, the largest target for stage 1 and
/// the smallest for stage 2; otherwise the one closest to the window
/// midpoint, with a warning.
pub fn select_kld_target(
    set: &LabeledImageSet,
    stage: u8,
    candidates: &[f64],
    probe_cfg: &DVAEConfig,
    window: (f64, f64),
) -> Result<KldSelection, PipelineError> {
    if candidates.is_empty() {
        return Err(PipelineError::EmptyCandidates);
    }
    if !matches!(stage, 1 | 2) {
        return Err(PipelineError::InvalidConfig(format!("stage {stage} must be 1 or 2")));
    }
    let mut probes: Vec<(f64, f64)> = Vec::with_capacity(candidates.len());
    for &target in candidates {
        let cfg = DVAEConfig { kld_target: target, ..probe_cfg.clone() };
        let (_, log) = train_dvae(set, &cfg)?;
        let probe_psnr = *log.probe_psnr.last().expect("at least one epoch");
        probes.push((target, probe_psnr));
    }
    let qualifying: Vec<&(f64, f64)> =
        probes.iter().filter(|(_, p)| *p >= window.0 && *p <= window.1).collect();
    if !qualifying.is_empty() {
        let chosen = if stage == 1 {
            qualifying
                .iter()
                .max_by(|a, b| a.0.partial_cmp(&b.0).unwrap())
                .expect("nonempty")
        } else {
            qualifying
                .iter()
                .min_by(|a, b| a.0.partial_cmp(&b.0).unwrap())
                .expect("nonempty")
        };
        return Ok(KldSelection {
            chosen: chosen.0,
            probe_psnr: chosen.1,
            in_window: true,
            warning: None,
        });
    }
    let mid = 0.5 * (window.0 + window.1);
    let best = probes
        .iter()
        .min_by(|a, b| (a.1 - mid).abs().partial_cmp(&(b.1 - mid).abs()).unwrap())
        .expect("nonempty");
    Ok(KldSelection {
        chosen: best.0,
        probe_psnr: best.1,
        in_window: false,
        warning: Some(format!(
            "no candidate PSNR inside [{}, {}]; picked {} at {:.2} dB (closest to midpoint)",
            window.0, window.1, best.0, best.1
        )),
    })
}

/// Detection metrics against the hidden ground-truth mask.
#[derive(Clone, Debug)]
pub struct DetectionReport {
    pub flags: Vec<bool>,
    pub accuracy: f64,
    pub recall: f64,
    pub precision: f64,
    pub f1: f64,
}

/// Settings for [`detect_unlearnable`].
#[derive(Clone, Debug)]
pub struct DetectConfig {
    /// Stage-1-style D-VAE trainer.
    pub dvae: DVAEConfig,
    pub classifier: ClassifierConfig,
}

impl Default for DetectConfig {
    fn default() -> Self {
        DetectConfig {
            dvae: DVAEConfig { kld_target: PurifyConfig::default().kld1, ..Default::default() },
            classifier: ClassifierConfig::default(),
        }
    }
}

/// Flag unlearnable samples: train a stage-1 D-VAE on the mixed set, build
/// P̂0 = clamp(x0 + p̂0), train a victim on it, and flag each sample iff the
/// victim predicts its own label on its P̂0 input. The ground-truth mask is
/// only used to score the flags afterwards.
pub fn detect_unlearnable(
    p0_mixed: &LabeledImageSet,
    true_mask: &PoisonMask,
    cfg: &DetectConfig,
    seed: u64,
) -> Result<DetectionReport, PipelineError> {
    let dvae_cfg = DVAEConfig { seed: seed ^ 0xDE7E_C701, ..cfg.dvae.clone() };
    let (mut stage1, _) = train_dvae(p0_mixed, &dvae_cfg)?;
    let (_, p_hat0) = infer_dvae(&mut stage1, p0_mixed)?;
    let mut p_hat_set = p0_mixed.clone();
    for (px, &d) in p_hat_set.images.iter_mut().zip(&p_hat0.deltas) {
        *px = (*px + d).clamp(0.0, 1.0);
    }
    let clf_cfg = ClassifierConfig { seed: seed ^ 0xDE7E_C702, ..cfg.classifier.clone() };
    let mut victim = train_classifier(&p_hat_set, &clf_cfg)?;
    let flags = victim.correct_flags(&p_hat_set)?;

    let n = flags.len() as f64;
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut fn_ = 0usize;
    let mut agree = 0usize;
    for (&flag, &truth) in flags.iter().zip(&true_mask.flags) {
        match (flag, truth) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => {}
        }
        if flag == truth {
            agree += 1;
        }
    }
    let recall = if tp + fn_ > 0 { tp as f64 / (tp + fn_) as f64 } else { 0.0 };
    let precision = if tp + fp > 0 { tp as f64 / (tp + fp) as f64 } else { 0.0 };
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    Ok(DetectionReport { flags, accuracy: agree as f64 / n, recall, precision, f1 })
}

/// Train a stage-1 D-VAE on a small poisoned split, synthesize perturbations
/// for the clean rest via each sample's label, and return the union.
pub fn amplify_ues(
    p_small: &LabeledImageSet,
    t_rest: Option<&LabeledImageSet>,
    cfg: &DVAEConfig,
    seed: u64,
) -> Result<LabeledImageSet, PipelineError> {
    let rest = match t_rest {
        None => return Ok(p_small.clone()),
        Some(r) => r,
    };
    if !p_small.same_geometry(rest) {
        return Err(PipelineError::ClassMismatch);
    }
    let dvae_cfg = DVAEConfig { seed: seed ^ 0xA3B1_1F1E, ..cfg.clone() };
    let (mut stage1, _) = train_dvae(p_small, &dvae_cfg)?;
    let (_, p_hat) = infer_dvae(&mut stage1, rest)?;
    let mut amplified = rest.clone();
    for (px, &d) in amplified.images.iter_mut().zip(&p_hat.deltas) {
        *px = (*px + d).clamp(0.0, 1.0);
    }
    amplified.concat(p_small).map_err(PipelineError::Data)
}

/// Accuracy of a victim trained on `train` and evaluated on `test`;
/// convenience for the experiment drivers.
pub fn victim_accuracy(
    train: &LabeledImageSet,
    test: &LabeledImageSet,
    cfg: &ClassifierConfig,
) -> Result<f64, PipelineError> {
    let mut model = train_classifier(train, cfg)?;
    Ok(evaluate(&mut model, test)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_invariants() {
        let mut cfg = PurifyConfig::default();
        cfg.validate().unwrap();
        cfg.kld1 = 5.0;
        assert!(matches!(cfg.validate(), Err(PipelineError::InvalidConfig(_))));
        let mut cfg = PurifyConfig::default();
        cfg.stage2_window = (30.0, 20.0);
        assert!(matches!(cfg.validate(), Err(PipelineError::InvalidConfig(_))));
    }

    #[test]
    fn variant_parsing() {
        assert_eq!("no_s1".parse::<AblationVariant>().unwrap(), AblationVariant::NoS1);
        assert_eq!("s1_recon".parse::<AblationVariant>().unwrap(), AblationVariant::S1Recon);
        assert!(matches!(
            "bogus".parse::<AblationVariant>(),
            Err(PipelineError::UnknownVariant(_))
        ));
    }
}
