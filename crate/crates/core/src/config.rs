//! Flat key = value run configuration with one section per module type.
//!
//! Every key has a built-in default, so the empty string parses to the
//! default [`RunConfig`]. Unknown sections or keys are errors; values are
//! plain scalars or comma-separated number lists.
//!
//! ```text
//! seed = 7
//!
//! [synth]
//! class_count = 10
//! shape_noise = 0.12
//!
//! [purify]
//! kld1 = 1.0
//! kld2 = 3.0
//! ```

use crate::attacks::EMAttackConfig;
use crate::data::{NormBound, SynthConfig};
use crate::dvae::DVAEConfig;
use crate::eval::ClassifierConfig;
use crate::pipeline::PurifyConfig;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// Simple-attack knobs that have no dedicated config type.
#[derive(Clone, Debug)]
pub struct AttackParams {
    pub smooth_epsilon_l2: f32,
    pub smooth_patch: usize,
    pub linf_epsilon: f32,
    pub ratio: f64,
}

impl Default for AttackParams {
    fn default() -> Self {
        AttackParams { smooth_epsilon_l2: 1.0, smooth_patch: 4, linf_epsilon: 8.0 / 255.0, ratio: 1.0 }
    }
}

/// Candidate lists and probe settings for KLD-target selection and sweeps.
#[derive(Clone, Debug)]
pub struct SweepParams {
    pub targets: Vec<f64>,
    pub stage1_candidates: Vec<f64>,
    pub stage2_candidates: Vec<f64>,
    pub probe_epochs: usize,
}

impl Default for SweepParams {
    fn default() -> Self {
        SweepParams {
            targets: vec![0.25, 0.5, 1.0, 2.0, 3.0, 6.0],
            stage1_candidates: vec![0.5, 1.0, 2.0],
            stage2_candidates: vec![2.0, 3.0, 4.5],
            probe_epochs: 6,
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct RunConfig {
    pub seed: u64,
    pub out_dir: Option<String>,
    pub threads: usize,
    pub synth: SynthConfig,
    pub em: EMAttackConfig,
    pub attack: AttackParams,
    pub dvae: DVAEConfig,
    pub purify: PurifyConfig,
    pub classifier: ClassifierConfig,
    pub sweep: SweepParams,
}

fn parse_scalar<T: std::str::FromStr>(value: &str, line: usize, key: &str) -> Result<T, ConfigError> {
    value.trim().parse::<T>().map_err(|_| ConfigError::Parse {
        line,
        message: format!("cannot parse value {value:?} for key {key}"),
    })
}

fn parse_list(value: &str, line: usize, key: &str) -> Result<Vec<f64>, ConfigError> {
    value
        .split(',')
        .map(|v| parse_scalar::<f64>(v, line, key))
        .collect()
}

fn parse_bool(value: &str, line: usize, key: &str) -> Result<bool, ConfigError> {
    match value.trim() {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        other => Err(ConfigError::Parse {
            line,
            message: format!("cannot parse boolean {other:?} for key {key}"),
        }),
    }
}

impl RunConfig {
    pub fn from_str(text: &str) -> Result<RunConfig, ConfigError> {
        let mut cfg = RunConfig::default();
        let mut section = String::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            if content.starts_with('[') {
                if !content.ends_with(']') {
                    return Err(ConfigError::Parse { line, message: "unterminated section header".into() });
                }
                section = content[1..content.len() - 1].trim().to_string();
                match section.as_str() {
                    "synth" | "em" | "attack" | "dvae" | "stage1" | "stage2" | "purify"
                    | "classifier" | "sweep" => {}
                    other => {
                        return Err(ConfigError::Parse {
                            line,
                            message: format!("unknown section [{other}]"),
                        })
                    }
                }
                continue;
            }
            let Some((key, value)) = content.split_once('=') else {
                return Err(ConfigError::Parse { line, message: format!("expected key = value, got {content:?}") });
            };
            let key = key.trim();
            let value = value.trim();
            cfg.apply(&section, key, value, line)?;
        }
        Ok(cfg)
    }

    pub fn from_path(path: &std::path::Path) -> Result<RunConfig, ConfigError> {
        let text = std::fs::read_to_string(path)?;
        Self::from_str(&text)
    }

    fn apply(&mut self, section: &str, key: &str, value: &str, line: usize) -> Result<(), ConfigError> {
        let unknown = || ConfigError::Parse {
            line,
            message: format!("unknown key {key:?} in section [{section}]"),
        };
        match section {
            "" => match key {
                "seed" => self.seed = parse_scalar(value, line, key)?,
                "out_dir" => self.out_dir = Some(value.to_string()),
                "threads" => self.threads = parse_scalar(value, line, key)?,
                _ => return Err(unknown()),
            },
            "synth" => match key {
                "class_count" => self.synth.class_count = parse_scalar(value, line, key)?,
                "train_per_class" => self.synth.train_per_class = parse_scalar(value, line, key)?,
                "test_per_class" => self.synth.test_per_class = parse_scalar(value, line, key)?,
                "height" => self.synth.height = parse_scalar(value, line, key)?,
                "width" => self.synth.width = parse_scalar(value, line, key)?,
                "channels" => self.synth.channels = parse_scalar(value, line, key)?,
                "shape_noise" => self.synth.shape_noise = parse_scalar(value, line, key)?,
                "position_jitter" => self.synth.position_jitter = parse_scalar(value, line, key)?,
                "color_jitter" => self.synth.color_jitter = parse_scalar(value, line, key)?,
                _ => return Err(unknown()),
            },
            "em" => match key {
                "rounds" => self.em.rounds = parse_scalar(value, line, key)?,
                "surrogate_epochs" => self.em.surrogate_epochs = parse_scalar(value, line, key)?,
                "perturb_steps" => self.em.perturb_steps = parse_scalar(value, line, key)?,
                "step_size" => self.em.step_size = parse_scalar(value, line, key)?,
                "stop_accuracy" => self.em.stop_accuracy = parse_scalar(value, line, key)?,
                "epsilon" => {
                    let eps: f32 = parse_scalar(value, line, key)?;
                    self.em.bound = NormBound::linf(eps);
                }
                _ => return Err(unknown()),
            },
            "attack" => match key {
                "smooth_epsilon_l2" => self.attack.smooth_epsilon_l2 = parse_scalar(value, line, key)?,
                "smooth_patch" => self.attack.smooth_patch = parse_scalar(value, line, key)?,
                "linf_epsilon" => self.attack.linf_epsilon = parse_scalar(value, line, key)?,
                "ratio" => self.attack.ratio = parse_scalar(value, line, key)?,
                _ => return Err(unknown()),
            },
            "dvae" => self.apply_dvae(key, value, line, |c| &mut c.dvae)?,
            "stage1" => self.apply_dvae(key, value, line, |c| &mut c.purify.stage1)?,
            "stage2" => self.apply_dvae(key, value, line, |c| &mut c.purify.stage2)?,
            "purify" => match key {
                "kld1" => self.purify.kld1 = parse_scalar(value, line, key)?,
                "kld2" => self.purify.kld2 = parse_scalar(value, line, key)?,
                "stage1_window_lo" => self.purify.stage1_window.0 = parse_scalar(value, line, key)?,
                "stage1_window_hi" => self.purify.stage1_window.1 = parse_scalar(value, line, key)?,
                "stage2_window_lo" => self.purify.stage2_window.0 = parse_scalar(value, line, key)?,
                "stage2_window_hi" => self.purify.stage2_window.1 = parse_scalar(value, line, key)?,
                "clamp" => self.purify.clamp = parse_bool(value, line, key)?,
                _ => return Err(unknown()),
            },
            "classifier" => match key {
                "epochs" => self.classifier.epochs = parse_scalar(value, line, key)?,
                "batch_size" => self.classifier.batch_size = parse_scalar(value, line, key)?,
                "learning_rate" => self.classifier.learning_rate = parse_scalar(value, line, key)?,
                "cosine_schedule" => self.classifier.cosine_schedule = parse_bool(value, line, key)?,
                "momentum" => self.classifier.momentum = parse_scalar(value, line, key)?,
                _ => return Err(unknown()),
            },
            "sweep" => match key {
                "targets" => self.sweep.targets = parse_list(value, line, key)?,
                "stage1_candidates" => self.sweep.stage1_candidates = parse_list(value, line, key)?,
                "stage2_candidates" => self.sweep.stage2_candidates = parse_list(value, line, key)?,
                "probe_epochs" => self.sweep.probe_epochs = parse_scalar(value, line, key)?,
                _ => return Err(unknown()),
            },
            other => {
                return Err(ConfigError::Parse {
                    line,
                    message: format!("unknown section [{other}]"),
                })
            }
        }
        Ok(())
    }

    fn apply_dvae(
        &mut self,
        key: &str,
        value: &str,
        line: usize,
        pick: impl Fn(&mut RunConfig) -> &mut DVAEConfig,
    ) -> Result<(), ConfigError> {
        let target = pick(self);
        match key {
            "latent_channels" => target.latent_channels = parse_scalar(value, line, key)?,
            "downsample" => target.downsample = parse_scalar(value, line, key)?,
            "kld_target" => target.kld_target = parse_scalar(value, line, key)?,
            "lambda" => target.lambda = Some(parse_scalar(value, line, key)?),
            "aux_weight" => target.aux_weight = parse_scalar(value, line, key)?,
            "epochs" => target.epochs = parse_scalar(value, line, key)?,
            "batch_size" => target.batch_size = parse_scalar(value, line, key)?,
            "learning_rate" => target.learning_rate = parse_scalar(value, line, key)?,
            _ => {
                return Err(ConfigError::Parse {
                    line,
                    message: format!("unknown key {key:?} in a dvae section"),
                })
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_all_defaults() {
        let cfg = RunConfig::from_str("").unwrap();
        assert_eq!(cfg.seed, 0);
        assert_eq!(cfg.synth.class_count, 10);
        assert_eq!(cfg.purify.kld1, 1.0);
    }

    #[test]
    fn sections_and_comments_parse() {
        let text = "
seed = 42   # global
[synth]
class_count = 6
shape_noise = 0.2
[purify]
kld1 = 0.5
kld2 = 2.5
clamp = false
[sweep]
targets = 0.5, 1, 2
";
        let cfg = RunConfig::from_str(text).unwrap();
        assert_eq!(cfg.seed, 42);
        assert_eq!(cfg.synth.class_count, 6);
        assert_eq!(cfg.purify.kld1, 0.5);
        assert!(!cfg.purify.clamp);
        assert_eq!(cfg.sweep.targets, vec![0.5, 1.0, 2.0]);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(RunConfig::from_str("[synth]\nbogus = 1\n").is_err());
        assert!(RunConfig::from_str("[nope]\n").is_err());
        assert!(RunConfig::from_str("justtext\n").is_err());
    }
}
