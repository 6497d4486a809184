//! Plain-text run configuration files.
//!
//! Grammar: `[section]` headers group `key = value` lines; `#` starts a
//! comment; blank lines are ignored. Sections are `env`, `train`,
//! `domain_rand` and `eval`. Every key is checked against the known set and
//! rejected with its line number otherwise. The `domain_rand` section is
//! optional; leaving it out disables randomization entirely, while an empty
//! section enables the default ranges.
//!
//! The exact key list lives in `docs/config.md` next to a worked example.

use std::fs;
use std::path::Path;

use crate::env::{DomainRand, ObsMode, TerrainSource};
use crate::eval::{Aggregation, LatencyOptions};
use crate::sim::TerrainKind;
use crate::train::TrainConfig;
use crate::{Error, Result};

/// Evaluation-battery settings (the `[eval]` section).
#[derive(Debug, Clone)]
pub struct EvalSettings {
    pub rollouts: usize,
    pub horizon_seconds: f64,
    /// Fixed heading command for gait and tracking analyses (m/s).
    pub command: f64,
    pub latency: LatencyOptions,
    pub saliency_duration: f64,
    pub saliency_aggregation: Aggregation,
    pub gait_duration: f64,
}

impl Default for EvalSettings {
    fn default() -> Self {
        Self {
            rollouts: 100,
            horizon_seconds: crate::eval::DEFAULT_HORIZON_SECONDS,
            command: 0.5,
            latency: LatencyOptions::default(),
            saliency_duration: 2.0,
            saliency_aggregation: Aggregation::MeanAbs,
            gait_duration: 4.0,
        }
    }
}

impl EvalSettings {
    pub fn validate(&self) -> Result<()> {
        if self.rollouts == 0 || self.latency.rollouts_per_level == 0 {
            return Err(Error::Config("eval rollout counts must be >= 1".into()));
        }
        for (name, v) in [
            ("horizon_seconds", self.horizon_seconds),
            ("latency_resolution", self.latency.resolution),
            ("saliency_duration", self.saliency_duration),
            ("gait_duration", self.gait_duration),
        ] {
            if !(v > 0.0) {
                return Err(Error::Config(format!("eval {name} must be > 0")));
            }
        }
        if !(0.0..=1.0).contains(&self.latency.threshold) {
            return Err(Error::Config(
                "eval latency threshold must lie in [0, 1]".into(),
            ));
        }
        Ok(())
    }
}

/// Everything one run file describes.
#[derive(Debug, Clone, Default)]
pub struct RunFile {
    pub train: TrainConfig,
    pub eval: EvalSettings,
    /// Training checkpoint cadence in iterations (0 = final only).
    pub checkpoint_every: usize,
}

impl RunFile {
    /// Derived-quantity echo for manifests and logs.
    pub fn echo(&self) -> String {
        let gamma = self.train.gamma().expect("validated");
        let n_env = self.train.n_envs().expect("validated");
        format!(
            "control_freq = {} Hz\ngamma = {:.9} (half-life {} s)\nn_env = {} (batch {} control steps, episode {} s)\nobservation_dim = {}\n",
            self.train.env.control_freq,
            gamma,
            self.train.half_life,
            n_env,
            self.train.batch_steps,
            self.train.episode_seconds,
            self.train.env.obs.dim(),
        )
    }
}

fn parse_err(path: &str, line: usize, msg: String) -> Error {
    Error::ConfigParse {
        path: path.to_string(),
        line,
        msg,
    }
}

fn num<T: std::str::FromStr>(path: &str, line: usize, key: &str, val: &str) -> Result<T> {
    val.parse::<T>()
        .map_err(|_| parse_err(path, line, format!("`{key}` cannot parse value `{val}`")))
}

/// Parses a run file, applying values over the built-in defaults.
pub fn parse_run_file(path: &Path) -> Result<RunFile> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read config `{}`: {e}", path.display())))?;
    parse_run_str(&text, &path.display().to_string())
}

/// Same as [`parse_run_file`] for in-memory text; `path` labels errors.
pub fn parse_run_str(text: &str, path: &str) -> Result<RunFile> {
    let mut run = RunFile::default();
    let (mut terrain_kind, mut terrain_seed) = match run.train.env.terrain {
        TerrainSource::Generate { kind, seed } => (kind, seed),
        TerrainSource::Fixed(_) => (TerrainKind::Flat, 0),
    };
    let mut terrain_set = false;
    let mut dr: Option<DomainRand> = None;
    let mut section = String::new();

    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(inner) = line.strip_prefix('[') {
            let Some(name) = inner.strip_suffix(']') else {
                return Err(parse_err(
                    path,
                    line_no,
                    "unterminated section header".into(),
                ));
            };
            section = name.trim().to_string();
            match section.as_str() {
                "env" | "train" | "reward" | "eval" => {}
                "domain_rand" => dr = Some(DomainRand::default()),
                other => {
                    return Err(parse_err(
                        path,
                        line_no,
                        format!("unknown section `[{other}]`"),
                    ));
                }
            }
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(parse_err(
                path,
                line_no,
                format!("expected `key = value`, found `{line}`"),
            ));
        };
        let (key, val) = (k.trim(), v.trim());
        if section.is_empty() {
            return Err(parse_err(
                path,
                line_no,
                format!("key `{key}` appears before any [section]"),
            ));
        }

        let env = &mut run.train.env;
        match (section.as_str(), key) {
            ("env", "control_freq") => env.control_freq = num(path, line_no, key, val)?,
            ("env", "command_min") => env.command_range[0] = num(path, line_no, key, val)?,
            ("env", "command_max") => env.command_range[1] = num(path, line_no, key, val)?,
            ("env", "terrain") => {
                terrain_kind =
                    TerrainKind::parse(val).map_err(|e| parse_err(path, line_no, e.to_string()))?;
                terrain_set = true;
            }
            ("env", "terrain_seed") => {
                terrain_seed = num(path, line_no, key, val)?;
                terrain_set = true;
            }
            ("env", "mode") => {
                env.obs.mode = match val {
                    "blind" => ObsMode::Blind,
                    "perceptive" => ObsMode::Perceptive,
                    other => {
                        return Err(parse_err(
                            path,
                            line_no,
                            format!("`mode` must be blind or perceptive, got `{other}`"),
                        ));
                    }
                }
            }
            ("env", "history") => env.obs.history = num(path, line_no, key, val)?,
            ("env", "history_freq") => env.obs.history_freq = num(path, line_no, key, val)?,
            ("env", "init_joint_jitter") => env.init_joint_jitter = num(path, line_no, key, val)?,
            ("env", "init_height_jitter") => env.init_height_jitter = num(path, line_no, key, val)?,

            ("train", "half_life") => run.train.half_life = num(path, line_no, key, val)?,
            ("train", "episode_seconds") => {
                run.train.episode_seconds = num(path, line_no, key, val)?
            }
            ("train", "batch_steps") => run.train.batch_steps = num(path, line_no, key, val)?,
            ("train", "gae_lambda") => run.train.gae_lambda = num(path, line_no, key, val)?,
            ("train", "clip_epsilon") => run.train.clip_epsilon = num(path, line_no, key, val)?,
            ("train", "epochs") => run.train.epochs = num(path, line_no, key, val)?,
            ("train", "minibatches") => run.train.minibatches = num(path, line_no, key, val)?,
            ("train", "learning_rate") => run.train.learning_rate = num(path, line_no, key, val)?,
            ("train", "entropy_coef") => run.train.entropy_coef = num(path, line_no, key, val)?,
            ("train", "max_grad_norm") => run.train.max_grad_norm = num(path, line_no, key, val)?,
            ("train", "iterations") => run.train.iterations = num(path, line_no, key, val)?,
            ("train", "init_std") => run.train.init_std = num(path, line_no, key, val)?,
            ("train", "seed") => run.train.seed = num(path, line_no, key, val)?,
            ("train", "workers") => run.train.workers = num(path, line_no, key, val)?,
            ("train", "checkpoint_every") => run.checkpoint_every = num(path, line_no, key, val)?,

            ("reward", "tracking_weight") => env.reward.tracking_weight = num(path, line_no, key, val)?,
            ("reward", "tracking_width") => env.reward.tracking_width = num(path, line_no, key, val)?,
            ("reward", "pitch_rate_weight") => {
                env.reward.pitch_rate_weight = num(path, line_no, key, val)?
            }
            ("reward", "torque_weight") => env.reward.torque_weight = num(path, line_no, key, val)?,
            ("reward", "smoothness_weight") => {
                env.reward.smoothness_weight = num(path, line_no, key, val)?
            }
            ("reward", "smoothness_override") => {
                env.reward.smoothness_override = Some(num(path, line_no, key, val)?)
            }
            ("reward", "nominal_weight") => env.reward.nominal_weight = num(path, line_no, key, val)?,
            ("reward", "nominal_override") => {
                env.reward.nominal_override = Some(num(path, line_no, key, val)?)
            }
            ("reward", "base_height_weight") => {
                env.reward.base_height_weight = num(path, line_no, key, val)?
            }
            ("reward", "base_height_target") => {
                env.reward.base_height_target = Some(num(path, line_no, key, val)?)
            }
            ("reward", "termination_penalty") => {
                env.reward.termination_penalty = num(path, line_no, key, val)?
            }

            ("domain_rand", "mass_scale_min") => {
                dr.as_mut().unwrap().mass_scale[0] = num(path, line_no, key, val)?
            }
            ("domain_rand", "mass_scale_max") => {
                dr.as_mut().unwrap().mass_scale[1] = num(path, line_no, key, val)?
            }
            ("domain_rand", "friction_min") => {
                dr.as_mut().unwrap().friction[0] = num(path, line_no, key, val)?
            }
            ("domain_rand", "friction_max") => {
                dr.as_mut().unwrap().friction[1] = num(path, line_no, key, val)?
            }
            ("domain_rand", "gain_scale_min") => {
                dr.as_mut().unwrap().gain_scale[0] = num(path, line_no, key, val)?
            }
            ("domain_rand", "gain_scale_max") => {
                dr.as_mut().unwrap().gain_scale[1] = num(path, line_no, key, val)?
            }
            ("domain_rand", "latency_min") => {
                dr.as_mut().unwrap().latency[0] = num(path, line_no, key, val)?
            }
            ("domain_rand", "latency_max") => {
                dr.as_mut().unwrap().latency[1] = num(path, line_no, key, val)?
            }

            ("eval", "rollouts") => run.eval.rollouts = num(path, line_no, key, val)?,
            ("eval", "horizon_seconds") => {
                run.eval.horizon_seconds = num(path, line_no, key, val)?;
                run.eval.latency.horizon_seconds = run.eval.horizon_seconds;
            }
            ("eval", "command") => run.eval.command = num(path, line_no, key, val)?,
            ("eval", "latency_resolution_ms") => {
                run.eval.latency.resolution = num::<f64>(path, line_no, key, val)? * 1e-3
            }
            ("eval", "latency_threshold") => {
                run.eval.latency.threshold = num(path, line_no, key, val)?
            }
            ("eval", "latency_rollouts") => {
                run.eval.latency.rollouts_per_level = num(path, line_no, key, val)?
            }
            ("eval", "latency_max_ms") => {
                run.eval.latency.max_latency = num::<f64>(path, line_no, key, val)? * 1e-3
            }
            ("eval", "saliency_duration") => {
                run.eval.saliency_duration = num(path, line_no, key, val)?
            }
            ("eval", "saliency_aggregation") => {
                run.eval.saliency_aggregation = match val {
                    "mean_abs" => Aggregation::MeanAbs,
                    "max_abs" => Aggregation::MaxAbs,
                    other => {
                        return Err(parse_err(
                            path,
                            line_no,
                            format!(
                                "`saliency_aggregation` must be mean_abs or max_abs, got `{other}`"
                            ),
                        ));
                    }
                }
            }
            ("eval", "gait_duration") => run.eval.gait_duration = num(path, line_no, key, val)?,

            (sec, key) => {
                return Err(parse_err(
                    path,
                    line_no,
                    format!("unknown key `{key}` in [{sec}]"),
                ));
            }
        }
    }

    if terrain_set {
        run.train.env.terrain = TerrainSource::Generate {
            kind: terrain_kind,
            seed: terrain_seed,
        };
    }
    // The section's absence, not empty contents, decides whether domain
    // randomization runs.
    run.train.env.domain_rand = dr;
    run.train.validate()?;
    run.eval.validate()?;
    Ok(run)
}

#[cfg(test)]
mod tests {
    use super::*;

    const GOOD: &str = "\
# smoke config
[env]
control_freq = 10
terrain = flat
mode = blind
history = 0

[train]
batch_steps = 4800
iterations = 20
seed = 7

[eval]
rollouts = 25
";

    #[test]
    fn derived_gamma_is_echoed() {
        let run = parse_run_str(GOOD, "test.cfg").unwrap();
        assert_eq!(run.train.env.control_freq, 10.0);
        assert_eq!(run.train.seed, 7);
        let echo = run.echo();
        assert!(echo.contains("0.977159"), "{echo}");
        assert!(echo.contains("n_env = 480"), "{echo}");
    }

    #[test]
    fn unknown_key_names_key_and_line() {
        let text = GOOD.replace("batch_steps", "gama");
        let err = parse_run_str(&text, "run.cfg").unwrap_err().to_string();
        assert!(err.contains("gama"), "{err}");
        assert!(err.contains("run.cfg:9"), "{err}");
    }

    #[test]
    fn omitting_domain_rand_disables_it_and_empty_section_enables_defaults() {
        let run = parse_run_str(GOOD, "t").unwrap();
        assert!(run.train.env.domain_rand.is_none());

        let with_dr = format!("{GOOD}\n[domain_rand]\n");
        let run = parse_run_str(&with_dr, "t").unwrap();
        assert_eq!(run.train.env.domain_rand, Some(DomainRand::default()));

        let tweaked = format!("{GOOD}\n[domain_rand]\nfriction_min = 0.6\n");
        let run = parse_run_str(&tweaked, "t").unwrap();
        assert_eq!(run.train.env.domain_rand.unwrap().friction, [0.6, 1.0]);
    }

    #[test]
    fn value_parse_failure_reports_the_line() {
        let text = GOOD.replace("iterations = 20", "iterations = twenty");
        let err = parse_run_str(&text, "cfg").unwrap_err().to_string();
        assert!(err.contains("cfg:10") && err.contains("twenty"), "{err}");
    }

    #[test]
    fn structural_errors_are_rejected() {
        assert!(parse_run_str("[mystery]\n", "p").is_err());
        assert!(parse_run_str("[env\n", "p").is_err());
        assert!(parse_run_str("control_freq = 10\n", "p").is_err());
        assert!(parse_run_str("[env]\njust words\n", "p").is_err());
    }

    #[test]
    fn indivisible_batch_fails_validation_with_a_suggestion() {
        let text = GOOD.replace("batch_steps = 4800", "batch_steps = 4801");
        let err = parse_run_str(&text, "cfg").unwrap_err().to_string();
        assert!(err.contains("4800"), "{err}");
    }

    #[test]
    fn comments_and_spacing_are_tolerated() {
        let text = "\
[env]
control_freq = 50   # fast variant
  mode=perceptive
[train]
iterations=5
batch_steps = 100
[eval]
latency_resolution_ms = 10
";
        let run = parse_run_str(text, "t").unwrap();
        assert_eq!(run.train.env.control_freq, 50.0);
        assert_eq!(run.train.env.obs.mode, ObsMode::Perceptive);
        assert_eq!(run.eval.latency.resolution, 0.01);
    }

    #[test]
    fn missing_file_error_names_the_path() {
        let err = parse_run_file(Path::new("/nonexistent/run.cfg"))
            .unwrap_err()
            .to_string();
        assert!(err.contains("/nonexistent/run.cfg"), "{err}");
    }

    #[test]
    fn defaults_round_trip_through_an_empty_config() {
        let run = parse_run_str("[env]\ncontrol_freq = 10\n", "t").unwrap();
        assert_eq!(run.train.batch_steps, TrainConfig::default().batch_steps);
        assert_eq!(run.eval.rollouts, 100);
        assert_eq!(run.checkpoint_every, 0);
    }
}
