//! Input saliency: aggregated absolute policy Jacobians over a rollout.
//!
//! At every control step the full Jacobian of the action mean with respect
//! to the raw observation (normalization chain included) is evaluated by
//! reverse-mode differentiation and its absolute value folded into the
//! aggregate. The default aggregate is the elementwise mean; max is
//! available for peak-sensitivity views.

use crate::csvio::{fmt_f64, CsvTable};
use crate::env::{EnvConfig, Environment, ObsMode, ObservationSpec};
use crate::policy::{ForwardCache, PolicyNetwork};
use crate::sim::N_JOINTS;
use crate::{Error, Result};

use super::rollout_config;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Aggregation {
    MeanAbs,
    MaxAbs,
}

impl Aggregation {
    pub fn label(self) -> &'static str {
        match self {
            Aggregation::MeanAbs => "mean_abs",
            Aggregation::MaxAbs => "max_abs",
        }
    }
}

/// Named contiguous blocks of the observation vector, in layout order.
pub fn observation_blocks(spec: &ObservationSpec) -> Vec<(String, usize)> {
    let mut blocks = vec![
        ("gravity".to_string(), 2),
        ("joint_pos".to_string(), N_JOINTS),
        ("base_vel".to_string(), 2),
        ("pitch_rate".to_string(), 1),
        ("joint_vel".to_string(), N_JOINTS),
        ("setpoint_err".to_string(), N_JOINTS),
        ("command".to_string(), 1),
    ];
    if spec.mode == ObsMode::Perceptive {
        blocks.push(("scan".to_string(), spec.scan_len()));
    }
    for k in 1..=spec.history {
        blocks.push((format!("history_{k}"), 2 * N_JOINTS));
    }
    debug_assert_eq!(blocks.iter().map(|(_, n)| n).sum::<usize>(), spec.dim());
    blocks
}

#[derive(Debug, Clone)]
pub struct SaliencyReport {
    /// Aggregated |d action_i / d obs_j|, `N_JOINTS` rows by obs-dim columns.
    pub matrix: Vec<Vec<f64>>,
    pub blocks: Vec<(String, usize)>,
    /// Mean matrix entry per observation block (rows and columns pooled).
    pub block_means: Vec<f64>,
    /// Control steps that contributed (falls shorten the rollout).
    pub steps: usize,
    pub aggregation: Aggregation,
    pub seed: u64,
}

impl SaliencyReport {
    /// Matrix CSV; columns carry block-qualified observation labels.
    pub fn csv(&self) -> String {
        let mut names = vec!["action".to_string()];
        for (block, len) in &self.blocks {
            for i in 0..*len {
                names.push(format!("{block}_{i}"));
            }
        }
        let cols: Vec<&str> = names.iter().map(String::as_str).collect();
        let mut table = CsvTable::new(&cols);
        for (a, row) in self.matrix.iter().enumerate() {
            let mut cells = vec![a.to_string()];
            cells.extend(row.iter().map(|v| fmt_f64(*v)));
            table.row(&cells);
        }
        table.contents().to_string()
    }

    pub fn block_csv(&self) -> String {
        let mut table = CsvTable::new(&["block", "saliency"]);
        for ((block, _), mean) in self.blocks.iter().zip(&self.block_means) {
            table.row(&[block.clone(), fmt_f64(*mean)]);
        }
        table.contents().to_string()
    }

    pub fn summary(&self) -> String {
        let mut s = format!(
            "saliency ({}) over {} control steps, seed {}\n",
            self.aggregation.label(),
            self.steps,
            self.seed
        );
        for ((block, _), mean) in self.blocks.iter().zip(&self.block_means) {
            s.push_str(&format!("{block}: {}\n", fmt_f64(*mean)));
        }
        s
    }

    /// Mean saliency of one named block.
    pub fn block_mean(&self, name: &str) -> Option<f64> {
        self.blocks
            .iter()
            .position(|(b, _)| b == name)
            .map(|i| self.block_means[i])
    }
}

/// Rolls the policy's mean action for `duration` seconds and aggregates
/// absolute input Jacobians at every control step.
pub fn jacobian_saliency(
    policy: &PolicyNetwork,
    cfg: &EnvConfig,
    duration: f64,
    seed: u64,
    aggregation: Aggregation,
) -> Result<SaliencyReport> {
    if !(duration > 0.0) {
        return Err(Error::Config(
            "saliency rollout duration must be > 0".into(),
        ));
    }
    let mut env = Environment::new(rollout_config(cfg, seed, 0), seed, 0)?;
    if policy.obs_dim() != env.obs_dim() {
        return Err(Error::Config(format!(
            "policy expects {} observation dims, environment produces {}",
            policy.obs_dim(),
            env.obs_dim()
        )));
    }
    let dim = env.obs_dim();
    let steps = (duration * cfg.control_freq).round() as u64;
    let mut acc = vec![vec![0.0; dim]; N_JOINTS];
    let mut count = 0usize;
    let mut obs = env.observation();
    let mut cache = ForwardCache::default();
    for _ in 0..steps {
        let jac = policy.input_jacobian(&obs);
        for (acc_row, jac_row) in acc.iter_mut().zip(&jac) {
            for (a, j) in acc_row.iter_mut().zip(jac_row) {
                match aggregation {
                    Aggregation::MeanAbs => *a += j.abs(),
                    Aggregation::MaxAbs => *a = a.max(j.abs()),
                }
            }
        }
        count += 1;
        let action = policy.mean(&obs, &mut cache);
        let step = env.step(&action)?;
        obs = step.observation;
        if step.done {
            break;
        }
    }
    if aggregation == Aggregation::MeanAbs {
        for row in &mut acc {
            for v in row {
                *v /= count as f64;
            }
        }
    }

    let blocks = observation_blocks(&cfg.obs);
    let mut block_means = Vec::with_capacity(blocks.len());
    let mut col = 0usize;
    for (_, len) in &blocks {
        let mut sum = 0.0;
        for row in &acc {
            for v in &row[col..col + len] {
                sum += v;
            }
        }
        block_means.push(sum / (N_JOINTS * len) as f64);
        col += len;
    }
    Ok(SaliencyReport {
        matrix: acc,
        blocks,
        block_means,
        steps: count,
        aggregation,
        seed,
    })
}
