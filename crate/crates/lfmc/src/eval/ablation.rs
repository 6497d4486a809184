//! Success-rate grid over {control frequency} x {history depth} x
//! {domain randomization} x {terrain kind}.

use crate::csvio::{fmt_f64, CsvTable};
use crate::env::{EnvConfig, TerrainSource};
use crate::policy::PolicyNetwork;
use crate::sim::TerrainKind;
use crate::Result;

use super::success_rate;

/// One policy variant in the grid. `policy: None` marks a checkpoint that
/// could not be produced or loaded; its cells come back absent.
pub struct GridPolicy {
    pub control_freq: f64,
    pub history: usize,
    pub domain_rand: bool,
    pub policy: Option<PolicyNetwork>,
}

#[derive(Debug, Clone)]
pub struct AblationCell {
    pub control_freq: f64,
    pub history: usize,
    pub domain_rand: bool,
    pub terrain: TerrainKind,
    /// Absent when the grid had no policy for this variant.
    pub success_rate: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct AblationTable {
    pub cells: Vec<AblationCell>,
    pub rollouts: usize,
    pub horizon_seconds: f64,
    pub seed: u64,
}

impl AblationTable {
    pub fn csv(&self) -> String {
        let mut table = CsvTable::new(&[
            "control_freq",
            "history",
            "domain_rand",
            "terrain",
            "success_rate",
        ]);
        for cell in &self.cells {
            table.row(&[
                fmt_f64(cell.control_freq),
                cell.history.to_string(),
                if cell.domain_rand { "on" } else { "off" }.to_string(),
                cell.terrain.to_string(),
                cell.success_rate
                    .map_or_else(|| "absent".to_string(), fmt_f64),
            ]);
        }
        table.contents().to_string()
    }

    pub fn summary(&self) -> String {
        let absent = self
            .cells
            .iter()
            .filter(|c| c.success_rate.is_none())
            .count();
        format!(
            "ablation grid: {} cells ({} absent), {} rollouts of {} s each, seed {}\n",
            self.cells.len(),
            absent,
            self.rollouts,
            fmt_f64(self.horizon_seconds),
            self.seed
        )
    }
}

/// Environment config a grid variant is evaluated under: its own control
/// frequency and history depth, DR toggled, terrain kind swapped in. The
/// per-rollout terrain surfaces then derive from the analysis seed, so every
/// variant sees identical surfaces on the same terrain kind.
fn cell_config(base: &EnvConfig, entry: &GridPolicy, terrain: TerrainKind) -> EnvConfig {
    let mut cfg = base.clone();
    cfg.control_freq = entry.control_freq;
    cfg.obs.history = entry.history;
    cfg.domain_rand = entry
        .domain_rand
        .then(|| base.domain_rand.clone().unwrap_or_default());
    cfg.terrain = TerrainSource::Generate {
        kind: terrain,
        seed: 0,
    };
    cfg
}

/// Evaluates every grid variant on every terrain kind. A missing policy
/// marks its cells absent; the run continues.
pub fn ablation_table(
    grid: &[GridPolicy],
    terrains: &[TerrainKind],
    base: &EnvConfig,
    rollouts: usize,
    horizon_seconds: f64,
    seed: u64,
    pool: Option<&rayon::ThreadPool>,
) -> Result<AblationTable> {
    let mut cells = Vec::with_capacity(grid.len() * terrains.len());
    for entry in grid {
        for &terrain in terrains {
            let sr = match &entry.policy {
                Some(policy) => {
                    let cfg = cell_config(base, entry, terrain);
                    Some(
                        success_rate(policy, &cfg, rollouts, horizon_seconds, seed, pool)?
                            .success_rate,
                    )
                }
                None => None,
            };
            cells.push(AblationCell {
                control_freq: entry.control_freq,
                history: entry.history,
                domain_rand: entry.domain_rand,
                terrain,
                success_rate: sr,
            });
        }
    }
    Ok(AblationTable {
        cells,
        rollouts,
        horizon_seconds,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::super::test_support::*;
    use super::*;

    #[test]
    fn single_cell_matches_a_direct_success_rate() {
        let base = quiet_config(10.0);
        let policy = standing_policy(&base);
        let direct = success_rate(&policy, &base, 4, 1.0, 21, None)
            .unwrap()
            .success_rate;
        let grid = [GridPolicy {
            control_freq: 10.0,
            history: 0,
            domain_rand: false,
            policy: Some(standing_policy(&base)),
        }];
        let table = ablation_table(&grid, &[TerrainKind::Flat], &base, 4, 1.0, 21, None).unwrap();
        assert_eq!(table.cells.len(), 1);
        assert_eq!(table.cells[0].success_rate, Some(direct));
    }

    #[test]
    fn missing_checkpoint_yields_absent_cells_and_the_run_continues() {
        let base = quiet_config(10.0);
        let grid = [
            GridPolicy {
                control_freq: 10.0,
                history: 0,
                domain_rand: false,
                policy: None,
            },
            GridPolicy {
                control_freq: 10.0,
                history: 0,
                domain_rand: false,
                policy: Some(standing_policy(&base)),
            },
        ];
        let table = ablation_table(
            &grid,
            &[TerrainKind::Flat, TerrainKind::Perlin],
            &base,
            2,
            0.5,
            3,
            None,
        )
        .unwrap();
        assert_eq!(table.cells.len(), 4);
        assert!(table.cells[0].success_rate.is_none());
        assert!(table.cells[1].success_rate.is_none());
        assert!(table.cells[2].success_rate.is_some());
        assert!(table.cells[3].success_rate.is_some());
        assert!(table.csv().contains("absent"));
    }

    #[test]
    fn table_is_reproducible() {
        let base = quiet_config(10.0);
        let grid = [GridPolicy {
            control_freq: 10.0,
            history: 0,
            domain_rand: true,
            policy: Some(standing_policy(&base)),
        }];
        let a = ablation_table(&grid, &[TerrainKind::Perlin], &base, 3, 0.5, 9, None).unwrap();
        let b = ablation_table(&grid, &[TerrainKind::Perlin], &base, 3, 0.5, 9, None).unwrap();
        assert_eq!(a.csv(), b.csv());
    }
}
