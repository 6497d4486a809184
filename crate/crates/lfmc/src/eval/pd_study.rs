//! Setpoint-update-rate toy study on a 1-DoF double integrator.
//!
//! One plant per proportional gain tracks the same zero-order-held sinusoid.
//! Just before each setpoint change the positions of all plants are compared;
//! the spread across gains measures how much the reached state depends on
//! the gain. Slow updates give every gain time to converge to the held
//! setpoint, so the spread shrinks as the update rate drops.

use crate::csvio::{fmt_f64, CsvTable};
use crate::{Error, Result};

#[derive(Debug, Clone)]
pub struct PdStudyConfig {
    /// Plant inertia (kg m^2).
    pub inertia: f64,
    pub kd: f64,
    pub kp_list: Vec<f64>,
    /// Setpoint update frequencies to compare (Hz).
    pub update_freqs: Vec<f64>,
    /// Sinusoid amplitude (rad) and frequency (Hz).
    pub amplitude: f64,
    pub signal_freq: f64,
    pub duration: f64,
    /// Integration step (s).
    pub dt: f64,
}

impl Default for PdStudyConfig {
    fn default() -> Self {
        Self {
            inertia: 0.02,
            kd: 2.0,
            kp_list: vec![50.0, 65.0, 80.0, 95.0],
            update_freqs: vec![5.0, 200.0],
            amplitude: 0.5,
            signal_freq: 1.0,
            duration: 4.0,
            dt: 0.0025,
        }
    }
}

impl PdStudyConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("inertia", self.inertia),
            ("amplitude", self.amplitude),
            ("signal_freq", self.signal_freq),
            ("duration", self.duration),
            ("dt", self.dt),
        ] {
            if !(v > 0.0) {
                return Err(Error::Config(format!("pd study {name} must be > 0")));
            }
        }
        if self.kp_list.is_empty() || self.update_freqs.is_empty() {
            return Err(Error::Config(
                "pd study needs at least one gain and one update frequency".into(),
            ));
        }
        for f in &self.update_freqs {
            let stride = 1.0 / (f * self.dt);
            if stride < 1.0 - 1e-9 || (stride - stride.round()).abs() > 1e-9 {
                return Err(Error::Config(format!(
                    "update frequency {f} Hz does not align with dt = {} s",
                    self.dt
                )));
            }
        }
        Ok(())
    }
}

/// Per-substep tracking trace of one gain.
#[derive(Debug, Clone)]
pub struct PdTrace {
    pub kp: f64,
    pub time: Vec<f64>,
    pub position: Vec<f64>,
    pub setpoint: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct PdFrequencyResult {
    pub update_freq: f64,
    pub traces: Vec<PdTrace>,
    /// Mean over update instants of max-min position across gains.
    pub mean_spread: f64,
    pub max_spread: f64,
}

#[derive(Debug, Clone)]
pub struct PdStudyReport {
    pub results: Vec<PdFrequencyResult>,
    pub config: PdStudyConfig,
}

impl PdStudyReport {
    pub fn traces_csv(&self) -> String {
        let mut table = CsvTable::new(&["update_freq", "kp", "time", "setpoint", "position"]);
        for result in &self.results {
            for trace in &result.traces {
                for i in 0..trace.time.len() {
                    table.row(&[
                        fmt_f64(result.update_freq),
                        fmt_f64(trace.kp),
                        fmt_f64(trace.time[i]),
                        fmt_f64(trace.setpoint[i]),
                        fmt_f64(trace.position[i]),
                    ]);
                }
            }
        }
        table.contents().to_string()
    }

    pub fn spread_csv(&self) -> String {
        let mut table = CsvTable::new(&["update_freq", "mean_spread", "max_spread"]);
        for result in &self.results {
            table.row(&[
                fmt_f64(result.update_freq),
                fmt_f64(result.mean_spread),
                fmt_f64(result.max_spread),
            ]);
        }
        table.contents().to_string()
    }

    pub fn summary(&self) -> String {
        let mut s = format!(
            "pd toy study: inertia {}, kd {}, kp {:?}, amplitude {}\n",
            fmt_f64(self.config.inertia),
            fmt_f64(self.config.kd),
            self.config.kp_list,
            fmt_f64(self.config.amplitude)
        );
        for result in &self.results {
            s.push_str(&format!(
                "{} Hz updates: mean inter-gain spread {} (max {})\n",
                fmt_f64(result.update_freq),
                fmt_f64(result.mean_spread),
                fmt_f64(result.max_spread)
            ));
        }
        s
    }

    pub fn spread_at(&self, update_freq: f64) -> Option<f64> {
        self.results
            .iter()
            .find(|r| r.update_freq == update_freq)
            .map(|r| r.mean_spread)
    }
}

/// Simulates every gain against a shared held sinusoid at each update
/// frequency. Spreads are sampled just before each setpoint change, so they
/// measure the state reached under the previous held value.
pub fn pd_toy_study(cfg: &PdStudyConfig) -> Result<PdStudyReport> {
    cfg.validate()?;
    let n = (cfg.duration / cfg.dt).round() as usize;
    let mut results = Vec::with_capacity(cfg.update_freqs.len());
    for &freq in &cfg.update_freqs {
        let stride = (1.0 / (freq * cfg.dt)).round() as usize;
        let gains = cfg.kp_list.len();
        let mut q = vec![0.0f64; gains];
        let mut v = vec![0.0f64; gains];
        let mut traces: Vec<PdTrace> = cfg
            .kp_list
            .iter()
            .map(|&kp| PdTrace {
                kp,
                time: Vec::with_capacity(n),
                position: Vec::with_capacity(n),
                setpoint: Vec::with_capacity(n),
            })
            .collect();
        let mut spreads = Vec::new();
        let mut held = 0.0;
        for i in 0..n {
            if i % stride == 0 {
                if i > 0 {
                    let lo = q.iter().cloned().fold(f64::INFINITY, f64::min);
                    let hi = q.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                    spreads.push(hi - lo);
                }
                let t = i as f64 * cfg.dt;
                held = cfg.amplitude * (2.0 * std::f64::consts::PI * cfg.signal_freq * t).sin();
            }
            for (g, &kp) in cfg.kp_list.iter().enumerate() {
                let torque = kp * (held - q[g]) - cfg.kd * v[g];
                v[g] += torque / cfg.inertia * cfg.dt;
                q[g] += v[g] * cfg.dt;
                traces[g].time.push((i + 1) as f64 * cfg.dt);
                traces[g].position.push(q[g]);
                traces[g].setpoint.push(held);
            }
        }
        let mean_spread = if spreads.is_empty() {
            0.0
        } else {
            spreads.iter().sum::<f64>() / spreads.len() as f64
        };
        let max_spread = spreads.iter().cloned().fold(0.0, f64::max);
        results.push(PdFrequencyResult {
            update_freq: freq,
            traces,
            mean_spread,
            max_spread,
        });
    }
    Ok(PdStudyReport {
        results,
        config: cfg.clone(),
    })
}
