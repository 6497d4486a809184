//! Observation assembly: proprioception, optional terrain scan, optional
//! joint-state history sampled on its own clock.

use std::collections::VecDeque;

use crate::sim::{RobotState, Terrain, N_JOINTS};
use crate::{Error, Result};

/// Joint positions and velocities captured at one history tick.
pub type HistorySample = [f64; 2 * N_JOINTS];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObsMode {
    Blind,
    Perceptive,
}

/// Shape of the observation vector. The dimension is a pure function of
/// these fields and is fixed for the lifetime of an environment.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationSpec {
    pub mode: ObsMode,
    /// Number of past joint-state samples appended (H).
    pub history: usize,
    /// History sampling frequency f_j (Hz).
    pub history_freq: f64,
    /// Terrain scan half-span ahead/behind the base (m).
    pub scan_half_span: f64,
    /// Terrain scan sample spacing (m).
    pub scan_resolution: f64,
}

impl Default for ObservationSpec {
    fn default() -> Self {
        Self {
            mode: ObsMode::Blind,
            history: 0,
            history_freq: 200.0,
            scan_half_span: 0.8,
            scan_resolution: 0.1,
        }
    }
}

impl ObservationSpec {
    /// Proprioceptive block: gravity (2) + q_j (4) + base velocity (2) +
    /// pitch rate (1) + qdot_j (4) + setpoint error (4) + command (1).
    pub const BASE_DIM: usize = 18;

    /// Terrain samples per scan.
    pub fn scan_len(&self) -> usize {
        (2.0 * self.scan_half_span / self.scan_resolution).round() as usize + 1
    }

    /// Total observation dimension.
    pub fn dim(&self) -> usize {
        let scan = match self.mode {
            ObsMode::Blind => 0,
            ObsMode::Perceptive => self.scan_len(),
        };
        Self::BASE_DIM + scan + self.history * 2 * N_JOINTS
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.history_freq > 0.0) {
            return Err(Error::Config("history_freq must be > 0".into()));
        }
        if !(self.scan_resolution > 0.0) || !(self.scan_half_span > 0.0) {
            return Err(Error::Config("scan geometry must be > 0".into()));
        }
        Ok(())
    }
}

/// Ring of joint-state samples, newest first. Pre-warm reads are zero so the
/// observation dimension never depends on elapsed time.
#[derive(Debug, Clone)]
pub struct HistoryBuffer {
    samples: VecDeque<HistorySample>,
    capacity: usize,
}

impl HistoryBuffer {
    /// `depth` is the largest lookback that will be read (H); one extra slot
    /// holds the current-tick sample, which reads skip.
    pub fn new(depth: usize) -> Self {
        Self {
            samples: VecDeque::with_capacity(depth + 1),
            capacity: depth + 1,
        }
    }

    pub fn push(&mut self, state: &RobotState) {
        let q = state.joint_positions();
        let v = state.joint_velocities();
        let mut sample = [0.0; 2 * N_JOINTS];
        sample[..N_JOINTS].copy_from_slice(&q);
        sample[N_JOINTS..].copy_from_slice(&v);
        if self.samples.len() == self.capacity {
            self.samples.pop_back();
        }
        self.samples.push_front(sample);
    }

    /// `k`-th newest sample; `k = 0` is the current tick. Zeros before warm-up.
    pub fn read(&self, k: usize) -> HistorySample {
        self.samples.get(k).copied().unwrap_or([0.0; 2 * N_JOINTS])
    }

    pub fn reset(&mut self) {
        self.samples.clear();
    }
}

/// Terrain heights relative to the base, sampled at fixed world-x offsets
/// along the heading axis.
pub fn terrain_scan(spec: &ObservationSpec, state: &RobotState, terrain: &Terrain) -> Vec<f64> {
    let n = spec.scan_len();
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let offset = -spec.scan_half_span + i as f64 * spec.scan_resolution;
        out.push(terrain.height(state.q[0] + offset) - state.q[1]);
    }
    out
}

/// Builds the observation vector. `last_commanded` is the most recent
/// setpoint the policy issued (pre-latency); the setpoint-error block tells
/// the policy how far the plant is from what it asked for.
pub fn observe(
    spec: &ObservationSpec,
    state: &RobotState,
    history: &HistoryBuffer,
    command: f64,
    last_commanded: &[f64; N_JOINTS],
    terrain: &Terrain,
) -> Vec<f64> {
    let mut obs = Vec::with_capacity(spec.dim());
    let pitch = state.q[2];
    let (s, c) = pitch.sin_cos();
    // World gravity direction (0, -1) expressed in the base frame.
    obs.push(-s);
    obs.push(-c);
    obs.extend_from_slice(&state.joint_positions());
    // Base linear velocity rotated into the base frame.
    let (vx, vz) = (state.v[0], state.v[1]);
    obs.push(c * vx + s * vz);
    obs.push(-s * vx + c * vz);
    obs.push(state.v[2]);
    obs.extend_from_slice(&state.joint_velocities());
    let q = state.joint_positions();
    for j in 0..N_JOINTS {
        obs.push(last_commanded[j] - q[j]);
    }
    obs.push(command);
    if spec.mode == ObsMode::Perceptive {
        obs.extend(terrain_scan(spec, state, terrain));
    }
    // Lookback starts at 1: the current-tick sample is already visible
    // through the live joint blocks above.
    for k in 1..=spec.history {
        obs.extend_from_slice(&history.read(k));
    }
    debug_assert_eq!(obs.len(), spec.dim());
    obs
}
