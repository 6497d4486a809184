//! Joint-level actuation: PD tracking of position setpoints, transport
//! latency on the setpoint stream, and an optional first-order torque lag.
//!
//! The PD loop runs at a fixed rate regardless of how often the policy
//! publishes new setpoints. Latency is quantized to whole actuation steps so
//! maturity checks are integer comparisons, never float equality.

use std::collections::VecDeque;

use crate::sim::N_JOINTS;
use crate::{Error, Result};

/// Setpoint vector in joint order.
pub type Setpoint = [f64; N_JOINTS];

/// Actuation-side parameters, shared by training and evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActuationConfig {
    /// PD update rate (Hz). The simulation substep rate equals this.
    pub rate: f64,
    /// Proportional gain (N m / rad).
    pub kp: f64,
    /// Derivative gain (N m s / rad).
    pub kd: f64,
    /// Transport delay between policy output and PD input (s).
    pub latency: f64,
    /// Torque lag time constant (s); zero disables the filter.
    pub lag_time_constant: f64,
}

impl Default for ActuationConfig {
    fn default() -> Self {
        Self {
            rate: 400.0,
            kp: 80.0,
            kd: 2.0,
            latency: 0.0,
            lag_time_constant: 0.0,
        }
    }
}

impl ActuationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rate > 0.0) {
            return Err(Error::Config("actuation rate must be > 0".into()));
        }
        for (name, v) in [
            ("kp", self.kp),
            ("kd", self.kd),
            ("latency", self.latency),
            ("lag_time_constant", self.lag_time_constant),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::Config(format!("{name} must be finite and >= 0")));
            }
        }
        Ok(())
    }

    /// Latency rounded to whole actuation steps.
    pub fn latency_steps(&self) -> u64 {
        (self.latency * self.rate).round() as u64
    }
}

/// PD torque with symmetric clamping, elementwise over joints.
pub fn pd_torque(
    kp: f64,
    kd: f64,
    target: &Setpoint,
    q: &Setpoint,
    qd: &Setpoint,
    limit: f64,
) -> Setpoint {
    let mut tau = [0.0; N_JOINTS];
    for j in 0..N_JOINTS {
        tau[j] = (kp * (target[j] - q[j]) - kd * qd[j]).clamp(-limit, limit);
    }
    tau
}

/// Delays a setpoint stream by a fixed number of actuation steps.
///
/// `query(step)` returns the newest setpoint whose push step matured, or the
/// fallback before anything matured. Entries older than the returned one are
/// dropped, so memory stays bounded by the number of pushes per delay window.
#[derive(Debug, Clone)]
pub struct LatencyBuffer {
    delay_steps: u64,
    fallback: Setpoint,
    entries: VecDeque<(u64, Setpoint)>,
}

impl LatencyBuffer {
    pub fn new(delay_steps: u64, fallback: Setpoint) -> Self {
        Self {
            delay_steps,
            fallback,
            entries: VecDeque::new(),
        }
    }

    /// Records a setpoint published at `step`. Steps must not decrease.
    pub fn push(&mut self, step: u64, setpoint: Setpoint) {
        debug_assert!(
            self.entries.back().is_none_or(|(s, _)| *s <= step),
            "setpoint pushes must be in step order"
        );
        self.entries.push_back((step, setpoint));
    }

    /// Setpoint visible to the PD loop at `step`.
    pub fn query(&mut self, step: u64) -> Setpoint {
        // Drop entries superseded by a newer matured one.
        while self.entries.len() >= 2 {
            let second_matured = self.entries[1].0 + self.delay_steps <= step;
            if second_matured {
                self.entries.pop_front();
            } else {
                break;
            }
        }
        match self.entries.front() {
            Some((s, v)) if s + self.delay_steps <= step => *v,
            _ => self.fallback,
        }
    }

    pub fn reset(&mut self) {
        self.entries.clear();
    }
}

/// First-order low-pass on the torque vector: `y += alpha (u - y)` with
/// `alpha = dt / T`, clamped to 1 so time constants shorter than a step
/// degrade to a pass-through instead of overshooting.
#[derive(Debug, Clone)]
pub struct ActuatorLag {
    alpha: f64,
    state: Setpoint,
}

impl ActuatorLag {
    pub fn new(time_constant: f64, dt: f64) -> Self {
        let alpha = if time_constant <= 0.0 {
            1.0
        } else {
            (dt / time_constant).min(1.0)
        };
        Self {
            alpha,
            state: [0.0; N_JOINTS],
        }
    }

    pub fn apply(&mut self, input: &Setpoint) -> Setpoint {
        for j in 0..N_JOINTS {
            self.state[j] += self.alpha * (input[j] - self.state[j]);
        }
        self.state
    }

    pub fn reset(&mut self) {
        self.state = [0.0; N_JOINTS];
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    const NOM: Setpoint = [0.4, -0.8, -0.4, 0.8];

    #[test]
    fn pd_torque_hand_values() {
        let q = [0.3, -0.8, -0.4, 0.8];
        let qd = [0.0, 1.0, 0.0, 0.0];
        let tau = pd_torque(80.0, 2.0, &NOM, &q, &qd, 40.0);
        assert_relative_eq!(tau[0], 8.0, epsilon = 1e-12);
        assert_relative_eq!(tau[1], -2.0, epsilon = 1e-12);
        assert_eq!(tau[2], 0.0);
        // Large error saturates at the limit.
        let q = [-1.0, -0.8, -0.4, 0.8];
        let tau = pd_torque(80.0, 2.0, &NOM, &q, &[0.0; 4], 40.0);
        assert_eq!(tau[0], 40.0);
    }

    #[test]
    fn twenty_ms_is_eight_steps_at_400hz() {
        let cfg = ActuationConfig {
            latency: 0.020,
            ..ActuationConfig::default()
        };
        assert_eq!(cfg.latency_steps(), 8);
    }

    #[test]
    fn buffer_returns_fallback_until_maturity() {
        let mut buf = LatencyBuffer::new(8, NOM);
        let a = [1.0, 1.0, 1.0, 1.0];
        buf.push(0, a);
        for step in 0..8 {
            assert_eq!(buf.query(step), NOM, "step {step} still immature");
        }
        assert_eq!(buf.query(8), a);
        assert_eq!(buf.query(100), a);
    }

    #[test]
    fn zero_delay_is_immediate() {
        let mut buf = LatencyBuffer::new(0, NOM);
        let a = [0.1, 0.2, 0.3, 0.4];
        buf.push(5, a);
        assert_eq!(buf.query(5), a);
    }

    #[test]
    fn newest_matured_setpoint_wins() {
        let mut buf = LatencyBuffer::new(8, NOM);
        let a = [1.0; 4];
        let b = [2.0; 4];
        buf.push(0, a);
        buf.push(4, b);
        assert_eq!(buf.query(8), a);
        assert_eq!(buf.query(11), a);
        assert_eq!(buf.query(12), b);
    }

    #[test]
    fn delaying_pushes_shifts_outputs() {
        // Feeding the same stream k steps later yields the same outputs
        // k steps later.
        let stream: Vec<(u64, Setpoint)> = (0..10).map(|i| (i * 3, [i as f64; 4])).collect();
        let k = 5;
        let mut base = LatencyBuffer::new(4, NOM);
        let mut shifted = LatencyBuffer::new(4, NOM);
        for (s, v) in &stream {
            base.push(*s, *v);
            shifted.push(*s + k, *v);
        }
        for step in 0..40 {
            assert_eq!(base.query(step), shifted.query(step + k));
        }
    }

    #[test]
    fn lag_step_response_matches_discrete_form() {
        // y_n = 1 - (1 - alpha)^n for a unit step from rest.
        let dt = 0.0025;
        let t_lag = 0.05;
        let mut lag = ActuatorLag::new(t_lag, dt);
        let alpha = dt / t_lag;
        let u = [1.0; N_JOINTS];
        let mut y = [0.0; N_JOINTS];
        for n in 1..=40 {
            y = lag.apply(&u);
            let expect = 1.0 - (1.0 - alpha).powi(n);
            assert_relative_eq!(y[0], expect, epsilon = 1e-12);
        }
        // After one time constant (20 steps of 40 run): near 1 - 1/e.
        let _ = y;
        let mut lag = ActuatorLag::new(t_lag, dt);
        let mut last = [0.0; N_JOINTS];
        for _ in 0..20 {
            last = lag.apply(&u);
        }
        assert!((last[0] - 0.632).abs() < 0.02, "got {}", last[0]);
    }

    #[test]
    fn zero_time_constant_is_identity() {
        let mut lag = ActuatorLag::new(0.0, 0.0025);
        let u = [3.0, -1.0, 0.5, 2.0];
        assert_eq!(lag.apply(&u), u);
        // Sub-step time constants clamp to identity as well.
        let mut lag = ActuatorLag::new(0.001, 0.0025);
        assert_eq!(lag.apply(&u), u);
    }
}
