//! The MDP wrapper: turns the simulator, actuation stack and reward into a
//! step/reset interface for training and evaluation.
//!
//! One control step runs `round(f_a / f_m)` simulation substeps. Within a
//! step the PD tracker follows the (possibly delayed) setpoint stream while
//! reward accrues per substep; termination is checked after every substep
//! and cuts the step short.

pub mod observe;
pub mod reward;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::actuation::{pd_torque, ActuationConfig, ActuatorLag, LatencyBuffer, Setpoint};
use crate::csvio::{fmt_f64, CsvTable};
use crate::seed;
use crate::sim::{
    contact_flags, dynamics_step, generate_terrain, RobotModel, RobotState, Terrain, TerrainKind,
    TerrainParams, N_JOINTS,
};
use crate::{Error, Result};

pub use observe::{observe, terrain_scan, HistoryBuffer, ObsMode, ObservationSpec};
pub use reward::{reward_step, RewardConfig, RewardTerms};

/// Pitch magnitude beyond which the episode ends (rad).
pub const PITCH_LIMIT: f64 = 0.4 * std::f64::consts::PI;
/// Minimum height of the base endpoints above terrain (m).
pub const BASE_CLEARANCE: f64 = 0.05;
/// Minimum knee height above terrain (m).
pub const KNEE_CLEARANCE: f64 = 0.02;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TerminationReason {
    /// |pitch| beyond the orientation limit.
    Orientation,
    /// A base endpoint dropped to ground clearance.
    BaseContact,
    /// A knee dropped to ground clearance.
    KneeContact,
    /// A joint position left its limit interval.
    JointLimit,
}

impl TerminationReason {
    pub fn label(&self) -> &'static str {
        match self {
            Self::Orientation => "orientation",
            Self::BaseContact => "base_contact",
            Self::KneeContact => "knee_contact",
            Self::JointLimit => "joint_limit",
        }
    }
}

/// Episode-end test. Flat priority order: orientation, base, knee, joints.
pub fn terminate(
    model: &RobotModel,
    state: &RobotState,
    terrain: &Terrain,
) -> Option<TerminationReason> {
    if state.q[2].abs() > PITCH_LIMIT {
        return Some(TerminationReason::Orientation);
    }
    let kin = crate::sim::Kinematics::compute(model, &state.q, &state.v);
    for leg in 0..2 {
        let hip = kin.hips[leg];
        if hip.y - terrain.height(hip.x) <= BASE_CLEARANCE {
            return Some(TerminationReason::BaseContact);
        }
    }
    for leg in 0..2 {
        let knee = kin.knees[leg];
        if knee.y - terrain.height(knee.x) <= KNEE_CLEARANCE {
            return Some(TerminationReason::KneeContact);
        }
    }
    let q = state.joint_positions();
    for j in 0..N_JOINTS {
        let [lo, hi] = model.joint_limits[j];
        if q[j] < lo || q[j] > hi {
            return Some(TerminationReason::JointLimit);
        }
    }
    None
}

/// Uniform heading-velocity command.
pub fn sample_command(rng: &mut ChaCha8Rng, range: [f64; 2]) -> f64 {
    if range[0] == range[1] {
        range[0]
    } else {
        rng.random_range(range[0]..=range[1])
    }
}

/// Per-episode physical perturbations. All ranges are inclusive; draws
/// happen at reset in field order, which is part of the reproducibility
/// contract.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainRand {
    /// Multiplier on every link mass and inertia.
    pub mass_scale: [f64; 2],
    /// Ground friction coefficient, replacing the model value.
    pub friction: [f64; 2],
    /// Multiplier on both PD gains.
    pub gain_scale: [f64; 2],
    /// Actuation latency (s), replacing the configured value.
    pub latency: [f64; 2],
}

impl Default for DomainRand {
    fn default() -> Self {
        Self {
            mass_scale: [0.9, 1.1],
            friction: [0.4, 1.0],
            gain_scale: [0.9, 1.1],
            latency: [0.0, 0.020],
        }
    }
}

impl DomainRand {
    pub fn validate(&self) -> Result<()> {
        let ordered = [
            ("mass_scale", self.mass_scale),
            ("friction", self.friction),
            ("gain_scale", self.gain_scale),
            ("latency", self.latency),
        ];
        for (name, [lo, hi]) in ordered {
            if !(lo <= hi) {
                return Err(Error::Config(format!("{name} range must be ordered")));
            }
            if !(lo >= 0.0) {
                return Err(Error::Config(format!("{name} range must be >= 0")));
            }
        }
        if !(self.mass_scale[0] > 0.0) || !(self.gain_scale[0] > 0.0) {
            return Err(Error::Config(
                "scale ranges must be strictly positive".into(),
            ));
        }
        Ok(())
    }
}

/// Where an environment's terrain comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum TerrainSource {
    Generate { kind: TerrainKind, seed: u64 },
    Fixed(Terrain),
}

/// Everything needed to build one environment instance.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvConfig {
    /// Motion control frequency f_m (Hz): how often the policy acts.
    pub control_freq: f64,
    pub model: RobotModel,
    pub actuation: ActuationConfig,
    pub obs: ObservationSpec,
    pub reward: RewardConfig,
    pub terrain: TerrainSource,
    pub terrain_params: TerrainParams,
    /// Heading-velocity command range (m/s), resampled each episode.
    pub command_range: [f64; 2],
    /// Uniform joint perturbation at reset (rad, +/-).
    pub init_joint_jitter: f64,
    /// Uniform extra base height at reset (m, one-sided).
    pub init_height_jitter: f64,
    pub domain_rand: Option<DomainRand>,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            control_freq: 10.0,
            model: RobotModel::default(),
            actuation: ActuationConfig::default(),
            obs: ObservationSpec::default(),
            reward: RewardConfig::default(),
            terrain: TerrainSource::Generate {
                kind: TerrainKind::Flat,
                seed: 0,
            },
            terrain_params: TerrainParams::default(),
            command_range: [-1.0, 1.5],
            init_joint_jitter: 0.1,
            init_height_jitter: 0.05,
            domain_rand: None,
        }
    }
}

impl EnvConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.control_freq > 0.0) {
            return Err(Error::Config("control_freq must be > 0".into()));
        }
        if self.control_freq > self.actuation.rate {
            return Err(Error::Config(format!(
                "control_freq {} exceeds actuation rate {}",
                self.control_freq, self.actuation.rate
            )));
        }
        if self.obs.history_freq > self.actuation.rate {
            return Err(Error::Config("history_freq exceeds actuation rate".into()));
        }
        if !(self.command_range[0] <= self.command_range[1]) {
            return Err(Error::Config("command_range must be ordered".into()));
        }
        if !(self.init_joint_jitter >= 0.0) || !(self.init_height_jitter >= 0.0) {
            return Err(Error::Config("init jitter must be >= 0".into()));
        }
        self.model.validate()?;
        self.actuation.validate()?;
        self.obs.validate()?;
        self.reward.validate()?;
        if let Some(dr) = &self.domain_rand {
            dr.validate()?;
        }
        Ok(())
    }

    /// Simulation substeps per control step.
    pub fn substeps_per_control(&self) -> u32 {
        (self.actuation.rate / self.control_freq).round() as u32
    }
}

/// Result of one control step.
#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub observation: Vec<f64>,
    pub reward: f64,
    pub done: bool,
    pub reason: Option<TerminationReason>,
}

/// One simulation substep, recorded when tracing is on.
#[derive(Debug, Clone)]
pub struct TraceRow {
    pub time: f64,
    pub state: RobotState,
    pub applied_setpoint: Setpoint,
    pub torque: Setpoint,
    pub reward: f64,
    pub contacts: [bool; 2],
    pub command: f64,
}

/// A single rollout instance: simulator state plus actuation buffers, reward
/// bookkeeping and its own rng stream. Owned by exactly one worker.
pub struct Environment {
    cfg: EnvConfig,
    /// Model actually simulated this episode (domain rand applies here).
    model: RobotModel,
    actuation: ActuationConfig,
    terms: RewardTerms,
    terrain: Terrain,
    state: RobotState,
    rng: ChaCha8Rng,
    command: f64,
    latency: LatencyBuffer,
    lag: Option<ActuatorLag>,
    history: HistoryBuffer,
    history_stride: u64,
    /// Setpoint the policy issued most recently (pre-latency).
    last_commanded: Setpoint,
    /// Setpoint signal value at the previous substep, for the smoothness term.
    prev_substep_action: Setpoint,
    substep_index: u64,
    control_steps: u64,
    done: bool,
    dt: f64,
    trace: Option<Vec<TraceRow>>,
}

impl Environment {
    /// Builds an environment whose rng stream is derived from
    /// `(root_seed, "env", index)`; `index` distinguishes parallel instances.
    pub fn new(cfg: EnvConfig, root_seed: u64, index: u64) -> Result<Self> {
        cfg.validate()?;
        let terrain = match &cfg.terrain {
            TerrainSource::Generate { kind, seed: s } => {
                generate_terrain(*kind, *s, &cfg.terrain_params)?
            }
            TerrainSource::Fixed(t) => t.clone(),
        };
        let terms = cfg.reward.resolve(cfg.control_freq, &cfg.model);
        let dt = 1.0 / cfg.actuation.rate;
        let history_stride = (cfg.actuation.rate / cfg.obs.history_freq).round().max(1.0) as u64;
        let rng = seed::rng(root_seed, "env", index);
        let mut env = Self {
            model: cfg.model.clone(),
            actuation: cfg.actuation,
            terms,
            terrain,
            state: RobotState::standing(&cfg.model, 0.0),
            rng,
            command: 0.0,
            latency: LatencyBuffer::new(cfg.actuation.latency_steps(), cfg.model.nominal_pose),
            lag: None,
            history: HistoryBuffer::new(cfg.obs.history),
            history_stride,
            last_commanded: cfg.model.nominal_pose,
            prev_substep_action: cfg.model.nominal_pose,
            substep_index: 0,
            control_steps: 0,
            done: false,
            dt,
            trace: None,
            cfg,
        };
        env.reset();
        Ok(env)
    }

    /// Starts a new episode. Draw order (domain rand, then initial pose,
    /// then command) is fixed; changing it changes every seeded run.
    pub fn reset(&mut self) -> Vec<f64> {
        self.model = self.cfg.model.clone();
        self.actuation = self.cfg.actuation;
        if let Some(dr) = &self.cfg.domain_rand {
            let ms = self.rng.random_range(dr.mass_scale[0]..=dr.mass_scale[1]);
            self.model.base_mass *= ms;
            self.model.base_inertia *= ms;
            self.model.upper_mass *= ms;
            self.model.upper_inertia *= ms;
            self.model.lower_mass *= ms;
            self.model.lower_inertia *= ms;
            self.model.contact.friction = self.rng.random_range(dr.friction[0]..=dr.friction[1]);
            let gs = self.rng.random_range(dr.gain_scale[0]..=dr.gain_scale[1]);
            self.actuation.kp *= gs;
            self.actuation.kd *= gs;
            self.actuation.latency = self.rng.random_range(dr.latency[0]..=dr.latency[1]);
        }

        let mut state = RobotState::standing(&self.model, 0.0);
        let jitter = self.cfg.init_joint_jitter;
        if jitter > 0.0 {
            for j in 3..7 {
                state.q[j] += self.rng.random_range(-jitter..=jitter);
            }
        }
        // Drop the robot onto the local ground level, never into it.
        let ground = self
            .terrain
            .height(state.q[0] - self.model.base_length / 2.0)
            .max(
                self.terrain
                    .height(state.q[0] + self.model.base_length / 2.0),
            );
        state.q[1] += ground;
        if self.cfg.init_height_jitter > 0.0 {
            state.q[1] += self.rng.random_range(0.0..=self.cfg.init_height_jitter);
        }
        self.state = state;
        self.command = sample_command(&mut self.rng, self.cfg.command_range);

        self.latency = LatencyBuffer::new(self.actuation.latency_steps(), self.model.nominal_pose);
        self.lag = (self.actuation.lag_time_constant > 0.0)
            .then(|| ActuatorLag::new(self.actuation.lag_time_constant, self.dt));
        self.history.reset();
        self.history.push(&self.state);
        self.last_commanded = self.model.nominal_pose;
        self.prev_substep_action = self.model.nominal_pose;
        self.substep_index = 0;
        self.control_steps = 0;
        self.done = false;
        if let Some(t) = &mut self.trace {
            t.clear();
        }
        self.observe_now()
    }

    /// Re-derives the rng stream from an explicit seed, then resets.
    pub fn reset_with_seed(&mut self, episode_seed: u64) -> Vec<f64> {
        self.rng = seed::rng(episode_seed, "episode", 0);
        self.reset()
    }

    /// Applies one policy action (desired joint positions) for one control
    /// step. Actions are clamped to the joint limits before use.
    pub fn step(&mut self, action: &Setpoint) -> Result<StepOutcome> {
        if self.done {
            return Err(Error::Contract(
                "step called on a terminated episode; reset first".into(),
            ));
        }
        if !action.iter().all(|a| a.is_finite()) {
            return Err(Error::EnvFault("non-finite action".into()));
        }
        let mut commanded = *action;
        for j in 0..N_JOINTS {
            let [lo, hi] = self.model.joint_limits[j];
            commanded[j] = commanded[j].clamp(lo, hi);
        }
        self.latency.push(self.substep_index, commanded);
        self.last_commanded = commanded;

        let mut total_reward = 0.0;
        let mut reason = None;
        for _ in 0..self.cfg.substeps_per_control() {
            let applied = self.latency.query(self.substep_index);
            let q = self.state.joint_positions();
            let qd = self.state.joint_velocities();
            let mut tau = pd_torque(
                self.actuation.kp,
                self.actuation.kd,
                &applied,
                &q,
                &qd,
                self.model.torque_limit,
            );
            if let Some(lag) = &mut self.lag {
                tau = lag.apply(&tau);
            }
            dynamics_step(&self.model, &mut self.state, &self.terrain, &tau, self.dt)?;
            self.substep_index += 1;
            if self.substep_index.is_multiple_of(self.history_stride) {
                self.history.push(&self.state);
            }
            let r = reward_step(
                &self.terms,
                &self.model,
                &self.state,
                &tau,
                &commanded,
                &self.prev_substep_action,
                self.command,
                self.dt,
            );
            self.prev_substep_action = commanded;
            total_reward += r;
            if let Some(t) = &mut self.trace {
                t.push(TraceRow {
                    time: self.state.time,
                    state: self.state.clone(),
                    applied_setpoint: applied,
                    torque: tau,
                    reward: r,
                    contacts: contact_flags(&self.model, &self.state, &self.terrain),
                    command: self.command,
                });
            }
            if let Some(r) = terminate(&self.model, &self.state, &self.terrain) {
                total_reward += self.terms.termination_penalty;
                reason = Some(r);
                break;
            }
        }
        self.control_steps += 1;
        self.done = reason.is_some();
        Ok(StepOutcome {
            observation: self.observe_now(),
            reward: total_reward,
            done: self.done,
            reason,
        })
    }

    fn observe_now(&self) -> Vec<f64> {
        observe(
            &self.cfg.obs,
            &self.state,
            &self.history,
            self.command,
            &self.last_commanded,
            &self.terrain,
        )
    }

    pub fn obs_dim(&self) -> usize {
        self.cfg.obs.dim()
    }

    /// Current observation (what `step` would hand back next).
    pub fn observation(&self) -> Vec<f64> {
        self.observe_now()
    }

    pub fn state(&self) -> &RobotState {
        &self.state
    }

    pub fn command(&self) -> f64 {
        self.command
    }

    /// Overrides the heading command mid-episode (evaluation profiles).
    pub fn set_command(&mut self, command: f64) {
        self.command = command;
    }

    pub fn control_steps(&self) -> u64 {
        self.control_steps
    }

    pub fn terrain(&self) -> &Terrain {
        &self.terrain
    }

    pub fn config(&self) -> &EnvConfig {
        &self.cfg
    }

    /// Nominal setpoint in the active (domain-randomized) model.
    pub fn nominal_action(&self) -> Setpoint {
        self.model.nominal_pose
    }

    pub fn enable_trace(&mut self) {
        if self.trace.is_none() {
            self.trace = Some(Vec::new());
        }
    }

    pub fn trace(&self) -> &[TraceRow] {
        self.trace.as_deref().unwrap_or(&[])
    }

    /// Writes the recorded substep trace as CSV.
    pub fn write_trace_csv(&self, path: &std::path::Path) -> Result<()> {
        let mut header: Vec<String> = vec!["time".into()];
        for i in 0..7 {
            header.push(format!("q{i}"));
        }
        for i in 0..7 {
            header.push(format!("v{i}"));
        }
        for i in 0..4 {
            header.push(format!("setpoint{i}"));
        }
        for i in 0..4 {
            header.push(format!("tau{i}"));
        }
        header.extend(["reward", "contact_front", "contact_hind", "command"].map(String::from));
        let cols: Vec<&str> = header.iter().map(String::as_str).collect();
        let mut table = CsvTable::new(&cols);
        for row in self.trace() {
            let mut cells: Vec<String> = vec![fmt_f64(row.time)];
            cells.extend(row.state.q.iter().map(|v| fmt_f64(*v)));
            cells.extend(row.state.v.iter().map(|v| fmt_f64(*v)));
            cells.extend(row.applied_setpoint.iter().map(|v| fmt_f64(*v)));
            cells.extend(row.torque.iter().map(|v| fmt_f64(*v)));
            cells.push(fmt_f64(row.reward));
            cells.push(u8::from(row.contacts[0]).to_string());
            cells.push(u8::from(row.contacts[1]).to_string());
            cells.push(fmt_f64(row.command));
            table.row(&cells);
        }
        table.write_to(path)
    }
}
