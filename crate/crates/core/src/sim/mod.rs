//! Single-integrator simulation of the leader and follower protocols, with
//! axis-switch and agent-join events.
//!
//! Leaders track their targets with the saturated law
//! `v = −tanh(p − p*) + ṗ*`. Followers run one of two modes:
//!
//! - [`FollowerMode::Implicit`] solves the stacked follower system each
//!   evaluation, which gives `ė_f = −α e_f` exactly.
//! - [`FollowerMode::Causal`] evaluates the per-agent law with neighbor
//!   velocities from the previous step, as a distributed implementation would.
//!
//! Steps never straddle segment boundaries, events or spawn times: `dt` is
//! clipped to land on them.

pub mod integrate;
pub mod laws;
pub mod log;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Vec3;
use crate::graph::{flatten, unflatten, Formation, Role};
use crate::laplacian::{mix_seed, similarity_residual, AugmentedLaplacian, LaplacianError};
use crate::maneuver::{
    apply_axis_switch, Event, JoinError, JoinSpec, ManeuverSchedule, ManeuverSegment, NominalFrame, ScheduleError,
    TransformSample,
};

pub use integrate::Integrator;
pub use log::{LogRole, LogRow, SampleSummary, TrajectoryLog};

/// Largest `|p − p*|` component allowed when an axis switch fires.
pub const SWITCH_TOL: f64 = 1e-4;
/// Largest `|p − p*|` component a joining agent may have at its join time.
pub const JOIN_TOL: f64 = 1e-4;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("non-finite state at t = {t}")]
    NonFinite { t: f64 },
    #[error("time step must be positive and finite, got {0}")]
    InvalidDt(f64),
    #[error("control gain alpha must be positive and finite, got {0}")]
    InvalidGain(f64),
    #[error("sample stride must be at least 1")]
    InvalidStride,
    #[error("initial positions: expected {expected}, got {got}")]
    InitialLength { expected: usize, got: usize },
    #[error("axis switch at t = {t} refused: formation not converged (max error {error:e})")]
    UnconvergedSwitch { t: f64, error: f64 },
    #[error("agent join at t = {t} refused: newcomer is {error:e} from its joining position")]
    JoinNotReached { t: f64, error: f64 },
    #[error("gamma of follower {agent} is singular at t = {t}")]
    SingularGamma { agent: usize, t: f64 },
    #[error(
        "causal mode is unstable at t = {t}: the one-step-delay iteration has spectral radius {radius:.4} (must be below 1); use implicit mode"
    )]
    CausalUnstable { t: f64, radius: f64 },
    #[error("schedule phase {segment} does not match active frame phase {active} at t = {t}")]
    PhaseMismatch { t: f64, segment: usize, active: usize },
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
    #[error(transparent)]
    Laplacian(#[from] LaplacianError),
    #[error(transparent)]
    Join(#[from] JoinError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FollowerMode {
    #[default]
    Implicit,
    Causal,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlGains {
    alpha: f64,
}

impl ControlGains {
    pub fn new(alpha: f64) -> Result<Self, SimError> {
        if alpha > 0.0 && alpha.is_finite() {
            Ok(Self { alpha })
        } else {
            Err(SimError::InvalidGain(alpha))
        }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }
}

impl Default for ControlGains {
    fn default() -> Self {
        Self { alpha: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub gains: ControlGains,
    pub dt: f64,
    pub integrator: Integrator,
    pub mode: FollowerMode,
    pub seed: u64,
    /// Log every `sample_stride` steps (plus the first and last state).
    pub sample_stride: usize,
    pub switch_tol: f64,
    pub join_tol: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            gains: ControlGains::default(),
            dt: 1e-3,
            integrator: Integrator::Rk4,
            mode: FollowerMode::Implicit,
            seed: 0,
            sample_stride: 100,
            switch_tol: SWITCH_TOL,
            join_tol: JOIN_TOL,
        }
    }
}

/// An agent flying toward its joining position under the leader law.
#[derive(Debug, Clone, PartialEq)]
pub struct Joiner {
    /// Index it will take once joined.
    pub agent: usize,
    /// Nominal position in the active frame.
    pub nominal: Vec3,
    pub position: Vec3,
    pub velocity: Vec3,
    pub spec: JoinSpec,
}

#[derive(Debug, Clone)]
pub struct SimState {
    pub t: f64,
    /// Positions of agents in the active frame, by agent index.
    pub positions: Vec<Vec3>,
    /// Velocity command at `t`, by agent index.
    pub velocities: Vec<Vec3>,
    pub joiners: Vec<Joiner>,
    pub frame: NominalFrame,
    /// Axis switches applied so far.
    pub phase: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackingErrors {
    /// `p_i − p*_i` per leader, in leader index order.
    pub leader: Vec<Vec3>,
    /// `e_f = p_f + W_ff⁻¹ W_fl p_l`, stacked in follower index order.
    pub follower: DVector<f64>,
}

impl TrackingErrors {
    pub fn max_leader(&self) -> f64 {
        self.leader.iter().flat_map(|e| e.iter().copied()).fold(0.0, |a, v| a.max(v.abs()))
    }

    pub fn max_follower(&self) -> f64 {
        self.follower.amax()
    }
}

fn split_roles(lap: &AugmentedLaplacian) -> (Vec<usize>, Vec<usize>) {
    (lap.followers(), lap.leaders())
}

fn gather(positions: &[Vec3], agents: &[usize], d: usize) -> DVector<f64> {
    let picked: Vec<Vec3> = agents.iter().map(|&i| positions[i]).collect();
    flatten(&picked, d)
}

/// Leader errors against the targets of `sample`, and the follower error `e_f`.
pub fn tracking_errors(frame: &NominalFrame, positions: &[Vec3], sample: &TransformSample) -> TrackingErrors {
    let lap = frame.laplacian();
    let d = lap.d();
    let (followers, leaders) = split_roles(lap);
    let leader = leaders.iter().map(|&i| positions[i] - frame.target_of(&frame.nominal()[i], sample)).collect();
    let p_f = gather(positions, &followers, d);
    let p_l = gather(positions, &leaders, d);
    TrackingErrors { leader, follower: p_f - frame.follower_map() * p_l }
}

fn max_abs_component(v: &Vec3) -> f64 {
    v.amax()
}

/// Velocity of every agent (members first, then joiners) at time `t`.
#[allow(clippy::too_many_arguments)]
fn velocity_field(
    frame: &NominalFrame,
    segment: &ManeuverSegment,
    t: f64,
    y: &[Vec3],
    joiner_nominals: &[Vec3],
    prev: &[Vec3],
    mode: FollowerMode,
    alpha: f64,
) -> Result<Vec<Vec3>, SimError> {
    let sample = segment.sample(t);
    let lap = frame.laplacian();
    let d = lap.d();
    let n = frame.n();
    let nominal = frame.nominal();
    let (followers, leaders) = split_roles(lap);
    let mut v = vec![Vec3::zeros(); y.len()];

    for &i in &leaders {
        let r = &nominal[i];
        v[i] = laws::leader_velocity(&y[i], &frame.target_of(r, &sample), &frame.target_rate_of(r, &sample));
    }
    match mode {
        FollowerMode::Implicit => {
            let p_f = gather(y, &followers, d);
            let p_l = gather(y, &leaders, d);
            let p_l_dot = gather(&v, &leaders, d);
            let v_f = laws::follower_velocities_implicit(frame.follower_map(), &p_f, &p_l, &p_l_dot, alpha);
            for (&i, vi) in followers.iter().zip(unflatten(&v_f, d)) {
                v[i] = vi;
            }
        }
        FollowerMode::Causal => {
            for &i in &followers {
                let row = lap.row(i);
                let rel: Vec<Vec3> = row.neighbors.iter().map(|&j| y[i] - y[j]).collect();
                let nv: Vec<Vec3> = row.neighbors.iter().map(|&j| prev[j]).collect();
                v[i] = laws::follower_velocity_causal(&rel, &nv, &row.weights, lap.axis(), d, alpha)
                    .ok_or(SimError::SingularGamma { agent: i, t })?;
            }
        }
    }
    for (k, r) in joiner_nominals.iter().enumerate() {
        let idx = n + k;
        v[idx] = laws::leader_velocity(&y[idx], &frame.target_of(r, &sample), &frame.target_rate_of(r, &sample));
    }
    Ok(v)
}

fn check_causal(frame: &NominalFrame, mode: FollowerMode, t: f64) -> Result<(), SimError> {
    if mode == FollowerMode::Causal {
        let radius = frame.laplacian().jacobi_radius();
        if radius.is_nan() || radius >= 1.0 {
            return Err(SimError::CausalUnstable { t, radius });
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SwitchRecord {
    pub t: f64,
    /// `‖p − p*‖∞` measured at the switch.
    pub discrepancy: f64,
    pub retries: u32,
    pub rcond_ff: f64,
    pub axis: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JoinRecord {
    pub t: f64,
    pub agent: usize,
    pub discrepancy: f64,
    pub retries: u32,
    pub rcond_ff: f64,
    /// Largest change of the original followers' equilibrium across the join.
    pub follower_shift: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct RunRecords {
    pub initial_retries: u32,
    pub initial_rcond_ff: f64,
    pub switches: Vec<SwitchRecord>,
    pub joins: Vec<JoinRecord>,
    pub steps: u64,
}

/// Applies an agent join: the newcomer's row is appended to `W` (no existing
/// row changes) and it becomes a follower.
pub fn process_agent_join(
    state: &mut SimState,
    joiner: usize,
    sample: &TransformSample,
    tol: f64,
    seed: u64,
) -> Result<JoinRecord, SimError> {
    let j = &state.joiners[joiner];
    let target = state.frame.target_of(&j.nominal, sample);
    let discrepancy = max_abs_component(&(j.position - target));
    if discrepancy >= tol {
        return Err(SimError::JoinNotReached { t: state.t, error: discrepancy });
    }
    let old = &state.frame;
    let new = old.with_joined(j.nominal, j.spec.neighbors.clone(), seed)?;

    let d = old.laplacian().d();
    let p_l = gather(&state.positions, &old.laplacian().leaders(), d);
    let before = old.follower_map() * &p_l;
    let after = new.follower_map() * &p_l;
    let follower_shift = (after.rows(0, before.len()) - &before).amax();

    let record = JoinRecord {
        t: state.t,
        agent: j.agent,
        discrepancy,
        retries: new.laplacian().retries(),
        rcond_ff: new.laplacian().rcond_ff(),
        follower_shift,
    };
    let j = state.joiners.remove(joiner);
    state.positions.push(j.position);
    state.velocities.push(j.velocity);
    state.frame = new;
    Ok(record)
}

/// Drives one run from schedule start to end.
#[derive(Debug, Clone)]
pub struct Simulation {
    schedule: ManeuverSchedule,
    cfg: SimConfig,
    state: SimState,
    /// Joins not yet spawned, with the index they will take.
    unspawned: Vec<(usize, JoinSpec)>,
    stops: Vec<f64>,
    records: RunRecords,
    steps: u64,
}

#[derive(Debug, Clone)]
pub struct SimOutput {
    pub log: TrajectoryLog,
    pub records: RunRecords,
    pub final_state: SimState,
}

impl Simulation {
    /// `nominal` is the nominal formation; `initial` the starting positions.
    pub fn new(
        nominal: Formation,
        initial: Vec<Vec3>,
        schedule: ManeuverSchedule,
        cfg: SimConfig,
    ) -> Result<Self, SimError> {
        if !(cfg.dt > 0.0 && cfg.dt.is_finite()) {
            return Err(SimError::InvalidDt(cfg.dt));
        }
        if cfg.sample_stride == 0 {
            return Err(SimError::InvalidStride);
        }
        if initial.len() != nominal.n() {
            return Err(SimError::InitialLength { expected: nominal.n(), got: initial.len() });
        }
        let frame = NominalFrame::new(nominal, &schedule.initial_axis(), cfg.seed)?;
        check_causal(&frame, cfg.mode, schedule.start())?;
        let records = RunRecords {
            initial_retries: frame.laplacian().retries(),
            initial_rcond_ff: frame.laplacian().rcond_ff(),
            ..RunRecords::default()
        };

        let mut joins: Vec<JoinSpec> = schedule
            .events()
            .iter()
            .filter_map(|e| match e {
                Event::AgentJoin(j) => Some(j.clone()),
                _ => None,
            })
            .collect();
        joins.sort_by(|a, b| a.t.total_cmp(&b.t));
        let n0 = frame.n();
        let unspawned: Vec<(usize, JoinSpec)> = joins.into_iter().enumerate().map(|(k, j)| (n0 + k, j)).collect();

        let mut stops: Vec<f64> = schedule.boundaries();
        stops.extend(schedule.events().iter().map(Event::time));
        stops.extend(unspawned.iter().map(|(_, j)| j.spawn));
        stops.sort_by(f64::total_cmp);
        stops.dedup();

        let t0 = schedule.start();
        let n = frame.n();
        let state = SimState {
            t: t0,
            positions: initial,
            velocities: vec![Vec3::zeros(); n],
            joiners: Vec::new(),
            frame,
            phase: 0,
        };
        let mut sim = Self { schedule, cfg, state, unspawned, stops, records, steps: 0 };
        sim.spawn_due();
        sim.refresh_velocities()?;
        Ok(sim)
    }

    pub fn state(&self) -> &SimState {
        &self.state
    }

    pub fn schedule(&self) -> &ManeuverSchedule {
        &self.schedule
    }

    pub fn records(&self) -> &RunRecords {
        &self.records
    }

    fn time_eps(&self) -> f64 {
        self.cfg.dt * 1e-6
    }

    fn spawn_due(&mut self) {
        let eps = self.time_eps();
        let t = self.state.t;
        let mut k = 0;
        while k < self.unspawned.len() {
            if self.unspawned[k].1.spawn <= t + eps {
                let (agent, spec) = self.unspawned.remove(k);
                let nominal = self.state.frame.pivot() + spec.offset;
                self.state.joiners.push(Joiner {
                    agent,
                    nominal,
                    position: spec.initial,
                    velocity: Vec3::zeros(),
                    spec,
                });
            } else {
                k += 1;
            }
        }
    }

    fn all_positions(&self) -> Vec<Vec3> {
        let mut y = self.state.positions.clone();
        y.extend(self.state.joiners.iter().map(|j| j.position));
        y
    }

    fn all_velocities(&self) -> Vec<Vec3> {
        let mut v = self.state.velocities.clone();
        v.extend(self.state.joiners.iter().map(|j| j.velocity));
        v
    }

    fn joiner_nominals(&self) -> Vec<Vec3> {
        self.state.joiners.iter().map(|j| j.nominal).collect()
    }

    fn active_segment(&self, t: f64) -> Result<&ManeuverSegment, SimError> {
        let seg = self.schedule.segment_at(t);
        if seg.phase != self.state.phase {
            return Err(SimError::PhaseMismatch { t, segment: seg.phase, active: self.state.phase });
        }
        Ok(seg)
    }

    /// Recomputes the velocity command at the current state.
    fn refresh_velocities(&mut self) -> Result<(), SimError> {
        let t = self.state.t;
        let seg = self.active_segment(t.min(self.schedule.end()))?;
        let v = velocity_field(
            &self.state.frame,
            seg,
            t,
            &self.all_positions(),
            &self.joiner_nominals(),
            &self.all_velocities(),
            self.cfg.mode,
            self.cfg.gains.alpha(),
        )?;
        let n = self.state.positions.len();
        self.state.velocities = v[..n].to_vec();
        for (j, vj) in self.state.joiners.iter_mut().zip(&v[n..]) {
            j.velocity = *vj;
        }
        Ok(())
    }

    pub fn is_finished(&self) -> bool {
        self.state.t >= self.schedule.end() - self.time_eps()
    }

    /// Advances one step (clipped to the next stop), then applies any events
    /// and spawns due at the new time.
    pub fn step(&mut self) -> Result<(), SimError> {
        let t = self.state.t;
        let eps = self.time_eps();
        let next_stop = self.stops.iter().copied().find(|&s| s > t + eps).unwrap_or(self.schedule.end());
        let mut t_next = t + self.cfg.dt;
        if t_next >= next_stop - eps {
            t_next = next_stop;
        }
        let h = t_next - t;

        let seg = self.active_segment(t + 0.5 * h)?.clone();
        let y = self.all_positions();
        let prev = self.all_velocities();
        let nominals = self.joiner_nominals();
        let frame = &self.state.frame;
        let (mode, alpha) = (self.cfg.mode, self.cfg.gains.alpha());
        let y_next = self
            .cfg
            .integrator
            .step(t, &y, h, |tt, yy| velocity_field(frame, &seg, tt, yy, &nominals, &prev, mode, alpha))?;
        if y_next.iter().any(|p| !p.iter().all(|c| c.is_finite())) {
            return Err(SimError::NonFinite { t: t_next });
        }
        let n = self.state.positions.len();
        self.state.positions = y_next[..n].to_vec();
        for (j, p) in self.state.joiners.iter_mut().zip(&y_next[n..]) {
            j.position = *p;
        }
        self.state.t = t_next;
        self.steps += 1;

        self.apply_events_at(t_next)?;
        self.spawn_due();
        self.refresh_velocities()
    }

    fn apply_events_at(&mut self, t: f64) -> Result<(), SimError> {
        let eps = self.time_eps();
        let due: Vec<(usize, Event)> = self
            .schedule
            .events()
            .iter()
            .enumerate()
            .filter(|(_, e)| (e.time() - t).abs() <= eps)
            .map(|(k, e)| (k, e.clone()))
            .collect();
        // Switches first, then spawns, then joins.
        for (k, event) in due.iter().filter(|(_, e)| matches!(e, Event::AxisSwitch { .. })) {
            if let Event::AxisSwitch { axis, force, .. } = event {
                self.apply_switch(t, axis, *force, mix_seed(self.cfg.seed, 1000 + *k as u64))?;
            }
        }
        self.spawn_due();
        for (k, event) in &due {
            if let Event::AgentJoin(spec) = event {
                let idx = self
                    .state
                    .joiners
                    .iter()
                    .position(|j| j.spec == *spec)
                    .expect("joiner spawned before its join time");
                let sample = self.active_segment(t)?.sample(t);
                let seed = mix_seed(self.cfg.seed, 2000 + *k as u64);
                let record = process_agent_join(&mut self.state, idx, &sample, self.cfg.join_tol, seed)?;
                self.records.joins.push(record);
            }
        }
        if due.is_empty() {
            Ok(())
        } else {
            check_causal(&self.state.frame, self.cfg.mode, t)
        }
    }

    fn apply_switch(
        &mut self,
        t: f64,
        axis: &crate::geometry::RotationAxis,
        force: bool,
        seed: u64,
    ) -> Result<(), SimError> {
        let before = self.schedule.evaluate_left(t)?;
        let frame = &self.state.frame;
        let discrepancy = self
            .state
            .positions
            .iter()
            .zip(frame.nominal())
            .map(|(p, r)| max_abs_component(&(p - frame.target_of(r, &before))))
            .fold(0.0, f64::max);
        if discrepancy >= self.cfg.switch_tol && !force {
            return Err(SimError::UnconvergedSwitch { t, error: discrepancy });
        }
        let new_frame = apply_axis_switch(frame, &before, axis, seed)?;
        for j in &mut self.state.joiners {
            j.nominal = frame.target_of(&j.nominal, &before);
        }
        self.records.switches.push(SwitchRecord {
            t,
            discrepancy,
            retries: new_frame.laplacian().retries(),
            rcond_ff: new_frame.laplacian().rcond_ff(),
            axis: (*axis).into(),
        });
        self.state.frame = new_frame;
        self.state.phase += 1;
        Ok(())
    }

    /// Appends one sample of every present agent to `log`.
    pub fn record(&self, log: &mut TrajectoryLog) -> Result<(), SimError> {
        let t = self.state.t;
        let sample = self.active_segment(t.min(self.schedule.end()))?.sample(t);
        let frame = &self.state.frame;
        let lap = frame.laplacian();
        let d = lap.d();
        let errors = tracking_errors(frame, &self.state.positions, &sample);
        let followers = lap.followers();
        let leaders = lap.leaders();

        let mut rows: Vec<LogRow> = Vec::new();
        for (i, (p, v)) in self.state.positions.iter().zip(&self.state.velocities).enumerate() {
            let (role, error) = match lap.roles()[i] {
                Role::Leader => {
                    let k = leaders.iter().position(|&l| l == i).expect("leader index");
                    (LogRole::Leader, errors.leader[k])
                }
                Role::Follower => {
                    let k = followers.iter().position(|&f| f == i).expect("follower index");
                    let mut e = Vec3::zeros();
                    for c in 0..d {
                        e[c] = errors.follower[k * d + c];
                    }
                    (LogRole::Follower, e)
                }
            };
            rows.push(LogRow { t, agent: i, role, position: *p, velocity: *v, error });
        }
        for j in &self.state.joiners {
            let error = j.position - frame.target_of(&j.nominal, &sample);
            rows.push(LogRow {
                t,
                agent: j.agent,
                role: LogRole::Joining,
                position: j.position,
                velocity: j.velocity,
                error,
            });
        }
        rows.sort_by_key(|r| r.agent);

        let max_target_error = self
            .state
            .positions
            .iter()
            .zip(frame.nominal())
            .map(|(p, r)| max_abs_component(&(p - frame.target_of(r, &sample))))
            .fold(0.0, f64::max);
        log.samples.push(SampleSummary {
            t,
            phase: self.state.phase,
            members: self.state.positions.len(),
            residual: similarity_residual(lap, &self.state.positions),
            max_leader_error: errors.max_leader(),
            max_follower_error: errors.max_follower(),
            max_target_error,
        });
        log.rows.extend(rows);
        Ok(())
    }

    /// Runs to the end of the schedule, logging every `sample_stride` steps.
    pub fn run(mut self) -> Result<SimOutput, SimError> {
        let mut log = TrajectoryLog::default();
        self.record(&mut log)?;
        let mut since_sample = 0;
        while !self.is_finished() {
            self.step()?;
            since_sample += 1;
            if since_sample == self.cfg.sample_stride || self.is_finished() {
                self.record(&mut log)?;
                since_sample = 0;
            }
        }
        self.records.steps = self.steps;
        Ok(SimOutput { log, records: self.records, final_state: self.state })
    }
}
