//! JSON scenario files: schema, validation, and conversion into a runnable
//! formation, schedule and simulation config.
//!
//! Agent ids in scenario files and CSV output are 1-based; they map to
//! 0-based indices internally. See `crates/core/scenarios/` for examples.

pub mod csv;
pub mod plot;
pub mod run;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{RotationAxis, Vec3};
use crate::graph::{validate_leader_axis, validate_two_rooted, Dimension, Formation, InteractionGraph, Role};
use crate::maneuver::{apply_axis_switch, Event, JoinSpec, ManeuverSchedule, NominalFrame, ScheduleError, SegmentSpec};
use crate::sim::{ControlGains, FollowerMode, Integrator, SimConfig};

/// One problem found while validating, with the offending field path.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Issue {
    pub path: String,
    pub message: String,
}

impl fmt::Display for Issue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

fn issue(path: impl Into<String>, message: impl fmt::Display) -> Issue {
    Issue { path: path.into(), message: message.to_string() }
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("{path}: {message}")]
    Syntax { path: String, message: String },
    #[error("invalid scenario:\n{}", .0.iter().map(|i| format!("  {i}")).collect::<Vec<_>>().join("\n"))]
    Invalid(Vec<Issue>),
    #[error("{path}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl ScenarioError {
    pub fn issues(&self) -> Vec<Issue> {
        match self {
            ScenarioError::Syntax { path, message } => vec![issue(path.clone(), message)],
            ScenarioError::Invalid(v) => v.clone(),
            ScenarioError::Io { path, source } => vec![issue(path.clone(), source)],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentSpec {
    pub nominal: [f64; 3],
    /// Starting position; defaults to `nominal`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<[f64; 3]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum EventSpec {
    AxisSwitch {
        t: f64,
        axis: [f64; 3],
        /// Switch even if the formation has not converged.
        #[serde(default, skip_serializing_if = "std::ops::Not::not")]
        force: bool,
    },
    AgentJoin {
        t: f64,
        /// When the agent appears; defaults to the schedule start.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        spawn: Option<f64>,
        initial: [f64; 3],
        /// Joining position relative to the formation pivot, in the nominal frame.
        offset: [f64; 3],
        /// 1-based ids of the agents the newcomer senses.
        neighbors: Vec<usize>,
    },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub integrator: Option<Integrator>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<FollowerMode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample_stride: Option<usize>,
}

/// Plot decoration; never collided with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Obstacle {
    Box {
        min: [f64; 3],
        max: [f64; 3],
    },
    /// Plan-view polygon, extruded over `z` (defaults to a flat polygon at z = 0).
    Polygon {
        points: Vec<[f64; 2]>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        z: Option<[f64; 2]>,
    },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlotSpec {
    /// Times at which the formation outline is drawn.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub snapshots: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub name: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub description: String,
    pub dimension: Dimension,
    /// Initial rotation axis.
    pub axis: [f64; 3],
    pub agents: Vec<AgentSpec>,
    /// 1-based ids; the first two are the roots of the 2-rootedness check.
    pub leaders: Vec<usize>,
    /// `[i, j]` means agent `i` senses agent `j` (1-based).
    pub edges: Vec<[usize; 2]>,
    pub segments: Vec<SegmentSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub events: Vec<EventSpec>,
    #[serde(default, skip_serializing_if = "is_default")]
    pub control: ControlSpec,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub obstacles: Vec<Obstacle>,
    #[serde(default, skip_serializing_if = "is_default")]
    pub plot: PlotSpec,
}

fn is_default<T: Default + PartialEq>(v: &T) -> bool {
    *v == T::default()
}

/// A validated scenario, ready to simulate.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub file: ScenarioFile,
    pub formation: Formation,
    pub initial: Vec<Vec3>,
    pub schedule: ManeuverSchedule,
    pub config: SimConfig,
}

fn v3(a: &[f64; 3]) -> Vec3 {
    Vec3::new(a[0], a[1], a[2])
}

/// Parses JSON text; syntax and type errors carry the field path.
pub fn parse_scenario(text: &str) -> Result<ScenarioFile, ScenarioError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        ScenarioError::Syntax {
            path: if path.is_empty() { ".".into() } else { path },
            message: e.into_inner().to_string(),
        }
    })
}

pub fn load_scenario(path: &std::path::Path) -> Result<ScenarioFile, ScenarioError> {
    let text = std::fs::read_to_string(path)
        .map_err(|source| ScenarioError::Io { path: path.display().to_string(), source })?;
    parse_scenario(&text)
}

pub fn emit_scenario(file: &ScenarioFile) -> String {
    let mut s = serde_json::to_string_pretty(file).expect("scenario serializes");
    s.push('\n');
    s
}

impl ScenarioFile {
    /// Validates every field and builds the runnable scenario.
    pub fn build(&self) -> Result<Scenario, ScenarioError> {
        let mut issues = Vec::new();
        let n = self.agents.len();
        let planar = self.dimension == Dimension::Planar;

        let finite = |a: &[f64]| a.iter().all(|c| c.is_finite());
        let check_point = |issues: &mut Vec<Issue>, path: String, a: &[f64; 3]| {
            if !finite(a) {
                issues.push(issue(path, "non-finite coordinate"));
            } else if planar && a[2] != 0.0 {
                issues.push(issue(path, format!("planar scenario requires z = 0, got {}", a[2])));
            }
        };
        for (k, a) in self.agents.iter().enumerate() {
            check_point(&mut issues, format!("agents[{k}].nominal"), &a.nominal);
            if let Some(init) = &a.initial {
                check_point(&mut issues, format!("agents[{k}].initial"), init);
            }
        }

        let axis = match RotationAxis::new(v3(&self.axis)) {
            Ok(a) => Some(a),
            Err(e) => {
                issues.push(issue("axis", e));
                None
            }
        };
        if let Some(a) = &axis {
            if planar && a.direction() != Vec3::z() {
                issues.push(issue("axis", "planar scenarios rotate about [0, 0, 1]"));
            }
        }

        let id_ok = |issues: &mut Vec<Issue>, path: String, id: usize, limit: usize| {
            if id == 0 || id > limit {
                issues.push(issue(path, format!("agent id {id} out of range 1..={limit}")));
                false
            } else {
                true
            }
        };
        let mut roles = vec![Role::Follower; n];
        for (k, &id) in self.leaders.iter().enumerate() {
            if id_ok(&mut issues, format!("leaders[{k}]"), id, n) {
                if roles[id - 1] == Role::Leader {
                    issues.push(issue(format!("leaders[{k}]"), format!("agent {id} listed twice")));
                }
                roles[id - 1] = Role::Leader;
            }
        }
        let mut edges = Vec::new();
        for (k, [i, j]) in self.edges.iter().enumerate() {
            let a = id_ok(&mut issues, format!("edges[{k}][0]"), *i, n);
            let b = id_ok(&mut issues, format!("edges[{k}][1]"), *j, n);
            if a && b {
                edges.push((i - 1, j - 1));
            }
        }

        let mut formation = None;
        if issues.is_empty() {
            match InteractionGraph::from_edges(roles, &edges) {
                Err(e) => issues.push(issue("edges", e)),
                Ok(graph) => {
                    let leaders: Vec<usize> = self.leaders.iter().map(|id| id - 1).collect();
                    match validate_two_rooted(&graph, (leaders[0], leaders[1])) {
                        Ok(true) => {}
                        Ok(false) => issues.push(issue(
                            "edges",
                            format!("graph is not 2-rooted from leaders {} and {}", self.leaders[0], self.leaders[1]),
                        )),
                        Err(e) => issues.push(issue("leaders", e)),
                    }
                    let positions: Vec<Vec3> = self.agents.iter().map(|a| v3(&a.nominal)).collect();
                    match Formation::new(graph, positions, self.dimension) {
                        Ok(f) => formation = Some(f),
                        Err(e) => issues.push(issue("agents", e)),
                    }
                }
            }
        }
        if let (Some(f), Some(a)) = (&formation, &axis) {
            match validate_leader_axis(&f.leader_positions(), a) {
                Ok(true) => {}
                Ok(false) => issues.push(issue("leaders", "every leader pair is parallel to the rotation axis")),
                Err(e) => issues.push(issue("leaders", e)),
            }
        }

        let mut events = Vec::new();
        let mut members = n;
        let start = self.segments.first().map(|s| s.t_start).unwrap_or(0.0);
        let mut sorted: Vec<(usize, &EventSpec)> = self.events.iter().enumerate().collect();
        sorted.sort_by(|a, b| event_time(a.1).total_cmp(&event_time(b.1)));
        for (k, e) in sorted {
            let path = format!("events[{k}]");
            match e {
                EventSpec::AxisSwitch { t, axis, force } => match RotationAxis::new(v3(axis)) {
                    Ok(a) => {
                        if planar {
                            issues.push(issue(format!("{path}.axis"), "planar scenarios cannot switch axes"));
                        }
                        events.push(Event::AxisSwitch { t: *t, axis: a, force: *force });
                    }
                    Err(err) => issues.push(issue(format!("{path}.axis"), err)),
                },
                EventSpec::AgentJoin { t, spawn, initial, offset, neighbors } => {
                    check_point(&mut issues, format!("{path}.initial"), initial);
                    check_point(&mut issues, format!("{path}.offset"), offset);
                    let mut ok = true;
                    for (m, &id) in neighbors.iter().enumerate() {
                        ok &= id_ok(&mut issues, format!("{path}.neighbors[{m}]"), id, members);
                    }
                    if neighbors.len() < 2 {
                        issues.push(issue(format!("{path}.neighbors"), "a joining agent needs at least 2 neighbors"));
                        ok = false;
                    }
                    if ok {
                        events.push(Event::AgentJoin(JoinSpec {
                            t: *t,
                            spawn: spawn.unwrap_or(start),
                            initial: v3(initial),
                            offset: v3(offset),
                            neighbors: neighbors.iter().map(|id| id - 1).collect(),
                        }));
                    }
                    members += 1;
                }
            }
        }
        let schedule = match &axis {
            Some(a) => match ManeuverSchedule::new(*a, self.segments.clone(), events) {
                Ok(s) => Some(s),
                Err(e) => {
                    issues.push(issue(schedule_error_path(&e), e));
                    None
                }
            },
            None => None,
        };

        let c = &self.control;
        let defaults = SimConfig::default();
        let gains = match ControlGains::new(c.alpha.unwrap_or(defaults.gains.alpha())) {
            Ok(g) => g,
            Err(e) => {
                issues.push(issue("control.alpha", e));
                defaults.gains
            }
        };
        let dt = c.dt.unwrap_or(defaults.dt);
        if !(dt > 0.0 && dt.is_finite()) {
            issues.push(issue("control.dt", format!("time step must be positive, got {dt}")));
        }
        let sample_stride = c.sample_stride.unwrap_or(defaults.sample_stride);
        if sample_stride == 0 {
            issues.push(issue("control.sample_stride", "sample stride must be at least 1"));
        }
        let config = SimConfig {
            gains,
            dt,
            integrator: c.integrator.unwrap_or(defaults.integrator),
            mode: c.mode.unwrap_or(defaults.mode),
            seed: c.seed.unwrap_or(defaults.seed),
            sample_stride,
            ..defaults
        };

        if let Some(o) = self.obstacles.iter().position(|o| !obstacle_ok(o)) {
            issues.push(issue(format!("obstacles[{o}]"), "malformed obstacle"));
        }

        if !issues.is_empty() {
            return Err(ScenarioError::Invalid(issues));
        }
        let formation = formation.expect("validated");
        let schedule = schedule.expect("validated");
        dry_run_frames(&formation, &schedule, config.seed)?;
        let initial = self.agents.iter().map(|a| v3(a.initial.as_ref().unwrap_or(&a.nominal))).collect();
        Ok(Scenario { file: self.clone(), formation, initial, schedule, config })
    }
}

fn schedule_error_path(e: &ScheduleError) -> &'static str {
    match e {
        ScheduleError::SwitchOffBoundary { .. }
        | ScheduleError::EventOutsideHorizon { .. }
        | ScheduleError::SpawnAfterJoin { .. } => "events",
        _ => "segments",
    }
}

fn event_time(e: &EventSpec) -> f64 {
    match e {
        EventSpec::AxisSwitch { t, .. } | EventSpec::AgentJoin { t, .. } => *t,
    }
}

fn obstacle_ok(o: &Obstacle) -> bool {
    match o {
        Obstacle::Box { min, max } => (0..3).all(|k| min[k].is_finite() && max[k].is_finite() && min[k] <= max[k]),
        Obstacle::Polygon { points, z } => {
            points.len() >= 3
                && points.iter().all(|p| p[0].is_finite() && p[1].is_finite())
                && z.is_none_or(|z| z[0].is_finite() && z[1].is_finite() && z[0] <= z[1])
        }
    }
}

/// Builds every nominal frame the run will use (assuming perfect tracking) so
/// that unlocalizable switches or joins are reported before simulating.
fn dry_run_frames(formation: &Formation, schedule: &ManeuverSchedule, seed: u64) -> Result<(), ScenarioError> {
    use crate::laplacian::mix_seed;
    let fail = |path: String, e: &dyn fmt::Display| ScenarioError::Invalid(vec![issue(path, e)]);
    let mut frame =
        NominalFrame::new(formation.clone(), &schedule.initial_axis(), seed).map_err(|e| fail("edges".into(), &e))?;
    let mut pending: Vec<(Vec3, &JoinSpec)> = Vec::new();
    let mut joins: Vec<&JoinSpec> =
        schedule.events().iter().filter_map(|e| if let Event::AgentJoin(j) = e { Some(j) } else { None }).collect();
    joins.sort_by(|a, b| a.t.total_cmp(&b.t));
    let mut spawn_queue = joins.clone();
    spawn_queue.sort_by(|a, b| a.spawn.total_cmp(&b.spawn));
    let mut spawned = 0;

    for (k, event) in schedule.events().iter().enumerate() {
        let t = event.time();
        // Spawns coinciding with a switch happen after it, and before a join.
        let joining = matches!(event, Event::AgentJoin(_));
        while spawned < spawn_queue.len()
            && (spawn_queue[spawned].spawn < t || (joining && spawn_queue[spawned].spawn <= t))
        {
            pending.push((frame.pivot() + spawn_queue[spawned].offset, spawn_queue[spawned]));
            spawned += 1;
        }
        match event {
            Event::AxisSwitch { axis, .. } => {
                let before = schedule.evaluate_left(t).map_err(|e| fail(format!("events[{k}]"), &e))?;
                let next = apply_axis_switch(&frame, &before, axis, mix_seed(seed, 1000 + k as u64))
                    .map_err(|e| fail(format!("events[{k}]"), &format!("axis switch at t = {t}: {e}")))?;
                for (nominal, _) in &mut pending {
                    *nominal = frame.target_of(nominal, &before);
                }
                frame = next;
            }
            Event::AgentJoin(spec) => {
                let idx = pending.iter().position(|(_, j)| *j == spec).expect("spawned before join");
                let (nominal, _) = pending.remove(idx);
                frame = frame
                    .with_joined(nominal, spec.neighbors.clone(), mix_seed(seed, 2000 + k as u64))
                    .map_err(|e| fail(format!("events[{k}]"), &format!("agent join at t = {t}: {e}")))?;
            }
        }
    }
    Ok(())
}

/// Parses and validates in one go.
pub fn validate_scenario(text: &str) -> Result<Scenario, ScenarioError> {
    parse_scenario(text)?.build()
}
