//! Piecewise maneuver parameterization: translation `T(t)`, scale `k(t)`,
//! rotation angle `θ(t)` about a per-segment axis, the resulting target
//! configurations and velocities, and axis-switch re-basing.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Mat3, RotationAxis, Vec3};
use crate::graph::Formation;
use crate::laplacian::{self, AugmentedLaplacian, LaplacianError};

/// Continuity tolerance at segment boundaries.
pub const CONTINUITY_TOL: f64 = 1e-12;
/// Slack when deciding whether a time lies inside the horizon.
const TIME_EPS: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScheduleError {
    #[error("schedule has no segments")]
    Empty,
    #[error("segment {index}: t_start {t_start} must be < t_end {t_end}")]
    EmptySegment { index: usize, t_start: f64, t_end: f64 },
    #[error("segment {index} starts at {t_start} but the previous one ends at {prev_end}")]
    Gap { index: usize, t_start: f64, prev_end: f64 },
    #[error("segment {index}: scale must stay positive")]
    NonPositiveScale { index: usize },
    #[error("segment {index}: {field} is discontinuous at t = {t}")]
    Discontinuous { index: usize, field: &'static str, t: f64 },
    #[error("axis switch at t = {t} does not fall on a segment boundary")]
    SwitchOffBoundary { t: f64 },
    #[error("segment {index} follows an axis switch and must start at T = 0, k = 1, θ = 0")]
    SwitchNotIdentity { index: usize },
    #[error("event at t = {t} lies outside the horizon [{start}, {end}]")]
    EventOutsideHorizon { t: f64, start: f64, end: f64 },
    #[error("agent join spawns at {spawn} after its join time {t}")]
    SpawnAfterJoin { spawn: f64, t: f64 },
    #[error("time {t} outside the horizon [{start}, {end}]")]
    OutOfRange { t: f64, start: f64, end: f64 },
}

/// Closed-form differentiable profile over one segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Profile<T> {
    Constant { value: T },
    Linear { from: T, to: T },
    Smoothstep { from: T, to: T },
}

/// Values a profile can interpolate.
pub trait Interpolant:
    Copy + std::ops::Add<Output = Self> + std::ops::Sub<Output = Self> + std::ops::Mul<f64, Output = Self>
{
    fn zero() -> Self;
}

impl Interpolant for f64 {
    fn zero() -> Self {
        0.0
    }
}

impl Interpolant for Vec3 {
    fn zero() -> Self {
        Vec3::zeros()
    }
}

impl<T: Interpolant> Profile<T> {
    /// Value and time derivative at fraction `s ∈ [0, 1]` of a segment lasting `duration` seconds.
    pub fn sample(&self, s: f64, duration: f64) -> (T, T) {
        let s = s.clamp(0.0, 1.0);
        match *self {
            Profile::Constant { value } => (value, T::zero()),
            Profile::Linear { from, to } => (from + (to - from) * s, (to - from) * (1.0 / duration)),
            Profile::Smoothstep { from, to } => {
                let h = s * s * (3.0 - 2.0 * s);
                let dh = 6.0 * s * (1.0 - s);
                (from + (to - from) * h, (to - from) * (dh / duration))
            }
        }
    }

    pub fn start(&self) -> T {
        match *self {
            Profile::Constant { value } => value,
            Profile::Linear { from, .. } | Profile::Smoothstep { from, .. } => from,
        }
    }

    pub fn end(&self) -> T {
        match *self {
            Profile::Constant { value } => value,
            Profile::Linear { to, .. } | Profile::Smoothstep { to, .. } => to,
        }
    }
}

/// Segment profiles before an axis is attached.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentSpec {
    pub t_start: f64,
    pub t_end: f64,
    pub translation: Profile<Vec3>,
    pub scale: Profile<f64>,
    pub angle: Profile<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManeuverSegment {
    pub t_start: f64,
    pub t_end: f64,
    pub translation: Profile<Vec3>,
    pub scale: Profile<f64>,
    pub angle: Profile<f64>,
    pub axis: RotationAxis,
    /// Number of axis switches before this segment.
    pub phase: usize,
}

/// A new agent flying in and joining as a follower.
#[derive(Debug, Clone, PartialEq)]
pub struct JoinSpec {
    /// Join time.
    pub t: f64,
    /// Time the agent appears and starts tracking its joining position.
    pub spawn: f64,
    pub initial: Vec3,
    /// Nominal offset from the frame pivot; co-moves with the maneuver.
    pub offset: Vec3,
    /// Existing agents (0-based) the newcomer senses.
    pub neighbors: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Event {
    AxisSwitch { t: f64, axis: RotationAxis, force: bool },
    AgentJoin(JoinSpec),
}

impl Event {
    pub fn time(&self) -> f64 {
        match self {
            Event::AxisSwitch { t, .. } => *t,
            Event::AgentJoin(j) => j.t,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManeuverSchedule {
    segments: Vec<ManeuverSegment>,
    events: Vec<Event>,
}

/// Parameters of the target transform at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransformSample {
    pub translation: Vec3,
    pub translation_rate: Vec3,
    pub scale: f64,
    pub scale_rate: f64,
    pub angle: f64,
    pub angle_rate: f64,
    pub axis: RotationAxis,
    pub rotation: Mat3,
    pub rotation_rate: Mat3,
    pub phase: usize,
}

impl TransformSample {
    pub fn identity(axis: RotationAxis) -> Self {
        Self {
            translation: Vec3::zeros(),
            translation_rate: Vec3::zeros(),
            scale: 1.0,
            scale_rate: 0.0,
            angle: 0.0,
            angle_rate: 0.0,
            axis,
            rotation: Mat3::identity(),
            rotation_rate: Mat3::zeros(),
            phase: 0,
        }
    }

    /// Static transform with the given parameters and zero rates.
    pub fn at_rest(axis: RotationAxis, translation: Vec3, scale: f64, angle: f64) -> Self {
        Self { translation, scale, angle, rotation: axis.rotation(angle), ..Self::identity(axis) }
    }
}

impl ManeuverSegment {
    pub fn sample(&self, t: f64) -> TransformSample {
        let duration = self.t_end - self.t_start;
        let s = (t - self.t_start) / duration;
        let (translation, translation_rate) = self.translation.sample(s, duration);
        let (scale, scale_rate) = self.scale.sample(s, duration);
        let (angle, angle_rate) = self.angle.sample(s, duration);
        let rotation = self.axis.rotation(angle);
        TransformSample {
            translation,
            translation_rate,
            scale,
            scale_rate,
            angle,
            angle_rate,
            axis: self.axis,
            rotation,
            rotation_rate: self.axis.skew() * rotation * angle_rate,
            phase: self.phase,
        }
    }
}

impl ManeuverSchedule {
    /// Attaches axes to `specs` (starting from `initial_axis`, changing at each
    /// axis switch) and validates the result.
    pub fn new(
        initial_axis: RotationAxis,
        specs: Vec<SegmentSpec>,
        mut events: Vec<Event>,
    ) -> Result<Self, ScheduleError> {
        if specs.is_empty() {
            return Err(ScheduleError::Empty);
        }
        events.sort_by(|a, b| a.time().total_cmp(&b.time()));
        let start = specs[0].t_start;
        let end = specs[specs.len() - 1].t_end;

        let switches: Vec<(f64, RotationAxis)> = events
            .iter()
            .filter_map(|e| match e {
                Event::AxisSwitch { t, axis, .. } => Some((*t, *axis)),
                _ => None,
            })
            .collect();
        for e in &events {
            let t = e.time();
            if t <= start || t >= end {
                return Err(ScheduleError::EventOutsideHorizon { t, start, end });
            }
            if let Event::AgentJoin(j) = e {
                if j.spawn > j.t {
                    return Err(ScheduleError::SpawnAfterJoin { spawn: j.spawn, t: j.t });
                }
                if j.spawn < start {
                    return Err(ScheduleError::EventOutsideHorizon { t: j.spawn, start, end });
                }
            }
        }

        for &(t, _) in &switches {
            if !specs.iter().skip(1).any(|s| (s.t_start - t).abs() <= TIME_EPS) {
                return Err(ScheduleError::SwitchOffBoundary { t });
            }
        }
        let mut segments = Vec::with_capacity(specs.len());
        let mut axis = initial_axis;
        let mut phase = 0;
        for (index, spec) in specs.into_iter().enumerate() {
            if spec.t_start.partial_cmp(&spec.t_end) != Some(std::cmp::Ordering::Less) {
                return Err(ScheduleError::EmptySegment { index, t_start: spec.t_start, t_end: spec.t_end });
            }
            let positive = |v: f64| v > 0.0 && v.is_finite();
            if !positive(spec.scale.start()) || !positive(spec.scale.end()) {
                return Err(ScheduleError::NonPositiveScale { index });
            }
            let switch = switches.iter().find(|(t, _)| (t - spec.t_start).abs() <= TIME_EPS);
            if index > 0 {
                let prev: &ManeuverSegment = &segments[index - 1];
                if (spec.t_start - prev.t_end).abs() > TIME_EPS {
                    return Err(ScheduleError::Gap { index, t_start: spec.t_start, prev_end: prev.t_end });
                }
                if let Some((_, new_axis)) = switch {
                    let identity = spec.translation.start().norm() <= CONTINUITY_TOL
                        && (spec.scale.start() - 1.0).abs() <= CONTINUITY_TOL
                        && spec.angle.start().abs() <= CONTINUITY_TOL;
                    if !identity {
                        return Err(ScheduleError::SwitchNotIdentity { index });
                    }
                    axis = *new_axis;
                    phase += 1;
                } else {
                    let t = spec.t_start;
                    if (spec.translation.start() - prev.translation.end()).norm() > CONTINUITY_TOL {
                        return Err(ScheduleError::Discontinuous { index, field: "translation", t });
                    }
                    if (spec.scale.start() - prev.scale.end()).abs() > CONTINUITY_TOL {
                        return Err(ScheduleError::Discontinuous { index, field: "scale", t });
                    }
                    if (spec.angle.start() - prev.angle.end()).abs() > CONTINUITY_TOL {
                        return Err(ScheduleError::Discontinuous { index, field: "angle", t });
                    }
                }
            }
            segments.push(ManeuverSegment {
                t_start: spec.t_start,
                t_end: spec.t_end,
                translation: spec.translation,
                scale: spec.scale,
                angle: spec.angle,
                axis,
                phase,
            });
        }
        Ok(Self { segments, events })
    }

    pub fn segments(&self) -> &[ManeuverSegment] {
        &self.segments
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn start(&self) -> f64 {
        self.segments[0].t_start
    }

    pub fn end(&self) -> f64 {
        self.segments[self.segments.len() - 1].t_end
    }

    pub fn initial_axis(&self) -> RotationAxis {
        self.segments[0].axis
    }

    fn check_range(&self, t: f64) -> Result<(), ScheduleError> {
        let (start, end) = (self.start(), self.end());
        if t < start - TIME_EPS || t > end + TIME_EPS || !t.is_finite() {
            return Err(ScheduleError::OutOfRange { t, start, end });
        }
        Ok(())
    }

    /// Segment whose half-open span `[t_start, t_end)` contains `t`; the final
    /// segment also owns the horizon end.
    pub fn segment_at(&self, t: f64) -> &ManeuverSegment {
        self.segments.iter().rev().find(|s| s.t_start <= t).unwrap_or(&self.segments[0])
    }

    /// Samples the segment active at `t` (segments are right-continuous; the
    /// final segment includes its end).
    pub fn evaluate(&self, t: f64) -> Result<TransformSample, ScheduleError> {
        self.check_range(t)?;
        Ok(self.segment_at(t).sample(t))
    }

    /// Samples the segment that ends at or after `t` (left limit at boundaries).
    pub fn evaluate_left(&self, t: f64) -> Result<TransformSample, ScheduleError> {
        self.check_range(t)?;
        let seg = self.segments.iter().find(|s| t <= s.t_end).unwrap_or(&self.segments[self.segments.len() - 1]);
        Ok(seg.sample(t))
    }

    /// Every segment start plus the horizon end.
    pub fn boundaries(&self) -> Vec<f64> {
        let mut b: Vec<f64> = self.segments.iter().map(|s| s.t_start).collect();
        b.push(self.end());
        b
    }
}

/// Nominal configuration, pivot, axis, and the constraint matrix built from them.
#[derive(Debug, Clone)]
pub struct NominalFrame {
    formation: Formation,
    pivot: Vec3,
    laplacian: AugmentedLaplacian,
    /// `−W_ff⁻¹ W_fl`, so that `p_f = follower_map · p_l` at equilibrium.
    follower_map: DMatrix<f64>,
}

impl NominalFrame {
    /// Pivot is the centroid of the nominal configuration.
    pub fn new(formation: Formation, axis: &RotationAxis, seed: u64) -> Result<Self, LaplacianError> {
        let pivot = formation.centroid();
        Self::with_pivot(formation, pivot, axis, seed)
    }

    pub fn with_pivot(
        formation: Formation,
        pivot: Vec3,
        axis: &RotationAxis,
        seed: u64,
    ) -> Result<Self, LaplacianError> {
        let laplacian = laplacian::assemble(&formation, axis, seed)?;
        Self::from_parts(formation, pivot, laplacian)
    }

    fn from_parts(formation: Formation, pivot: Vec3, laplacian: AugmentedLaplacian) -> Result<Self, LaplacianError> {
        let part = laplacian.partition();
        let rc = laplacian.rcond_ff();
        let lu = part.ff.clone().lu();
        let follower_map = lu.solve(&(-&part.fl)).ok_or(LaplacianError::NotLocalizable { rcond: rc, attempts: 0 })?;
        Ok(Self { formation, pivot, laplacian, follower_map })
    }

    pub fn formation(&self) -> &Formation {
        &self.formation
    }

    pub fn nominal(&self) -> &[Vec3] {
        &self.formation.positions
    }

    pub fn pivot(&self) -> Vec3 {
        self.pivot
    }

    pub fn axis(&self) -> &RotationAxis {
        self.laplacian.axis()
    }

    pub fn laplacian(&self) -> &AugmentedLaplacian {
        &self.laplacian
    }

    pub fn follower_map(&self) -> &DMatrix<f64> {
        &self.follower_map
    }

    pub fn n(&self) -> usize {
        self.formation.n()
    }

    /// Target position of a point whose nominal position is `r`.
    pub fn target_of(&self, r: &Vec3, sample: &TransformSample) -> Vec3 {
        self.pivot + sample.translation + sample.rotation * (r - self.pivot) * sample.scale
    }

    /// Target velocity of a point whose nominal position is `r`.
    pub fn target_rate_of(&self, r: &Vec3, sample: &TransformSample) -> Vec3 {
        let rel = r - self.pivot;
        sample.translation_rate + (sample.rotation * sample.scale_rate + sample.rotation_rate * sample.scale) * rel
    }

    /// Adds a follower with nominal position `nominal` sensing `neighbors`.
    /// The pivot and every existing constraint row are kept.
    pub fn with_joined(&self, nominal: Vec3, neighbors: Vec<usize>, seed: u64) -> Result<Self, JoinError> {
        let graph = self.formation.graph.with_follower(neighbors.clone())?;
        let mut positions = self.formation.positions.clone();
        positions.push(nominal);
        let laplacian = self.laplacian.with_follower(&positions, neighbors, seed)?;
        let formation = Formation::new(graph, positions, self.formation.dimension)?;
        Ok(Self::from_parts(formation, self.pivot, laplacian)?)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum JoinError {
    #[error(transparent)]
    Graph(#[from] crate::graph::GraphError),
    #[error(transparent)]
    Laplacian(#[from] LaplacianError),
}

/// `p*_i = r_c + T + k·R(r_i − r_c)` for every nominal position in the frame.
pub fn target_configuration(frame: &NominalFrame, sample: &TransformSample) -> Vec<Vec3> {
    frame.nominal().iter().map(|r| frame.target_of(r, sample)).collect()
}

/// `ṗ*_i = Ṫ + (k̇ I + k θ̇ ζ×) R (r_i − r_c)`.
pub fn target_velocity(frame: &NominalFrame, sample: &TransformSample) -> Vec<Vec3> {
    frame.nominal().iter().map(|r| frame.target_rate_of(r, sample)).collect()
}

/// Re-bases the frame on the target configuration at the switch instant and
/// rebuilds the constraint matrix for `new_axis`. The new pivot is the image
/// of the old one, `r_c + T(t₁)`, which equals the new centroid whenever the
/// old pivot was the centroid.
pub fn apply_axis_switch(
    frame: &NominalFrame,
    at_switch: &TransformSample,
    new_axis: &RotationAxis,
    seed: u64,
) -> Result<NominalFrame, LaplacianError> {
    let rebased = target_configuration(frame, at_switch);
    let pivot = frame.pivot + at_switch.translation;
    let formation = Formation { positions: rebased, ..frame.formation.clone() };
    NominalFrame::with_pivot(formation, pivot, new_axis, seed)
}

#[cfg(test)]
mod tests;
