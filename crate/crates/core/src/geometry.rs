//! Small dense 3-vector / 3×3 kernel: skew maps, axis projectors and
//! Rodrigues rotations.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;

/// Inputs shorter than this are rejected as rotation axes.
pub const MIN_AXIS_NORM: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("rotation axis {0:?} is too short to normalize (norm {1:e})")]
    DegenerateAxis([f64; 3], f64),
    #[error("rotation axis has non-finite components {0:?}")]
    NonFiniteAxis([f64; 3]),
}

/// Unit rotation axis ζ. Always normalized.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 3]", into = "[f64; 3]")]
pub struct RotationAxis(Vec3);

impl RotationAxis {
    pub fn new(direction: Vec3) -> Result<Self, GeometryError> {
        let raw = [direction.x, direction.y, direction.z];
        if !raw.iter().all(|c| c.is_finite()) {
            return Err(GeometryError::NonFiniteAxis(raw));
        }
        let norm = direction.norm();
        if norm < MIN_AXIS_NORM {
            return Err(GeometryError::DegenerateAxis(raw, norm));
        }
        Ok(Self(direction / norm))
    }

    pub fn z() -> Self {
        Self(Vec3::z())
    }

    pub fn direction(&self) -> Vec3 {
        self.0
    }

    /// ζ× : the matrix with `skew() * v == ζ × v`.
    pub fn skew(&self) -> Mat3 {
        skew(self)
    }

    pub fn projector(&self) -> Mat3 {
        axis_projector(self)
    }

    pub fn rotation(&self, theta: f64) -> Mat3 {
        rodrigues(self, theta)
    }
}

impl TryFrom<[f64; 3]> for RotationAxis {
    type Error = GeometryError;

    fn try_from(v: [f64; 3]) -> Result<Self, Self::Error> {
        Self::new(Vec3::new(v[0], v[1], v[2]))
    }
}

impl From<RotationAxis> for [f64; 3] {
    fn from(axis: RotationAxis) -> Self {
        [axis.0.x, axis.0.y, axis.0.z]
    }
}

#[rustfmt::skip]
pub fn skew(axis: &RotationAxis) -> Mat3 {
    let z = axis.0;
    Mat3::new(
        0.0, -z.z,  z.y,
        z.z,  0.0, -z.x,
       -z.y,  z.x,  0.0,
    )
}

/// ζζᵀ.
pub fn axis_projector(axis: &RotationAxis) -> Mat3 {
    axis.0 * axis.0.transpose()
}

/// R = I + sinθ·ζ× + (1 − cosθ)·(ζ×)².
pub fn rodrigues(axis: &RotationAxis, theta: f64) -> Mat3 {
    let k = skew(axis);
    Mat3::identity() + k * theta.sin() + (k * k) * (1.0 - theta.cos())
}

/// Largest absolute entry.
pub fn max_abs(m: &Mat3) -> f64 {
    m.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}
