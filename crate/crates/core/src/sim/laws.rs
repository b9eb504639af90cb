//! Leader tracking law and the two follower modes.

use nalgebra::DVector;

use crate::geometry::{RotationAxis, Vec3};
use crate::laplacian::{gamma, invert_block, WeightCoeffs};

/// `v_i = −tanh(p_i − p*_i) + ṗ*_i`, componentwise.
pub fn leader_velocity(p: &Vec3, target: &Vec3, target_rate: &Vec3) -> Vec3 {
    (p - target).map(|e| -e.tanh()) + target_rate
}

/// Solves `W_ff ṗ_f + W_fl ṗ_l = −α (W_ff p_f + W_fl p_l)` using the
/// precomputed `follower_map = −W_ff⁻¹ W_fl`:
/// `ṗ_f = follower_map · ṗ_l − α (p_f − follower_map · p_l)`.
pub fn follower_velocities_implicit(
    follower_map: &nalgebra::DMatrix<f64>,
    p_f: &DVector<f64>,
    p_l: &DVector<f64>,
    p_l_dot: &DVector<f64>,
    alpha: f64,
) -> DVector<f64> {
    let e_f = p_f - follower_map * p_l;
    follower_map * p_l_dot - e_f * alpha
}

/// Per-agent distributed law `ṗ_i = γ_i⁻¹ Σ_j w_ij [α (p_j − p_i) + ṗ_j]`
/// using only relative positions `p_i − p_j` and neighbor velocities.
/// Returns `None` when `γ_i` is singular.
pub fn follower_velocity_causal(
    rel_positions: &[Vec3],
    neighbor_velocities: &[Vec3],
    weights: &[WeightCoeffs],
    axis: &RotationAxis,
    d: usize,
    alpha: f64,
) -> Option<Vec3> {
    let gamma_inv = invert_block(&gamma(weights, axis, d), d)?;
    let mut acc = Vec3::zeros();
    for ((rel, vel), w) in rel_positions.iter().zip(neighbor_velocities).zip(weights) {
        acc += w.realize(axis) * (-rel * alpha + vel);
    }
    Some(gamma_inv * acc)
}
