//! Monte Carlo sweeps over random transforms and formations.
//!
//! Trial `i` draws from its own generator seeded with `mix(seed, i)`, so a
//! sweep returns identical metrics under either [`Execution`] mode.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::exec::Execution;
use crate::geometry::{rodrigues, RotationAxis, Vec3};
use crate::graph::{flatten, unflatten, Dimension, Formation};
use crate::laplacian::planar::{complex_oracle_follower_solve, complex_weights, from_complex};
use crate::laplacian::{
    assemble_with, mix_seed, random_axis, similarity_residual, solve_followers, LaplacianError, WeightCoeffs,
};
use crate::presets;

/// Per-trial metrics of one sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepSummary {
    pub trials: usize,
    pub max: f64,
    pub mean: f64,
}

impl SweepSummary {
    fn from_metrics(metrics: &[f64]) -> Self {
        let max = metrics.iter().copied().fold(0.0, f64::max);
        let mean = if metrics.is_empty() { 0.0 } else { metrics.iter().sum::<f64>() / metrics.len() as f64 };
        Self { trials: metrics.len(), max, mean }
    }
}

fn trial_rng(seed: u64, i: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix_seed(seed, i as u64))
}

/// `‖wR − Rw‖∞` for random axes, coefficients in `[−5, 5]` and angles in `[0, 2π)`.
pub fn commutation(trials: usize, seed: u64, exec: Execution) -> Vec<f64> {
    exec.map(trials, |i| {
        let mut rng = trial_rng(seed, i);
        let axis = random_axis(&mut rng);
        let c =
            WeightCoeffs::new(rng.random_range(-5.0..=5.0), rng.random_range(-5.0..=5.0), rng.random_range(-5.0..=5.0));
        let theta = rng.random_range(0.0..std::f64::consts::TAU);
        let w = c.realize(&axis);
        let r = rodrigues(&axis, theta);
        (w * r - r * w).amax()
    })
}

/// Similarity residual of `W` (built once for `formation`) on random targets
/// `c + T + kR(r − c)` with `k ∈ [0.2, 3]` and `T ∈ [−5, 5]³` (in-plane for planar formations).
pub fn similarity(
    formation: &Formation,
    axis: &RotationAxis,
    trials: usize,
    seed: u64,
    exec: Execution,
) -> Result<Vec<f64>, LaplacianError> {
    let w = assemble_with(formation, axis, seed, exec)?;
    let c = formation.centroid();
    let planar = formation.dimension == Dimension::Planar;
    Ok(exec.map(trials, |i| {
        let mut rng = trial_rng(seed, i);
        let t = Vec3::new(
            rng.random_range(-5.0..=5.0),
            rng.random_range(-5.0..=5.0),
            if planar { 0.0 } else { rng.random_range(-5.0..=5.0) },
        );
        let k = rng.random_range(0.2..=3.0);
        let theta = rng.random_range(0.0..std::f64::consts::TAU);
        let rot = rodrigues(axis, theta);
        let p: Vec<Vec3> = formation.positions.iter().map(|r| c + t + rot * (r - c) * k).collect();
        similarity_residual(&w, &p)
    }))
}

fn random_planar_formation(rng: &mut ChaCha8Rng) -> Formation {
    loop {
        let positions: Vec<Vec3> =
            (0..5).map(|_| Vec3::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0), 0.0)).collect();
        let separated = (0..5).all(|i| (i + 1..5).all(|j| (positions[i] - positions[j]).norm() > 0.2));
        if separated {
            if let Ok(f) = Formation::new(presets::default_graph(), positions, Dimension::Planar) {
                return f;
            }
        }
    }
}

/// Largest follower-position gap between the matrix pipeline and the
/// complex-Laplacian solve, on random in-plane five-agent formations with
/// random leader placements. Formations whose assembly fails are redrawn.
pub fn planar_equivalence(trials: usize, seed: u64, exec: Execution) -> Vec<f64> {
    exec.map(trials, |i| {
        let mut rng = trial_rng(seed, i);
        loop {
            let f = random_planar_formation(&mut rng);
            let Ok(w) = assemble_with(&f, &RotationAxis::z(), seed, Execution::Sequential) else {
                continue;
            };
            let Ok(cw) = complex_weights(&f) else { continue };
            let leaders: Vec<Vec3> =
                (0..2).map(|_| Vec3::new(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0), 0.0)).collect();
            if (leaders[0] - leaders[1]).norm() < 0.2 {
                continue;
            }
            let part = w.partition();
            let Ok(matrix) = solve_followers(&part.ff, &part.fl, &flatten(&leaders, 2)) else { continue };
            let Ok(oracle) = complex_oracle_follower_solve(&f, &cw, &leaders) else { continue };
            return unflatten(&matrix, 2).iter().zip(&oracle).map(|(m, o)| (m - o).amax()).fold(0.0, f64::max);
        }
    })
}

/// Gap between the realized planar weight acting on `[x, y, 0]` and complex
/// multiplication `(a + ci)(x + iy)`, over random inputs in `[−5, 5]`.
pub fn planar_action(trials: usize, seed: u64, exec: Execution) -> Vec<f64> {
    exec.map(trials, |i| {
        let mut rng = trial_rng(seed, i);
        let mut draw = || rng.random_range(-5.0..=5.0);
        let z = Complex64::new(draw(), draw());
        let (x, y) = (draw(), draw());
        let m = from_complex(z).realize(&RotationAxis::z()) * Vec3::new(x, y, 0.0);
        let prod = z * Complex64::new(x, y);
        (m.x - prod.re).abs().max((m.y - prod.im).abs()).max(m.z.abs())
    })
}

/// Runs `commutation`, `similarity` on both references, `planar_equivalence`
/// and `planar_action` and summarizes each.
pub fn all(trials: usize, seed: u64, exec: Execution) -> Result<Vec<(&'static str, SweepSummary)>, LaplacianError> {
    let z = RotationAxis::z();
    Ok(vec![
        ("commutation", SweepSummary::from_metrics(&commutation(trials, seed, exec))),
        (
            "similarity_planar",
            SweepSummary::from_metrics(&similarity(&presets::planar_formation(), &z, trials, seed, exec)?),
        ),
        (
            "similarity_spatial",
            SweepSummary::from_metrics(&similarity(&presets::spatial_formation(), &z, trials, seed, exec)?),
        ),
        ("planar_equivalence", SweepSummary::from_metrics(&planar_equivalence(trials, seed, exec))),
        ("planar_action", SweepSummary::from_metrics(&planar_action(trials, seed, exec))),
    ])
}

pub fn summarize(metrics: &[f64]) -> SweepSummary {
    SweepSummary::from_metrics(metrics)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sweeps_are_execution_independent() {
        assert_eq!(commutation(50, 3, Execution::Sequential), commutation(50, 3, Execution::Parallel));
        assert_eq!(planar_equivalence(10, 3, Execution::Sequential), planar_equivalence(10, 3, Execution::Parallel));
    }

    #[test]
    fn small_sweeps_within_tolerance() {
        let summaries = all(20, 1, Execution::default()).unwrap();
        assert_eq!(summaries.len(), 5);
        for (name, s) in summaries {
            assert_eq!(s.trials, 20);
            assert!(s.max < 1e-9, "{name}: {:e}", s.max);
        }
    }

    #[test]
    fn summary_of_empty() {
        assert_eq!(summarize(&[]), SweepSummary { trials: 0, max: 0.0, mean: 0.0 });
    }
}
