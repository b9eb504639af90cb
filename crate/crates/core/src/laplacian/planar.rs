//! Planar specialization (ζ = z) and the complex-Laplacian cross-check.
//!
//! In the plane a weight `a·I + b·ζζᵀ + c·ζ×` acts on `[x, y, 0]` exactly
//! like multiplication by the complex number `a + c·i`. The `b` coefficient
//! only touches the unused z channel and is set to `−a` so that channel is
//! identically zero.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{canonicalize, split, LaplacianError, Selector, WeightCoeffs};
use crate::geometry::Vec3;
use crate::graph::{Dimension, Formation};

pub fn to_complex(w: &WeightCoeffs) -> Complex64 {
    Complex64::new(w.a, w.c)
}

pub fn from_complex(z: Complex64) -> WeightCoeffs {
    WeightCoeffs::new(z.re, -z.re, z.im)
}

fn complex_of(p: &Vec3) -> Complex64 {
    Complex64::new(p.x, p.y)
}

/// Closed-form planar pair weights: `w_ij ∝ v`, `w_ik ∝ −u` as complex
/// numbers, so `w_ij u + w_ik v = vu − uv = 0`.
pub fn solve_pair_weights_2d(u: &Vec3, v: &Vec3) -> Result<(WeightCoeffs, WeightCoeffs), LaplacianError> {
    pair_weights_with(u, v, Selector::Canonical)
}

pub(crate) fn pair_weights_with(
    u: &Vec3,
    v: &Vec3,
    selector: Selector,
) -> Result<(WeightCoeffs, WeightCoeffs), LaplacianError> {
    if u.norm() == 0.0 || v.norm() == 0.0 {
        return Err(LaplacianError::DegeneratePair);
    }
    let phase = match selector {
        Selector::Canonical => Complex64::new(1.0, 0.0),
        Selector::Seeded(seed) => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            Complex64::from_polar(1.0, rng.random_range(0.0..std::f64::consts::TAU))
        }
    };
    let wj = from_complex(complex_of(v) * phase);
    let wk = from_complex(-complex_of(u) * phase);
    let x = nalgebra::Vector6::new(wj.a, wj.b, wj.c, wk.a, wk.b, wk.c);
    Ok(split(&canonicalize(x)))
}

/// Complex weights built directly in complex arithmetic: every neighbor pair
/// contributes `(v, −u) / ‖(u, v)‖`, summed per agent. Rows of agents with
/// fewer than two neighbors are empty.
pub fn complex_weights(formation: &Formation) -> Result<Vec<Vec<Complex64>>, LaplacianError> {
    if formation.dimension != Dimension::Planar {
        return Err(LaplacianError::Oracle("formation is not planar".into()));
    }
    let graph = &formation.graph;
    (0..graph.n())
        .map(|i| {
            let nb = graph.neighbors(i);
            let mut w = vec![Complex64::new(0.0, 0.0); nb.len()];
            if nb.len() < 2 {
                return Ok(Vec::new());
            }
            let origin = complex_of(&formation.positions[i]);
            let off: Vec<Complex64> = nb.iter().map(|&j| complex_of(&formation.positions[j]) - origin).collect();
            for j in 0..nb.len() {
                for k in j + 1..nb.len() {
                    let scale = (off[j].norm_sqr() + off[k].norm_sqr()).sqrt();
                    if scale == 0.0 {
                        return Err(LaplacianError::Oracle(format!("agent {i} has coincident neighbors")));
                    }
                    w[j] += off[k] / scale;
                    w[k] -= off[j] / scale;
                }
            }
            Ok(w)
        })
        .collect()
}

/// Solves `W_ff z_f = −W_fl z_l` over ℂ for the followers' planar positions,
/// with leaders placed at `leader_positions` (in leader index order).
pub fn complex_oracle_follower_solve(
    formation: &Formation,
    weights: &[Vec<Complex64>],
    leader_positions: &[Vec3],
) -> Result<Vec<Vec3>, LaplacianError> {
    let graph = &formation.graph;
    let n = graph.n();
    let mut lap = DMatrix::<Complex64>::zeros(n, n);
    for i in 0..n {
        for (&j, w) in graph.neighbors(i).iter().zip(&weights[i]) {
            lap[(i, j)] += *w;
            lap[(i, i)] -= *w;
        }
    }
    let followers = graph.followers();
    let leaders = graph.leaders();
    if leader_positions.len() != leaders.len() {
        return Err(LaplacianError::Oracle("leader count mismatch".into()));
    }
    let ff = DMatrix::from_fn(followers.len(), followers.len(), |r, c| lap[(followers[r], followers[c])]);
    let fl = DMatrix::from_fn(followers.len(), leaders.len(), |r, c| lap[(followers[r], leaders[c])]);
    let z_l = DVector::from_iterator(leaders.len(), leader_positions.iter().map(complex_of));
    let rhs = -(fl * z_l);
    let z_f = ff.lu().solve(&rhs).ok_or_else(|| LaplacianError::Oracle("singular complex W_ff".into()))?;
    if z_f.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(LaplacianError::Oracle("singular complex W_ff".into()));
    }
    Ok(z_f.iter().map(|z| Vec3::new(z.re, z.im, 0.0)).collect())
}
