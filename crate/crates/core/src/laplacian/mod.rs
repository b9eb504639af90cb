//! Matrix-valued edge weights and the augmented Laplacian.
//!
//! Every edge weight lives in the commutative algebra spanned by
//! `{I, ζζᵀ, ζ×}` for a fixed rotation axis ζ:
//!
//! ```text
//! w_ij = a·I + b·ζζᵀ + c·ζ×
//! ```
//!
//! Weights are synthesized per agent from its nominal neighbor offsets so that
//! `Σ_j w_ij (r_j − r_i) = 0`. Agents with more than two neighbors sum
//! unit-normalized solutions of every two-neighbor subproblem. Because each
//! weight commutes with `R_ζ(θ)`, any translation, uniform scaling or rotation
//! about ζ of the nominal configuration stays in `ker(W)`.

pub mod planar;

use nalgebra::{DMatrix, DVector, Matrix3x6, Vector6, SVD};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec::Execution;
use crate::geometry::{Mat3, RotationAxis, Vec3};
use crate::graph::{flatten, Dimension, Formation, Role};

/// Reciprocal condition number at or below which `W_ff` counts as singular.
pub const RCOND_MIN: f64 = 1e-12;
/// Retry budget used when weight sums cancel or `W_ff` is singular.
pub const MAX_RETRIES: u32 = 32;
/// Singular values below `SVD_RANK_TOL · σ_max` are treated as zero.
const SVD_RANK_TOL: f64 = 1e-12;
/// Coefficient norm below which a summed edge weight is considered cancelled.
const CANCELLED_WEIGHT: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LaplacianError {
    #[error("both neighbor offsets are zero")]
    DegeneratePair,
    #[error("agent {agent} coincides with neighbor {neighbor} in the nominal configuration")]
    DegenerateEdge { agent: usize, neighbor: usize },
    #[error("agent {agent} has {count} neighbors; weight synthesis needs at least 2")]
    TooFewNeighbors { agent: usize, count: usize },
    #[error("weight for edge ({agent}, {neighbor}) cancelled to zero")]
    WeightCancellation { agent: usize, neighbor: usize },
    #[error("agent {agent}: constraint residual {residual:e} exceeds tolerance")]
    ConstraintResidual { agent: usize, residual: f64 },
    #[error("W_ff is singular (rcond {rcond:e}) after {attempts} attempts")]
    NotLocalizable { rcond: f64, attempts: u32 },
    #[error("nominal residual |W r| = {residual:e} exceeds tolerance")]
    NominalResidual { residual: f64 },
    #[error("gamma (sum of weights) of agent {agent} is singular")]
    SingularGamma { agent: usize },
    #[error("planar formations require the rotation axis [0, 0, 1]")]
    PlanarAxis,
    #[error("complex oracle: {0}")]
    Oracle(String),
}

/// Coefficients of `a·I + b·ζζᵀ + c·ζ×`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct WeightCoeffs {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl WeightCoeffs {
    pub const fn new(a: f64, b: f64, c: f64) -> Self {
        Self { a, b, c }
    }

    pub fn realize(&self, axis: &RotationAxis) -> Mat3 {
        realize_weight(self, axis)
    }

    pub fn norm(&self) -> f64 {
        (self.a * self.a + self.b * self.b + self.c * self.c).sqrt()
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self::new(self.a * s, self.b * s, self.c * s)
    }

    fn add(&self, o: &Self) -> Self {
        Self::new(self.a + o.a, self.b + o.b, self.c + o.c)
    }
}

pub fn realize_weight(coeffs: &WeightCoeffs, axis: &RotationAxis) -> Mat3 {
    Mat3::identity() * coeffs.a + axis.projector() * coeffs.b + axis.skew() * coeffs.c
}

/// How the null-space direction of a two-neighbor subproblem is picked.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Selector {
    /// Project the fixed probe `(1, 1, 1, −1, −1, −1)/√6`.
    Canonical,
    /// Project a random unit probe drawn from this seed.
    Seeded(u64),
}

/// SplitMix64 finalizer, used to derive independent sub-seeds.
pub(crate) fn mix_seed(a: u64, b: u64) -> u64 {
    let mut z = a ^ b.wrapping_add(0x9E37_79B9_7F4A_7C15).wrapping_mul(0xD1B5_4A32_D192_ED03);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Unit-normalizes and fixes the sign so the first nonzero entry is positive.
fn canonicalize(mut x: Vector6<f64>) -> Vector6<f64> {
    let norm = x.norm();
    x /= norm;
    if let Some(first) = x.iter().find(|v| v.abs() > 1e-14) {
        if *first < 0.0 {
            x = -x;
        }
    }
    x
}

fn split(x: &Vector6<f64>) -> (WeightCoeffs, WeightCoeffs) {
    (WeightCoeffs::new(x[0], x[1], x[2]), WeightCoeffs::new(x[3], x[4], x[5]))
}

/// Solves `w_ij u + w_ik v = 0` for the two weights of a two-neighbor agent,
/// where `u = r_j − r_i` and `v = r_k − r_i`.
///
/// The 3×6 coefficient system always has a null space of dimension ≥ 3; the
/// probe selected by `selector` is projected onto it using the SVD row space.
/// The result has unit Euclidean norm over `(a_ij, b_ij, c_ij, a_ik, b_ik, c_ik)`
/// and a positive first nonzero entry.
pub fn solve_pair_weights(
    u: &Vec3,
    v: &Vec3,
    axis: &RotationAxis,
    selector: Selector,
) -> Result<(WeightCoeffs, WeightCoeffs), LaplacianError> {
    if u.norm() == 0.0 && v.norm() == 0.0 {
        return Err(LaplacianError::DegeneratePair);
    }
    let proj = axis.projector();
    let skew = axis.skew();
    let cols = [*u, proj * u, skew * u, *v, proj * v, skew * v];
    let a = Matrix3x6::from_columns(&cols);

    let svd = SVD::new(a, false, true);
    let v_t = svd.v_t.expect("v_t requested");
    let sigma_max = svd.singular_values.max();
    let row_space: Vec<Vector6<f64>> =
        (0..3).filter(|&i| svd.singular_values[i] > SVD_RANK_TOL * sigma_max).map(|i| v_t.row(i).transpose()).collect();
    let project = |p: &Vector6<f64>| row_space.iter().fold(*p, |acc, r| acc - r * r.dot(p));

    let probe = match selector {
        Selector::Canonical => Vector6::new(1.0, 1.0, 1.0, -1.0, -1.0, -1.0) / 6f64.sqrt(),
        Selector::Seeded(seed) => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let raw: Vector6<f64> = Vector6::from_fn(|_, _| rng.random_range(-1.0..1.0));
            raw / raw.norm().max(f64::MIN_POSITIVE)
        }
    };
    let mut x = project(&probe);
    if x.norm() < 1e-9 {
        // The probe sits in the row space; fall back to the basis vector with
        // the largest null-space component.
        x = (0..6)
            .map(|k| project(&Vector6::from_fn(|i, _| if i == k { 1.0 } else { 0.0 })))
            .max_by(|p, q| p.norm().total_cmp(&q.norm()))
            .expect("six candidates");
    }
    Ok(split(&canonicalize(x)))
}

/// Weights of one agent toward each of its neighbors, in neighbor-list order.
///
/// Two neighbors use the pair solution directly. With `m > 2` neighbors every
/// one of the `C(m, 2)` pairs is solved, zero-padded to length `m`, and the
/// padded solutions are summed.
pub fn build_agent_weights(
    agent: usize,
    formation: &Formation,
    axis: &RotationAxis,
    selector: Selector,
) -> Result<Vec<WeightCoeffs>, LaplacianError> {
    let neighbors = formation.graph.neighbors(agent);
    agent_weights(agent, neighbors, &formation.positions, formation.dimension, axis, selector)
}

pub(crate) fn agent_weights(
    agent: usize,
    neighbors: &[usize],
    positions: &[Vec3],
    dimension: Dimension,
    axis: &RotationAxis,
    selector: Selector,
) -> Result<Vec<WeightCoeffs>, LaplacianError> {
    let m = neighbors.len();
    if m < 2 {
        return Err(LaplacianError::TooFewNeighbors { agent, count: m });
    }
    let origin = positions[agent];
    let offsets: Vec<Vec3> = neighbors.iter().map(|&j| positions[j] - origin).collect();
    for (&j, off) in neighbors.iter().zip(&offsets) {
        if off.norm() == 0.0 {
            return Err(LaplacianError::DegenerateEdge { agent, neighbor: j });
        }
    }

    let mut weights = vec![WeightCoeffs::default(); m];
    let mut pair_index = 0u64;
    for j in 0..m {
        for k in j + 1..m {
            let pair_selector = match selector {
                Selector::Canonical => Selector::Canonical,
                Selector::Seeded(s) => Selector::Seeded(mix_seed(s, pair_index)),
            };
            let (wj, wk) = match dimension {
                Dimension::Spatial => solve_pair_weights(&offsets[j], &offsets[k], axis, pair_selector)?,
                Dimension::Planar => planar::pair_weights_with(&offsets[j], &offsets[k], pair_selector)?,
            };
            weights[j] = weights[j].add(&wj);
            weights[k] = weights[k].add(&wk);
            pair_index += 1;
        }
    }

    for (w, &j) in weights.iter().zip(neighbors) {
        if w.norm() < CANCELLED_WEIGHT {
            return Err(LaplacianError::WeightCancellation { agent, neighbor: j });
        }
    }

    let d = dimension.d();
    let mut residual = Vec3::zeros();
    let mut scale = 0.0;
    for (w, off) in weights.iter().zip(&offsets) {
        let wm = block(&w.realize(axis), d);
        residual += wm * off;
        scale += wm.norm() * off.norm();
    }
    if residual.norm() > 1e-10 * scale.max(f64::MIN_POSITIVE) {
        return Err(LaplacianError::ConstraintResidual { agent, residual: residual.norm() });
    }
    Ok(weights)
}

/// Restricts a realized weight to the active `d × d` block (z channel zeroed in 2-D).
fn block(m: &Mat3, d: usize) -> Mat3 {
    if d == 3 {
        *m
    } else {
        let mut out = Mat3::zeros();
        out.fixed_view_mut::<2, 2>(0, 0).copy_from(&m.fixed_view::<2, 2>(0, 0));
        out
    }
}

/// `γ_i = Σ_j w_ij`, restricted to the active block.
pub fn gamma(weights: &[WeightCoeffs], axis: &RotationAxis, d: usize) -> Mat3 {
    weights.iter().fold(Mat3::zeros(), |acc, w| acc + block(&w.realize(axis), d))
}

/// Inverse of a `d × d` block embedded in a 3×3 matrix.
pub fn invert_block(m: &Mat3, d: usize) -> Option<Mat3> {
    if d == 3 {
        m.try_inverse()
    } else {
        let inv = m.fixed_view::<2, 2>(0, 0).into_owned().try_inverse()?;
        let mut out = Mat3::zeros();
        out.fixed_view_mut::<2, 2>(0, 0).copy_from(&inv);
        Some(out)
    }
}

/// The four follower/leader views of `W`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockPartition {
    pub ff: DMatrix<f64>,
    pub fl: DMatrix<f64>,
    pub lf: DMatrix<f64>,
    pub ll: DMatrix<f64>,
    pub followers: Vec<usize>,
    pub leaders: Vec<usize>,
    pub d: usize,
}

fn dof_indices(agents: &[usize], d: usize) -> Vec<usize> {
    agents.iter().flat_map(|&a| (0..d).map(move |k| a * d + k)).collect()
}

impl BlockPartition {
    /// Rebuilds the full matrix from the four views.
    pub fn reassemble(&self) -> DMatrix<f64> {
        let f = dof_indices(&self.followers, self.d);
        let l = dof_indices(&self.leaders, self.d);
        let size = f.len() + l.len();
        let mut w = DMatrix::zeros(size, size);
        let views = [(&f, &f, &self.ff), (&f, &l, &self.fl), (&l, &f, &self.lf), (&l, &l, &self.ll)];
        for (rows, cols, m) in views {
            for (ri, &r) in rows.iter().enumerate() {
                for (ci, &c) in cols.iter().enumerate() {
                    w[(r, c)] = m[(ri, ci)];
                }
            }
        }
        w
    }
}

/// One agent's constraint row: neighbor indices and their weights.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ConstraintRow {
    pub neighbors: Vec<usize>,
    /// Empty for zeroed leader rows.
    pub weights: Vec<WeightCoeffs>,
}

/// Dense `n·d × n·d` constraint matrix with per-edge coefficient provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedLaplacian {
    dimension: Dimension,
    axis: RotationAxis,
    roles: Vec<Role>,
    rows: Vec<ConstraintRow>,
    matrix: DMatrix<f64>,
    rcond_ff: f64,
    retries: u32,
    seed: u64,
}

fn assemble_matrix(rows: &[ConstraintRow], axis: &RotationAxis, d: usize) -> DMatrix<f64> {
    let n = rows.len();
    let mut w = DMatrix::zeros(n * d, n * d);
    for (i, row) in rows.iter().enumerate() {
        let mut diag = Mat3::zeros();
        for (&j, coeffs) in row.neighbors.iter().zip(&row.weights) {
            let wm = coeffs.realize(axis);
            diag -= wm;
            w.view_mut((i * d, j * d), (d, d)).copy_from(&wm.view((0, 0), (d, d)));
        }
        w.view_mut((i * d, i * d), (d, d)).copy_from(&diag.view((0, 0), (d, d)));
    }
    w
}

fn select(m: &DMatrix<f64>, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), cols.len(), |r, c| m[(rows[r], cols[c])])
}

/// σ_min / σ_max.
pub fn rcond(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    let s = m.singular_values();
    let max = s.max();
    if max == 0.0 {
        0.0
    } else {
        s.min() / max
    }
}

impl AugmentedLaplacian {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn axis(&self) -> &RotationAxis {
        &self.axis
    }

    pub fn dimension(&self) -> Dimension {
        self.dimension
    }

    pub fn d(&self) -> usize {
        self.dimension.d()
    }

    pub fn n(&self) -> usize {
        self.roles.len()
    }

    pub fn roles(&self) -> &[Role] {
        &self.roles
    }

    pub fn row(&self, agent: usize) -> &ConstraintRow {
        &self.rows[agent]
    }

    pub fn rcond_ff(&self) -> f64 {
        self.rcond_ff
    }

    /// Number of resampling attempts that were needed beyond the first.
    pub fn retries(&self) -> u32 {
        self.retries
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn followers(&self) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.roles[i] == Role::Follower).collect()
    }

    pub fn leaders(&self) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.roles[i] == Role::Leader).collect()
    }

    /// Block `(i, j)` embedded in a 3×3 matrix.
    pub fn block(&self, i: usize, j: usize) -> Mat3 {
        let d = self.d();
        let mut out = Mat3::zeros();
        out.view_mut((0, 0), (d, d)).copy_from(&self.matrix.view((i * d, j * d), (d, d)));
        out
    }

    pub fn gamma(&self, agent: usize) -> Mat3 {
        gamma(&self.rows[agent].weights, &self.axis, self.d())
    }

    pub fn partition(&self) -> BlockPartition {
        partition_blocks(self)
    }

    /// Spectral radius of `D⁻¹(D − W_ff)`, `D` the block diagonal of `W_ff`.
    /// Evaluating every follower law against the other followers' previous
    /// velocities is one Jacobi sweep on the implicit system, so the causal
    /// mode is stable only when this is below 1. Infinite if a `γ_i` is singular.
    pub fn jacobi_radius(&self) -> f64 {
        let ff = self.partition().ff;
        let d = self.d();
        let nf = ff.nrows() / d;
        let mut it = DMatrix::zeros(ff.nrows(), ff.ncols());
        for r in 0..nf {
            let diag = ff.view((r * d, r * d), (d, d)).clone_owned();
            let Some(inv) = diag.try_inverse() else { return f64::INFINITY };
            for c in (0..nf).filter(|&c| c != r) {
                let block = -&inv * ff.view((r * d, c * d), (d, d));
                it.view_mut((r * d, c * d), (d, d)).copy_from(&block);
            }
        }
        it.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// `W · (positions stacked)`, as a flat vector.
    pub fn apply(&self, positions: &[Vec3]) -> DVector<f64> {
        &self.matrix * flatten(positions, self.d())
    }

    /// Appends a follower sensing `neighbors`, whose weights are built from
    /// `nominal` (all agents including the newcomer, which is last). Only
    /// the newcomer's row is new, so existing rows are untouched.
    pub fn with_follower(&self, nominal: &[Vec3], neighbors: Vec<usize>, seed: u64) -> Result<Self, LaplacianError> {
        let new = self.n();
        assert_eq!(nominal.len(), new + 1, "nominal must include the new agent");
        let d = self.d();
        let mut roles = self.roles.clone();
        roles.push(Role::Follower);
        let followers: Vec<usize> = (0..=new).filter(|&i| roles[i] == Role::Follower).collect();
        let f = dof_indices(&followers, d);

        let mut last_rcond = 0.0;
        for attempt in 0..=MAX_RETRIES {
            let selector = if attempt == 0 {
                Selector::Canonical
            } else {
                Selector::Seeded(mix_seed(mix_seed(seed, attempt as u64), new as u64))
            };
            let weights = match agent_weights(new, &neighbors, nominal, self.dimension, &self.axis, selector) {
                Ok(w) => w,
                Err(LaplacianError::WeightCancellation { .. }) => continue,
                Err(e) => return Err(e),
            };
            if invert_block(&gamma(&weights, &self.axis, d), d).is_none() {
                continue;
            }
            let mut rows = self.rows.clone();
            rows.push(ConstraintRow { neighbors: neighbors.clone(), weights });
            let matrix = assemble_matrix(&rows, &self.axis, d);
            last_rcond = rcond(&select(&matrix, &f, &f));
            if last_rcond > RCOND_MIN {
                return Ok(Self {
                    dimension: self.dimension,
                    axis: self.axis,
                    roles,
                    rows,
                    matrix,
                    rcond_ff: last_rcond,
                    retries: attempt,
                    seed,
                });
            }
        }
        Err(LaplacianError::NotLocalizable { rcond: last_rcond, attempts: MAX_RETRIES + 1 })
    }
}

/// Builds `W` for the nominal formation and rotation axis.
///
/// The first attempt uses the canonical probe for every pair subproblem. If a
/// summed weight cancels or `rcond(W_ff) ≤ RCOND_MIN`, every agent is resampled
/// with seeded random probes, up to [`MAX_RETRIES`] times.
pub fn assemble(formation: &Formation, axis: &RotationAxis, seed: u64) -> Result<AugmentedLaplacian, LaplacianError> {
    assemble_with(formation, axis, seed, Execution::default())
}

pub fn assemble_with(
    formation: &Formation,
    axis: &RotationAxis,
    seed: u64,
    exec: Execution,
) -> Result<AugmentedLaplacian, LaplacianError> {
    let d = formation.d();
    if formation.dimension == Dimension::Planar && axis.direction() != Vec3::z() {
        return Err(LaplacianError::PlanarAxis);
    }
    let graph = &formation.graph;
    let n = graph.n();
    for i in 0..n {
        for &j in graph.neighbors(i) {
            if formation.positions[j] == formation.positions[i] {
                return Err(LaplacianError::DegenerateEdge { agent: i, neighbor: j });
            }
        }
    }
    let followers = graph.followers();
    let f = dof_indices(&followers, d);
    let r = formation.config();

    let mut last_rcond = 0.0;
    for attempt in 0..=MAX_RETRIES {
        let built: Vec<Result<ConstraintRow, LaplacianError>> = exec.map(n, |i| {
            let neighbors = graph.neighbors(i).to_vec();
            if graph.role(i) == Role::Leader && neighbors.len() < 2 {
                return Ok(ConstraintRow { neighbors, weights: Vec::new() });
            }
            let selector = if attempt == 0 {
                Selector::Canonical
            } else {
                Selector::Seeded(mix_seed(mix_seed(seed, attempt as u64), i as u64))
            };
            let weights = build_agent_weights(i, formation, axis, selector)?;
            Ok(ConstraintRow { neighbors, weights })
        });
        let mut rows = Vec::with_capacity(n);
        let mut cancelled = false;
        for row in built {
            match row {
                Ok(row) => rows.push(row),
                Err(LaplacianError::WeightCancellation { .. }) => cancelled = true,
                Err(e) => return Err(e),
            }
        }
        if cancelled {
            continue;
        }
        let matrix = assemble_matrix(&rows, axis, d);
        last_rcond = rcond(&select(&matrix, &f, &f));
        if last_rcond <= RCOND_MIN {
            continue;
        }
        let residual = (&matrix * &r).norm();
        if residual > 1e-9 * matrix.norm() * r.norm() {
            return Err(LaplacianError::NominalResidual { residual });
        }
        return Ok(AugmentedLaplacian {
            dimension: formation.dimension,
            axis: *axis,
            roles: graph.roles().to_vec(),
            rows,
            matrix,
            rcond_ff: last_rcond,
            retries: attempt,
            seed,
        });
    }
    Err(LaplacianError::NotLocalizable { rcond: last_rcond, attempts: MAX_RETRIES + 1 })
}

pub fn partition_blocks(w: &AugmentedLaplacian) -> BlockPartition {
    let d = w.d();
    let followers = w.followers();
    let leaders = w.leaders();
    let f = dof_indices(&followers, d);
    let l = dof_indices(&leaders, d);
    let m = w.matrix();
    BlockPartition {
        ff: select(m, &f, &f),
        fl: select(m, &f, &l),
        lf: select(m, &l, &f),
        ll: select(m, &l, &l),
        followers,
        leaders,
        d,
    }
}

/// Follower configuration solving `W_ff p_f + W_fl p_l = 0`.
pub fn solve_followers(
    ff: &DMatrix<f64>,
    fl: &DMatrix<f64>,
    leaders: &DVector<f64>,
) -> Result<DVector<f64>, LaplacianError> {
    let rc = rcond(ff);
    if rc <= RCOND_MIN {
        return Err(LaplacianError::NotLocalizable { rcond: rc, attempts: 0 });
    }
    let rhs = -(fl * leaders);
    let p_f = ff.clone().lu().solve(&rhs).ok_or(LaplacianError::NotLocalizable { rcond: rc, attempts: 0 })?;
    Ok(p_f)
}

/// `‖W p‖₂ / max(1, ‖W‖_F ‖p‖₂)`.
pub fn similarity_residual(w: &AugmentedLaplacian, positions: &[Vec3]) -> f64 {
    let p = flatten(positions, w.d());
    let scale = (w.matrix().norm() * p.norm()).max(1.0);
    (w.matrix() * &p).norm() / scale
}

/// Random unit axis, used by sweeps and tests.
pub fn random_axis<R: Rng>(rng: &mut R) -> RotationAxis {
    loop {
        let v = Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let n = v.norm();
        if n > 0.1 && n <= 1.0 {
            return RotationAxis::new(v).expect("non-degenerate");
        }
    }
}

#[cfg(test)]
mod tests;
