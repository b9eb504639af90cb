use super::planar::*;
use super::*;
use crate::geometry::rodrigues;
use crate::graph::InteractionGraph;
use crate::presets;
use approx::assert_relative_eq;
use num_complex::Complex64;
use proptest::prelude::*;

fn vec3() -> impl Strategy<Value = Vec3> {
    (-3.0..3.0f64, -3.0..3.0f64, -3.0..3.0f64).prop_map(|(x, y, z)| Vec3::new(x, y, z))
}

fn axis() -> impl Strategy<Value = RotationAxis> {
    vec3().prop_filter("non-degenerate", |v| v.norm() > 0.1).prop_map(|v| RotationAxis::new(v).unwrap())
}

#[test]
fn realize_identity_coefficient() {
    let w = WeightCoeffs::new(1.0, 0.0, 0.0).realize(&RotationAxis::z());
    assert_eq!(w, Mat3::identity());
}

#[test]
fn realize_pure_projector() {
    let w = WeightCoeffs::new(0.0, 1.0, 0.0).realize(&RotationAxis::z());
    let mut expected = Mat3::zeros();
    expected[(2, 2)] = 1.0;
    assert_eq!(w, expected);
}

#[test]
fn realize_pure_skew_about_z() {
    let w = WeightCoeffs::new(0.0, 0.0, 1.0).realize(&RotationAxis::z());
    let expected = Mat3::new(0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0);
    assert_eq!(w, expected);
}

#[test]
fn pair_solution_is_unit_and_sign_fixed() {
    let u = Vec3::new(1.0, 0.3, -0.2);
    let v = Vec3::new(-0.5, 1.0, 0.4);
    let axis = RotationAxis::z();
    let (wj, wk) = solve_pair_weights(&u, &v, &axis, Selector::Canonical).unwrap();
    let norm = (wj.norm().powi(2) + wk.norm().powi(2)).sqrt();
    assert_relative_eq!(norm, 1.0, epsilon = 1e-12);
    let first = [wj.a, wj.b, wj.c, wk.a, wk.b, wk.c].into_iter().find(|x| x.abs() > 1e-14).unwrap();
    assert!(first > 0.0);
    let residual = wj.realize(&axis) * u + wk.realize(&axis) * v;
    assert!(residual.norm() < 1e-12);
}

#[test]
fn pair_solution_deterministic_and_seeded() {
    let u = Vec3::new(0.2, 1.0, 0.3);
    let v = Vec3::new(1.0, -0.1, 0.5);
    let axis = RotationAxis::new(Vec3::new(1.0, 1.0, 0.0)).unwrap();
    let a = solve_pair_weights(&u, &v, &axis, Selector::Canonical).unwrap();
    let b = solve_pair_weights(&u, &v, &axis, Selector::Canonical).unwrap();
    assert_eq!(a, b);
    let s1 = solve_pair_weights(&u, &v, &axis, Selector::Seeded(7)).unwrap();
    let s2 = solve_pair_weights(&u, &v, &axis, Selector::Seeded(7)).unwrap();
    let s3 = solve_pair_weights(&u, &v, &axis, Selector::Seeded(8)).unwrap();
    assert_eq!(s1, s2);
    assert_ne!(s1, s3);
    for (wj, wk) in [s1, s3] {
        assert!((wj.realize(&axis) * u + wk.realize(&axis) * v).norm() < 1e-12);
    }
}

#[test]
fn pair_rejects_zero_offsets() {
    let z = Vec3::zeros();
    assert_eq!(
        solve_pair_weights(&z, &z, &RotationAxis::z(), Selector::Canonical),
        Err(LaplacianError::DegeneratePair)
    );
    assert!(solve_pair_weights_2d(&z, &Vec3::x()).is_err());
}

#[test]
fn planar_pair_examples() {
    // u = 1, v = i: w_ij ∝ i, w_ik ∝ −1, so i·1 + (−1)·i = 0.
    let (wj, wk) = solve_pair_weights_2d(&Vec3::x(), &Vec3::y()).unwrap();
    let (zj, zk) = (to_complex(&wj), to_complex(&wk));
    let (uc, vc) = (Complex64::new(1.0, 0.0), Complex64::new(0.0, 1.0));
    assert!((zj * uc + zk * vc).norm() < 1e-15);
    assert!(zj.re.abs() < 1e-15 && zj.im.abs() > 0.0);
    // Collinear pair: still solvable with real weights.
    let (wj, wk) = solve_pair_weights_2d(&Vec3::x(), &(Vec3::x() * 2.0)).unwrap();
    assert!((to_complex(&wj) * uc + to_complex(&wk) * Complex64::new(2.0, 0.0)).norm() < 1e-15);
}

#[test]
fn complex_mapping_round_trip_and_z_channel() {
    let z = Complex64::new(0.7, -1.3);
    let w = from_complex(z);
    assert_eq!(to_complex(&w), z);
    let m = w.realize(&RotationAxis::z());
    assert_eq!(m[(2, 2)], 0.0);
    assert_eq!(m.row(2).norm() + m.column(2).norm(), 0.0);
}

#[test]
fn rcond_examples() {
    assert_relative_eq!(rcond(&DMatrix::identity(4, 4)), 1.0);
    assert_eq!(rcond(&DMatrix::zeros(3, 3)), 0.0);
    let m = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 1e-3]));
    assert_relative_eq!(rcond(&m), 1e-3, epsilon = 1e-15);
}

#[test]
fn assemble_presets() {
    for f in [presets::planar_formation(), presets::spatial_formation()] {
        let w = assemble(&f, &RotationAxis::z(), 0).unwrap();
        assert!(w.rcond_ff() > RCOND_MIN);
        assert_eq!(w.matrix().nrows(), 5 * f.d());
        assert!(similarity_residual(&w, &f.positions) < 1e-12);
        // Leaders sense nobody: their rows are zero.
        for &l in &w.leaders() {
            assert!(w.matrix().rows(l * f.d(), f.d()).norm() == 0.0);
        }
    }
}

#[test]
fn planar_axis_required() {
    let f = presets::planar_formation();
    let tilted = RotationAxis::new(Vec3::new(1.0, 0.0, 1.0)).unwrap();
    assert_eq!(assemble(&f, &tilted, 0).unwrap_err(), LaplacianError::PlanarAxis);
}

#[test]
fn degenerate_edge_rejected() {
    let mut positions = presets::spatial_nominal();
    positions[1] = positions[2];
    let f = Formation { graph: presets::default_graph(), positions, dimension: Dimension::Spatial };
    assert!(matches!(assemble(&f, &RotationAxis::z(), 0), Err(LaplacianError::DegenerateEdge { .. })));
}

#[test]
fn block_structure_matches_weights() {
    let f = presets::spatial_formation();
    let axis = RotationAxis::new(Vec3::new(0.3, -0.4, 1.0)).unwrap();
    let w = assemble(&f, &axis, 3).unwrap();
    for i in 0..w.n() {
        let row = w.row(i);
        let mut sum = Mat3::zeros();
        for (&j, c) in row.neighbors.iter().zip(&row.weights) {
            assert!((w.block(i, j) - c.realize(&axis)).norm() < 1e-15);
            sum += c.realize(&axis);
        }
        assert!((w.block(i, i) + sum).norm() < 1e-14);
        assert!((w.gamma(i) - sum).norm() < 1e-14);
    }
}

#[test]
fn partition_reassembles() {
    let f = presets::spatial_formation();
    let w = assemble(&f, &RotationAxis::z(), 0).unwrap();
    let p = w.partition();
    assert_eq!(p.reassemble(), *w.matrix());
    assert_eq!((p.ff.nrows(), p.fl.ncols()), (9, 6));
}

#[test]
fn partition_with_interleaved_roles() {
    // Leaders first: the partition must follow roles, not position.
    let roles = vec![Role::Leader, Role::Leader, Role::Follower, Role::Follower, Role::Follower];
    let edges = [(2, 3), (2, 0), (2, 1), (3, 4), (3, 0), (3, 1), (4, 2), (4, 0), (4, 1)];
    let graph = InteractionGraph::from_edges(roles, &edges).unwrap();
    let mut positions = presets::spatial_nominal();
    positions.rotate_left(3);
    let f = Formation::new(graph, positions.clone(), Dimension::Spatial).unwrap();
    let w = assemble(&f, &RotationAxis::z(), 0).unwrap();
    let p = w.partition();
    assert_eq!(p.followers, vec![2, 3, 4]);
    assert_eq!(p.reassemble(), *w.matrix());
    let leaders = flatten(&positions[..2], 3);
    let solved = solve_followers(&p.ff, &p.fl, &leaders).unwrap();
    assert!((solved - flatten(&positions[2..], 3)).amax() < 1e-10);
}

#[test]
fn follower_solve_recovers_nominal() {
    let f = presets::spatial_formation();
    let w = assemble(&f, &RotationAxis::z(), 0).unwrap();
    let p = w.partition();
    let solved = solve_followers(&p.ff, &p.fl, &flatten(&f.positions[3..], 3)).unwrap();
    assert!((solved - flatten(&f.positions[..3], 3)).amax() < 1e-10);
}

#[test]
fn follower_solve_singular_rejected() {
    let ff = DMatrix::zeros(3, 3);
    let fl = DMatrix::zeros(3, 3);
    assert!(matches!(solve_followers(&ff, &fl, &DVector::zeros(3)), Err(LaplacianError::NotLocalizable { .. })));
}

#[test]
fn seeds_zero_to_nine_assemble() {
    for seed in 0..10 {
        for f in [presets::planar_formation(), presets::spatial_formation()] {
            let w = assemble(&f, &RotationAxis::z(), seed).unwrap();
            assert!(w.rcond_ff() > RCOND_MIN);
            assert_eq!(w.seed(), seed);
        }
    }
}

#[test]
fn sequential_and_parallel_assembly_agree() {
    let f = presets::spatial_formation();
    let axis = RotationAxis::new(Vec3::new(1.0, 2.0, 3.0)).unwrap();
    let a = assemble_with(&f, &axis, 5, Execution::Sequential).unwrap();
    let b = assemble_with(&f, &axis, 5, Execution::Parallel).unwrap();
    assert_eq!(a, b);
}

#[test]
fn with_follower_keeps_existing_rows() {
    let f = presets::spatial_formation();
    let w = assemble(&f, &RotationAxis::z(), 0).unwrap();
    let mut nominal = f.positions.clone();
    nominal.push(Vec3::new(0.0, -1.0, 1.0));
    let w2 = w.with_follower(&nominal, vec![0, 3, 4], 1).unwrap();
    assert_eq!(w2.n(), 6);
    assert_eq!(w2.matrix().view((0, 0), (15, 15)), w.matrix().view((0, 0), (15, 15)));
    assert_eq!(w2.matrix().view((0, 15), (15, 3)).norm(), 0.0);
    assert!(similarity_residual(&w2, &nominal) < 1e-12);
    assert!(w2.rcond_ff() > RCOND_MIN);
}

#[test]
fn with_follower_needs_two_neighbors() {
    let f = presets::spatial_formation();
    let w = assemble(&f, &RotationAxis::z(), 0).unwrap();
    let mut nominal = f.positions.clone();
    nominal.push(Vec3::new(0.0, -1.0, 1.0));
    assert!(matches!(w.with_follower(&nominal, vec![3], 1), Err(LaplacianError::TooFewNeighbors { .. })));
}

#[test]
fn complex_oracle_matches_matrix_pipeline_on_preset() {
    let f = presets::planar_formation();
    let w = assemble(&f, &RotationAxis::z(), 0).unwrap();
    let p = w.partition();
    let leaders = vec![Vec3::new(3.0, 1.0, 0.0), Vec3::new(1.5, -2.0, 0.0)];
    let matrix = solve_followers(&p.ff, &p.fl, &flatten(&leaders, 2)).unwrap();
    let oracle = complex_oracle_follower_solve(&f, &complex_weights(&f).unwrap(), &leaders).unwrap();
    for (m, o) in crate::graph::unflatten(&matrix, 2).iter().zip(&oracle) {
        assert!((m - o).norm() < 1e-10);
    }
}

proptest! {
    #[test]
    fn weights_commute_with_rotation(
        ax in axis(), a in -5.0..5.0f64, b in -5.0..5.0f64, c in -5.0..5.0f64, theta in 0.0..std::f64::consts::TAU,
    ) {
        let w = WeightCoeffs::new(a, b, c).realize(&ax);
        let r = rodrigues(&ax, theta);
        prop_assert!((w * r - r * w).amax() < 1e-12);
    }

    #[test]
    fn pair_weights_annihilate(u in vec3(), v in vec3(), ax in axis(), seed in any::<u64>()) {
        prop_assume!(u.norm() > 1e-3 && v.norm() > 1e-3);
        for selector in [Selector::Canonical, Selector::Seeded(seed)] {
            let (wj, wk) = solve_pair_weights(&u, &v, &ax, selector).unwrap();
            let res = wj.realize(&ax) * u + wk.realize(&ax) * v;
            prop_assert!(res.norm() < 1e-10 * (u.norm() + v.norm()));
            prop_assert!(((wj.norm().powi(2) + wk.norm().powi(2)).sqrt() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn planar_pair_annihilates(u in vec3(), v in vec3(), seed in any::<u64>()) {
        let (u, v) = (Vec3::new(u.x, u.y, 0.0), Vec3::new(v.x, v.y, 0.0));
        prop_assume!(u.norm() > 1e-3 && v.norm() > 1e-3);
        let (wj, wk) = pair_weights_with(&u, &v, Selector::Seeded(seed)).unwrap();
        let z = RotationAxis::z();
        let res = wj.realize(&z) * u + wk.realize(&z) * v;
        prop_assert!(res.norm() < 1e-12 * (u.norm() + v.norm()));
    }

    #[test]
    fn translation_in_kernel(ax in axis(), seed in 0u64..50, t in vec3()) {
        let f = presets::spatial_formation();
        let w = assemble(&f, &ax, seed).unwrap();
        let shifted: Vec<Vec3> = f.positions.iter().map(|p| p + t).collect();
        prop_assert!(w.apply(&[t; 5]).amax() < 1e-12);
        prop_assert!(similarity_residual(&w, &shifted) < 1e-12);
    }

    #[test]
    fn similarity_in_kernel(ax in axis(), k in 0.2..3.0f64, theta in 0.0..std::f64::consts::TAU, t in vec3()) {
        let f = presets::spatial_formation();
        let w = assemble(&f, &ax, 0).unwrap();
        let r = rodrigues(&ax, theta);
        let c = f.centroid();
        let p: Vec<Vec3> = f.positions.iter().map(|q| c + t + r * (q - c) * k).collect();
        prop_assert!(similarity_residual(&w, &p) < 1e-10);
    }

    #[test]
    fn action_identity_planar(re in -5.0..5.0f64, im in -5.0..5.0f64, x in -5.0..5.0f64, y in -5.0..5.0f64) {
        let z = Complex64::new(re, im);
        let prod = z * Complex64::new(x, y);
        let m = from_complex(z).realize(&RotationAxis::z()) * Vec3::new(x, y, 0.0);
        prop_assert!((m.x - prod.re).abs() < 1e-12 && (m.y - prod.im).abs() < 1e-12 && m.z == 0.0);
    }
}

#[test]
fn jacobi_radius_of_presets() {
    // Causal mode is stable on the planar preset and not on the spatial one.
    let planar = assemble(&presets::planar_formation(), &RotationAxis::z(), 0).unwrap();
    let spatial = assemble(&presets::spatial_formation(), &RotationAxis::z(), 0).unwrap();
    assert!(planar.jacobi_radius() < 0.9, "{}", planar.jacobi_radius());
    assert!(spatial.jacobi_radius() > 1.0, "{}", spatial.jacobi_radius());
}

#[test]
fn jacobi_radius_oracle() {
    // One follower between two leaders: no follower coupling at all.
    let f = Formation::new(
        InteractionGraph::from_edges(vec![Role::Follower, Role::Leader, Role::Leader], &[(0, 1), (0, 2)]).unwrap(),
        vec![Vec3::new(0.0, 0.0, 0.0), Vec3::new(1.0, 0.0, 0.0), Vec3::new(0.0, 1.0, 0.0)],
        Dimension::Planar,
    )
    .unwrap();
    assert_eq!(assemble(&f, &RotationAxis::z(), 0).unwrap().jacobi_radius(), 0.0);
}
