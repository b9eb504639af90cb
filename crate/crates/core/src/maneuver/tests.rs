use super::*;
use crate::geometry::rodrigues;
use crate::laplacian::similarity_residual;
use crate::presets;
use proptest::prelude::*;

fn constant(t_start: f64, t_end: f64, translation: Vec3, scale: f64, angle: f64) -> SegmentSpec {
    SegmentSpec {
        t_start,
        t_end,
        translation: Profile::Constant { value: translation },
        scale: Profile::Constant { value: scale },
        angle: Profile::Constant { value: angle },
    }
}

fn x_axis() -> RotationAxis {
    RotationAxis::new(Vec3::x()).unwrap()
}

#[test]
fn profile_samples() {
    let lin = Profile::Linear { from: 1.0, to: 3.0 };
    assert_eq!(lin.sample(0.5, 4.0), (2.0, 0.5));
    let ss = Profile::Smoothstep { from: 0.0, to: 1.0 };
    let (v0, r0) = ss.sample(0.0, 2.0);
    let (v1, r1) = ss.sample(1.0, 2.0);
    let (vm, rm) = ss.sample(0.5, 2.0);
    assert_eq!((v0, r0, v1, r1), (0.0, 0.0, 1.0, 0.0));
    assert_eq!(vm, 0.5);
    assert_eq!(rm, 0.75);
    let c = Profile::Constant { value: Vec3::new(1.0, 2.0, 3.0) };
    assert_eq!(c.sample(0.3, 1.0), (Vec3::new(1.0, 2.0, 3.0), Vec3::zeros()));
}

#[test]
fn profile_json_shape() {
    let p: Profile<f64> = serde_json::from_str(r#"{"kind":"linear","from":1.0,"to":2.0}"#).unwrap();
    assert_eq!(p, Profile::Linear { from: 1.0, to: 2.0 });
    assert!(serde_json::from_str::<Profile<f64>>(r#"{"kind":"cubic","from":1.0,"to":2.0}"#).is_err());
}

#[test]
fn identity_sample_leaves_nominal() {
    let frame = NominalFrame::new(presets::spatial_formation(), &RotationAxis::z(), 0).unwrap();
    let p = target_configuration(&frame, &TransformSample::identity(RotationAxis::z()));
    assert_eq!(p, frame.nominal());
    let v = target_velocity(&frame, &TransformSample::identity(RotationAxis::z()));
    assert!(v.iter().all(|x| x.norm() == 0.0));
}

#[test]
fn pure_translation_target() {
    let frame = NominalFrame::new(presets::planar_formation(), &RotationAxis::z(), 0).unwrap();
    let t = Vec3::new(1.0, -2.0, 0.0);
    let p = target_configuration(&frame, &TransformSample::at_rest(RotationAxis::z(), t, 1.0, 0.0));
    for (q, r) in p.iter().zip(frame.nominal()) {
        assert!((q - r - t).norm() < 1e-15);
    }
}

#[test]
fn quarter_turn_about_centroid() {
    let frame = NominalFrame::new(presets::planar_formation(), &RotationAxis::z(), 0).unwrap();
    let c = frame.pivot();
    let s = TransformSample::at_rest(RotationAxis::z(), Vec3::zeros(), 2.0, std::f64::consts::FRAC_PI_2);
    for (q, r) in target_configuration(&frame, &s).iter().zip(frame.nominal()) {
        let d = r - c;
        let expected = c + Vec3::new(-d.y, d.x, 0.0) * 2.0;
        assert!((q - expected).norm() < 1e-14);
    }
}

#[test]
fn schedule_validation_errors() {
    let z = Vec3::zeros();
    let axis = RotationAxis::z();
    assert_eq!(ManeuverSchedule::new(axis, vec![], vec![]).unwrap_err(), ScheduleError::Empty);
    let gap = vec![constant(0.0, 1.0, z, 1.0, 0.0), constant(1.5, 2.0, z, 1.0, 0.0)];
    assert!(matches!(ManeuverSchedule::new(axis, gap, vec![]), Err(ScheduleError::Gap { .. })));
    let jump = vec![constant(0.0, 1.0, z, 1.0, 0.0), constant(1.0, 2.0, z, 2.0, 0.0)];
    assert!(matches!(
        ManeuverSchedule::new(axis, jump, vec![]),
        Err(ScheduleError::Discontinuous { field: "scale", .. })
    ));
    let neg = vec![constant(0.0, 1.0, z, -1.0, 0.0)];
    assert!(matches!(ManeuverSchedule::new(axis, neg, vec![]), Err(ScheduleError::NonPositiveScale { .. })));
    let empty = vec![constant(1.0, 1.0, z, 1.0, 0.0)];
    assert!(matches!(ManeuverSchedule::new(axis, empty, vec![]), Err(ScheduleError::EmptySegment { .. })));

    let two = vec![constant(0.0, 1.0, Vec3::x(), 1.0, 0.0), constant(1.0, 2.0, Vec3::x(), 1.0, 0.0)];
    let off = Event::AxisSwitch { t: 0.5, axis: x_axis(), force: false };
    assert!(matches!(
        ManeuverSchedule::new(axis, two.clone(), vec![off]),
        Err(ScheduleError::SwitchOffBoundary { .. })
    ));
    let on = Event::AxisSwitch { t: 1.0, axis: x_axis(), force: false };
    assert!(matches!(ManeuverSchedule::new(axis, two, vec![on]), Err(ScheduleError::SwitchNotIdentity { index: 1 })));
    let late = Event::AxisSwitch { t: 5.0, axis: x_axis(), force: false };
    assert!(matches!(
        ManeuverSchedule::new(axis, vec![constant(0.0, 1.0, z, 1.0, 0.0)], vec![late]),
        Err(ScheduleError::EventOutsideHorizon { .. })
    ));
    let join = JoinSpec { t: 0.5, spawn: 0.7, initial: z, offset: Vec3::x(), neighbors: vec![0, 1] };
    assert!(matches!(
        ManeuverSchedule::new(axis, vec![constant(0.0, 1.0, z, 1.0, 0.0)], vec![Event::AgentJoin(join)]),
        Err(ScheduleError::SpawnAfterJoin { .. })
    ));
}

#[test]
fn axes_and_phases_follow_switches() {
    let z = Vec3::zeros();
    let specs =
        vec![constant(0.0, 1.0, Vec3::x(), 2.0, 0.3), constant(1.0, 2.0, z, 1.0, 0.0), constant(2.0, 3.0, z, 1.0, 0.0)];
    let s = ManeuverSchedule::new(
        RotationAxis::z(),
        specs,
        vec![Event::AxisSwitch { t: 1.0, axis: x_axis(), force: false }],
    )
    .unwrap();
    let seg = s.segments();
    assert_eq!((seg[0].phase, seg[1].phase, seg[2].phase), (0, 1, 1));
    assert_eq!(seg[1].axis, x_axis());
    assert_eq!(s.evaluate(1.0).unwrap().phase, 1);
    assert_eq!(s.evaluate_left(1.0).unwrap().scale, 2.0);
    assert_eq!(s.evaluate(1.0).unwrap().scale, 1.0);
    assert!(s.evaluate(3.5).is_err());
    assert_eq!(s.boundaries(), vec![0.0, 1.0, 2.0, 3.0]);
}

#[test]
fn axis_switch_rebases_on_target() {
    let frame = NominalFrame::new(presets::spatial_formation(), &RotationAxis::z(), 0).unwrap();
    let s = TransformSample::at_rest(RotationAxis::z(), Vec3::new(1.0, 2.0, 3.0), 1.5, 0.7);
    let next = apply_axis_switch(&frame, &s, &x_axis(), 1).unwrap();
    assert_eq!(next.nominal(), target_configuration(&frame, &s).as_slice());
    assert!((next.pivot() - next.formation().centroid()).norm() < 1e-12);
    assert_eq!(next.axis(), &x_axis());
    assert!(similarity_residual(next.laplacian(), next.nominal()) < 1e-12);
}

#[test]
fn join_keeps_pivot_and_rows() {
    let frame = NominalFrame::new(presets::spatial_formation(), &RotationAxis::z(), 0).unwrap();
    let joined = frame.with_joined(frame.pivot() + Vec3::new(0.0, -1.0, 1.0), vec![0, 3, 4], 0).unwrap();
    assert_eq!(joined.pivot(), frame.pivot());
    assert_eq!(joined.n(), 6);
    for i in 0..5 {
        assert_eq!(joined.laplacian().row(i), frame.laplacian().row(i));
    }
    assert!(frame.with_joined(Vec3::zeros(), vec![9, 3], 0).is_err());
}

fn sample_fd(seg: &ManeuverSegment, t: f64, frame: &NominalFrame) -> Vec<Vec3> {
    let h = 1e-6;
    let p1 = target_configuration(frame, &seg.sample(t + h));
    let p0 = target_configuration(frame, &seg.sample(t - h));
    p1.iter().zip(&p0).map(|(a, b)| (a - b) / (2.0 * h)).collect()
}

proptest! {
    #[test]
    fn target_velocity_matches_finite_difference(
        tx in -3.0..3.0f64, ty in -3.0..3.0f64, tz in -3.0..3.0f64,
        k0 in 0.3..2.0f64, k1 in 0.3..2.0f64,
        a0 in -3.0..3.0f64, a1 in -3.0..3.0f64,
        s in 0.05..0.95f64,
        ax in (-1.0..1.0f64, -1.0..1.0f64, 0.2..1.0f64),
    ) {
        let axis = RotationAxis::new(Vec3::new(ax.0, ax.1, ax.2)).unwrap();
        let frame = NominalFrame::new(presets::spatial_formation(), &axis, 0).unwrap();
        let seg = ManeuverSegment {
            t_start: 0.0,
            t_end: 4.0,
            translation: Profile::Smoothstep { from: Vec3::zeros(), to: Vec3::new(tx, ty, tz) },
            scale: Profile::Linear { from: k0, to: k1 },
            angle: Profile::Smoothstep { from: a0, to: a1 },
            axis,
            phase: 0,
        };
        let t = 4.0 * s;
        let v = target_velocity(&frame, &seg.sample(t));
        for (a, b) in v.iter().zip(sample_fd(&seg, t, &frame)) {
            prop_assert!((a - b).amax() < 1e-6, "{a} vs {b}");
        }
    }

    #[test]
    fn switch_chain_composes(
        seeds in proptest::collection::vec(any::<u64>(), 1..=4),
        params in proptest::collection::vec(
            ((-2.0..2.0f64, -2.0..2.0f64, -2.0..2.0f64), 0.5..1.5f64, -3.0..3.0f64), 5),
    ) {
        use rand::SeedableRng;
        let mut frame = NominalFrame::new(presets::spatial_formation(), &RotationAxis::z(), 0).unwrap();
        let nominal = frame.nominal().to_vec();
        let pivot = frame.pivot();
        // Composed map x ↦ pivot + t_acc + m_acc (x − pivot); each switch moves
        // the pivot by that phase's translation, so translations add.
        let mut t_acc = Vec3::zeros();
        let mut m_acc = Mat3::identity();
        let mut axis = RotationAxis::z();
        for (k, seed) in seeds.iter().enumerate() {
            let ((x, y, z), scale, angle) = params[k];
            let s = TransformSample::at_rest(axis, Vec3::new(x, y, z), scale, angle);
            t_acc += Vec3::new(x, y, z);
            m_acc = rodrigues(&axis, angle) * m_acc * scale;
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(*seed);
            let next_axis = crate::laplacian::random_axis(&mut rng);
            frame = apply_axis_switch(&frame, &s, &next_axis, *seed).unwrap();
            axis = next_axis;
            prop_assert!(similarity_residual(frame.laplacian(), frame.nominal()) < 1e-10);
        }
        let ((x, y, z), scale, angle) = params[4];
        let s = TransformSample::at_rest(axis, Vec3::new(x, y, z), scale, angle);
        let direct = target_configuration(&frame, &s);
        let t_all = t_acc + Vec3::new(x, y, z);
        let m_all = rodrigues(&axis, angle) * m_acc * scale;
        for (p, r) in direct.iter().zip(&nominal) {
            let composed = pivot + t_all + m_all * (r - pivot);
            prop_assert!((p - composed).amax() < 1e-8);
        }
        prop_assert!(similarity_residual(frame.laplacian(), &direct) < 1e-10);
    }
}
