use deixis::geometry::{point_ray_distance, project, CameraIntrinsics, Pixel, Point3, Vec3};
use deixis::hand::{
    assign_roles, pinch_metric, pinch_step, pointing_ray, FirstJoint, HandFrame, Handedness, PinchConfig, PinchPhase,
    PinchState, PointingMode, INDEX_MCP, INDEX_PIP, INDEX_TIP, LANDMARK_COUNT, MIDDLE_MCP, THUMB_TIP, WRIST,
};
use deixis::oracle::pinch_clicks_reference;
use deixis::scene::DepthFrame;
use proptest::prelude::*;

fn intr() -> CameraIntrinsics {
    CameraIntrinsics::new(500.0, 500.0, 320.0, 240.0, 640, 480, 0.001).unwrap()
}

fn hand_from_points(h: Handedness, pts: [Point3; LANDMARK_COUNT]) -> HandFrame {
    let i = intr();
    let mut hand = HandFrame::new(h, pts.map(|p| project(p, &i).unwrap()));
    hand.depth = pts.map(|p| Some(p.z));
    hand
}

fn pinch_hand(wrist: Point3, scale: f64, sep: f64) -> [Point3; LANDMARK_COUNT] {
    let mut p = [wrist + Vec3::new(0.01, 0.0, 0.0); LANDMARK_COUNT];
    p[WRIST] = wrist;
    p[MIDDLE_MCP] = wrist + Vec3::new(0.0, -scale, 0.0);
    p[THUMB_TIP] = wrist + Vec3::new(0.03, -scale, 0.01);
    p[INDEX_TIP] = p[THUMB_TIP] + Vec3::new(sep, 0.0, 0.0);
    p
}

fn run(metrics: &[Option<f64>], cfg: &PinchConfig) -> Vec<usize> {
    let mut s = PinchState::default();
    let mut clicks = Vec::new();
    for (i, &m) in metrics.iter().enumerate() {
        let (next, click) = pinch_step(s, m, cfg);
        if click {
            clicks.push(i);
        }
        s = next;
    }
    clicks
}

#[test]
fn ray_pointing_at_the_camera() {
    let mut pts = [Vec3::new(0.0, 0.0, 0.5); LANDMARK_COUNT];
    pts[INDEX_MCP] = Vec3::new(0.0, 0.0, 0.5);
    pts[INDEX_TIP] = Vec3::new(0.0, 0.0, 0.4);
    pts[WRIST] = Vec3::new(0.0, 0.0, 0.6);
    let h = hand_from_points(Handedness::Right, pts);
    for mode in PointingMode::ALL {
        let r = pointing_ray(&h, mode, FirstJoint::Mcp, None, &intr()).unwrap();
        assert!(r.direction.distance(Vec3::new(0.0, 0.0, -1.0)) < 1e-12);
    }
}

#[test]
fn ray_from_depth_image() {
    let i = intr();
    let mcp = Vec3::new(0.05, 0.02, 0.5);
    let tip = Vec3::new(0.06, 0.05, 0.5);
    let mut pts = [mcp; LANDMARK_COUNT];
    pts[INDEX_TIP] = tip;
    let hand = HandFrame::new(Handedness::Right, pts.map(|p| project(p, &i).unwrap()));
    let depth = DepthFrame::filled(640, 480, 500, 0.001);
    let r = pointing_ray(&hand, PointingMode::FingerLine, FirstJoint::Mcp, Some(&depth), &i).unwrap();
    let expected = (tip - mcp).normalized().unwrap();
    assert!(r.direction.distance(expected) < 1e-9);

    // Tip over invalid depth.
    let mut holes = depth.clone();
    let px = project(tip, &i).unwrap();
    for y in px.v as u32 - 3..=px.v as u32 + 3 {
        for x in px.u as u32 - 3..=px.u as u32 + 3 {
            holes.set_raw(x, y, 0);
        }
    }
    assert!(pointing_ray(&hand, PointingMode::FingerLine, FirstJoint::Mcp, Some(&holes), &i).is_none());
    assert!(pointing_ray(&hand, PointingMode::FingerLine, FirstJoint::Mcp, None, &i).is_none());
}

#[test]
fn pip_first_joint() {
    let mut pts = [Vec3::new(0.0, 0.0, 0.6); LANDMARK_COUNT];
    pts[INDEX_MCP] = Vec3::new(0.0, 0.1, 0.6);
    pts[INDEX_PIP] = Vec3::new(0.1, 0.0, 0.6);
    pts[INDEX_TIP] = Vec3::new(0.2, 0.0, 0.6);
    let h = hand_from_points(Handedness::Right, pts);
    let r = pointing_ray(&h, PointingMode::FingerLine, FirstJoint::Pip, None, &intr()).unwrap();
    assert!(r.direction.distance(Vec3::new(1.0, 0.0, 0.0)) < 1e-12);
}

#[test]
fn pinch_metric_trivial_values() {
    let i = intr();
    let h = hand_from_points(Handedness::Left, pinch_hand(Vec3::new(0.0, 0.1, 0.6), 0.09, 0.0));
    assert!(pinch_metric(&h, None, &i).unwrap().abs() < 1e-12);
    let h = hand_from_points(Handedness::Left, pinch_hand(Vec3::new(0.0, 0.1, 0.6), 0.09, 0.09));
    assert!((pinch_metric(&h, None, &i).unwrap() - 1.0).abs() < 1e-12);
    // Tiny hand scale.
    let h = hand_from_points(Handedness::Left, pinch_hand(Vec3::new(0.0, 0.1, 0.6), 0.0005, 0.01));
    assert!(pinch_metric(&h, None, &i).is_none());
}

#[test]
fn pinch_metric_falls_back_to_pixels() {
    let mut lm = [Pixel::new(100.0, 100.0); LANDMARK_COUNT];
    lm[WRIST] = Pixel::new(100.0, 100.0);
    lm[MIDDLE_MCP] = Pixel::new(100.0, 60.0);
    lm[THUMB_TIP] = Pixel::new(120.0, 60.0);
    lm[INDEX_TIP] = Pixel::new(130.0, 60.0);
    let h = HandFrame::new(Handedness::Left, lm);
    assert!((pinch_metric(&h, None, &intr()).unwrap() - 0.25).abs() < 1e-12);
    let mut degenerate = h.clone();
    degenerate.landmarks[MIDDLE_MCP] = Pixel::new(100.5, 100.0);
    assert!(pinch_metric(&degenerate, None, &intr()).is_none());
}

#[test]
fn pinch_examples() {
    let cfg = PinchConfig::default();
    assert_eq!(run(&[0.5, 0.1, 0.1, 0.1].map(Some), &cfg), vec![3]);
    assert_eq!(run(&[Some(0.1); 200], &cfg), vec![2]);
    let osc: Vec<_> = (0..100).map(|i| Some(if i % 2 == 0 { 0.26 } else { 0.34 })).collect();
    assert!(run(&osc, &cfg).is_empty());
    let mut s = PinchState::default();
    for m in &osc {
        s = pinch_step(s, *m, &cfg).0;
        assert_eq!(s, PinchState::default());
    }
}

#[test]
fn missing_metric_releases_after_dwell() {
    let cfg = PinchConfig::default();
    let m = [Some(0.1), Some(0.1), Some(0.1), None, None, Some(0.1), None, None, None, Some(0.1), Some(0.1), Some(0.1)];
    // Two missing frames do not release; three do.
    assert_eq!(run(&m, &cfg), vec![2, 11]);
    let (s, _) = pinch_step(PinchState { phase: PinchPhase::Pinched, below: 0, missing: 2 }, None, &cfg);
    assert_eq!(s.phase, PinchPhase::Open);
}

#[test]
fn roles_by_extension() {
    use Handedness::*;
    assert_eq!(assign_roles(&[]), (None, None));
    assert_eq!(assign_roles(&[(Left, 1.0)]), (Some(0), None));
    assert_eq!(assign_roles(&[(Left, 1.9), (Right, 1.1)]), (Some(0), Some(1)));
    assert_eq!(assign_roles(&[(Left, 1.1), (Right, 1.9)]), (Some(1), Some(0)));
    assert_eq!(assign_roles(&[(Left, 1.5), (Right, 1.5)]), (Some(1), Some(0)));
    assert_eq!(assign_roles(&[(Right, 1.5), (Left, 1.5)]), (Some(0), Some(1)));
}

fn metric_seq() -> impl Strategy<Value = Vec<Option<f64>>> {
    let m = prop_oneof![
        6 => (0.0..0.6f64).prop_map(Some),
        2 => prop_oneof![Just(0.25), Just(0.35)].prop_map(Some),
        1 => Just(None),
    ];
    proptest::collection::vec(m, 0..80)
}

fn cfg_strategy() -> impl Strategy<Value = PinchConfig> {
    (0.1..0.3f64, 0.01..0.2f64, 1u32..5).prop_map(|(e, gap, d)| PinchConfig { engage: e, release: e + gap, dwell_frames: d })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn pinch_matches_reference(metrics in metric_seq(), cfg in cfg_strategy()) {
        let clicks = run(&metrics, &cfg);
        prop_assert_eq!(&clicks, &pinch_clicks_reference(&metrics, &cfg));

        // Clicks are bounded by the number of long enough sub-threshold runs.
        let mut runs = 0;
        let mut len = 0u32;
        for m in &metrics {
            if matches!(m, Some(v) if *v < cfg.engage) {
                len += 1;
                if len == cfg.dwell_frames {
                    runs += 1;
                }
            } else {
                len = 0;
            }
        }
        prop_assert!(clicks.len() <= runs);
    }

    #[test]
    fn dead_band_never_clicks(
        xs in proptest::collection::vec(0.0..1.0f64, 1..200),
        cfg in cfg_strategy(),
    ) {
        let band: Vec<_> = xs.iter().map(|x| Some(cfg.engage + x * (cfg.release - cfg.engage))).collect();
        prop_assert!(run(&band, &cfg).is_empty());
    }
}

proptest! {
    #[test]
    fn pinch_metric_scale_and_rigid_invariant(
        scale in 0.3..3.0f64, sep in 0.0..0.1f64,
        shift in (-0.05..0.05f64, -0.05..0.05f64, 0.0..0.3f64),
        angle in -0.5..0.5f64,
    ) {
        let base = pinch_hand(Vec3::new(0.02, 0.05, 0.7), 0.09, sep);
        let h0 = hand_from_points(Handedness::Left, base);
        let m0 = pinch_metric(&h0, None, &intr()).unwrap();
        let pivot = Vec3::new(0.0, 0.0, 0.6);
        let (s, c) = angle.sin_cos();
        let moved = base.map(|p| {
            let q = (p - pivot) * scale;
            // Rotation about the optical axis keeps every point in view.
            Vec3::new(c * q.x - s * q.y, s * q.x + c * q.y, q.z) + pivot + Vec3::new(shift.0, shift.1, shift.2)
        });
        let m1 = pinch_metric(&hand_from_points(Handedness::Left, moved), None, &intr()).unwrap();
        prop_assert!((m0 - m1).abs() < 1e-9);
    }

    #[test]
    fn collinear_landmarks_give_the_same_line(
        tip in (-0.05..0.05f64, -0.05..0.05f64, 0.4..0.6f64),
        dir in (-0.3..0.3f64, -0.3..0.3f64, 0.5..1.0f64),
        probe in (-0.3..0.3f64, -0.3..0.3f64, 0.5..1.2f64),
    ) {
        let tip = Vec3::new(tip.0, tip.1, tip.2);
        let d = Vec3::new(dir.0, dir.1, dir.2).normalized().unwrap();
        let mut pts = [tip - d * 0.1; LANDMARK_COUNT];
        pts[WRIST] = tip - d * 0.17;
        pts[INDEX_MCP] = tip - d * 0.08;
        pts[INDEX_TIP] = tip;
        let h = hand_from_points(Handedness::Right, pts);
        let f = pointing_ray(&h, PointingMode::FingerLine, FirstJoint::Mcp, None, &intr()).unwrap();
        let w = pointing_ray(&h, PointingMode::WristLine, FirstJoint::Mcp, None, &intr()).unwrap();
        let p = Vec3::new(probe.0, probe.1, probe.2);
        let (df, tf) = point_ray_distance(p, &f);
        let (dw, tw) = point_ray_distance(p, &w);
        prop_assert!(f.at(tf).distance(w.at(tw)) < 1e-9);
        prop_assert!((df - dw).abs() < 1e-9);
    }
}
