use deixis::geometry::{point_ray_distance, ray_from_points, Vec3};
use deixis::hand::{PointingMode, INDEX_MCP, INDEX_TIP, LANDMARK_COUNT, WRIST};
use deixis::scene::ObjectId;
use deixis::selector::{Engine, SelectorConfig};
use deixis::sim::pose::gaussian_offsets;
use deixis::sim::{
    click_hand, run_experiment, sigma_sweep, synth_frame, ParticipantModel, PointingPose, PopulationModel,
    SceneRenderer, SceneSpec,
};
use deixis::stats::{accuracy_table, analyze, confusion, Condition};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn desk() -> SceneRenderer {
    SceneRenderer::new(SceneSpec::desk()).unwrap()
}

#[test]
fn ideal_aim_preselects_on_first_frame() {
    let r = desk();
    let pm = ParticipantModel::ideal();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for id in r.spec().ids() {
        let aim = r.centroid(id).unwrap();
        let (f0, d0) = synth_frame(&r, aim, &pm, &mut rng).unwrap();
        let (mut f1, d1) = synth_frame(&r, aim, &pm, &mut rng).unwrap();
        f1.index = 1;
        f1.t = 33;
        for mode in PointingMode::ALL {
            let fast = SelectorConfig { switch_frames: 1, ..SelectorConfig::with_mode(mode) };
            let mut e = Engine::new(fast, *r.intrinsics());
            e.step(&f0, Some(&d0)).unwrap();
            assert_eq!(e.preselected(), Some(id), "{mode:?}");

            let mut e = Engine::new(SelectorConfig::with_mode(mode), *r.intrinsics());
            e.step(&f0, Some(&d0)).unwrap();
            assert_eq!(e.preselected(), None);
            e.step(&f1, Some(&d1)).unwrap();
            assert_eq!(e.preselected(), Some(id), "{mode:?}");
        }
    }
}

#[test]
fn aimed_pose_ray_hits_target() {
    let r = desk();
    let pm = ParticipantModel::ideal();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for id in r.spec().ids() {
        let target = r.centroid(id).unwrap();
        // Exact geometry.
        let pose = PointingPose::aimed(pm.hand_anchor, target, (0.0, 0.0), (0.0, 0.0));
        let p = pose.landmarks();
        for (a, b) in [(INDEX_MCP, INDEX_TIP), (WRIST, INDEX_TIP)] {
            let ray = ray_from_points(p[a], p[b]).unwrap();
            let (d, t) = point_ray_distance(target, &ray);
            assert!(d <= 1e-9 && t > 0.0);
        }
        // Through the rendered depth image and the engine.
        let (frame, depth) = synth_frame(&r, target, &pm, &mut rng).unwrap();
        for mode in PointingMode::ALL {
            let mut e = Engine::new(SelectorConfig::with_mode(mode), *r.intrinsics());
            let out = e.step_detailed(&frame, Some(&depth)).unwrap();
            let (d, _) = point_ray_distance(target, &out.ray.unwrap());
            assert!(d <= 1e-6, "{mode:?} misses by {d}");
        }
    }
}

#[test]
fn collinear_finger_and_wrist_agree_under_noise() {
    // Zero angular offset: both lines start on the same noisy hand, so they
    // can differ, but with a small σ they must pick the same object.
    let r = desk();
    let pm = ParticipantModel::ideal().with_sigma(0.001);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for id in r.spec().ids() {
        let aim = r.centroid(id).unwrap();
        let (f, d) = synth_frame(&r, aim, &pm, &mut rng).unwrap();
        let picks: Vec<_> = PointingMode::ALL
            .iter()
            .map(|&m| {
                let mut e = Engine::new(SelectorConfig { switch_frames: 1, ..SelectorConfig::with_mode(m) }, *r.intrinsics());
                e.step(&f, Some(&d)).unwrap();
                e.preselected()
            })
            .collect();
        assert_eq!(picks[0], picks[1]);
        assert_eq!(picks[0], Some(id));
    }
}

#[test]
fn experiment_is_deterministic_and_complete() {
    let cfg = SelectorConfig::default();
    let pop = PopulationModel::default();
    let a = run_experiment(20, &SceneSpec::desk(), &pop, &cfg, 7).unwrap();
    let b = run_experiment(20, &SceneSpec::desk(), &pop, &cfg, 7).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.len(), 960);
    for p in 1..=20 {
        for c in Condition::ALL {
            let n = a.iter().filter(|r| r.participant == p && r.condition == c).count();
            assert_eq!(n, 12);
            for id in 0..6 {
                let k = a.iter().filter(|r| r.participant == p && r.condition == c && r.target == ObjectId(id)).count();
                assert_eq!(k, 2);
            }
        }
    }
    let c = run_experiment(20, &SceneSpec::desk(), &pop, &cfg, 8).unwrap();
    assert_ne!(a, c);
    assert!(a.iter().all(|r| r.selection_time > 0.25));
}

#[test]
fn noiseless_population_is_perfect() {
    let recs = run_experiment(4, &SceneSpec::desk(), &PopulationModel::noiseless(), &SelectorConfig::default(), 1).unwrap();
    assert!(recs.iter().all(|r| r.correct()));
    let report = analyze(&recs).unwrap();
    assert_eq!(report.overall_accuracy, Some(1.0));
    assert_eq!((report.anova.a.ss, report.anova.b.ss, report.anova.ab.ss), (0.0, 0.0, 0.0));
    assert!(report.anova.a.f.is_none() && report.anova.b.f.is_none() && report.anova.ab.f.is_none());
}

#[test]
fn accuracy_falls_with_noise() {
    let pts = sigma_sweep(
        &[0.002, 0.006, 0.012, 0.02],
        8,
        &SceneSpec::desk(),
        &PopulationModel::default(),
        &SelectorConfig::default(),
        3,
    )
    .unwrap();
    for w in pts.windows(2) {
        assert!(w[1].overall <= w[0].overall + 0.02, "{:?}", pts);
    }
    assert!(pts[0].overall > 0.9);
    assert!(pts[3].overall < pts[0].overall - 0.2);
}

#[test]
fn huge_noise_is_near_chance() {
    let pop = PopulationModel { check_prob: 0.0, ..PopulationModel::default().with_sigma(0.3) };
    let recs = run_experiment(6, &SceneSpec::desk(), &pop, &SelectorConfig::default(), 4).unwrap();
    let acc = confusion(&recs, None).accuracy().unwrap();
    // Six objects: chance is one in six.
    assert!(acc < 0.35, "accuracy {acc}");
}

#[test]
fn feedback_never_hurts() {
    let recs = run_experiment(12, &SceneSpec::desk(), &PopulationModel::default(), &SelectorConfig::default(), 5).unwrap();
    assert!(recs.len() >= 500);
    let t = accuracy_table(&recs).unwrap();
    // Condition::ALL is F/On, W/On, F/Off, W/Off.
    assert!(t[0].stats.mean >= t[2].stats.mean);
    assert!(t[1].stats.mean >= t[3].stats.mean);
}

/// Per-axis variance of the ray direction over `n` noisy renders of one pose.
fn direction_variance(mode: PointingMode, sigma: f64, n: usize) -> f64 {
    let r = desk();
    let target = r.centroid(ObjectId(4)).unwrap();
    let pm = ParticipantModel::ideal();
    let pose = PointingPose::aimed(pm.hand_anchor, target, (0.0, 0.0), (0.0, 0.0));
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let scale = r.intrinsics().depth_scale;
    let mut dirs = Vec::with_capacity(n);
    for _ in 0..n {
        let hand = pose.render(&gaussian_offsets(sigma, &mut rng), scale);
        let click = click_hand(Vec3::new(-0.28, 0.08, 0.6), 0.06, &[Vec3::ZERO; LANDMARK_COUNT]);
        let (f, d) = r.compose(0, 0, &[click, hand]);
        let mut e = Engine::new(SelectorConfig::with_mode(mode), *r.intrinsics());
        if let Some(ray) = e.step_detailed(&f, Some(&d)).unwrap().ray {
            dirs.push(ray.direction);
        }
    }
    let k = dirs.len() as f64;
    let mean = dirs.iter().fold(Vec3::ZERO, |a, &d| a + d) * (1.0 / k);
    dirs.iter().map(|&d| (d - mean).dot(d - mean)).sum::<f64>() / k
}

#[test]
fn wrist_line_is_steadier_than_finger_line() {
    let finger = direction_variance(PointingMode::FingerLine, 0.005, 2000);
    let wrist = direction_variance(PointingMode::WristLine, 0.005, 2000);
    assert!(wrist < finger, "wrist {wrist} finger {finger}");
}
