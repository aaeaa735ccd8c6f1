//! Synthetic tabletop scenes and virtual participants for rerunning the
//! 2×2 pointing study.
//!
//! Noise is applied to 3D hand landmarks, never to ray angles, so any
//! stability difference between the finger and wrist lines comes from
//! their geometry.

mod participant;
pub mod pose;
mod scene;

use std::f64::consts::TAU;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{project, Point3, Vec3};
use crate::hand::{PointingMode, LANDMARK_COUNT};
use crate::io::{Frame, FrameError};
use crate::scene::{DepthFrame, ObjectId};
use crate::selector::{Engine, EventKind, SelectionEvent, SelectorConfig};
use crate::stats::{confusion, Condition, TrialRecord};

pub use participant::{ParticipantModel, PopulationModel};
pub use pose::{click_hand, PointingPose, RenderedHand};
pub use scene::{default_intrinsics, depth_to_raw, ObjectSpec, SceneRenderer, SceneSpec, DEFAULT_LABELS};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("invalid scene: {0}")]
    Scene(String),
    #[error("unknown object {0}")]
    UnknownObject(ObjectId),
    #[error("aim point {0:?} is outside the camera frustum")]
    OutsideFrustum(Point3),
    #[error("need at least 2 participants, got {0}")]
    TooFewParticipants(u32),
    #[error(transparent)]
    Frame(#[from] FrameError),
}

/// Fixed parts of the trial script shared by every participant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialScript {
    /// Thumb-index distance of the relaxed click hand, meters.
    pub open_separation: f64,
    /// Thumb-index distance while pinching, meters.
    pub pinched_separation: f64,
    /// Frames beyond the pinch dwell before the attempt is abandoned.
    pub pinch_extra_frames: u32,
    /// Open-hand frames after each trial.
    pub release_frames: u32,
    /// Wrist position of the click hand.
    pub click_anchor: Point3,
}

impl Default for TrialScript {
    fn default() -> Self {
        Self {
            open_separation: 0.06,
            pinched_separation: 0.0045,
            pinch_extra_frames: 4,
            release_frames: 2,
            click_anchor: Vec3::new(-0.28, 0.08, 0.60),
        }
    }
}

/// What happened in one trial.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialOutcome {
    pub selected: Option<ObjectId>,
    /// Simulated seconds from instruction to click.
    pub time_s: f64,
    pub corrections: u32,
    /// Rendered frames, excluding the release frames.
    pub frames: u32,
}

/// Receives every rendered frame with the events it produced.
pub type FrameSink<'a> = dyn FnMut(&Frame, &DepthFrame, &[SelectionEvent]) + 'a;

/// Drives one engine through scripted trials, advancing a simulated clock.
pub struct Simulator<'a> {
    renderer: &'a SceneRenderer,
    engine: Engine,
    script: TrialScript,
    frame_index: u64,
    clock_s: f64,
    sink: Option<&'a mut FrameSink<'a>>,
}

/// Sample an aiming pose toward `target` for `pm`.
pub fn sample_pose<R: Rng + ?Sized>(target: Point3, pm: &ParticipantModel, rng: &mut R) -> PointingPose {
    let az_f = rng.random_range(0.0..TAU);
    let spread: f64 = Normal::new(0.0, 1.0).expect("unit normal").sample(rng);
    let az_w = (pm.wrist_azimuth_deg + pm.azimuth_sd_deg * spread).to_radians();
    PointingPose::aimed(
        pm.hand_anchor,
        target,
        (pm.finger_offset_deg.to_radians(), az_f),
        (pm.wrist_offset_deg.to_radians(), az_w),
    )
}

fn check_aim(renderer: &SceneRenderer, aim: Point3, pm: &ParticipantModel) -> Result<(), SimError> {
    let intr = renderer.intrinsics();
    let inside = project(aim, intr).is_ok_and(|px| intr.contains(px));
    if !inside || aim.distance(pm.hand_anchor) < 0.05 {
        return Err(SimError::OutsideFrustum(aim));
    }
    Ok(())
}

/// One frame of `pm` aiming at `aim` with the click hand open: pose and
/// per-aim noise are drawn fresh.
pub fn synth_frame<R: Rng + ?Sized>(
    renderer: &SceneRenderer,
    aim: Point3,
    pm: &ParticipantModel,
    rng: &mut R,
) -> Result<(Frame, DepthFrame), SimError> {
    check_aim(renderer, aim, pm)?;
    let pose = sample_pose(aim, pm, rng);
    let noise = pose::add_offsets(&pose::gaussian_offsets(pm.sigma_kp, rng), &pose::gaussian_offsets(pm.tremor, rng));
    let scale = renderer.intrinsics().depth_scale;
    let script = TrialScript::default();
    let pointing = pose.render(&noise, scale);
    let click = click_hand(script.click_anchor, script.open_separation, &pose::gaussian_offsets(pm.tremor, rng));
    Ok(renderer.compose(0, 0, &[click, pointing]))
}

impl<'a> Simulator<'a> {
    pub fn new(renderer: &'a SceneRenderer, cfg: SelectorConfig) -> Self {
        let engine = Engine::new(cfg, *renderer.intrinsics());
        Self { renderer, engine, script: TrialScript::default(), frame_index: 0, clock_s: 0.0, sink: None }
    }

    pub fn with_sink(mut self, sink: &'a mut FrameSink<'a>) -> Self {
        self.sink = Some(sink);
        self
    }

    pub fn with_script(mut self, script: TrialScript) -> Self {
        self.script = script;
        self
    }

    pub fn engine(&self) -> &Engine {
        &self.engine
    }

    pub fn set_mode(&mut self, mode: PointingMode) {
        self.engine.set_mode(mode);
    }

    pub fn renderer(&self) -> &SceneRenderer {
        self.renderer
    }

    pub fn now_ms(&self) -> u64 {
        (self.clock_s * 1000.0).round() as u64
    }

    pub fn advance(&mut self, seconds: f64) {
        self.clock_s += seconds.max(0.0);
    }

    /// Render, step the engine and advance one frame period.
    pub fn step_hands(&mut self, hands: &[RenderedHand]) -> Result<Vec<SelectionEvent>, SimError> {
        let (frame, depth) = self.renderer.compose(self.frame_index, self.now_ms(), hands);
        let events = self.engine.step(&frame, Some(&depth))?;
        if let Some(sink) = self.sink.as_mut() {
            sink(&frame, &depth, &events);
        }
        self.frame_index += 1;
        self.advance(1.0 / self.renderer.spec().fps);
        Ok(events)
    }

    fn step_pose(
        &mut self,
        pose: &PointingPose,
        aim_noise: &[Vec3; LANDMARK_COUNT],
        pm: &ParticipantModel,
        separation: f64,
        rng: &mut impl Rng,
    ) -> Result<Vec<SelectionEvent>, SimError> {
        let scale = self.renderer.intrinsics().depth_scale;
        let tremor = pose::gaussian_offsets(pm.tremor, rng);
        let pointing = pose.render(&pose::add_offsets(aim_noise, &tremor), scale);
        let click = click_hand(self.script.click_anchor, separation, &pose::gaussian_offsets(pm.tremor, rng));
        self.step_hands(&[click, pointing])
    }

    /// One selection: aim, settle, optionally check the highlight and
    /// re-aim, then pinch until the engine reports a selection.
    pub fn trial(
        &mut self,
        target: ObjectId,
        feedback: bool,
        pm: &ParticipantModel,
        rng: &mut impl Rng,
    ) -> Result<TrialOutcome, SimError> {
        let aim = self.renderer.centroid(target).ok_or(SimError::UnknownObject(target))?;
        check_aim(self.renderer, aim, pm)?;
        let reaction = pm.sample_reaction(rng);
        self.advance(reaction);
        let open = self.script.open_separation;
        let mut frames = 0u32;
        let mut corrections = 0u32;

        let (pose, noise) = loop {
            let pose = sample_pose(aim, pm, rng);
            let noise = pose::gaussian_offsets(pm.sigma_kp, rng);
            for _ in 0..pm.settle_frames {
                self.step_pose(&pose, &noise, pm, open, rng)?;
                frames += 1;
            }
            let wrong = self.engine.preselected() != Some(target);
            if feedback && wrong && corrections < pm.max_corrections && rng.random::<f64>() < pm.check_prob {
                corrections += 1;
                self.advance(pm.correction_time);
                continue;
            }
            break (pose, noise);
        };

        let mut selected = None;
        let pinch_frames = self.engine.config().pinch.dwell_frames + self.script.pinch_extra_frames;
        for _ in 0..pinch_frames {
            let events = self.step_pose(&pose, &noise, pm, self.script.pinched_separation, rng)?;
            frames += 1;
            if let Some(id) = events.iter().find_map(|e| match e.kind {
                EventKind::ObjectSelected(id) => Some(id),
                _ => None,
            }) {
                selected = Some(id);
                break;
            }
        }
        for _ in 0..self.script.release_frames {
            self.step_pose(&pose, &noise, pm, open, rng)?;
        }

        let time_s = reaction + f64::from(frames) / self.renderer.spec().fps + f64::from(corrections) * pm.correction_time;
        Ok(TrialOutcome { selected, time_s, corrections, frames })
    }

    /// Run `targets` in order under `condition`, recording each trial.
    pub fn block(
        &mut self,
        participant: u32,
        condition: Condition,
        targets: &[ObjectId],
        pm: &ParticipantModel,
        rng: &mut impl Rng,
    ) -> Result<Vec<TrialRecord>, SimError> {
        self.set_mode(condition.mode);
        targets
            .iter()
            .map(|&target| {
                let o = self.trial(target, condition.feedback, pm, rng)?;
                Ok(TrialRecord { participant, condition, target, selected: o.selected, selection_time: o.time_s })
            })
            .collect()
    }
}

/// A single trial on a fresh engine.
pub fn run_trial(
    renderer: &SceneRenderer,
    target: ObjectId,
    condition: Condition,
    pm: &ParticipantModel,
    engine_cfg: &SelectorConfig,
    rng: &mut impl Rng,
) -> Result<TrialRecord, SimError> {
    let mut sim = Simulator::new(renderer, SelectorConfig { mode: condition.mode, ..*engine_cfg });
    let o = sim.trial(target, condition.feedback, pm, rng)?;
    Ok(TrialRecord { participant: 0, condition, target, selected: o.selected, selection_time: o.time_s })
}

/// Combine a seed with a key into an independent stream seed.
pub fn derive_seed(seed: u64, key: &[u64]) -> u64 {
    fn splitmix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    key.iter().fold(splitmix(seed), |h, &k| splitmix(h ^ splitmix(k)))
}

/// Each object `repetitions` times, shuffled.
pub fn trial_targets(ids: &[ObjectId], repetitions: u32, rng: &mut impl Rng) -> Vec<ObjectId> {
    let mut v: Vec<ObjectId> = (0..repetitions).flat_map(|_| ids.iter().copied()).collect();
    v.shuffle(rng);
    v
}

/// Draw a participant, a condition order and a target order per condition
/// for participant `p`.
pub fn participant_plan(
    population: &PopulationModel,
    ids: &[ObjectId],
    repetitions: u32,
    seed: u64,
    p: u32,
) -> (ParticipantModel, Vec<(Condition, Vec<ObjectId>)>) {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[u64::from(p), 0]));
    let pm = population.draw(&mut rng);
    let mut conditions = Condition::ALL.to_vec();
    conditions.shuffle(&mut rng);
    let plan = conditions.into_iter().map(|c| (c, trial_targets(ids, repetitions, &mut rng))).collect();
    (pm, plan)
}

fn condition_key(c: Condition) -> u64 {
    Condition::ALL.iter().position(|&k| k == c).expect("known condition") as u64
}

/// The full within-subject study: every participant runs all four
/// conditions in random order, each object `2` times per condition. Each
/// trial gets its own engine and RNG stream keyed by (participant,
/// condition, trial), so the output does not depend on thread scheduling.
pub fn run_experiment(
    participants: u32,
    scene: &SceneSpec,
    population: &PopulationModel,
    engine_cfg: &SelectorConfig,
    seed: u64,
) -> Result<Vec<TrialRecord>, SimError> {
    if participants < 2 {
        return Err(SimError::TooFewParticipants(participants));
    }
    let renderer = SceneRenderer::new(scene.clone())?;
    let ids = scene.ids();
    let per: Vec<Result<Vec<TrialRecord>, SimError>> = (1..=participants)
        .into_par_iter()
        .map(|p| {
            let (pm, plan) = participant_plan(population, &ids, 2, seed, p);
            let mut out = Vec::new();
            for (condition, targets) in plan {
                for (k, &target) in targets.iter().enumerate() {
                    let key = [u64::from(p), 1 + condition_key(condition), k as u64];
                    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &key));
                    let mut rec = run_trial(&renderer, target, condition, &pm, engine_cfg, &mut rng)?;
                    rec.participant = p;
                    out.push(rec);
                }
            }
            Ok(out)
        })
        .collect();
    let mut all = Vec::with_capacity(participants as usize * 48);
    for r in per {
        all.extend(r?);
    }
    Ok(all)
}

/// Accuracy summary for one noise level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub sigma_kp: f64,
    /// Mean per-participant accuracy in each condition, in `Condition::ALL` order.
    pub cells: [f64; 4],
    pub overall: f64,
}

/// Rerun the study at each median noise level.
pub fn sigma_sweep(
    sigmas: &[f64],
    participants: u32,
    scene: &SceneSpec,
    population: &PopulationModel,
    engine_cfg: &SelectorConfig,
    seed: u64,
) -> Result<Vec<SweepPoint>, SimError> {
    sigmas
        .iter()
        .map(|&s| {
            let recs = run_experiment(participants, scene, &population.with_sigma(s), engine_cfg, seed)?;
            let table = crate::stats::accuracy_table(&recs).expect("balanced by construction");
            let cells = std::array::from_fn(|i| table[i].stats.mean);
            let overall = confusion(&recs, None).accuracy().unwrap_or(0.0);
            Ok(SweepPoint { sigma_kp: s, cells, overall })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeds_differ_by_key() {
        let a = derive_seed(7, &[1, 2, 3]);
        assert_ne!(a, derive_seed(7, &[1, 2, 4]));
        assert_ne!(a, derive_seed(7, &[2, 1, 3]));
        assert_ne!(a, derive_seed(8, &[1, 2, 3]));
        assert_eq!(a, derive_seed(7, &[1, 2, 3]));
    }

    #[test]
    fn ideal_participant_always_hits() {
        let r = SceneRenderer::new(SceneSpec::desk()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for mode in PointingMode::ALL {
            for id in r.spec().ids() {
                let rec = run_trial(
                    &r,
                    id,
                    Condition::new(mode, false),
                    &ParticipantModel::ideal(),
                    &SelectorConfig::default(),
                    &mut rng,
                )
                .unwrap();
                assert_eq!(rec.selected, Some(id), "{mode:?}");
                assert!(rec.selection_time > 0.0);
            }
        }
    }
}
