//! One interactive session: the engine, the virtual participant steered by
//! control messages, and the trial protocol. Everything here is synchronous
//! and deterministic given the seed and the sequence of calls.

use std::collections::VecDeque;
use std::path::{Path, PathBuf};

use deixis::geometry::{deproject, Pixel, Point3};
use deixis::io::{replay, Frame, FrameError, IoError, Replay};
use deixis::scene::{DepthFrame, ObjectId, SceneObject};
use deixis::selector::{Engine, EventKind, SelectionEvent, SelectorConfig};
use deixis::sim::pose::gaussian_offsets;
use deixis::sim::{click_hand, trial_targets, ParticipantModel, PointingPose, SceneRenderer, SceneSpec, SimError, TrialScript};
use deixis::stats::{Condition, TrialRecord};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::protocol::{
    BlockDone, BlockSpec, ControlMsg, FrameView, HandView, Instruction, ObjectView, SceneInfo, SessionMode, SessionMsg,
    TrialResult,
};

#[derive(Debug, Error)]
pub enum SessionError {
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Io(#[from] IoError),
    #[error("frame {index}: {source}")]
    Frame { index: u64, source: FrameError },
    #[error("replay mode needs a recording")]
    NoRecording,
    #[error("scripted block failed: {0}")]
    Script(String),
}

#[derive(Debug, Clone)]
pub struct SessionConfig {
    pub mode: SessionMode,
    pub scene: SceneSpec,
    pub seed: u64,
    pub selector: SelectorConfig,
    pub condition: Condition,
    /// Recording to stream in replay mode.
    pub replay: Option<PathBuf>,
    /// Directory that block CSVs are written to, by whoever consumes the log.
    pub out_dir: Option<PathBuf>,
    pub trial_timeout_s: f64,
    /// Per-frame landmark jitter of the virtual hands, meters.
    pub tremor: f64,
    pub outline_points: usize,
}

impl SessionConfig {
    pub fn live(scene: SceneSpec, seed: u64) -> Self {
        let condition = Condition::ALL[0];
        Self {
            mode: SessionMode::LiveSim,
            scene,
            seed,
            selector: SelectorConfig::with_mode(condition.mode),
            condition,
            replay: None,
            out_dir: None,
            trial_timeout_s: 30.0,
            tremor: 0.0005,
            outline_points: 48,
        }
    }

    pub fn replay(path: impl Into<PathBuf>) -> Self {
        Self { mode: SessionMode::Replay, replay: Some(path.into()), ..Self::live(SceneSpec::desk(), 0) }
    }
}

/// Things the trial logger persists.
#[derive(Debug, Clone, PartialEq)]
pub enum LogItem {
    Event(SelectionEvent),
    Trial(TrialRecord),
    Block { path: Option<PathBuf>, records: Vec<TrialRecord> },
}

/// Output of one engine step.
#[derive(Debug, Default)]
pub struct Step {
    /// Latest-wins snapshot for the view.
    pub view: Option<FrameView>,
    /// Messages that must reach the client in order.
    pub messages: Vec<SessionMsg>,
    pub log: Vec<LogItem>,
    /// The frame the engine consumed.
    pub frame: Option<(Frame, Option<DepthFrame>)>,
    /// Replay reached the end of its recording.
    pub finished: bool,
}

struct Block {
    spec: BlockSpec,
    targets: Vec<ObjectId>,
    next: usize,
    started_t: u64,
    records: Vec<TrialRecord>,
}

pub struct LiveSession {
    cfg: SessionConfig,
    renderer: Option<SceneRenderer>,
    engine: Engine,
    rng: ChaCha8Rng,
    participant: ParticipantModel,
    script: TrialScript,
    aim: Option<PointingPose>,
    pinched: bool,
    /// Pinch transitions not yet rendered; each one is held for at least a frame.
    pinch_queue: VecDeque<bool>,
    condition: Condition,
    block: Option<Block>,
    blocks_done: u32,
    recording: Option<Replay>,
    frame_index: u64,
    last_t: u64,
    /// Objects seen in the latest replayed frame.
    replay_objects: Vec<SceneObject>,
}

impl LiveSession {
    pub fn new(cfg: SessionConfig) -> Result<Self, SessionError> {
        let (renderer, recording) = match cfg.mode {
            SessionMode::LiveSim => (Some(SceneRenderer::new(cfg.scene.clone())?), None),
            SessionMode::Replay => {
                let path = cfg.replay.as_ref().ok_or(SessionError::NoRecording)?;
                (None, Some(replay(path)?))
            }
        };
        let intr = match (&renderer, &recording) {
            (Some(r), _) => *r.intrinsics(),
            (None, Some(rp)) => rp.header().intrinsics,
            (None, None) => unreachable!("one of the two is set"),
        };
        let selector = match &recording {
            Some(rp) => rp.header().selector.unwrap_or(cfg.selector),
            None => SelectorConfig { mode: cfg.condition.mode, ..cfg.selector },
        };
        Ok(Self {
            engine: Engine::new(selector, intr),
            rng: ChaCha8Rng::seed_from_u64(cfg.seed),
            participant: ParticipantModel::ideal(),
            script: TrialScript::default(),
            condition: Condition::new(selector.mode, cfg.condition.feedback),
            cfg,
            renderer,
            aim: None,
            pinched: false,
            pinch_queue: VecDeque::new(),
            block: None,
            blocks_done: 0,
            recording,
            frame_index: 0,
            last_t: 0,
            replay_objects: Vec::new(),
        })
    }

    pub fn mode(&self) -> SessionMode {
        self.cfg.mode
    }

    pub fn condition(&self) -> Condition {
        self.condition
    }

    pub fn engine(&self) -> &Engine {
        &self.engine
    }

    pub fn renderer(&self) -> Option<&SceneRenderer> {
        self.renderer.as_ref()
    }

    pub fn block_active(&self) -> bool {
        self.block.is_some()
    }

    /// Frame rate the session should be stepped at.
    pub fn fps(&self) -> f64 {
        match (&self.renderer, &self.recording) {
            (Some(r), _) => r.spec().fps,
            (None, Some(rp)) => rp.header().fps,
            _ => 30.0,
        }
    }

    /// Time stamp of the next live frame, ms.
    fn next_t(&self) -> u64 {
        (self.frame_index as f64 * 1000.0 / self.fps()).round() as u64
    }

    fn object_views(&self, objects: &[SceneObject]) -> Vec<ObjectView> {
        objects
            .iter()
            .map(|o| ObjectView { id: o.id, label: o.label.clone(), outline: o.mask.outline(self.cfg.outline_points) })
            .collect()
    }

    /// Greeting sent to a newly connected client.
    pub fn hello(&self) -> SessionMsg {
        let intr = self.engine.intrinsics();
        let objects = match &self.renderer {
            Some(r) => self.object_views(r.objects()),
            None => self.object_views(&self.replay_objects),
        };
        SessionMsg::Scene(SceneInfo {
            mode: self.cfg.mode,
            width: intr.width,
            height: intr.height,
            fps: self.fps(),
            condition: self.condition,
            objects,
        })
    }

    /// Visible surface point under an image pixel, if any.
    fn surface_point(&self, x: f64, y: f64) -> Option<Point3> {
        let r = self.renderer.as_ref()?;
        let intr = r.intrinsics();
        let px = Pixel::new(x, y);
        if !x.is_finite() || !y.is_finite() || !intr.contains(px) {
            return None;
        }
        let (u, v) = ((x.round() as u32).min(intr.width - 1), (y.round() as u32).min(intr.height - 1));
        let z = r.background().meters(u, v).unwrap_or(r.spec().table_depth);
        deproject(px, z, intr).ok()
    }

    /// Apply one control message; returns replies (warnings, instructions).
    pub fn handle(&mut self, msg: ControlMsg) -> Vec<SessionMsg> {
        let live = self.cfg.mode == SessionMode::LiveSim;
        match msg {
            ControlMsg::Aim { x, y } if live => {
                let anchor = self.participant.hand_anchor;
                self.aim = self
                    .surface_point(x, y)
                    .filter(|p| p.distance(anchor) > 0.05)
                    .map(|p| PointingPose::aimed(anchor, p, (0.0, 0.0), (0.0, 0.0)));
                vec![]
            }
            ControlMsg::PinchDown if live => {
                self.pinch_queue.push_back(true);
                vec![]
            }
            ControlMsg::PinchUp if live => {
                self.pinch_queue.push_back(false);
                vec![]
            }
            ControlMsg::SetCondition { mode, feedback } => {
                if self.block.is_some() {
                    return vec![SessionMsg::warning("condition cannot change during a trial block")];
                }
                if !live && mode != self.condition.mode {
                    return vec![SessionMsg::warning("replay keeps the recorded pointing mode")];
                }
                self.condition = Condition::new(mode, feedback);
                self.engine.set_mode(mode);
                vec![]
            }
            ControlMsg::StartTrialBlock { spec } if live => self.start_block(spec),
            ControlMsg::LoadReplay { path } if !live => match self.load_replay(Path::new(&path)) {
                Ok(()) => vec![self.hello()],
                Err(e) => vec![SessionMsg::warning(format!("cannot load {path}: {e}"))],
            },
            other => {
                let name = serde_json::to_value(&other)
                    .ok()
                    .and_then(|v| v.get("type").and_then(|t| t.as_str()).map(str::to_owned))
                    .unwrap_or_default();
                let mode = if live { "live-sim" } else { "replay" };
                vec![SessionMsg::warning(format!("`{name}` is not accepted in {mode} mode"))]
            }
        }
    }

    fn load_replay(&mut self, path: &Path) -> Result<(), SessionError> {
        let rp = replay(path)?;
        let selector = rp.header().selector.unwrap_or(self.cfg.selector);
        self.engine = Engine::new(selector, rp.header().intrinsics);
        self.condition.mode = selector.mode;
        self.recording = Some(rp);
        self.frame_index = 0;
        self.replay_objects.clear();
        Ok(())
    }

    fn start_block(&mut self, spec: BlockSpec) -> Vec<SessionMsg> {
        if self.block.is_some() {
            return vec![SessionMsg::warning("a trial block is already running")];
        }
        if spec.repetitions == 0 {
            return vec![SessionMsg::warning("block needs at least one repetition")];
        }
        let ids = self.renderer.as_ref().map(|r| r.spec().ids()).unwrap_or_default();
        let targets = trial_targets(&ids, spec.repetitions, &mut self.rng);
        let t = self.next_t();
        self.block = Some(Block { spec, targets, next: 0, started_t: t, records: Vec::new() });
        vec![self.instruction(t)]
    }

    fn instruction(&self, t: u64) -> SessionMsg {
        let b = self.block.as_ref().expect("block running");
        let target = b.targets[b.next];
        let label = self
            .renderer
            .as_ref()
            .and_then(|r| r.spec().object(target))
            .map(|o| o.label.clone())
            .unwrap_or_default();
        SessionMsg::Instruction(Instruction {
            t,
            target,
            label,
            trial: b.next as u32 + 1,
            trials: b.targets.len() as u32,
        })
    }

    /// Close the running trial with `selected` at time `t`.
    fn finish_trial(&mut self, t: u64, selected: Option<ObjectId>, step: &mut Step) {
        let condition = self.condition;
        let b = self.block.as_mut().expect("block running");
        let target = b.targets[b.next];
        let time_s = t.saturating_sub(b.started_t) as f64 / 1000.0;
        let rec = TrialRecord { participant: b.spec.participant, condition, target, selected, selection_time: time_s };
        b.records.push(rec);
        step.log.push(LogItem::Trial(rec));
        step.messages.push(SessionMsg::TrialResult(TrialResult {
            t,
            trial: b.next as u32 + 1,
            target,
            selected,
            correct: rec.correct(),
            time_s,
        }));
        b.next += 1;
        b.started_t = t;
        if b.next < b.targets.len() {
            let next = self.instruction(t);
            step.messages.push(next);
            return;
        }
        let b = self.block.take().expect("block running");
        self.blocks_done += 1;
        let path = self
            .cfg
            .out_dir
            .as_ref()
            .map(|d| d.join(format!("block{}-p{}.csv", self.blocks_done, b.spec.participant)));
        let correct = b.records.iter().filter(|r| r.correct()).count() as u32;
        step.messages.push(SessionMsg::BlockDone(BlockDone {
            t,
            trials: b.records.len() as u32,
            correct,
            csv: path.as_ref().map(|p| p.display().to_string()),
        }));
        step.log.push(LogItem::Block { path, records: b.records });
    }

    fn view(&self, frame: &Frame) -> FrameView {
        let hands_present = self.engine.state().hands_present;
        if !self.condition.feedback {
            return FrameView { t: frame.t, index: frame.index, hands_present, objects: None, hands: None, preselected: None };
        }
        FrameView {
            t: frame.t,
            index: frame.index,
            hands_present,
            objects: Some(self.object_views(&frame.objects)),
            hands: Some(
                frame
                    .hands
                    .iter()
                    .map(|h| HandView { handedness: h.handedness, landmarks: h.landmarks.iter().map(|p| [p.u, p.v]).collect() })
                    .collect(),
            ),
            preselected: Some(self.engine.preselected()),
        }
    }

    fn live_frame(&mut self) -> (Frame, DepthFrame) {
        let r = self.renderer.as_ref().expect("live mode has a renderer");
        let t = self.next_t();
        if let Some(p) = self.pinch_queue.pop_front() {
            self.pinched = p;
        }
        let hands = match &self.aim {
            Some(pose) => {
                let scale = r.intrinsics().depth_scale;
                let sep = if self.pinched { self.script.pinched_separation } else { self.script.open_separation };
                let click = click_hand(self.script.click_anchor, sep, &gaussian_offsets(self.cfg.tremor, &mut self.rng));
                vec![click, pose.render(&gaussian_offsets(self.cfg.tremor, &mut self.rng), scale)]
            }
            None => Vec::new(),
        };
        r.compose(self.frame_index, t, &hands)
    }

    /// Advance the engine by one frame.
    pub fn step(&mut self) -> Result<Step, SessionError> {
        let mut step = Step::default();
        let (frame, depth) = match self.cfg.mode {
            SessionMode::LiveSim => {
                let (f, d) = self.live_frame();
                (f, Some(d))
            }
            SessionMode::Replay => {
                let Some(rp) = self.recording.as_mut() else {
                    step.finished = true;
                    return Ok(step);
                };
                match rp.next_frame()? {
                    Some(pair) => pair,
                    None => {
                        step.finished = true;
                        return Ok(step);
                    }
                }
            }
        };
        let out = self
            .engine
            .step_detailed(&frame, depth.as_ref())
            .map_err(|source| SessionError::Frame { index: frame.index, source })?;
        self.frame_index += 1;
        self.last_t = frame.t;
        if self.cfg.mode == SessionMode::Replay {
            self.replay_objects.clone_from(&frame.objects);
        }

        let mut selected = None;
        for e in out.events {
            step.log.push(LogItem::Event(e));
            let preselect = matches!(e.kind, EventKind::PreselectionChanged(_));
            if self.condition.feedback || !preselect {
                step.messages.push(SessionMsg::Event(e));
            }
            if let EventKind::ObjectSelected(id) = e.kind {
                selected = Some(id);
            }
        }
        if self.block.is_some() {
            let b = self.block.as_ref().expect("checked");
            let timed_out = frame.t.saturating_sub(b.started_t) as f64 / 1000.0 >= self.cfg.trial_timeout_s;
            if selected.is_some() || timed_out {
                self.finish_trial(frame.t, selected, &mut step);
            }
        }
        step.view = Some(self.view(&frame));
        step.frame = Some((frame, depth));
        Ok(step)
    }

    /// Time of the most recent frame, ms.
    pub fn now_ms(&self) -> u64 {
        self.last_t
    }

    /// Pixel of an object's centroid, for scripted aiming.
    pub fn object_pixel(&self, id: ObjectId) -> Option<Pixel> {
        let r = self.renderer.as_ref()?;
        deixis::geometry::project(r.centroid(id)?, r.intrinsics()).ok()
    }
}
