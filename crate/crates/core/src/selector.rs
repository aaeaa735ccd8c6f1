//! The selection engine: per-frame preselection of the object nearest the
//! pointing ray, switch hysteresis, and pinch-click confirmation.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{deproject, point_ray_distance, ray_from_points, CameraIntrinsics, Point3, Ray3};
use crate::hand::{
    assign_roles, index_extension, pinch_metric_from, pinch_step, pointing_landmarks, FirstJoint, HandFrame,
    Handedness, PinchConfig, PinchState, PointingMode, INDEX_TIP, LANDMARK_COUNT, MIDDLE_MCP, THUMB_TIP, WRIST,
};
use crate::io::{Frame, FrameError};
use crate::scene::{compute_centroid, DepthFrame, ObjectId};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectorConfig {
    pub mode: PointingMode,
    #[serde(default)]
    pub first_joint: FirstJoint,
    /// Objects further than this from the ray are never preselected.
    /// Infinity (forced choice) is written as `null`.
    #[serde(with = "unbounded")]
    pub max_ray_distance: f64,
    /// Objects must lie beyond this ray parameter (in front of the hand).
    pub min_t: f64,
    /// Consecutive frames a new candidate must win before it is preselected.
    pub switch_frames: u32,
    pub pinch: PinchConfig,
    /// Frames a landmark may reuse its last valid depth.
    pub depth_hold_frames: u32,
    /// EMA weight of the newest 3D landmark, `None` to disable smoothing.
    #[serde(default)]
    pub smoothing: Option<f64>,
}

mod unbounded {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

impl Default for SelectorConfig {
    fn default() -> Self {
        Self {
            mode: PointingMode::FingerLine,
            first_joint: FirstJoint::Mcp,
            max_ray_distance: 0.5,
            min_t: 0.0,
            switch_frames: 2,
            pinch: PinchConfig::default(),
            depth_hold_frames: 5,
            smoothing: None,
        }
    }
}

impl SelectorConfig {
    pub fn with_mode(mode: PointingMode) -> Self {
        Self { mode, ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.max_ray_distance > 0.0) {
            return Err(ConfigError("max_ray_distance must be > 0"));
        }
        if self.switch_frames < 1 {
            return Err(ConfigError("switch_frames must be >= 1"));
        }
        if !self.pinch.is_valid() {
            return Err(ConfigError("pinch engage must be below release and dwell >= 1"));
        }
        if let Some(a) = self.smoothing {
            if !(a > 0.0 && a <= 1.0) {
                return Err(ConfigError("smoothing weight must be in (0, 1]"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("invalid selector config: {0}")]
pub struct ConfigError(&'static str);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    PreselectionChanged(Option<ObjectId>),
    ObjectSelected(ObjectId),
    HandsLost,
    HandsFound,
}

/// Engine output, stamped with the frame time in milliseconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(into = "EventLine", try_from = "EventLine")]
pub struct SelectionEvent {
    pub t: u64,
    pub kind: EventKind,
}

#[derive(Serialize, Deserialize)]
struct EventLine {
    t: u64,
    event: String,
    object: Option<ObjectId>,
}

impl From<SelectionEvent> for EventLine {
    fn from(e: SelectionEvent) -> Self {
        let (event, object) = match e.kind {
            EventKind::PreselectionChanged(o) => ("preselect", o),
            EventKind::ObjectSelected(o) => ("select", Some(o)),
            EventKind::HandsLost => ("hands_lost", None),
            EventKind::HandsFound => ("hands_found", None),
        };
        EventLine { t: e.t, event: event.to_string(), object }
    }
}

impl TryFrom<EventLine> for SelectionEvent {
    type Error = String;

    fn try_from(l: EventLine) -> Result<Self, String> {
        let kind = match (l.event.as_str(), l.object) {
            ("preselect", o) => EventKind::PreselectionChanged(o),
            ("select", Some(o)) => EventKind::ObjectSelected(o),
            ("hands_lost", None) => EventKind::HandsLost,
            ("hands_found", None) => EventKind::HandsFound,
            (ev, o) => return Err(format!("invalid event `{ev}` with object {o:?}")),
        };
        Ok(SelectionEvent { t: l.t, kind })
    }
}

impl SelectionEvent {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("event serializes")
    }
}

/// Write one JSON object per line.
pub fn write_event_log<W: Write>(mut w: W, events: &[SelectionEvent]) -> io::Result<()> {
    for e in events {
        writeln!(w, "{}", e.to_json())?;
    }
    Ok(())
}

pub fn event_log_string(events: &[SelectionEvent]) -> String {
    let mut buf = Vec::new();
    write_event_log(&mut buf, events).expect("writing to memory");
    String::from_utf8(buf).expect("JSON is UTF-8")
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
struct HeldDepth {
    z: f64,
    age: u32,
}

/// Per-handedness memory used for landmark lifting.
#[derive(Debug, Clone, PartialEq)]
struct HandMemory {
    depth: [Option<HeldDepth>; LANDMARK_COUNT],
    smoothed: [Option<Point3>; LANDMARK_COUNT],
}

impl Default for HandMemory {
    fn default() -> Self {
        Self { depth: [None; LANDMARK_COUNT], smoothed: [None; LANDMARK_COUNT] }
    }
}

/// Everything the engine carries between frames.
#[derive(Debug, Clone, PartialEq)]
pub struct EngineState {
    pub preselected: Option<ObjectId>,
    /// Challenger for the preselection and the number of consecutive frames
    /// it has won.
    pub candidate: Option<Option<ObjectId>>,
    pub streak: u32,
    pub hands_present: bool,
    /// Indexed by [`Handedness::index`].
    pub pinch: [PinchState; 2],
    memory: [HandMemory; 2],
}

impl Default for EngineState {
    fn default() -> Self {
        Self {
            preselected: None,
            candidate: None,
            streak: 0,
            hands_present: true,
            pinch: [PinchState::default(); 2],
            memory: Default::default(),
        }
    }
}

/// Object distance to the current ray.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate {
    pub id: ObjectId,
    pub distance: f64,
    pub t: f64,
}

/// Per-frame diagnostics alongside the events.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutput {
    pub events: Vec<SelectionEvent>,
    pub ray: Option<Ray3>,
    /// Index into `frame.hands` of the pointing and clicking hands.
    pub pointing_hand: Option<usize>,
    pub click_hand: Option<usize>,
    pub pinch_metric: Option<f64>,
    pub click: bool,
    /// Nearest admissible object this frame, before hysteresis.
    pub nearest: Option<Candidate>,
}

/// Filter objects by `t > min_t` and `distance <= max_ray_distance`, then
/// take the nearest; equal distances go to the smaller id.
pub fn nearest_object<I>(ray: &Ray3, centroids: I, min_t: f64, max_ray_distance: f64) -> Option<Candidate>
where
    I: IntoIterator<Item = (ObjectId, Point3)>,
{
    let mut best: Option<Candidate> = None;
    for (id, c) in centroids {
        let (distance, t) = point_ray_distance(c, ray);
        if !(t > min_t && distance <= max_ray_distance) {
            continue;
        }
        let better = match best {
            None => true,
            Some(b) => distance < b.distance || (distance == b.distance && id < b.id),
        };
        if better {
            best = Some(Candidate { id, distance, t });
        }
    }
    best
}

/// Sequential selection engine for one session.
#[derive(Debug, Clone)]
pub struct Engine {
    cfg: SelectorConfig,
    intr: CameraIntrinsics,
    state: EngineState,
}

impl Engine {
    pub fn new(cfg: SelectorConfig, intr: CameraIntrinsics) -> Self {
        Self { cfg, intr, state: EngineState::default() }
    }

    pub fn config(&self) -> &SelectorConfig {
        &self.cfg
    }

    /// Change the pointing mode without resetting state.
    pub fn set_mode(&mut self, mode: PointingMode) {
        self.cfg.mode = mode;
    }

    pub fn intrinsics(&self) -> &CameraIntrinsics {
        &self.intr
    }

    pub fn state(&self) -> &EngineState {
        &self.state
    }

    pub fn preselected(&self) -> Option<ObjectId> {
        self.state.preselected
    }

    pub fn reset(&mut self) {
        self.state = EngineState::default();
    }

    pub fn step(&mut self, frame: &Frame, depth: Option<&DepthFrame>) -> Result<Vec<SelectionEvent>, FrameError> {
        self.step_detailed(frame, depth).map(|o| o.events)
    }

    pub fn step_detailed(&mut self, frame: &Frame, depth: Option<&DepthFrame>) -> Result<StepOutput, FrameError> {
        frame.validate(Some((self.intr.width, self.intr.height)))?;
        let t = frame.t;
        let cfg = self.cfg;
        let mut events = Vec::new();

        // Lift every hand; hands absent this frame lose their memory.
        let mut present = [false; 2];
        let lifted: Vec<[Option<Point3>; LANDMARK_COUNT]> = frame
            .hands
            .iter()
            .map(|h| {
                present[h.handedness.index()] = true;
                self.lift(h, depth)
            })
            .collect();
        for hd in [Handedness::Left, Handedness::Right] {
            if !present[hd.index()] {
                self.state.memory[hd.index()] = HandMemory::default();
            }
        }

        let extensions: Vec<(Handedness, f64)> = frame
            .hands
            .iter()
            .zip(&lifted)
            .map(|(h, l)| (h.handedness, index_extension(h, Some(l))))
            .collect();
        let (pointing_hand, click_hand) = assign_roles(&extensions);

        let ray = pointing_hand.and_then(|i| {
            let (p, d) = pointing_landmarks(cfg.mode, cfg.first_joint);
            ray_from_points(lifted[i][p]?, lifted[i][d]?).ok()
        });

        let mut nearest = None;
        match ray {
            None => {
                if self.state.hands_present {
                    self.state.hands_present = false;
                    events.push(SelectionEvent { t, kind: EventKind::HandsLost });
                    if self.state.preselected.take().is_some() {
                        events.push(SelectionEvent { t, kind: EventKind::PreselectionChanged(None) });
                    }
                }
                self.state.candidate = None;
                self.state.streak = 0;
            }
            Some(ray) => {
                if !self.state.hands_present {
                    self.state.hands_present = true;
                    events.push(SelectionEvent { t, kind: EventKind::HandsFound });
                }
                let centroids = self.centroids(frame, depth)?;
                nearest = nearest_object(&ray, centroids, cfg.min_t, cfg.max_ray_distance);
                let winner = nearest.map(|c| c.id);
                if let Some(changed) = self.hysteresis(winner) {
                    events.push(SelectionEvent { t, kind: EventKind::PreselectionChanged(changed) });
                }
            }
        }

        // Pinch: the click hand sees its metric, every other handedness sees none.
        let mut metric = None;
        let mut click = false;
        let click_hd = click_hand.map(|i| frame.hands[i].handedness);
        for hd in [Handedness::Left, Handedness::Right] {
            let m = match click_hand {
                Some(i) if click_hd == Some(hd) => {
                    let l = &lifted[i];
                    pinch_metric_from(&frame.hands[i], &[l[WRIST], l[THUMB_TIP], l[INDEX_TIP], l[MIDDLE_MCP]])
                }
                _ => None,
            };
            let (next, c) = pinch_step(self.state.pinch[hd.index()], m, &cfg.pinch);
            self.state.pinch[hd.index()] = next;
            if click_hd == Some(hd) {
                metric = m;
                click = c;
            }
        }
        if click {
            if let Some(id) = self.state.preselected {
                events.push(SelectionEvent { t, kind: EventKind::ObjectSelected(id) });
            }
        }

        Ok(StepOutput { events, ray, pointing_hand, click_hand, pinch_metric: metric, click, nearest })
    }

    /// Apply switch hysteresis to this frame's winner. Returns the new
    /// preselection when it changes.
    fn hysteresis(&mut self, winner: Option<ObjectId>) -> Option<Option<ObjectId>> {
        let s = &mut self.state;
        if winner == s.preselected {
            s.candidate = None;
            s.streak = 0;
            return None;
        }
        if s.candidate == Some(winner) {
            s.streak += 1;
        } else {
            s.candidate = Some(winner);
            s.streak = 1;
        }
        if s.streak >= self.cfg.switch_frames {
            s.preselected = winner;
            s.candidate = None;
            s.streak = 0;
            Some(winner)
        } else {
            None
        }
    }

    /// Object centroids from mask and depth when depth is present, else as
    /// carried by the frame. Objects without a centroid are skipped.
    fn centroids(&self, frame: &Frame, depth: Option<&DepthFrame>) -> Result<Vec<(ObjectId, Point3)>, FrameError> {
        let mut out = Vec::with_capacity(frame.objects.len());
        for o in &frame.objects {
            let c = match depth {
                Some(d) => compute_centroid(&o.mask, d, &self.intr)
                    .map_err(|source| FrameError::Mask { id: o.id, source })?
                    .map(|c| c.point),
                None => o.centroid,
            };
            if let Some(c) = c {
                out.push((o.id, c));
            }
        }
        Ok(out)
    }

    fn lift(&mut self, hand: &HandFrame, depth: Option<&DepthFrame>) -> [Option<Point3>; LANDMARK_COUNT] {
        let hold = self.cfg.depth_hold_frames;
        let alpha = self.cfg.smoothing;
        let mem = &mut self.state.memory[hand.handedness.index()];
        std::array::from_fn(|i| {
            let z = match hand.landmark_depth(i, depth).filter(|z| *z > 0.0 && z.is_finite()) {
                Some(z) => {
                    mem.depth[i] = Some(HeldDepth { z, age: 0 });
                    Some(z)
                }
                None => match mem.depth[i] {
                    Some(h) if h.age < hold => {
                        mem.depth[i] = Some(HeldDepth { z: h.z, age: h.age + 1 });
                        Some(h.z)
                    }
                    _ => {
                        mem.depth[i] = None;
                        None
                    }
                },
            };
            let p = z.and_then(|z| deproject(hand.landmarks[i], z, &self.intr).ok());
            match (alpha, p) {
                (Some(a), Some(p)) => {
                    let s = match mem.smoothed[i] {
                        Some(prev) => p * a + prev * (1.0 - a),
                        None => p,
                    };
                    mem.smoothed[i] = Some(s);
                    Some(s)
                }
                (Some(_), None) => {
                    mem.smoothed[i] = None;
                    None
                }
                (None, p) => p,
            }
        })
    }
}

/// Preselection after each frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub index: u64,
    pub t: u64,
    pub preselected: Option<ObjectId>,
    pub hands_present: bool,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct StreamOutput {
    pub events: Vec<SelectionEvent>,
    pub trace: Vec<TraceEntry>,
}

#[derive(Debug, Error, Clone, PartialEq)]
#[error("frame {position}: {source}")]
pub struct StreamError {
    /// Zero-based position in the stream.
    pub position: usize,
    pub source: FrameError,
}

/// Fold [`Engine::step`] over a stream of frames.
pub fn run_stream<I, D>(frames: I, cfg: &SelectorConfig, intr: &CameraIntrinsics) -> Result<StreamOutput, StreamError>
where
    I: IntoIterator<Item = (Frame, D)>,
    D: std::borrow::Borrow<Option<DepthFrame>>,
{
    let mut engine = Engine::new(*cfg, *intr);
    let mut out = StreamOutput::default();
    for (position, (frame, depth)) in frames.into_iter().enumerate() {
        let ev = engine
            .step(&frame, depth.borrow().as_ref())
            .map_err(|source| StreamError { position, source })?;
        out.events.extend(ev);
        out.trace.push(TraceEntry {
            index: frame.index,
            t: frame.t,
            preselected: engine.state.preselected,
            hands_present: engine.state.hands_present,
        });
    }
    Ok(out)
}
