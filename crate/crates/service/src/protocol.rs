//! Socket messages. Each websocket text message carries one JSON object with
//! a `type` tag.

use deixis::hand::{Handedness, PointingMode};
use deixis::scene::ObjectId;
use deixis::selector::SelectionEvent;
use deixis::stats::Condition;
use serde::{Deserialize, Deserializer, Serialize};

/// Server to client.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum SessionMsg {
    /// Sent once on connect.
    Scene(SceneInfo),
    FrameView(FrameView),
    Event(SelectionEvent),
    Instruction(Instruction),
    TrialResult(TrialResult),
    BlockDone(BlockDone),
    Warning { message: String },
}

impl SessionMsg {
    pub fn warning(message: impl Into<String>) -> Self {
        SessionMsg::Warning { message: message.into() }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("message serializes")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SessionMode {
    LiveSim,
    Replay,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneInfo {
    pub mode: SessionMode,
    pub width: u32,
    pub height: u32,
    pub fps: f64,
    pub condition: Condition,
    pub objects: Vec<ObjectView>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectView {
    pub id: ObjectId,
    pub label: String,
    /// Decimated mask outline in pixel coordinates.
    pub outline: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HandView {
    pub handedness: Handedness,
    pub landmarks: Vec<[f64; 2]>,
}

/// Snapshot of one engine frame. With feedback off only `t`, `index` and
/// `hands_present` are sent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameView {
    pub t: u64,
    pub index: u64,
    pub hands_present: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub objects: Option<Vec<ObjectView>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hands: Option<Vec<HandView>>,
    /// Absent with feedback off, `null` when nothing is preselected.
    #[serde(default, skip_serializing_if = "Option::is_none", deserialize_with = "present")]
    pub preselected: Option<Option<ObjectId>>,
}

fn present<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Option<ObjectId>>, D::Error> {
    Option::<ObjectId>::deserialize(d).map(Some)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instruction {
    pub t: u64,
    pub target: ObjectId,
    pub label: String,
    /// 1-based trial number within the block.
    pub trial: u32,
    pub trials: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub t: u64,
    pub trial: u32,
    pub target: ObjectId,
    /// `None` when the trial timed out.
    pub selected: Option<ObjectId>,
    pub correct: bool,
    pub time_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockDone {
    pub t: u64,
    pub trials: u32,
    pub correct: u32,
    /// Where the trial table was written, if anywhere.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub csv: Option<String>,
}

/// Client to server.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ControlMsg {
    /// Point in camera-image pixels.
    Aim { x: f64, y: f64 },
    PinchDown,
    PinchUp,
    SetCondition { mode: PointingMode, feedback: bool },
    StartTrialBlock {
        #[serde(default)]
        spec: BlockSpec,
    },
    LoadReplay { path: String },
}

impl ControlMsg {
    pub fn parse(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("message serializes")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct BlockSpec {
    pub participant: u32,
    /// Times each object is the target.
    pub repetitions: u32,
}

impl Default for BlockSpec {
    fn default() -> Self {
        Self { participant: 1, repetitions: 2 }
    }
}
