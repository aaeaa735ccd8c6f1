//! Hand keypoint interpretation: pointing rays, the pinch metric and the
//! click state machine.
//!
//! Landmarks follow the usual 21-point hand convention: 0 is the wrist,
//! 1-4 the thumb, 5-8 the index finger (MCP, PIP, DIP, tip), 9-12 middle,
//! 13-16 ring and 17-20 pinky.

use serde::{Deserialize, Serialize};

use crate::geometry::{deproject, ray_from_points, CameraIntrinsics, Pixel, Point3, Ray3};
use crate::scene::{sample_depth_robust, DepthFrame};

pub const LANDMARK_COUNT: usize = 21;
pub const WRIST: usize = 0;
pub const THUMB_TIP: usize = 4;
pub const INDEX_MCP: usize = 5;
pub const INDEX_PIP: usize = 6;
pub const INDEX_TIP: usize = 8;
pub const MIDDLE_MCP: usize = 9;

/// Window used for per-landmark depth lookup.
pub const LANDMARK_DEPTH_WINDOW: u32 = 5;

/// Minimum hand scale for the pinch metric: 1 mm in 3D, 1 px in 2D.
const MIN_HAND_SCALE_M: f64 = 1e-3;
const MIN_HAND_SCALE_PX: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Handedness {
    Left,
    Right,
}

impl Handedness {
    pub fn index(self) -> usize {
        match self {
            Handedness::Left => 0,
            Handedness::Right => 1,
        }
    }

    pub fn other(self) -> Self {
        match self {
            Handedness::Left => Handedness::Right,
            Handedness::Right => Handedness::Left,
        }
    }
}

/// One detected hand: 21 image landmarks with optional per-landmark depth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HandFrame {
    pub handedness: Handedness,
    pub landmarks: [Pixel; LANDMARK_COUNT],
    #[serde(default, skip_serializing_if = "all_none")]
    pub depth: [Option<f64>; LANDMARK_COUNT],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confidence: Option<f64>,
}

fn all_none(d: &[Option<f64>; LANDMARK_COUNT]) -> bool {
    d.iter().all(Option::is_none)
}

impl HandFrame {
    pub fn new(handedness: Handedness, landmarks: [Pixel; LANDMARK_COUNT]) -> Self {
        Self { handedness, landmarks, depth: [None; LANDMARK_COUNT], confidence: None }
    }

    /// Depth of landmark `i`: the stored value if present, otherwise a robust
    /// lookup in `depth`.
    pub fn landmark_depth(&self, i: usize, depth: Option<&DepthFrame>) -> Option<f64> {
        self.depth[i].or_else(|| {
            depth.and_then(|d| sample_depth_robust(self.landmarks[i], d, LANDMARK_DEPTH_WINDOW))
        })
    }

    /// Camera-space position of landmark `i`, if it has depth and lies in the image.
    pub fn lift(&self, i: usize, depth: Option<&DepthFrame>, intr: &CameraIntrinsics) -> Option<Point3> {
        let z = self.landmark_depth(i, depth)?;
        deproject(self.landmarks[i], z, intr).ok()
    }

    /// Lift all 21 landmarks.
    pub fn lift_all(&self, depth: Option<&DepthFrame>, intr: &CameraIntrinsics) -> [Option<Point3>; LANDMARK_COUNT] {
        std::array::from_fn(|i| self.lift(i, depth, intr))
    }
}

/// Which pair of keypoints defines the pointing line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PointingMode {
    /// First index joint to index tip.
    #[serde(rename = "finger")]
    FingerLine,
    /// Wrist to index tip.
    #[serde(rename = "wrist")]
    WristLine,
}

impl PointingMode {
    pub const ALL: [PointingMode; 2] = [PointingMode::FingerLine, PointingMode::WristLine];

    pub fn as_str(self) -> &'static str {
        match self {
            PointingMode::FingerLine => "finger",
            PointingMode::WristLine => "wrist",
        }
    }
}

impl std::str::FromStr for PointingMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "finger" => Ok(PointingMode::FingerLine),
            "wrist" => Ok(PointingMode::WristLine),
            other => Err(format!("unknown pointing mode `{other}` (expected finger|wrist)")),
        }
    }
}

/// Reading of "first joint of the index finger".
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FirstJoint {
    #[default]
    Mcp,
    Pip,
}

impl FirstJoint {
    pub fn landmark(self) -> usize {
        match self {
            FirstJoint::Mcp => INDEX_MCP,
            FirstJoint::Pip => INDEX_PIP,
        }
    }
}

/// Landmark indices `(proximal, distal)` of the pointing line.
pub fn pointing_landmarks(mode: PointingMode, first_joint: FirstJoint) -> (usize, usize) {
    match mode {
        PointingMode::FingerLine => (first_joint.landmark(), INDEX_TIP),
        PointingMode::WristLine => (WRIST, INDEX_TIP),
    }
}

/// 3D pointing ray of `hand`. `None` when an endpoint lacks depth or the
/// endpoints are closer than the minimum baseline.
pub fn pointing_ray(
    hand: &HandFrame,
    mode: PointingMode,
    first_joint: FirstJoint,
    depth: Option<&DepthFrame>,
    intr: &CameraIntrinsics,
) -> Option<Ray3> {
    let (prox, dist) = pointing_landmarks(mode, first_joint);
    ray_from_points(hand.lift(prox, depth, intr)?, hand.lift(dist, depth, intr)?).ok()
}

/// Thumb-tip to index-tip distance divided by the wrist to middle-MCP
/// distance. Uses 3D landmarks when all four have depth, image distances
/// otherwise.
pub fn pinch_metric(hand: &HandFrame, depth: Option<&DepthFrame>, intr: &CameraIntrinsics) -> Option<f64> {
    let lifted = [WRIST, THUMB_TIP, INDEX_TIP, MIDDLE_MCP].map(|i| hand.lift(i, depth, intr));
    pinch_metric_from(hand, &lifted)
}

/// Pinch metric from already-lifted `[wrist, thumb tip, index tip, middle MCP]`.
pub(crate) fn pinch_metric_from(hand: &HandFrame, lifted: &[Option<Point3>; 4]) -> Option<f64> {
    if let [Some(w), Some(t), Some(i), Some(m)] = *lifted {
        let scale = w.distance(m);
        return (scale >= MIN_HAND_SCALE_M).then(|| t.distance(i) / scale);
    }
    let lm = &hand.landmarks;
    let scale = lm[WRIST].distance(lm[MIDDLE_MCP]);
    (scale >= MIN_HAND_SCALE_PX).then(|| lm[THUMB_TIP].distance(lm[INDEX_TIP]) / scale)
}

/// Index-finger extension: wrist→tip over wrist→MCP. Larger means more
/// extended; used to decide which hand is pointing.
pub fn index_extension(hand: &HandFrame, lifted: Option<&[Option<Point3>; LANDMARK_COUNT]>) -> f64 {
    if let Some(l) = lifted {
        if let (Some(w), Some(m), Some(t)) = (l[WRIST], l[INDEX_MCP], l[INDEX_TIP]) {
            let base = w.distance(m);
            if base > 0.0 {
                return w.distance(t) / base;
            }
        }
    }
    let lm = &hand.landmarks;
    let base = lm[WRIST].distance(lm[INDEX_MCP]);
    if base > 0.0 {
        lm[WRIST].distance(lm[INDEX_TIP]) / base
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PinchConfig {
    /// Metric below which a pinch starts.
    pub engage: f64,
    /// Metric above which a pinch ends.
    pub release: f64,
    /// Consecutive sub-threshold frames needed to engage (also the number of
    /// frames without a metric after which a pinch is dropped).
    pub dwell_frames: u32,
}

impl Default for PinchConfig {
    fn default() -> Self {
        Self { engage: 0.25, release: 0.35, dwell_frames: 3 }
    }
}

impl PinchConfig {
    pub fn is_valid(&self) -> bool {
        self.engage < self.release && self.dwell_frames >= 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum PinchPhase {
    #[default]
    Open,
    Pinched,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct PinchState {
    pub phase: PinchPhase,
    /// Consecutive frames below `engage` while open.
    pub below: u32,
    /// Consecutive frames without a metric while pinched.
    pub missing: u32,
}

/// Advance the click state machine by one frame. The boolean is `true` on the
/// single frame where an open hand becomes pinched.
pub fn pinch_step(state: PinchState, metric: Option<f64>, cfg: &PinchConfig) -> (PinchState, bool) {
    match state.phase {
        PinchPhase::Open => match metric {
            Some(m) if m < cfg.engage => {
                let below = state.below + 1;
                if below >= cfg.dwell_frames {
                    (PinchState { phase: PinchPhase::Pinched, below: 0, missing: 0 }, true)
                } else {
                    (PinchState { below, ..state }, false)
                }
            }
            _ => (PinchState { below: 0, ..state }, false),
        },
        PinchPhase::Pinched => match metric {
            Some(m) if m > cfg.release => (PinchState::default(), false),
            Some(_) => (PinchState { missing: 0, ..state }, false),
            None => {
                let missing = state.missing + 1;
                if missing >= cfg.dwell_frames {
                    (PinchState::default(), false)
                } else {
                    (PinchState { missing, ..state }, false)
                }
            }
        },
    }
}

/// Decide which hand points and which clicks. The pointing hand is the one
/// with the more extended index finger; exact ties go to the right hand.
pub fn assign_roles(extensions: &[(Handedness, f64)]) -> (Option<usize>, Option<usize>) {
    match extensions {
        [] => (None, None),
        [_] => (Some(0), None),
        [(ha, ea), (hb, eb), ..] => {
            let a_points = if ea == eb { *ha == Handedness::Right || *hb != Handedness::Right } else { ea > eb };
            if a_points {
                (Some(0), Some(1))
            } else {
                (Some(1), Some(0))
            }
        }
    }
}
