//! Synthetic 3D hand poses for the pointing and clicking hands.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::geometry::{project, CameraIntrinsics, Pixel, Point3, Vec3};
use crate::hand::{Handedness, HandFrame, INDEX_MCP, INDEX_PIP, INDEX_TIP, LANDMARK_COUNT, MIDDLE_MCP, THUMB_TIP, WRIST};

/// Tip-to-joint distances along the index finger (DIP, PIP, MCP).
pub const INDEX_DIP_BACK: f64 = 0.022;
pub const INDEX_PIP_BACK: f64 = 0.047;
pub const INDEX_MCP_BACK: f64 = 0.080;
/// Wrist to index tip distance.
pub const WRIST_BACK: f64 = 0.170;
/// Wrist to middle MCP distance of the clicking hand.
pub const CLICK_HAND_SCALE: f64 = 0.090;

/// A hand ready to be drawn: landmarks plus the order in which their depth
/// patches are painted.
#[derive(Debug, Clone, PartialEq)]
pub struct RenderedHand {
    pub handedness: Handedness,
    pub points: [Point3; LANDMARK_COUNT],
    pub paint_order: Vec<usize>,
}

impl RenderedHand {
    pub fn to_hand_frame(&self, intr: &CameraIntrinsics) -> HandFrame {
        // Points behind the camera land off-image and so read no depth.
        let px = self.points.map(|p| project(p, intr).unwrap_or(Pixel::new(-1.0, -1.0)));
        HandFrame::new(self.handedness, px)
    }

    /// Like [`Self::to_hand_frame`] but carrying each landmark's exact depth,
    /// so no depth image is needed.
    pub fn to_hand_frame_with_depth(&self, intr: &CameraIntrinsics) -> HandFrame {
        let mut h = self.to_hand_frame(intr);
        h.depth = self.points.map(|p| Some(p.z));
        h
    }
}

fn paint_order(key: &[usize]) -> Vec<usize> {
    let mut v: Vec<usize> = (0..LANDMARK_COUNT).filter(|i| !key.contains(i)).collect();
    v.extend_from_slice(key);
    v
}

/// Orthonormal basis `(f, l, n)` with `f` along `dir`.
fn basis(dir: Vec3) -> (Vec3, Vec3, Vec3) {
    let f = dir.normalized().expect("non-zero direction");
    let l = f.cross(Vec3::new(0.0, 0.0, 1.0)).normalized().unwrap_or(Vec3::new(1.0, 0.0, 0.0));
    let n = f.cross(l);
    (f, l, n)
}

/// Rotate unit vector `d` by `angle` radians toward the perpendicular at
/// azimuth `azimuth`.
pub fn tilt(d: Vec3, angle: f64, azimuth: f64) -> Vec3 {
    let (f, l, n) = basis(d);
    let p = l * azimuth.cos() + n * azimuth.sin();
    (f * angle.cos() + p * angle.sin()).normalized().expect("unit")
}

/// Ground-truth pointing hand: the index finger lies along `finger_dir`
/// ending at `tip`, the wrist sits `WRIST_BACK` behind the tip along
/// `wrist_dir`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointingPose {
    pub tip: Point3,
    pub finger_dir: Vec3,
    pub wrist_dir: Vec3,
}

impl PointingPose {
    /// Pose aiming from `tip` at `target`, with the finger and wrist lines
    /// tilted by the given angles (radians) at the given azimuths.
    pub fn aimed(tip: Point3, target: Point3, finger_tilt: (f64, f64), wrist_tilt: (f64, f64)) -> Self {
        let d = (target - tip).normalized().expect("tip differs from target");
        Self { tip, finger_dir: tilt(d, finger_tilt.0, finger_tilt.1), wrist_dir: tilt(d, wrist_tilt.0, wrist_tilt.1) }
    }

    pub fn landmarks(&self) -> [Point3; LANDMARK_COUNT] {
        let (f, l, n) = basis(self.finger_dir);
        let t = self.tip;
        let m = t - f * INDEX_MCP_BACK;
        let mut p = [m; LANDMARK_COUNT];
        p[WRIST] = t - self.wrist_dir * WRIST_BACK;
        // Thumb folded against the middle finger.
        p[1] = p[WRIST] + (m - p[WRIST]) * 0.3 - l * 0.025;
        p[2] = m - f * 0.040 - l * 0.035 + n * 0.005;
        p[3] = m - f * 0.015 - l * 0.030 + n * 0.015;
        p[THUMB_TIP] = m + f * 0.010 - l * 0.010 + n * 0.022;
        p[INDEX_MCP] = m;
        p[INDEX_PIP] = t - f * INDEX_PIP_BACK;
        p[7] = t - f * INDEX_DIP_BACK;
        p[INDEX_TIP] = t;
        // Middle, ring and little fingers curled into the palm.
        for (k, (lat, back)) in [(0.020, 0.003), (0.038, 0.008), (0.054, 0.018)].into_iter().enumerate() {
            let mcp = m + l * lat - f * back;
            let base = MIDDLE_MCP + 4 * k;
            p[base] = mcp;
            p[base + 1] = mcp + f * 0.030 + n * 0.010;
            p[base + 2] = mcp + f * 0.025 + n * 0.035;
            p[base + 3] = mcp + f * 0.010 + n * 0.040;
        }
        p
    }

    /// Landmarks with per-landmark offsets added, then the pointing-line
    /// landmarks moved along their lines so their depth is a whole number of
    /// `depth_scale` units. Depth quantization then cannot bend the ray.
    pub fn render(&self, offsets: &[Vec3; LANDMARK_COUNT], depth_scale: f64) -> RenderedHand {
        let mut p = self.landmarks();
        for (q, o) in p.iter_mut().zip(offsets) {
            *q = *q + *o;
        }
        for i in [INDEX_TIP, INDEX_MCP, INDEX_PIP] {
            p[i] = snap_along(p[i], self.finger_dir, depth_scale);
        }
        p[WRIST] = snap_along(p[WRIST], self.wrist_dir, depth_scale);
        RenderedHand {
            handedness: Handedness::Right,
            points: p,
            paint_order: paint_order(&[WRIST, INDEX_MCP, INDEX_PIP, INDEX_TIP]),
        }
    }
}

/// Slide `p` along `dir` to the nearest depth that is a multiple of `scale`.
pub fn snap_along(p: Point3, dir: Vec3, scale: f64) -> Point3 {
    let z = (p.z / scale).round() * scale;
    if dir.z.abs() < 1e-6 {
        return Vec3::new(p.x, p.y, z);
    }
    let q = p + dir * ((z - p.z) / dir.z);
    Vec3::new(q.x, q.y, z)
}

/// Non-pointing hand with the index curled toward the thumb. `separation`
/// is the thumb-tip to index-tip distance.
pub fn click_hand(anchor: Point3, separation: f64, offsets: &[Vec3; LANDMARK_COUNT]) -> RenderedHand {
    let f = Vec3::new(0.0, -1.0, -0.2).normalized().expect("unit");
    let l = Vec3::new(1.0, 0.0, 0.0);
    let n = f.cross(l);
    let w = anchor;
    let mut p = [w; LANDMARK_COUNT];
    let mcp5 = w + f * 0.085 + l * 0.022;
    p[INDEX_MCP] = mcp5;
    p[INDEX_PIP] = mcp5 + f * 0.020 + n * 0.012;
    p[7] = p[INDEX_PIP] - f * 0.005 + n * 0.020;
    p[INDEX_TIP] = p[7] - f * 0.015 + n * 0.005;
    p[THUMB_TIP] = p[INDEX_TIP] + l * separation;
    p[3] = p[THUMB_TIP] + l * 0.012 - f * 0.020;
    p[2] = w + f * 0.040 + l * 0.045;
    p[1] = w + f * 0.020 + l * 0.030;
    for (k, lat) in [0.0, -0.018, -0.034].into_iter().enumerate() {
        let mcp = w + f * (CLICK_HAND_SCALE - 0.004 * k as f64) + l * lat;
        let base = MIDDLE_MCP + 4 * k;
        p[base] = mcp;
        p[base + 1] = mcp + f * 0.025 + n * 0.012;
        p[base + 2] = mcp + f * 0.015 + n * 0.035;
        p[base + 3] = mcp + n * 0.040;
    }
    for (q, o) in p.iter_mut().zip(offsets) {
        *q = *q + *o;
    }
    RenderedHand {
        handedness: Handedness::Left,
        points: p,
        paint_order: paint_order(&[WRIST, MIDDLE_MCP, INDEX_TIP, THUMB_TIP]),
    }
}

/// Independent `N(0, sigma)` offsets for every landmark coordinate.
pub fn gaussian_offsets<R: Rng + ?Sized>(sigma: f64, rng: &mut R) -> [Vec3; LANDMARK_COUNT] {
    if sigma <= 0.0 {
        return [Vec3::ZERO; LANDMARK_COUNT];
    }
    let n = Normal::new(0.0, sigma).expect("finite sigma");
    std::array::from_fn(|_| Vec3::new(n.sample(rng), n.sample(rng), n.sample(rng)))
}

pub fn add_offsets(a: &[Vec3; LANDMARK_COUNT], b: &[Vec3; LANDMARK_COUNT]) -> [Vec3; LANDMARK_COUNT] {
    std::array::from_fn(|i| a[i] + b[i])
}
