//! Tabletop scene description and depth/mask rendering.

use serde::{Deserialize, Serialize};

use crate::geometry::{deproject, project, CameraIntrinsics, Pixel, Point3, Vec3};
use crate::io::Frame;
use crate::scene::{compute_centroid, rle_encode, Bitmap, DepthFrame, ObjectId, SceneObject};

use super::SimError;

/// A cylindrical object standing on the table. Only its top disc is visible
/// from the overhead camera.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectSpec {
    pub id: ObjectId,
    pub label: String,
    /// Table-plane position (x, y) in camera coordinates.
    pub x: f64,
    pub y: f64,
    pub radius: f64,
    pub height: f64,
}

/// Camera, table and objects. The camera looks straight down at a table
/// parallel to the image plane.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub intrinsics: CameraIntrinsics,
    pub fps: f64,
    /// Distance from camera to table surface.
    pub table_depth: f64,
    pub objects: Vec<ObjectSpec>,
}

pub const DEFAULT_LABELS: [&str; 6] = ["mug", "box", "can", "tape", "bottle", "sponge"];

impl SceneSpec {
    /// `rows × cols` grid centred under the camera.
    pub fn grid(rows: u32, cols: u32, spacing: f64, table_depth: f64, intrinsics: CameraIntrinsics) -> Self {
        let mut objects = Vec::new();
        for r in 0..rows {
            for c in 0..cols {
                let id = r * cols + c;
                let label = DEFAULT_LABELS.get(id as usize).map_or_else(|| format!("object{id}"), |s| s.to_string());
                objects.push(ObjectSpec {
                    id: ObjectId(id),
                    label,
                    x: (f64::from(c) - f64::from(cols - 1) / 2.0) * spacing,
                    y: (f64::from(r) - f64::from(rows - 1) / 2.0) * spacing,
                    radius: 0.035,
                    height: 0.06,
                });
            }
        }
        Self { intrinsics, fps: 30.0, table_depth, objects }
    }

    /// Six objects in a 2×3 grid, 0.15 m apart, on a table 0.8 m below the camera.
    pub fn desk() -> Self {
        Self::grid(2, 3, 0.15, 0.8, default_intrinsics())
    }

    /// Same layout with a different spacing.
    pub fn desk_with_spacing(spacing: f64) -> Self {
        Self::grid(2, 3, spacing, 0.8, default_intrinsics())
    }

    pub fn object(&self, id: ObjectId) -> Option<&ObjectSpec> {
        self.objects.iter().find(|o| o.id == id)
    }

    pub fn ids(&self) -> Vec<ObjectId> {
        self.objects.iter().map(|o| o.id).collect()
    }

    /// Objects at the minimum table-plane distance from `id` (all ties).
    pub fn nearest_neighbors(&self, id: ObjectId) -> Vec<ObjectId> {
        let Some(o) = self.object(id) else { return Vec::new() };
        let dist = |p: &ObjectSpec| (p.x - o.x).hypot(p.y - o.y);
        let min = self.objects.iter().filter(|p| p.id != id).map(dist).fold(f64::INFINITY, f64::min);
        self.objects.iter().filter(|p| p.id != id && dist(p) <= min + 1e-9).map(|p| p.id).collect()
    }

    pub fn validate(&self) -> Result<(), SimError> {
        self.intrinsics.validate().map_err(|e| SimError::Scene(e.to_string()))?;
        if self.objects.len() < 2 {
            return Err(SimError::Scene("need at least two objects".into()));
        }
        if !(self.fps > 0.0 && self.fps.is_finite()) {
            return Err(SimError::Scene("fps must be positive".into()));
        }
        let mut ids = self.ids();
        ids.sort_unstable();
        ids.dedup();
        if ids.len() != self.objects.len() {
            return Err(SimError::Scene("object ids must be unique".into()));
        }
        for o in &self.objects {
            if !(o.radius > 0.0 && o.height >= 0.0 && o.height < self.table_depth) {
                return Err(SimError::Scene(format!("object {} has invalid size", o.id)));
            }
            let top = self.table_depth - o.height;
            for (dx, dy) in [(-1.0, 0.0), (1.0, 0.0), (0.0, -1.0), (0.0, 1.0)] {
                let p = Vec3::new(o.x + dx * o.radius, o.y + dy * o.radius, top);
                let px = project(p, &self.intrinsics).map_err(|e| SimError::Scene(e.to_string()))?;
                if !self.intrinsics.contains(px) {
                    return Err(SimError::Scene(format!("object {} leaves the field of view", o.id)));
                }
            }
        }
        Ok(())
    }
}

/// 400×300 camera with a 180 px focal length and 0.1 mm depth units.
pub fn default_intrinsics() -> CameraIntrinsics {
    CameraIntrinsics { fx: 180.0, fy: 180.0, cx: 200.0, cy: 150.0, width: 400, height: 300, depth_scale: 1e-4 }
}

/// Pre-rendered static scene: background depth, object masks and the
/// centroids the engine will compute for them.
#[derive(Debug, Clone)]
pub struct SceneRenderer {
    spec: SceneSpec,
    background: DepthFrame,
    objects: Vec<SceneObject>,
    centroids: Vec<Point3>,
}

/// Quantize a metric depth to raw units.
pub fn depth_to_raw(z: f64, scale: f64) -> u16 {
    (z / scale).round().clamp(1.0, f64::from(u16::MAX)) as u16
}

impl SceneRenderer {
    pub fn new(spec: SceneSpec) -> Result<Self, SimError> {
        spec.validate()?;
        let intr = spec.intrinsics;
        let (w, h) = (intr.width, intr.height);
        let mut background = DepthFrame::filled(w, h, depth_to_raw(spec.table_depth, intr.depth_scale), intr.depth_scale);
        let mut objects = Vec::new();
        let mut centroids = Vec::new();
        for o in &spec.objects {
            let top = spec.table_depth - o.height;
            let raw = depth_to_raw(top, intr.depth_scale);
            let mut bits = Bitmap::new(w, h);
            for y in 0..h {
                for x in 0..w {
                    let p = deproject(Pixel::new(f64::from(x), f64::from(y)), top, &intr).expect("in bounds");
                    if (p.x - o.x).hypot(p.y - o.y) <= o.radius {
                        bits.set(x, y, true);
                        background.set_raw(x, y, raw);
                    }
                }
            }
            objects.push(SceneObject {
                id: o.id,
                label: o.label.clone(),
                mask: rle_encode(&bits),
                centroid: None,
                pixel_count: None,
            });
        }
        for o in &objects {
            let c = compute_centroid(&o.mask, &background, &intr)
                .expect("shapes match")
                .ok_or_else(|| SimError::Scene(format!("object {} has no visible pixels", o.id)))?;
            centroids.push(c.point);
        }
        Ok(Self { spec, background, objects, centroids })
    }

    pub fn spec(&self) -> &SceneSpec {
        &self.spec
    }

    pub fn intrinsics(&self) -> &CameraIntrinsics {
        &self.spec.intrinsics
    }

    pub fn objects(&self) -> &[SceneObject] {
        &self.objects
    }

    pub fn background(&self) -> &DepthFrame {
        &self.background
    }

    /// Centroid of `id` as the engine computes it from the empty scene.
    pub fn centroid(&self, id: ObjectId) -> Option<Point3> {
        self.objects.iter().position(|o| o.id == id).map(|i| self.centroids[i])
    }

    /// Point on the table plane under pixel `px`, or `None` outside the image.
    pub fn table_point(&self, px: Pixel) -> Option<Point3> {
        deproject(px, self.spec.table_depth, &self.spec.intrinsics).ok()
    }

    /// Compose a frame from the static scene and hands given as 3D landmark
    /// sets in paint order (later sets overwrite earlier ones in depth).
    pub fn compose(&self, index: u64, t: u64, hands: &[super::pose::RenderedHand]) -> (Frame, DepthFrame) {
        let intr = &self.spec.intrinsics;
        let mut depth = self.background.clone();
        let mut frame_hands = Vec::with_capacity(hands.len());
        for h in hands {
            for &i in &h.paint_order {
                let p = h.points[i];
                if let Ok(px) = project(p, intr) {
                    paint_patch(&mut depth, px, depth_to_raw(p.z, intr.depth_scale));
                }
            }
            frame_hands.push(h.to_hand_frame(intr));
        }
        (
            Frame { index, t, hands: frame_hands, objects: self.objects.clone(), depth_ref: None },
            depth,
        )
    }
}

/// Half-width of the square painted around each landmark; matches the
/// engine's 5×5 depth lookup.
const PATCH_RADIUS: i64 = 2;

fn paint_patch(depth: &mut DepthFrame, px: Pixel, raw: u16) {
    let (cu, cv) = (px.u.round() as i64, px.v.round() as i64);
    for y in cv - PATCH_RADIUS..=cv + PATCH_RADIUS {
        for x in cu - PATCH_RADIUS..=cu + PATCH_RADIUS {
            if x >= 0 && y >= 0 && x < i64::from(depth.width) && y < i64::from(depth.height) {
                depth.set_raw(x as u32, y as u32, raw);
            }
        }
    }
}
