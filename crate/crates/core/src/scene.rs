//! Selectable objects: run-length encoded segmentation masks, depth frames,
//! robust depth lookup and MAD-filtered 3D centroids.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{deproject, CameraIntrinsics, Pixel, Point3, Vec3};

/// Outliers further than this many MADs from the median depth are dropped.
pub const CENTROID_MAD_FACTOR: f64 = 2.0;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SceneError {
    #[error("mask is {mask_w}x{mask_h} but depth frame is {depth_w}x{depth_h}")]
    ShapeMismatch { mask_w: u32, mask_h: u32, depth_w: u32, depth_h: u32 },
    #[error("RLE runs sum to {actual}, expected {expected} ({width}x{height})")]
    RunLength { expected: u64, actual: u64, width: u32, height: u32 },
    #[error("depth buffer holds {actual} samples, expected {expected}")]
    DepthSize { expected: usize, actual: usize },
}

/// Stable object identifier assigned by the segmentation producer.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct ObjectId(pub u32);

impl std::fmt::Display for ObjectId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        self.0.fmt(f)
    }
}

/// Raw depth image, row-major, `0` meaning "no return".
#[derive(Debug, Clone, PartialEq)]
pub struct DepthFrame {
    pub width: u32,
    pub height: u32,
    pub data: Vec<u16>,
    pub depth_scale: f64,
}

impl DepthFrame {
    pub fn new(width: u32, height: u32, data: Vec<u16>, depth_scale: f64) -> Result<Self, SceneError> {
        let expected = width as usize * height as usize;
        if data.len() != expected {
            return Err(SceneError::DepthSize { expected, actual: data.len() });
        }
        Ok(Self { width, height, data, depth_scale })
    }

    pub fn filled(width: u32, height: u32, raw: u16, depth_scale: f64) -> Self {
        Self { width, height, data: vec![raw; width as usize * height as usize], depth_scale }
    }

    #[inline]
    pub fn raw(&self, x: u32, y: u32) -> u16 {
        self.data[y as usize * self.width as usize + x as usize]
    }

    #[inline]
    pub fn set_raw(&mut self, x: u32, y: u32, raw: u16) {
        let w = self.width as usize;
        self.data[y as usize * w + x as usize] = raw;
    }

    /// Depth in meters, `None` for invalid pixels.
    pub fn meters(&self, x: u32, y: u32) -> Option<f64> {
        match self.raw(x, y) {
            0 => None,
            r => Some(f64::from(r) * self.depth_scale),
        }
    }
}

/// Dense binary mask, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Bitmap {
    pub width: u32,
    pub height: u32,
    pub bits: Vec<bool>,
}

impl Bitmap {
    pub fn new(width: u32, height: u32) -> Self {
        Self { width, height, bits: vec![false; width as usize * height as usize] }
    }

    pub fn get(&self, x: u32, y: u32) -> bool {
        self.bits[y as usize * self.width as usize + x as usize]
    }

    pub fn set(&mut self, x: u32, y: u32, value: bool) {
        let w = self.width as usize;
        self.bits[y as usize * w + x as usize] = value;
    }
}

/// Run-length encoded mask: row-major, alternating background/foreground
/// runs, starting with background (a leading `0` if the first pixel is set).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObjectMask {
    pub width: u32,
    pub height: u32,
    pub runs: Vec<u32>,
}

impl ObjectMask {
    /// Check that the runs cover exactly `width * height` pixels.
    pub fn validate(&self) -> Result<(), SceneError> {
        let expected = u64::from(self.width) * u64::from(self.height);
        let actual: u64 = self.runs.iter().map(|&r| u64::from(r)).sum();
        if actual != expected {
            return Err(SceneError::RunLength {
                expected,
                actual,
                width: self.width,
                height: self.height,
            });
        }
        Ok(())
    }

    /// Foreground pixel count.
    pub fn area(&self) -> u64 {
        self.runs.iter().skip(1).step_by(2).map(|&r| u64::from(r)).sum()
    }

    /// Linear indices `[start, end)` of each foreground run.
    pub fn foreground_spans(&self) -> impl Iterator<Item = (u64, u64)> + '_ {
        let mut pos = 0u64;
        self.runs.iter().enumerate().filter_map(move |(i, &r)| {
            let start = pos;
            pos += u64::from(r);
            (i % 2 == 1 && r > 0).then_some((start, pos))
        })
    }

    /// Coordinates of every foreground pixel in raster order.
    pub fn foreground_pixels(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        let w = u64::from(self.width.max(1));
        self.foreground_spans()
            .flat_map(move |(s, e)| (s..e).map(move |i| ((i % w) as u32, (i / w) as u32)))
    }

    /// Outer boundary of the first connected component in raster order,
    /// decimated to at most `max_points` vertices.
    pub fn outline(&self, max_points: usize) -> Vec<[f64; 2]> {
        let Ok(bitmap) = rle_decode(self) else {
            return Vec::new();
        };
        let contour = trace_boundary(&bitmap);
        if contour.len() <= max_points || max_points == 0 {
            return contour.iter().map(|&(x, y)| [f64::from(x), f64::from(y)]).collect();
        }
        let stride = contour.len() as f64 / max_points as f64;
        (0..max_points)
            .map(|i| {
                let (x, y) = contour[(i as f64 * stride) as usize];
                [f64::from(x), f64::from(y)]
            })
            .collect()
    }
}

pub fn rle_encode(bitmap: &Bitmap) -> ObjectMask {
    let mut runs = Vec::new();
    let mut current = false;
    let mut len = 0u32;
    for &bit in &bitmap.bits {
        if bit == current {
            len += 1;
        } else {
            runs.push(len);
            current = bit;
            len = 1;
        }
    }
    runs.push(len);
    ObjectMask { width: bitmap.width, height: bitmap.height, runs }
}

pub fn rle_decode(mask: &ObjectMask) -> Result<Bitmap, SceneError> {
    mask.validate()?;
    let mut bits = Vec::with_capacity(mask.width as usize * mask.height as usize);
    for (i, &r) in mask.runs.iter().enumerate() {
        bits.extend(std::iter::repeat_n(i % 2 == 1, r as usize));
    }
    Ok(Bitmap { width: mask.width, height: mask.height, bits })
}

// Moore-neighbour tracing, clockwise in image coordinates.
fn trace_boundary(bitmap: &Bitmap) -> Vec<(u32, u32)> {
    const DIRS: [(i64, i64); 8] =
        [(1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0), (-1, -1), (0, -1), (1, -1)];
    let (w, h) = (i64::from(bitmap.width), i64::from(bitmap.height));
    let on = |p: (i64, i64)| {
        p.0 >= 0 && p.1 >= 0 && p.0 < w && p.1 < h && bitmap.get(p.0 as u32, p.1 as u32)
    };
    let dir_of = |from: (i64, i64), to: (i64, i64)| {
        DIRS.iter().position(|&d| (from.0 + d.0, from.1 + d.1) == to).unwrap_or(4)
    };

    let Some(first) = bitmap.bits.iter().position(|&b| b) else {
        return Vec::new();
    };
    let start = ((first as i64) % w, (first as i64) / w);
    let mut contour = vec![(start.0 as u32, start.1 as u32)];
    let mut cur = start;
    // Raster order guarantees the west neighbour of the first pixel is background.
    let mut back = (start.0 - 1, start.1);
    for _ in 0..4 * bitmap.bits.len() + 8 {
        let from = dir_of(cur, back);
        let mut found = None;
        for k in 1..=8 {
            let cand = (cur.0 + DIRS[(from + k) % 8].0, cur.1 + DIRS[(from + k) % 8].1);
            if on(cand) {
                let prev = DIRS[(from + k - 1) % 8];
                found = Some((cand, (cur.0 + prev.0, cur.1 + prev.1)));
                break;
            }
        }
        let Some((next, new_back)) = found else {
            break; // isolated pixel
        };
        if next == start {
            break;
        }
        contour.push((next.0 as u32, next.1 as u32));
        cur = next;
        back = new_back;
    }
    contour
}

/// Median depth (meters) of valid pixels in a `window`x`window` neighbourhood
/// of `px`, clipped to the image. `None` when nothing valid is in range.
///
/// Panics if `window` is even or zero.
pub fn sample_depth_robust(px: Pixel, depth: &DepthFrame, window: u32) -> Option<f64> {
    assert!(window % 2 == 1, "depth window must be odd, got {window}");
    let (cx, cy) = px.to_index(depth.width, depth.height)?;
    let half = window / 2;
    let x0 = cx.saturating_sub(half);
    let y0 = cy.saturating_sub(half);
    let x1 = (cx + half).min(depth.width - 1);
    let y1 = (cy + half).min(depth.height - 1);
    let mut valid: Vec<u16> = Vec::with_capacity((window * window) as usize);
    for y in y0..=y1 {
        for x in x0..=x1 {
            match depth.raw(x, y) {
                0 => {}
                r => valid.push(r),
            }
        }
    }
    if valid.is_empty() {
        return None;
    }
    valid.sort_unstable();
    let n = valid.len();
    let median_raw = if n % 2 == 1 {
        f64::from(valid[n / 2])
    } else {
        0.5 * (f64::from(valid[n / 2 - 1]) + f64::from(valid[n / 2]))
    };
    Some(median_raw * depth.depth_scale)
}

/// 3D centroid of an object together with the number of pixels behind it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Centroid {
    pub point: Point3,
    pub pixel_count: u64,
}

/// Mean of the deprojected mask pixels after MAD-based depth outlier rejection.
/// `Ok(None)` when no mask pixel has usable depth.
pub fn compute_centroid(
    mask: &ObjectMask,
    depth: &DepthFrame,
    intr: &CameraIntrinsics,
) -> Result<Option<Centroid>, SceneError> {
    if mask.width != depth.width || mask.height != depth.height {
        return Err(SceneError::ShapeMismatch {
            mask_w: mask.width,
            mask_h: mask.height,
            depth_w: depth.width,
            depth_h: depth.height,
        });
    }
    mask.validate()?;

    let samples: Vec<(u32, u32, u16)> = mask
        .foreground_pixels()
        .filter_map(|(x, y)| match depth.raw(x, y) {
            0 => None,
            r => Some((x, y, r)),
        })
        .collect();
    if samples.is_empty() {
        return Ok(None);
    }

    let mut raws: Vec<f64> = samples.iter().map(|s| f64::from(s.2)).collect();
    let median = median_in_place(&mut raws);
    let mut deviations: Vec<f64> = samples.iter().map(|s| (f64::from(s.2) - median).abs()).collect();
    let mad = median_in_place(&mut deviations);
    let bound = CENTROID_MAD_FACTOR * mad;

    let mut sum = Vec3::ZERO;
    let mut count = 0u64;
    for &(x, y, raw) in &samples {
        if (f64::from(raw) - median).abs() > bound {
            continue;
        }
        let z = f64::from(raw) * depth.depth_scale;
        // In-bounds pixel with positive depth: deprojection cannot fail.
        let p = deproject(Pixel::new(f64::from(x), f64::from(y)), z, intr)
            .expect("mask pixel inside image");
        sum = sum + p;
        count += 1;
    }
    if count == 0 {
        return Ok(None);
    }
    Ok(Some(Centroid { point: sum * (1.0 / count as f64), pixel_count: count }))
}

fn median_in_place(values: &mut [f64]) -> f64 {
    let n = values.len();
    debug_assert!(n > 0);
    let mid = n / 2;
    let (_, upper, _) = values.select_nth_unstable_by(mid, f64::total_cmp);
    let upper = *upper;
    if n % 2 == 1 {
        upper
    } else {
        let lower = values[..mid].iter().copied().fold(f64::NEG_INFINITY, f64::max);
        0.5 * (lower + upper)
    }
}

/// A segmented object as carried by a frame. `centroid` is filled by the
/// engine when depth is available, or taken from the producer otherwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneObject {
    pub id: ObjectId,
    pub label: String,
    pub mask: ObjectMask,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub centroid: Option<Point3>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pixel_count: Option<u64>,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square_mask(w: u32, h: u32, x0: u32, y0: u32, side: u32) -> Bitmap {
        let mut b = Bitmap::new(w, h);
        for y in y0..y0 + side {
            for x in x0..x0 + side {
                b.set(x, y, true);
            }
        }
        b
    }

    fn intr_half_pixel() -> CameraIntrinsics {
        CameraIntrinsics::new(500.0, 500.0, 31.5, 23.5, 64, 48, 0.001).unwrap()
    }

    #[test]
    fn rle_trivial_masks() {
        let empty = Bitmap::new(4, 4);
        assert_eq!(rle_encode(&empty).runs, vec![16]);
        let full = Bitmap { width: 4, height: 4, bits: vec![true; 16] };
        assert_eq!(rle_encode(&full).runs, vec![0, 16]);
        assert_eq!(rle_decode(&rle_encode(&full)).unwrap(), full);
    }

    #[test]
    fn rle_bad_sum() {
        let m = ObjectMask { width: 4, height: 4, runs: vec![3, 4] };
        assert!(matches!(rle_decode(&m), Err(SceneError::RunLength { .. })));
    }

    #[test]
    fn robust_sampling() {
        let d = DepthFrame::filled(9, 9, 1000, 0.001);
        assert_eq!(sample_depth_robust(Pixel::new(4.0, 4.0), &d, 5), Some(1.0));

        let mut d = DepthFrame::filled(3, 3, 0, 0.001);
        d.set_raw(0, 1, 998);
        d.set_raw(2, 1, 1000);
        d.set_raw(1, 0, 1002);
        // Center invalid; valid values {998, 1000, 1002} -> median 1000.
        let m = sample_depth_robust(Pixel::new(1.0, 1.0), &d, 3).unwrap();
        assert!((m - 1.0).abs() < 1e-12);

        let d = DepthFrame::filled(9, 9, 0, 0.001);
        assert_eq!(sample_depth_robust(Pixel::new(4.0, 4.0), &d, 5), None);
        assert_eq!(sample_depth_robust(Pixel::new(40.0, 4.0), &d, 5), None);
    }

    #[test]
    fn even_window_count_takes_midpoint() {
        let mut d = DepthFrame::filled(2, 1, 1000, 0.001);
        d.set_raw(1, 0, 1002);
        let m = sample_depth_robust(Pixel::new(0.0, 0.0), &d, 3).unwrap();
        assert!((m - 1.001).abs() < 1e-12);
    }

    #[test]
    fn symmetric_square_on_plane() {
        let intr = intr_half_pixel();
        let mask = rle_encode(&square_mask(64, 48, 27, 19, 10));
        let depth = DepthFrame::filled(64, 48, 800, 0.001);
        let c = compute_centroid(&mask, &depth, &intr).unwrap().unwrap();
        assert_eq!(c.pixel_count, 100);
        assert!(c.point.distance(Vec3::new(0.0, 0.0, 0.8)) < 1e-6);
    }

    #[test]
    fn invalid_depth_gives_none_and_shape_checked() {
        let intr = intr_half_pixel();
        let mask = rle_encode(&square_mask(64, 48, 27, 19, 10));
        let depth = DepthFrame::filled(64, 48, 0, 0.001);
        assert_eq!(compute_centroid(&mask, &depth, &intr).unwrap(), None);
        let small = DepthFrame::filled(32, 48, 800, 0.001);
        assert!(matches!(
            compute_centroid(&mask, &small, &intr),
            Err(SceneError::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn outline_of_square_is_its_border() {
        let mask = rle_encode(&square_mask(16, 16, 4, 5, 6));
        let outline = mask.outline(1000);
        assert_eq!(outline.len(), 20);
        for p in &outline {
            let on_border = p[0] == 4.0 || p[0] == 9.0 || p[1] == 5.0 || p[1] == 10.0;
            assert!(on_border, "{p:?}");
        }
        assert_eq!(mask.outline(8).len(), 8);
        assert!(ObjectMask { width: 2, height: 2, runs: vec![4] }.outline(8).is_empty());
    }

    #[test]
    fn spans_and_area() {
        let mut b = Bitmap::new(5, 2);
        b.set(1, 0, true);
        b.set(2, 0, true);
        b.set(4, 1, true);
        let m = rle_encode(&b);
        assert_eq!(m.area(), 3);
        let px: Vec<_> = m.foreground_pixels().collect();
        assert_eq!(px, vec![(1, 0), (2, 0), (4, 1)]);
    }
}
