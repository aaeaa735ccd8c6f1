//! Pinhole camera model and the small amount of 3D algebra the engine needs.
//!
//! Camera frame: `+z` into the scene along the optical axis, `+u`/`+x` right,
//! `+v`/`+y` down. All distances are meters; pixel coordinates are `f64` with
//! integer values at pixel centers.

use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Minimum separation of the two points used to build a ray (1 mm).
pub const MIN_RAY_BASELINE: f64 = 1e-3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("invalid depth {0} m (must be finite and > 0)")]
    InvalidDepth(f64),
    #[error("pixel ({u}, {v}) outside {width}x{height} image")]
    OutOfBounds { u: f64, v: f64, width: u32, height: u32 },
    #[error("point with z = {0} is not in front of the camera")]
    BehindCamera(f64),
    #[error("ray endpoints {0:.3e} m apart, below the {MIN_RAY_BASELINE} m baseline")]
    DegenerateRay(f64),
    #[error("invalid intrinsics: {0}")]
    InvalidIntrinsics(&'static str),
}

/// A 3-vector in camera space. Used for both positions and directions.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

/// Camera-space position in meters.
pub type Point3 = Vec3;

impl Vec3 {
    pub const ZERO: Vec3 = Vec3::new(0.0, 0.0, 0.0);

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn dot(self, o: Vec3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross(self, o: Vec3) -> Vec3 {
        Vec3::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn distance(self, o: Vec3) -> f64 {
        (self - o).norm()
    }

    /// Unit vector in the same direction, or `None` for a (near-)zero vector.
    pub fn normalized(self) -> Option<Vec3> {
        let n = self.norm();
        (n > f64::MIN_POSITIVE && n.is_finite()).then(|| self * (1.0 / n))
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

impl From<[f64; 3]> for Vec3 {
    fn from(a: [f64; 3]) -> Self {
        Vec3::new(a[0], a[1], a[2])
    }
}

impl From<Vec3> for [f64; 3] {
    fn from(v: Vec3) -> Self {
        [v.x, v.y, v.z]
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

/// Sub-pixel image coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Pixel {
    pub u: f64,
    pub v: f64,
}

impl Pixel {
    pub const fn new(u: f64, v: f64) -> Self {
        Self { u, v }
    }

    pub fn distance(self, o: Pixel) -> f64 {
        (self.u - o.u).hypot(self.v - o.v)
    }

    /// Nearest integer pixel, if it lies inside a `width`x`height` image.
    pub fn to_index(self, width: u32, height: u32) -> Option<(u32, u32)> {
        let (x, y) = (self.u.round(), self.v.round());
        (x >= 0.0 && y >= 0.0 && x < f64::from(width) && y < f64::from(height))
            .then_some((x as u32, y as u32))
    }
}

impl From<[f64; 2]> for Pixel {
    fn from(a: [f64; 2]) -> Self {
        Pixel::new(a[0], a[1])
    }
}

impl From<Pixel> for [f64; 2] {
    fn from(p: Pixel) -> Self {
        [p.u, p.v]
    }
}

/// Pinhole intrinsics of the depth-aligned color camera.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
    /// Meters per raw depth unit.
    pub depth_scale: f64,
}

impl CameraIntrinsics {
    pub fn new(
        fx: f64,
        fy: f64,
        cx: f64,
        cy: f64,
        width: u32,
        height: u32,
        depth_scale: f64,
    ) -> Result<Self, GeometryError> {
        let intr = Self { fx, fy, cx, cy, width, height, depth_scale };
        intr.validate()?;
        Ok(intr)
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        if !(self.fx > 0.0 && self.fy > 0.0 && self.fx.is_finite() && self.fy.is_finite()) {
            return Err(GeometryError::InvalidIntrinsics("focal lengths must be positive"));
        }
        if self.width == 0 || self.height == 0 {
            return Err(GeometryError::InvalidIntrinsics("image size must be non-zero"));
        }
        if !(self.cx >= 0.0 && self.cx < f64::from(self.width))
            || !(self.cy >= 0.0 && self.cy < f64::from(self.height))
        {
            return Err(GeometryError::InvalidIntrinsics("principal point outside the image"));
        }
        if !(self.depth_scale > 0.0 && self.depth_scale.is_finite()) {
            return Err(GeometryError::InvalidIntrinsics("depth scale must be positive"));
        }
        Ok(())
    }

    pub fn contains(&self, px: Pixel) -> bool {
        px.u >= 0.0 && px.v >= 0.0 && px.u < f64::from(self.width) && px.v < f64::from(self.height)
    }
}

/// Back-project a pixel with metric depth to a camera-space point.
pub fn deproject(px: Pixel, depth_m: f64, intr: &CameraIntrinsics) -> Result<Point3, GeometryError> {
    if !(depth_m > 0.0 && depth_m.is_finite()) {
        return Err(GeometryError::InvalidDepth(depth_m));
    }
    if !intr.contains(px) {
        return Err(GeometryError::OutOfBounds {
            u: px.u,
            v: px.v,
            width: intr.width,
            height: intr.height,
        });
    }
    Ok(Vec3::new(
        (px.u - intr.cx) * depth_m / intr.fx,
        (px.v - intr.cy) * depth_m / intr.fy,
        depth_m,
    ))
}

/// Project a camera-space point to pixel coordinates. The result may fall
/// outside the image; clipping is up to the caller.
pub fn project(p: Point3, intr: &CameraIntrinsics) -> Result<Pixel, GeometryError> {
    if !(p.z > 0.0) {
        return Err(GeometryError::BehindCamera(p.z));
    }
    Ok(Pixel::new(intr.fx * p.x / p.z + intr.cx, intr.fy * p.y / p.z + intr.cy))
}

/// Half-line in camera space. `direction` is unit length.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ray3 {
    pub origin: Point3,
    pub direction: Vec3,
}

impl Ray3 {
    pub fn at(&self, t: f64) -> Point3 {
        self.origin + self.direction * t
    }
}

/// Ray from `proximal` through `distal`.
pub fn ray_from_points(proximal: Point3, distal: Point3) -> Result<Ray3, GeometryError> {
    let delta = distal - proximal;
    let len = delta.norm();
    if !(len > MIN_RAY_BASELINE) {
        return Err(GeometryError::DegenerateRay(len));
    }
    Ok(Ray3 { origin: proximal, direction: delta * (1.0 / len) })
}

/// Perpendicular distance from `p` to the line carrying `ray`, and the ray
/// parameter of the foot point. `t` is not clamped; negative values mean the
/// point lies behind the origin.
pub fn point_ray_distance(p: Point3, ray: &Ray3) -> (f64, f64) {
    let rel = p - ray.origin;
    let t = rel.dot(ray.direction);
    ((rel - ray.direction * t).norm(), t)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn intr() -> CameraIntrinsics {
        CameraIntrinsics::new(600.0, 600.0, 320.0, 240.0, 640, 480, 0.001).unwrap()
    }

    #[test]
    fn principal_point_maps_to_optical_axis() {
        let p = deproject(Pixel::new(320.0, 240.0), 1.0, &intr()).unwrap();
        assert_eq!(p, Vec3::new(0.0, 0.0, 1.0));
    }

    #[test]
    fn deproject_hand_computed() {
        // The pixel sits outside the 640-wide image, so use a wider sensor.
        let wide = CameraIntrinsics::new(600.0, 600.0, 320.0, 240.0, 1280, 480, 0.001).unwrap();
        let p = deproject(Pixel::new(920.0, 240.0), 2.0, &wide).unwrap();
        assert!((p.x - 2.0).abs() < 1e-12 && p.y.abs() < 1e-12 && p.z == 2.0);
        let px = project(Vec3::new(2.0, 0.0, 2.0), &wide).unwrap();
        assert!((px.u - 920.0).abs() < 1e-12);
    }

    #[test]
    fn deproject_errors() {
        assert!(matches!(
            deproject(Pixel::new(10.0, 10.0), 0.0, &intr()),
            Err(GeometryError::InvalidDepth(_))
        ));
        assert!(matches!(
            deproject(Pixel::new(-1.0, 10.0), 1.0, &intr()),
            Err(GeometryError::OutOfBounds { .. })
        ));
        assert!(matches!(
            project(Vec3::new(0.0, 0.0, -1.0), &intr()),
            Err(GeometryError::BehindCamera(_))
        ));
    }

    #[test]
    fn origin_projects_to_principal_point() {
        let px = project(Vec3::new(0.0, 0.0, 1.0), &intr()).unwrap();
        assert_eq!(px, Pixel::new(320.0, 240.0));
    }

    #[test]
    fn rays_from_axis_aligned_points() {
        let r = ray_from_points(Vec3::ZERO, Vec3::new(0.0, 0.0, 0.1)).unwrap();
        assert_eq!(r.origin, Vec3::ZERO);
        assert_eq!(r.direction, Vec3::new(0.0, 0.0, 1.0));
        let r = ray_from_points(Vec3::new(0.0, 0.0, 0.5), Vec3::new(0.1, 0.0, 0.5)).unwrap();
        assert!((r.direction - Vec3::new(1.0, 0.0, 0.0)).norm() < 1e-15);
        let p = Vec3::new(0.2, 0.3, 0.4);
        assert!(matches!(ray_from_points(p, p), Err(GeometryError::DegenerateRay(_))));
        assert!(ray_from_points(p, p + Vec3::new(0.0, 0.0009, 0.0)).is_err());
    }

    #[test]
    fn three_four_five() {
        let r = Ray3 { origin: Vec3::ZERO, direction: Vec3::new(0.0, 0.0, 1.0) };
        let (d, t) = point_ray_distance(Vec3::new(3.0, 4.0, 7.0), &r);
        assert!((d - 5.0).abs() < 1e-12);
        assert!((t - 7.0).abs() < 1e-12);
        let (d, _) = point_ray_distance(r.at(2.5), &r);
        assert_eq!(d, 0.0);
    }

    #[test]
    fn intrinsics_validation() {
        assert!(CameraIntrinsics::new(0.0, 1.0, 0.0, 0.0, 4, 4, 0.001).is_err());
        assert!(CameraIntrinsics::new(1.0, 1.0, 4.0, 0.0, 4, 4, 0.001).is_err());
        assert!(CameraIntrinsics::new(1.0, 1.0, 1.0, 1.0, 4, 4, 0.0).is_err());
    }
}
