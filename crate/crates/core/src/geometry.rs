//! Vector math, visual angles, and ray intersections.
//!
//! Angles cross the public API in degrees. Positions are meters in a
//! left-handed, y-up world frame (the frame the ingest pipeline produces).

use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Rays closer to parallel than this are treated as missing a plane.
pub const PARALLEL_EPSILON: f64 = 1e-9;

/// Minimum positive ray parameter accepted as a sphere hit.
const HIT_EPSILON: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3::new(0.0, 0.0, 0.0);

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Vec3 { x, y, z }
    }

    pub fn dot(self, other: Vec3) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn cross(self, other: Vec3) -> Vec3 {
        Vec3::new(
            self.y * other.z - self.z * other.y,
            self.z * other.x - self.x * other.z,
            self.x * other.y - self.y * other.x,
        )
    }

    pub fn norm_squared(self) -> f64 {
        self.dot(self)
    }

    pub fn norm(self) -> f64 {
        self.norm_squared().sqrt()
    }

    pub fn distance(self, other: Vec3) -> f64 {
        (self - other).norm()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    /// Unit vector in the same direction, or `None` for zero or non-finite input.
    pub fn normalized(self) -> Option<Vec3> {
        let n = self.norm();
        if !self.is_finite() || n == 0.0 || !n.is_finite() {
            None
        } else {
            Some(self / n)
        }
    }

    pub fn component(self, axis: usize) -> f64 {
        match axis {
            0 => self.x,
            1 => self.y,
            2 => self.z,
            _ => panic!("axis {axis} out of range"),
        }
    }

    fn with_component(mut self, axis: usize, value: f64) -> Vec3 {
        match axis {
            0 => self.x = value,
            1 => self.y = value,
            2 => self.z = value,
            _ => panic!("axis {axis} out of range"),
        }
        self
    }
}

impl From<[f64; 3]> for Vec3 {
    fn from([x, y, z]: [f64; 3]) -> Self {
        Vec3::new(x, y, z)
    }
}

impl From<Vec3> for [f64; 3] {
    fn from(v: Vec3) -> Self {
        [v.x, v.y, v.z]
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, rhs: Vec3) -> Vec3 {
        Vec3::new(self.x + rhs.x, self.y + rhs.y, self.z + rhs.z)
    }
}

impl AddAssign for Vec3 {
    fn add_assign(&mut self, rhs: Vec3) {
        *self = *self + rhs;
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, rhs: Vec3) -> Vec3 {
        Vec3::new(self.x - rhs.x, self.y - rhs.y, self.z - rhs.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, rhs: f64) -> Vec3 {
        Vec3::new(self.x * rhs, self.y * rhs, self.z * rhs)
    }
}

impl Div<f64> for Vec3 {
    type Output = Vec3;
    fn div(self, rhs: f64) -> Vec3 {
        Vec3::new(self.x / rhs, self.y / rhs, self.z / rhs)
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

/// A half-line with a unit direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ray {
    pub origin: Vec3,
    pub direction: Vec3,
}

impl Ray {
    /// Builds a ray, normalizing `direction`.
    pub fn new(origin: Vec3, direction: Vec3) -> Result<Ray> {
        if !origin.is_finite() {
            return Err(Error::InvalidArgument("ray origin is not finite".into()));
        }
        let direction = direction
            .normalized()
            .ok_or_else(|| Error::InvalidArgument("ray direction has zero length".into()))?;
        Ok(Ray { origin, direction })
    }

    /// Ray from `origin` passing through `target`.
    pub fn through(origin: Vec3, target: Vec3) -> Result<Ray> {
        Ray::new(origin, target - origin)
    }

    pub fn at(&self, t: f64) -> Vec3 {
        self.origin + self.direction * t
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Plane {
    pub point: Vec3,
    pub normal: Vec3,
}

impl Plane {
    /// Builds a plane, normalizing `normal`.
    pub fn new(point: Vec3, normal: Vec3) -> Result<Plane> {
        let normal = normal
            .normalized()
            .ok_or_else(|| Error::InvalidArgument("plane normal has zero length".into()))?;
        Ok(Plane { point, normal })
    }
}

/// Axis-aligned box; the closed room every gaze ray ends in.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb {
    pub fn new(min: Vec3, max: Vec3) -> Result<Aabb> {
        if !(min.x < max.x && min.y < max.y && min.z < max.z) {
            return Err(Error::InvalidConfiguration(format!(
                "room box min {min:?} is not strictly below max {max:?}"
            )));
        }
        Ok(Aabb { min, max })
    }

    /// Cube of half-side `half_extent` centered on `center`.
    pub fn cube(center: Vec3, half_extent: f64) -> Aabb {
        let h = Vec3::new(half_extent, half_extent, half_extent);
        Aabb {
            min: center - h,
            max: center + h,
        }
    }

    pub fn contains(&self, p: Vec3) -> bool {
        (0..3).all(|axis| {
            let v = p.component(axis);
            v >= self.min.component(axis) && v <= self.max.component(axis)
        })
    }

    fn clamp(&self, p: Vec3) -> Vec3 {
        Vec3::new(
            p.x.clamp(self.min.x, self.max.x),
            p.y.clamp(self.min.y, self.max.y),
            p.z.clamp(self.min.z, self.max.z),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sphere {
    pub center: Vec3,
    pub radius: f64,
}

/// One closed room plus any number of spheres.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneGeometry {
    pub room: Aabb,
    #[serde(default)]
    pub spheres: Vec<Sphere>,
}

impl SceneGeometry {
    pub fn empty_room(room: Aabb) -> Self {
        SceneGeometry {
            room,
            spheres: Vec::new(),
        }
    }
}

/// Angle between two directions, in radians. Inputs need not be unit length.
pub(crate) fn angle_between_rad(a: Vec3, b: Vec3) -> Result<f64> {
    let na2 = a.norm_squared();
    let nb2 = b.norm_squared();
    if !(a.is_finite() && b.is_finite()) || na2 == 0.0 || nb2 == 0.0 {
        return Err(Error::InvalidArgument(format!(
            "visual angle needs two finite non-zero vectors, got {a:?} and {b:?}"
        )));
    }
    // sqrt(|a|^2 |b|^2) makes a·a / (|a||a|) exactly 1, so identical inputs give 0.
    let cos = a.dot(b) / (na2 * nb2).sqrt();
    Ok(cos.clamp(-1.0, 1.0).acos())
}

/// Visual angle between two directions, in degrees, within `[0, 180]`.
///
/// ```
/// use gaze_events::geometry::{visual_angle, Vec3};
/// let a = visual_angle(Vec3::new(1.0, 0.0, 0.0), Vec3::new(0.0, 1.0, 0.0)).unwrap();
/// assert!((a - 90.0).abs() < 1e-12);
/// ```
pub fn visual_angle(a: Vec3, b: Vec3) -> Result<f64> {
    angle_between_rad(a, b).map(f64::to_degrees)
}

/// Visual angle subtended at `origin` by points `p` and `q`, in degrees.
pub fn angle_at_origin(origin: Vec3, p: Vec3, q: Vec3) -> Result<f64> {
    if p == origin || q == origin {
        return Err(Error::InvalidArgument(
            "angle at origin is undefined for a point coincident with the origin".into(),
        ));
    }
    visual_angle(p - origin, q - origin)
}

/// Intersection of a ray with a plane, or `None` when the ray is parallel to
/// the plane or the plane lies behind the ray origin.
pub fn ray_plane_intersection(ray: &Ray, plane: &Plane) -> Option<Vec3> {
    let denom = plane.normal.dot(ray.direction);
    if denom.abs() < PARALLEL_EPSILON {
        return None;
    }
    let t = plane.normal.dot(plane.point - ray.origin) / denom;
    if t < 0.0 {
        return None;
    }
    Some(ray.at(t))
}

/// Smallest positive ray parameter at which the ray meets the sphere.
pub fn ray_sphere_intersection(ray: &Ray, sphere: &Sphere) -> Option<f64> {
    let oc = ray.origin - sphere.center;
    let b = ray.direction.dot(oc);
    let c = oc.norm_squared() - sphere.radius * sphere.radius;
    let disc = b * b - c;
    if disc < 0.0 {
        return None;
    }
    let root = disc.sqrt();
    let near = -b - root;
    if near > HIT_EPSILON {
        return Some(near);
    }
    let far = -b + root;
    (far > HIT_EPSILON).then_some(far)
}

/// Point where a ray leaves the room, snapped exactly onto the wall it hits.
fn room_exit(ray: &Ray, room: &Aabb) -> Vec3 {
    let mut best_t = f64::INFINITY;
    let mut best_axis = 0;
    let mut best_bound = 0.0;
    for axis in 0..3 {
        let d = ray.direction.component(axis);
        if d == 0.0 {
            continue;
        }
        let bound = if d > 0.0 {
            room.max.component(axis)
        } else {
            room.min.component(axis)
        };
        let t = (bound - ray.origin.component(axis)) / d;
        if t < best_t {
            best_t = t;
            best_axis = axis;
            best_bound = bound;
        }
    }
    room.clamp(ray.at(best_t)).with_component(best_axis, best_bound)
}

/// Nearest surface hit by a ray cast from inside the room.
///
/// Spheres are tested first; the room walls catch every ray that misses them,
/// so a hit always exists.
pub fn ray_scene_intersection(ray: &Ray, scene: &SceneGeometry) -> Result<Vec3> {
    if !scene.room.contains(ray.origin) {
        return Err(Error::InvalidArgument(format!(
            "ray origin {:?} lies outside the room",
            ray.origin
        )));
    }
    let wall = room_exit(ray, &scene.room);
    let wall_t = (wall - ray.origin).dot(ray.direction);
    let nearest_sphere = scene
        .spheres
        .iter()
        .filter_map(|s| ray_sphere_intersection(ray, s))
        .fold(f64::INFINITY, f64::min);
    if nearest_sphere < wall_t {
        Ok(ray.at(nearest_sphere))
    } else {
        Ok(wall)
    }
}

/// Arithmetic mean of the points.
///
/// Components are accumulated left to right in input order starting from zero,
/// then divided by the count. Reordering the input can change the last bits.
pub fn centroid(points: &[Vec3]) -> Result<Vec3> {
    if points.is_empty() {
        return Err(Error::InvalidArgument("centroid of an empty point set".into()));
    }
    let sum = points.iter().fold(Vec3::ZERO, |acc, &p| acc + p);
    Ok(sum / points.len() as f64)
}
