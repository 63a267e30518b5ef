//! Planar geometry: SE(2) poses, convex shape primitives, contact queries
//! and translational swept volumes.
//!
//! All lengths are meters and all angles radians. Angles are kept in
//! `(-π, π]`.

use std::f64::consts::{PI, TAU};
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Two shapes closer than this are reported as overlapping.
pub const TOUCH_EPS: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("shape extents must be strictly positive and finite, got {0:?}")]
    InvalidExtent(Vec<f64>),
}

/// Wraps an angle into `(-π, π]`.
pub fn normalize_angle(angle: f64) -> f64 {
    let mut a = angle % TAU;
    if a <= -PI {
        a += TAU;
    } else if a > PI {
        a -= TAU;
    }
    a
}

/// Absolute angular difference in `[0, π]`.
pub fn angle_between(a: f64, b: f64) -> f64 {
    normalize_angle(a - b).abs()
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl From<[f64; 2]> for Vec2 {
    fn from(v: [f64; 2]) -> Self {
        Vec2::new(v[0], v[1])
    }
}

impl From<Vec2> for [f64; 2] {
    fn from(v: Vec2) -> Self {
        [v.x, v.y]
    }
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Vec2 { x, y }
    }

    pub fn dot(self, o: Vec2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    /// z-component of the 3D cross product.
    pub fn cross(self, o: Vec2) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    pub fn distance(self, o: Vec2) -> f64 {
        (self - o).norm()
    }

    /// Unit vector in the same direction, or `None` for (near-)zero vectors.
    pub fn normalized(self) -> Option<Vec2> {
        let n = self.norm();
        if n > 1e-15 {
            Some(Vec2::new(self.x / n, self.y / n))
        } else {
            None
        }
    }

    pub fn rotated(self, angle: f64) -> Vec2 {
        let (s, c) = angle.sin_cos();
        Vec2::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }

    /// Rotation by +90°.
    pub fn perp(self) -> Vec2 {
        Vec2::new(-self.y, self.x)
    }

    pub fn angle(self) -> f64 {
        self.y.atan2(self.x)
    }

    pub fn lerp(self, o: Vec2, t: f64) -> Vec2 {
        Vec2::new(self.x + (o.x - self.x) * t, self.y + (o.y - self.y) * t)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, s: f64) -> Vec2 {
        Vec2::new(self.x * s, self.y * s)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

/// Rigid transform in the plane. Serialized as `[x, y, theta]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct Pose2 {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl From<[f64; 3]> for Pose2 {
    fn from(v: [f64; 3]) -> Self {
        Pose2::new(v[0], v[1], v[2])
    }
}

impl From<Pose2> for [f64; 3] {
    fn from(p: Pose2) -> Self {
        [p.x, p.y, p.theta]
    }
}

impl Pose2 {
    pub const IDENTITY: Pose2 = Pose2 {
        x: 0.0,
        y: 0.0,
        theta: 0.0,
    };

    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Pose2 {
            x,
            y,
            theta: normalize_angle(theta),
        }
    }

    pub fn from_position(p: Vec2, theta: f64) -> Self {
        Pose2::new(p.x, p.y, theta)
    }

    pub fn position(&self) -> Vec2 {
        Vec2::new(self.x, self.y)
    }

    /// `self ∘ other`: `other` expressed in the frame of `self`.
    pub fn compose(&self, other: &Pose2) -> Pose2 {
        let (s, c) = self.theta.sin_cos();
        Pose2::new(
            self.x + c * other.x - s * other.y,
            self.y + s * other.x + c * other.y,
            self.theta + other.theta,
        )
    }

    pub fn inverse(&self) -> Pose2 {
        let (s, c) = self.theta.sin_cos();
        Pose2::new(-(c * self.x + s * self.y), s * self.x - c * self.y, -self.theta)
    }

    /// Maps a point from this frame into the parent frame.
    pub fn transform_point(&self, local: Vec2) -> Vec2 {
        let (s, c) = self.theta.sin_cos();
        Vec2::new(self.x + c * local.x - s * local.y, self.y + s * local.x + c * local.y)
    }

    /// Maps a point from the parent frame into this frame.
    pub fn inverse_transform_point(&self, world: Vec2) -> Vec2 {
        let (s, c) = self.theta.sin_cos();
        let d = world - self.position();
        Vec2::new(c * d.x + s * d.y, -s * d.x + c * d.y)
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.theta.is_finite()
    }
}

pub fn compose(a: &Pose2, b: &Pose2) -> Pose2 {
    a.compose(b)
}

/// Convex shape primitive, centered on its local origin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Shape {
    Rectangle { half_x: f64, half_y: f64 },
    Circle { radius: f64 },
}

impl Shape {
    pub fn rectangle(half_x: f64, half_y: f64) -> Result<Shape, GeometryError> {
        if half_x > 0.0 && half_y > 0.0 && half_x.is_finite() && half_y.is_finite() {
            Ok(Shape::Rectangle { half_x, half_y })
        } else {
            Err(GeometryError::InvalidExtent(vec![half_x, half_y]))
        }
    }

    pub fn circle(radius: f64) -> Result<Shape, GeometryError> {
        if radius > 0.0 && radius.is_finite() {
            Ok(Shape::Circle { radius })
        } else {
            Err(GeometryError::InvalidExtent(vec![radius]))
        }
    }

    /// Radius of the smallest circle about the local origin containing the shape.
    pub fn bounding_radius(&self) -> f64 {
        match *self {
            Shape::Rectangle { half_x, half_y } => half_x.hypot(half_y),
            Shape::Circle { radius } => radius,
        }
    }

    /// Point membership, boundary included.
    pub fn contains_point(&self, pose: &Pose2, p: Vec2) -> bool {
        let l = pose.inverse_transform_point(p);
        match *self {
            Shape::Rectangle { half_x, half_y } => l.x.abs() <= half_x && l.y.abs() <= half_y,
            Shape::Circle { radius } => l.norm_sq() <= radius * radius,
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "type")]
enum ShapeRepr {
    #[serde(rename = "rect")]
    Rect { half: [f64; 2] },
    #[serde(rename = "circle")]
    Circle { radius: f64 },
}

impl Serialize for Shape {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match *self {
            Shape::Rectangle { half_x, half_y } => ShapeRepr::Rect { half: [half_x, half_y] },
            Shape::Circle { radius } => ShapeRepr::Circle { radius },
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Shape {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let shape = match ShapeRepr::deserialize(d)? {
            ShapeRepr::Rect { half } => Shape::rectangle(half[0], half[1]),
            ShapeRepr::Circle { radius } => Shape::circle(radius),
        };
        shape.map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Circle2 {
    pub center: Vec2,
    pub radius: f64,
}

/// Smallest circle enclosing the posed shape. Both primitives are
/// centrally symmetric, so the center is the pose position.
pub fn min_enclosing_circle(shape: &Shape, pose: &Pose2) -> Circle2 {
    Circle2 {
        center: pose.position(),
        radius: shape.bounding_radius(),
    }
}

/// World-frame corners of a rectangle, counter-clockwise.
pub fn rect_corners(half_x: f64, half_y: f64, pose: &Pose2) -> [Vec2; 4] {
    [
        pose.transform_point(Vec2::new(-half_x, -half_y)),
        pose.transform_point(Vec2::new(half_x, -half_y)),
        pose.transform_point(Vec2::new(half_x, half_y)),
        pose.transform_point(Vec2::new(-half_x, half_y)),
    ]
}

/// Penetration between two overlapping shapes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Contact {
    /// Unit normal pointing from the first shape toward the second. Moving
    /// the second shape by `normal * depth` separates the pair.
    pub normal: Vec2,
    pub depth: f64,
    /// Representative point of the overlap region.
    pub point: Vec2,
}

/// Signed separation between two posed shapes: positive when apart,
/// `-depth` when penetrating. For rectangle pairs the positive branch is the
/// separating-axis gap, which is a lower bound on the Euclidean distance;
/// the sign is exact in every case.
pub fn separation(sa: &Shape, pa: &Pose2, sb: &Shape, pb: &Pose2) -> f64 {
    match (sa, sb) {
        (Shape::Circle { radius: ra }, Shape::Circle { radius: rb }) => pa.position().distance(pb.position()) - ra - rb,
        (Shape::Rectangle { half_x, half_y }, Shape::Circle { radius }) => {
            rect_point_signed_distance(*half_x, *half_y, pa, pb.position()) - radius
        }
        (Shape::Circle { radius }, Shape::Rectangle { half_x, half_y }) => {
            rect_point_signed_distance(*half_x, *half_y, pb, pa.position()) - radius
        }
        (Shape::Rectangle { half_x: ax, half_y: ay }, Shape::Rectangle { half_x: bx, half_y: by }) => {
            let a = rect_corners(*ax, *ay, pa);
            let b = rect_corners(*bx, *by, pb);
            sat(&a, &b, pa, pb).0
        }
    }
}

/// True iff the posed shapes intersect or touch within [`TOUCH_EPS`].
pub fn shapes_overlap(sa: &Shape, pa: &Pose2, sb: &Shape, pb: &Pose2) -> bool {
    separation(sa, pa, sb, pb) <= TOUCH_EPS
}

/// Penetration normal, depth and contact point, or `None` when the shapes do
/// not penetrate.
pub fn contact(sa: &Shape, pa: &Pose2, sb: &Shape, pb: &Pose2) -> Option<Contact> {
    match (sa, sb) {
        (Shape::Circle { radius: ra }, Shape::Circle { radius: rb }) => {
            let d = pb.position() - pa.position();
            let dist = d.norm();
            let depth = ra + rb - dist;
            if depth <= 0.0 {
                return None;
            }
            let normal = d.normalized().unwrap_or(Vec2::new(1.0, 0.0));
            Some(Contact {
                normal,
                depth,
                point: pa.position() + normal * (ra - depth * 0.5),
            })
        }
        (Shape::Rectangle { half_x, half_y }, Shape::Circle { radius }) => {
            rect_circle_contact(*half_x, *half_y, pa, pb.position(), *radius)
        }
        (Shape::Circle { radius }, Shape::Rectangle { half_x, half_y }) => {
            rect_circle_contact(*half_x, *half_y, pb, pa.position(), *radius)
                .map(|c| Contact { normal: -c.normal, ..c })
        }
        (Shape::Rectangle { half_x: ax, half_y: ay }, Shape::Rectangle { half_x: bx, half_y: by }) => {
            let a = rect_corners(*ax, *ay, pa);
            let b = rect_corners(*bx, *by, pb);
            let (sep, axis) = sat(&a, &b, pa, pb);
            if sep >= 0.0 {
                return None;
            }
            let overlap = clip_convex(&b, &a);
            let point = polygon_centroid(&overlap).unwrap_or_else(|| pa.position().lerp(pb.position(), 0.5));
            Some(Contact {
                normal: axis,
                depth: -sep,
                point,
            })
        }
    }
}

/// Signed distance from a world point to a posed rectangle (negative inside).
fn rect_point_signed_distance(hx: f64, hy: f64, pose: &Pose2, p: Vec2) -> f64 {
    let l = pose.inverse_transform_point(p);
    let dx = l.x.abs() - hx;
    let dy = l.y.abs() - hy;
    if dx > 0.0 || dy > 0.0 {
        Vec2::new(dx.max(0.0), dy.max(0.0)).norm()
    } else {
        dx.max(dy)
    }
}

fn rect_circle_contact(hx: f64, hy: f64, pose: &Pose2, center: Vec2, r: f64) -> Option<Contact> {
    let l = pose.inverse_transform_point(center);
    let q = Vec2::new(l.x.clamp(-hx, hx), l.y.clamp(-hy, hy));
    let outside = q != l;
    if outside {
        let d = l - q;
        let dist = d.norm();
        if dist >= r {
            return None;
        }
        let n_local = d.normalized().unwrap_or(Vec2::new(1.0, 0.0));
        Some(Contact {
            normal: n_local.rotated(pose.theta),
            depth: r - dist,
            point: pose.transform_point(q),
        })
    } else {
        // Center inside: exit through the nearest face.
        let dx = hx - l.x.abs();
        let dy = hy - l.y.abs();
        let (n_local, face_dist, face_point) = if dx <= dy {
            let s = if l.x >= 0.0 { 1.0 } else { -1.0 };
            (Vec2::new(s, 0.0), dx, Vec2::new(s * hx, l.y))
        } else {
            let s = if l.y >= 0.0 { 1.0 } else { -1.0 };
            (Vec2::new(0.0, s), dy, Vec2::new(l.x, s * hy))
        };
        Some(Contact {
            normal: n_local.rotated(pose.theta),
            depth: r + face_dist,
            point: pose.transform_point(face_point),
        })
    }
}

fn project(poly: &[Vec2], axis: Vec2) -> (f64, f64) {
    poly.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
        let d = p.dot(axis);
        (lo.min(d), hi.max(d))
    })
}

/// Separating-axis test over the face normals of two rectangles. Returns the
/// largest per-axis separation and that axis oriented from `a` toward `b`.
fn sat(a: &[Vec2; 4], b: &[Vec2; 4], pa: &Pose2, pb: &Pose2) -> (f64, Vec2) {
    let axes = [
        Vec2::new(1.0, 0.0).rotated(pa.theta),
        Vec2::new(0.0, 1.0).rotated(pa.theta),
        Vec2::new(1.0, 0.0).rotated(pb.theta),
        Vec2::new(0.0, 1.0).rotated(pb.theta),
    ];
    let center_delta = pb.position() - pa.position();
    let mut best = (f64::NEG_INFINITY, axes[0]);
    for axis in axes {
        let (amin, amax) = project(a, axis);
        let (bmin, bmax) = project(b, axis);
        let sep = (bmin - amax).max(amin - bmax);
        if sep > best.0 {
            let oriented = if center_delta.dot(axis) >= 0.0 { axis } else { -axis };
            best = (sep, oriented);
        }
    }
    best
}

/// Sutherland–Hodgman clip of `subject` against the convex CCW polygon `clip`.
fn clip_convex(subject: &[Vec2], clip: &[Vec2]) -> Vec<Vec2> {
    let mut output: Vec<Vec2> = subject.to_vec();
    for i in 0..clip.len() {
        if output.is_empty() {
            break;
        }
        let a = clip[i];
        let b = clip[(i + 1) % clip.len()];
        let edge = b - a;
        let inside = |p: Vec2| edge.cross(p - a) >= 0.0;
        let input = std::mem::take(&mut output);
        for j in 0..input.len() {
            let cur = input[j];
            let prev = input[(j + input.len() - 1) % input.len()];
            let (cin, pin) = (inside(cur), inside(prev));
            if cin != pin {
                let d = cur - prev;
                let denom = edge.cross(d);
                if denom.abs() > 1e-300 {
                    let t = edge.cross(a - prev) / denom;
                    output.push(prev + d * t);
                }
            }
            if cin {
                output.push(cur);
            }
        }
    }
    output
}

fn polygon_centroid(poly: &[Vec2]) -> Option<Vec2> {
    if poly.is_empty() {
        return None;
    }
    let mut area2 = 0.0;
    let mut c = Vec2::ZERO;
    for i in 0..poly.len() {
        let p = poly[i];
        let q = poly[(i + 1) % poly.len()];
        let w = p.cross(q);
        area2 += w;
        c = c + (p + q) * w;
    }
    if area2.abs() > 1e-18 {
        Some(c * (1.0 / (3.0 * area2)))
    } else {
        let n = poly.len() as f64;
        let sum = poly.iter().fold(Vec2::ZERO, |acc, p| acc + *p);
        Some(sum * (1.0 / n))
    }
}

/// Andrew's monotone chain; returns the hull counter-clockwise without
/// repeating the first point.
pub fn convex_hull(points: &[Vec2]) -> Vec<Vec2> {
    let mut pts: Vec<Vec2> = points.to_vec();
    pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let mut hull: Vec<Vec2> = Vec::with_capacity(pts.len() * 2);
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &Vec2>> = if pass == 0 {
            Box::new(pts.iter())
        } else {
            Box::new(pts.iter().rev())
        };
        for &p in iter {
            while hull.len() >= start + 2 {
                let a = hull[hull.len() - 2];
                let b = hull[hull.len() - 1];
                if (b - a).cross(p - a) <= 0.0 {
                    hull.pop();
                } else {
                    break;
                }
            }
            hull.push(p);
        }
        hull.pop();
    }
    hull
}

fn convex_contains(hull: &[Vec2], p: Vec2) -> bool {
    if hull.len() < 3 {
        return false;
    }
    (0..hull.len()).all(|i| {
        let a = hull[i];
        let b = hull[(i + 1) % hull.len()];
        (b - a).cross(p - a) >= -1e-12
    })
}

fn point_segment_distance(p: Vec2, a: Vec2, b: Vec2) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_sq();
    let t = if len2 > 0.0 {
        ((p - a).dot(ab) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    p.distance(a + ab * t)
}

/// A rigid footprint translated at fixed heading along a straight segment.
#[derive(Debug, Clone, PartialEq)]
pub struct SweptVolume {
    /// Footprint parts as (shape, offset in the body frame).
    pub footprint: Vec<(Shape, Pose2)>,
    pub segment_start: Vec2,
    pub segment_end: Vec2,
    pub heading: f64,
}

impl SweptVolume {
    pub fn new(footprint: Vec<(Shape, Pose2)>, start: Vec2, end: Vec2, heading: f64) -> Self {
        SweptVolume {
            footprint,
            segment_start: start,
            segment_end: end,
            heading: normalize_angle(heading),
        }
    }

    /// Body pose at interpolation parameter `t ∈ [0, 1]`.
    pub fn body_pose(&self, t: f64) -> Pose2 {
        Pose2::from_position(self.segment_start.lerp(self.segment_end, t), self.heading)
    }

    /// World poses of every footprint part at parameter `t`.
    pub fn parts_at(&self, t: f64) -> impl Iterator<Item = (Shape, Pose2)> + '_ {
        let body = self.body_pose(t);
        self.footprint
            .iter()
            .map(move |(shape, offset)| (*shape, body.compose(offset)))
    }

    pub fn contains(&self, point: Vec2) -> bool {
        let start = self.body_pose(0.0);
        let end = self.body_pose(1.0);
        self.footprint.iter().any(|(shape, offset)| {
            let p0 = start.compose(offset);
            let p1 = end.compose(offset);
            match *shape {
                Shape::Rectangle { half_x, half_y } => {
                    let mut pts = rect_corners(half_x, half_y, &p0).to_vec();
                    pts.extend_from_slice(&rect_corners(half_x, half_y, &p1));
                    convex_contains(&convex_hull(&pts), point)
                }
                Shape::Circle { radius } => point_segment_distance(point, p0.position(), p1.position()) <= radius,
            }
        })
    }

    /// Smallest `t ∈ [0, 1]` at which the footprint overlaps the posed
    /// shape, or `None` if it never does.
    ///
    /// The separation between a translating convex body and a fixed convex
    /// body is convex in `t`, so a golden-section search finds its minimum
    /// and a bisection on the descending branch finds first contact.
    pub fn first_contact(&self, shape: &Shape, pose: &Pose2) -> Option<f64> {
        self.footprint
            .iter()
            .filter_map(|(part, offset)| {
                let g = |t: f64| {
                    let pp = self.body_pose(t).compose(offset);
                    separation(part, &pp, shape, pose)
                };
                first_root(g)
            })
            .min_by(|a, b| a.total_cmp(b))
    }
}

pub fn swept_contains(v: &SweptVolume, point: Vec2) -> bool {
    v.contains(point)
}

/// First `t ∈ [0, 1]` with `g(t) <= TOUCH_EPS` for a convex `g`.
fn first_root(g: impl Fn(f64) -> f64) -> Option<f64> {
    if g(0.0) <= TOUCH_EPS {
        return Some(0.0);
    }
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (0.0_f64, 1.0_f64);
    let mut c = b - (b - a) * inv_phi;
    let mut d = a + (b - a) * inv_phi;
    let (mut gc, mut gd) = (g(c), g(d));
    let mut best = if g(1.0) <= TOUCH_EPS { Some(1.0) } else { None };
    for _ in 0..80 {
        if gc <= TOUCH_EPS {
            best = Some(c);
            break;
        }
        if gd <= TOUCH_EPS {
            best = Some(best.map_or(d, |t: f64| t.min(d)));
            break;
        }
        if gc < gd {
            b = d;
            d = c;
            gd = gc;
            c = b - (b - a) * inv_phi;
            gc = g(c);
        } else {
            a = c;
            c = d;
            gc = gd;
            d = a + (b - a) * inv_phi;
            gd = g(d);
        }
        if b - a < 1e-13 {
            break;
        }
    }
    let hit = best?;
    let (mut lo, mut hi) = (0.0, hit);
    for _ in 0..64 {
        let mid = 0.5 * (lo + hi);
        if g(mid) <= TOUCH_EPS {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo < 1e-14 {
            break;
        }
    }
    Some(hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn homogeneous(p: &Pose2) -> [[f64; 3]; 3] {
        let (s, c) = p.theta.sin_cos();
        [[c, -s, p.x], [s, c, p.y], [0.0, 0.0, 1.0]]
    }

    fn matmul(a: [[f64; 3]; 3], b: [[f64; 3]; 3]) -> [[f64; 3]; 3] {
        let mut out = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                out[i][j] = (0..3).map(|k| a[i][k] * b[k][j]).sum();
            }
        }
        out
    }

    fn pose_close(a: &Pose2, b: &Pose2, tol: f64) -> bool {
        (a.x - b.x).abs() <= tol && (a.y - b.y).abs() <= tol && angle_between(a.theta, b.theta) <= tol
    }

    #[test]
    fn normalize_is_half_open() {
        assert_eq!(normalize_angle(PI), PI);
        assert_eq!(normalize_angle(-PI), PI);
        assert!((normalize_angle(3.0 * PI) - PI).abs() < 1e-12);
        assert!((normalize_angle(0.5 + TAU) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn compose_examples() {
        let p = Pose2::new(0.3, 0.2, 1.0);
        assert_eq!(compose(&Pose2::IDENTITY, &p), p);

        let q = compose(&Pose2::new(0.0, 0.0, PI / 2.0), &Pose2::new(1.0, 0.0, 0.0));
        assert!(pose_close(&q, &Pose2::new(0.0, 1.0, PI / 2.0), 1e-12));

        let a = Pose2::new(0.1, 0.1, PI);
        let got = compose(&a, &a);
        let m = matmul(homogeneous(&a), homogeneous(&a));
        let oracle = Pose2::new(m[0][2], m[1][2], m[1][0].atan2(m[0][0]));
        assert!(pose_close(&got, &oracle, 1e-12));
        assert!(pose_close(&got, &Pose2::new(0.0, 0.0, 0.0), 1e-12));
    }

    #[test]
    fn compose_with_inverse_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..1000 {
            let a = Pose2::new(
                rng.gen_range(-5.0..5.0),
                rng.gen_range(-5.0..5.0),
                rng.gen_range(-PI..PI),
            );
            let id = a.compose(&a.inverse());
            assert!(
                id.x.abs() <= 1e-12 && id.y.abs() <= 1e-12 && id.theta.abs() <= 1e-12,
                "{id:?}"
            );
        }
    }

    /// Welzl's algorithm, used only as an independent check.
    fn welzl(points: &[Vec2]) -> Circle2 {
        fn circle_from(b: &[Vec2]) -> Circle2 {
            match b.len() {
                0 => Circle2 {
                    center: Vec2::ZERO,
                    radius: 0.0,
                },
                1 => Circle2 {
                    center: b[0],
                    radius: 0.0,
                },
                2 => Circle2 {
                    center: b[0].lerp(b[1], 0.5),
                    radius: b[0].distance(b[1]) / 2.0,
                },
                _ => {
                    let (a, bb, c) = (b[0], b[1], b[2]);
                    let d = 2.0 * (a.x * (bb.y - c.y) + bb.x * (c.y - a.y) + c.x * (a.y - bb.y));
                    let ux = (a.norm_sq() * (bb.y - c.y) + bb.norm_sq() * (c.y - a.y) + c.norm_sq() * (a.y - bb.y)) / d;
                    let uy = (a.norm_sq() * (c.x - bb.x) + bb.norm_sq() * (a.x - c.x) + c.norm_sq() * (bb.x - a.x)) / d;
                    let center = Vec2::new(ux, uy);
                    Circle2 {
                        center,
                        radius: center.distance(a),
                    }
                }
            }
        }
        fn rec(p: &[Vec2], r: &mut Vec<Vec2>) -> Circle2 {
            if p.is_empty() || r.len() == 3 {
                return circle_from(r);
            }
            let (last, rest) = p.split_last().unwrap();
            let c = rec(rest, r);
            if c.center.distance(*last) <= c.radius + 1e-12 {
                return c;
            }
            r.push(*last);
            let c = rec(rest, r);
            r.pop();
            c
        }
        rec(points, &mut Vec::new())
    }

    #[test]
    fn enclosing_circle_examples() {
        let c = min_enclosing_circle(&Shape::circle(0.03).unwrap(), &Pose2::new(0.2, 0.2, 0.0));
        assert_eq!(c.center, Vec2::new(0.2, 0.2));
        assert_eq!(c.radius, 0.03);

        let r = Shape::rectangle(0.04, 0.02).unwrap();
        let c = min_enclosing_circle(&r, &Pose2::new(0.3, 0.3, 0.7));
        assert!((c.radius - 0.044721).abs() < 1e-6);
        assert!(c.center.distance(Vec2::new(0.3, 0.3)) < 1e-15);

        let sq = Shape::rectangle(0.05, 0.05).unwrap();
        let c = min_enclosing_circle(&sq, &Pose2::IDENTITY);
        let oracle = welzl(&rect_corners(0.05, 0.05, &Pose2::IDENTITY));
        assert!((c.radius - oracle.radius).abs() < 1e-12);
        assert!((c.radius - 0.070711).abs() < 1e-6);
    }

    #[test]
    fn enclosing_circle_matches_welzl_and_contains_corners() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let (hx, hy) = (rng.gen_range(0.005..0.1), rng.gen_range(0.005..0.1));
            let pose = Pose2::new(
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-PI..PI),
            );
            let c = min_enclosing_circle(&Shape::rectangle(hx, hy).unwrap(), &pose);
            let corners = rect_corners(hx, hy, &pose);
            let w = welzl(&corners);
            assert!((c.radius - w.radius).abs() < 1e-9);
            for p in corners {
                assert!(c.center.distance(p) <= c.radius + 1e-9);
            }
            let rotated = min_enclosing_circle(&Shape::rectangle(hx, hy).unwrap(), &Pose2 { theta: 0.0, ..pose });
            assert!((rotated.radius - c.radius).abs() <= 1e-12);
        }
    }

    #[test]
    fn overlap_examples() {
        let unit = Shape::circle(1.0).unwrap();
        assert!(!shapes_overlap(
            &unit,
            &Pose2::IDENTITY,
            &unit,
            &Pose2::new(3.0, 0.0, 0.0)
        ));

        let r = Shape::rectangle(0.04, 0.02).unwrap();
        let p = Pose2::new(0.1, 0.2, 0.3);
        assert!(shapes_overlap(&r, &p, &r, &p));
    }

    #[test]
    fn overlap_agrees_with_monte_carlo_membership() {
        let rect = Shape::rectangle(0.04, 0.02).unwrap();
        let rp = Pose2::new(0.0, 0.0, PI / 4.0);
        let circ = Shape::circle(0.01).unwrap();
        let cp = Pose2::new(0.05, 0.0, 0.0);
        // Any sampled point inside both shapes witnesses an overlap.
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut witnessed = false;
        for _ in 0..1_000_000 {
            let p = Vec2::new(rng.gen_range(0.04..0.06), rng.gen_range(-0.01..0.01));
            if circ.contains_point(&cp, p) && rect.contains_point(&rp, p) {
                witnessed = true;
                break;
            }
        }
        assert_eq!(shapes_overlap(&rect, &rp, &circ, &cp), witnessed);
    }

    fn sample_shape(rng: &mut ChaCha8Rng) -> Shape {
        if rng.gen_bool(0.5) {
            Shape::rectangle(rng.gen_range(0.01..0.08), rng.gen_range(0.01..0.08)).unwrap()
        } else {
            Shape::circle(rng.gen_range(0.01..0.08)).unwrap()
        }
    }

    #[test]
    fn overlap_agrees_with_sampling_on_random_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..300 {
            let (sa, sb) = (sample_shape(&mut rng), sample_shape(&mut rng));
            let pa = Pose2::new(
                rng.gen_range(-0.1..0.1),
                rng.gen_range(-0.1..0.1),
                rng.gen_range(-PI..PI),
            );
            let pb = Pose2::new(
                rng.gen_range(-0.1..0.1),
                rng.gen_range(-0.1..0.1),
                rng.gen_range(-PI..PI),
            );
            let sep = separation(&sa, &pa, &sb, &pb);
            if sep.abs() < 2e-3 {
                continue;
            }
            let mut witnessed = false;
            for _ in 0..40_000 {
                let p = Vec2::new(rng.gen_range(-0.25..0.25), rng.gen_range(-0.25..0.25));
                if sa.contains_point(&pa, p) && sb.contains_point(&pb, p) {
                    witnessed = true;
                    break;
                }
            }
            assert_eq!(sep < 0.0, witnessed, "{sa:?} {pa:?} {sb:?} {pb:?} sep={sep}");
            assert_eq!(shapes_overlap(&sa, &pa, &sb, &pb), shapes_overlap(&sb, &pb, &sa, &pa));
        }
    }

    #[test]
    fn contact_resolves_penetration() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut checked = 0;
        while checked < 500 {
            let (sa, sb) = (sample_shape(&mut rng), sample_shape(&mut rng));
            let pa = Pose2::new(
                rng.gen_range(-0.05..0.05),
                rng.gen_range(-0.05..0.05),
                rng.gen_range(-PI..PI),
            );
            let pb = Pose2::new(
                rng.gen_range(-0.05..0.05),
                rng.gen_range(-0.05..0.05),
                rng.gen_range(-PI..PI),
            );
            let Some(c) = contact(&sa, &pa, &sb, &pb) else { continue };
            checked += 1;
            assert!((c.normal.norm() - 1.0).abs() < 1e-12);
            let moved = Pose2 {
                x: pb.x + c.normal.x * c.depth,
                y: pb.y + c.normal.y * c.depth,
                ..pb
            };
            assert!(separation(&sa, &pa, &sb, &moved) > -1e-9, "{sa:?} {sb:?}");
            assert!((separation(&sa, &pa, &sb, &pb) + c.depth).abs() < 1e-9);
        }
    }

    fn robot_like() -> Vec<(Shape, Pose2)> {
        vec![
            (Shape::rectangle(0.01, 0.05).unwrap(), Pose2::IDENTITY),
            (Shape::rectangle(0.03, 0.005).unwrap(), Pose2::new(0.04, 0.045, 0.0)),
            (Shape::rectangle(0.03, 0.005).unwrap(), Pose2::new(0.04, -0.045, 0.0)),
        ]
    }

    /// Dense-t sampling oracle for sweep membership.
    fn sweep_oracle(v: &SweptVolume, p: Vec2) -> bool {
        let steps = 10_000;
        (0..=steps).any(|i| {
            let t = i as f64 / steps as f64;
            v.parts_at(t).any(|(s, pose)| s.contains_point(&pose, p))
        })
    }

    #[test]
    fn swept_contains_examples() {
        let v = SweptVolume::new(robot_like(), Vec2::new(0.1, 0.1), Vec2::new(0.4, 0.3), 0.0);
        let v = SweptVolume {
            heading: (v.segment_end - v.segment_start).angle(),
            ..v
        };
        let mid = v.segment_start.lerp(v.segment_end, 0.5);
        assert!(v.contains(mid));
        assert!(!v.contains(Vec2::new(10.0, 10.0)));

        // Lateral offset just past the palm half-width.
        let dir = (v.segment_end - v.segment_start).normalized().unwrap();
        let probe = mid + dir.perp() * (0.05 + 1e-6);
        assert!(!v.contains(probe));
        assert_eq!(v.contains(probe), sweep_oracle(&v, probe));
    }

    #[test]
    fn swept_contains_agrees_with_dense_sampling() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let mut compared = 0;
        while compared < 10_000 {
            let start = Vec2::new(rng.gen_range(0.0..0.6), rng.gen_range(0.0..0.4));
            let end = Vec2::new(rng.gen_range(0.0..0.6), rng.gen_range(0.0..0.4));
            let heading = match (end - start).normalized() {
                Some(d) => d.angle(),
                None => continue,
            };
            let v = SweptVolume::new(robot_like(), start, end, heading);
            // Sample near the segment so both outcomes occur.
            let base = start.lerp(end, rng.gen_range(-0.2..1.2));
            let p = base + Vec2::new(rng.gen_range(-0.12..0.12), rng.gen_range(-0.12..0.12));
            // Points within 1e-4 of the boundary are excluded.
            let near_boundary = {
                let d = 1e-4;
                let probes = [
                    Vec2::new(d, 0.0),
                    Vec2::new(-d, 0.0),
                    Vec2::new(0.0, d),
                    Vec2::new(0.0, -d),
                ];
                let inside = v.contains(p);
                probes.iter().any(|o| v.contains(p + *o) != inside)
            };
            if near_boundary {
                continue;
            }
            let oracle = sweep_oracle(&v, p);
            assert_eq!(v.contains(p), oracle, "start={start:?} end={end:?} p={p:?}");
            compared += 1;
        }
    }

    #[test]
    fn first_contact_matches_ray_march() {
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        for _ in 0..200 {
            let start = Vec2::new(rng.gen_range(0.0..0.6), rng.gen_range(0.0..0.1));
            let end = Vec2::new(rng.gen_range(0.0..0.6), rng.gen_range(0.25..0.4));
            let v = SweptVolume::new(robot_like(), start, end, (end - start).angle());
            let shape = sample_shape(&mut rng);
            let pose = Pose2::new(rng.gen_range(0.0..0.6), rng.gen_range(0.0..0.4), rng.gen_range(-PI..PI));
            let fast = v.first_contact(&shape, &pose);
            let step = 1e-4;
            let n = (1.0 / step) as usize;
            let oracle = (0..=n)
                .map(|i| i as f64 * step)
                .find(|&t| v.parts_at(t).any(|(s, p)| shapes_overlap(&s, &p, &shape, &pose)));
            match (fast, oracle) {
                (Some(a), Some(b)) => assert!((a - b).abs() <= step + 1e-9, "{a} vs {b}"),
                (None, None) => {}
                (a, b) => {
                    // Grazing contacts shorter than one march step.
                    let t = a.or(b).unwrap();
                    let lo = (t - step).max(0.0);
                    let hi = (t + step).min(1.0);
                    let gap = [lo, t, hi]
                        .iter()
                        .map(|&s| {
                            v.parts_at(s)
                                .map(|(sh, p)| separation(&sh, &p, &shape, &pose))
                                .fold(f64::INFINITY, f64::min)
                        })
                        .fold(f64::INFINITY, f64::min);
                    assert!(gap.abs() < 1e-4, "disagreement {a:?} vs {b:?}");
                }
            }
        }
    }

    proptest! {
        #[test]
        fn pose_roundtrip_through_transform(x in -2.0..2.0f64, y in -2.0..2.0f64, th in -4.0..4.0f64, px in -1.0..1.0f64, py in -1.0..1.0f64) {
            let pose = Pose2::new(x, y, th);
            let p = Vec2::new(px, py);
            let back = pose.inverse_transform_point(pose.transform_point(p));
            prop_assert!(back.distance(p) < 1e-12);
            prop_assert!(pose.theta > -PI && pose.theta <= PI);
        }

        #[test]
        fn overlap_is_symmetric(hx in 0.01..0.1f64, hy in 0.01..0.1f64, r in 0.01..0.1f64,
                                x in -0.2..0.2f64, y in -0.2..0.2f64, th in -PI..PI) {
            let a = Shape::rectangle(hx, hy).unwrap();
            let b = Shape::circle(r).unwrap();
            let pa = Pose2::new(0.0, 0.0, 0.3);
            let pb = Pose2::new(x, y, th);
            prop_assert_eq!(shapes_overlap(&a, &pa, &b, &pb), shapes_overlap(&b, &pb, &a, &pa));
            prop_assert_eq!(shapes_overlap(&a, &pa, &a, &pb), shapes_overlap(&a, &pb, &a, &pa));
        }
    }
}
