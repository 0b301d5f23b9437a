//! Planar primitives shared by collision checks, ray casting and track
//! construction. All tests treat boundaries as closed: touching counts.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::ops::{Add, Mul, Neg, Sub};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    /// Unit vector pointing along `angle` (radians, counter-clockwise from +x).
    pub fn from_angle(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Self { x: c, y: s }
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

    pub fn normalized(self) -> Vec2 {
        let n = self.norm();
        Vec2::new(self.x / n, self.y / n)
    }

    /// Counter-clockwise perpendicular.
    pub fn perp(self) -> Vec2 {
        Vec2::new(-self.y, self.x)
    }

    pub fn angle(self) -> f64 {
        self.y.atan2(self.x)
    }

    pub fn distance(self, o: Vec2) -> f64 {
        (self - o).norm()
    }

    /// Rotate by `angle` radians counter-clockwise.
    pub fn rotated(self, angle: f64) -> Vec2 {
        let (s, c) = angle.sin_cos();
        Vec2::new(c * self.x - s * self.y, s * self.x + c * self.y)
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
    fn mul(self, k: f64) -> Vec2 {
        Vec2::new(self.x * k, self.y * k)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

/// Wrap an angle into (−π, π].
pub fn normalize_angle(a: f64) -> f64 {
    let mut r = a % (2.0 * PI);
    if r <= -PI {
        r += 2.0 * PI;
    } else if r > PI {
        r -= 2.0 * PI;
    }
    r
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub a: Vec2,
    pub b: Vec2,
}

impl Segment {
    pub const fn new(a: Vec2, b: Vec2) -> Self {
        Self { a, b }
    }

    pub fn length(&self) -> f64 {
        self.a.distance(self.b)
    }

    /// Closest distance from `p` to the segment.
    pub fn distance_to(&self, p: Vec2) -> f64 {
        let d = self.b - self.a;
        let len2 = d.dot(d);
        if len2 == 0.0 {
            return p.distance(self.a);
        }
        let t = ((p - self.a).dot(d) / len2).clamp(0.0, 1.0);
        p.distance(self.a + d * t)
    }
}

/// Rectangle of half-extents `half_length` (along `heading`) and `half_width`
/// centred at `center`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrientedRect {
    pub center: Vec2,
    pub heading: f64,
    pub half_length: f64,
    pub half_width: f64,
}

impl OrientedRect {
    pub fn axes(&self) -> (Vec2, Vec2) {
        let fwd = Vec2::from_angle(self.heading);
        (fwd, fwd.perp())
    }

    /// Corners in counter-clockwise order starting at front-right.
    pub fn corners(&self) -> [Vec2; 4] {
        let (fwd, left) = self.axes();
        let f = fwd * self.half_length;
        let l = left * self.half_width;
        let c = self.center;
        [c + f - l, c + f + l, c - f + l, c - f - l]
    }

    pub fn edges(&self) -> [Segment; 4] {
        let c = self.corners();
        [
            Segment::new(c[0], c[1]),
            Segment::new(c[1], c[2]),
            Segment::new(c[2], c[3]),
            Segment::new(c[3], c[0]),
        ]
    }

    pub fn contains(&self, p: Vec2) -> bool {
        let (fwd, left) = self.axes();
        let d = p - self.center;
        d.dot(fwd).abs() <= self.half_length && d.dot(left).abs() <= self.half_width
    }

    pub fn intersects_segment(&self, seg: &Segment) -> bool {
        let corners = self.corners();
        let (fwd, left) = self.axes();
        let seg_dir = seg.b - seg.a;
        let mut axes = vec![fwd, left];
        if seg_dir.dot(seg_dir) > 0.0 {
            axes.push(seg_dir.perp());
        }
        !axes
            .iter()
            .any(|&axis| separated_on(axis, &corners, &[seg.a, seg.b]))
    }

    pub fn intersects_rect(&self, other: &OrientedRect) -> bool {
        let a = self.corners();
        let b = other.corners();
        let (fa, la) = self.axes();
        let (fb, lb) = other.axes();
        ![fa, la, fb, lb]
            .iter()
            .any(|&axis| separated_on(axis, &a, &b))
    }
}

fn project(axis: Vec2, pts: &[Vec2]) -> (f64, f64) {
    pts.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
        let d = axis.dot(*p);
        (lo.min(d), hi.max(d))
    })
}

/// Strict separation: intervals that merely touch are not separated.
fn separated_on(axis: Vec2, a: &[Vec2], b: &[Vec2]) -> bool {
    let (alo, ahi) = project(axis, a);
    let (blo, bhi) = project(axis, b);
    ahi < blo || bhi < alo
}

/// Distance along the ray `origin + t·dir` (unit `dir`, t ≥ 0) to the first
/// point of `seg`, if any.
pub fn ray_segment(origin: Vec2, dir: Vec2, seg: &Segment) -> Option<f64> {
    let e = seg.b - seg.a;
    let denom = dir.cross(e);
    let w = seg.a - origin;
    if denom == 0.0 {
        // Parallel. Collinear overlap hits the nearest endpoint ahead.
        if w.cross(dir) != 0.0 {
            return None;
        }
        let ta = w.dot(dir);
        let tb = (seg.b - origin).dot(dir);
        let (lo, hi) = if ta <= tb { (ta, tb) } else { (tb, ta) };
        if hi < 0.0 {
            return None;
        }
        return Some(lo.max(0.0));
    }
    let t = w.cross(e) / denom;
    let u = w.cross(dir) / denom;
    if t >= 0.0 && (0.0..=1.0).contains(&u) {
        Some(t)
    } else {
        None
    }
}
