//! Planar geometry for distance and corridor queries.

use std::ops::{Add, Mul, Sub};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn from_heading(theta: f64) -> Self {
        Self::new(theta.cos(), theta.sin())
    }

    pub fn dot(self, o: Vec2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    /// Left-hand normal.
    pub fn perp(self) -> Vec2 {
        Vec2::new(-self.y, self.x)
    }

    /// Expresses `self` in a frame rotated by `theta`.
    pub fn rotate_into(self, theta: f64) -> Vec2 {
        let (s, c) = theta.sin_cos();
        Vec2::new(c * self.x + s * self.y, -s * self.x + c * self.y)
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

/// Oriented rectangle given by center, heading and half extents.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub center: Vec2,
    pub heading: f64,
    pub half_len: f64,
    pub half_wid: f64,
}

impl Rect {
    fn to_local(&self, p: Vec2) -> Vec2 {
        (p - self.center).rotate_into(self.heading)
    }

    /// Signed distance of a local-frame point: negative inside.
    fn sdf_local(&self, p: Vec2) -> f64 {
        let qx = p.x.abs() - self.half_len;
        let qy = p.y.abs() - self.half_wid;
        let outside = Vec2::new(qx.max(0.0), qy.max(0.0)).norm();
        outside + qx.max(qy).min(0.0)
    }

    pub fn signed_distance(&self, p: Vec2) -> f64 {
        self.sdf_local(self.to_local(p))
    }

    pub fn corners(&self) -> [Vec2; 4] {
        let u = Vec2::from_heading(self.heading);
        let n = u.perp();
        let (l, w) = (self.half_len, self.half_wid);
        [
            self.center + u * l + n * w,
            self.center + u * l - n * w,
            self.center - u * l - n * w,
            self.center - u * l + n * w,
        ]
    }

    fn axes(&self) -> [Vec2; 2] {
        let u = Vec2::from_heading(self.heading);
        [u, u.perp()]
    }

    /// Strict interior overlap test (separating axis theorem).
    pub fn overlaps(&self, other: &Rect) -> bool {
        let (a, b) = (self.corners(), other.corners());
        for axis in self.axes().into_iter().chain(other.axes()) {
            let (amin, amax) = project(&a, axis);
            let (bmin, bmax) = project(&b, axis);
            if amax <= bmin || bmax <= amin {
                return false;
            }
        }
        true
    }
}

fn project(pts: &[Vec2; 4], axis: Vec2) -> (f64, f64) {
    pts.iter().map(|p| p.dot(axis)).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Shape {
    Rect(Rect),
    Disc { center: Vec2, radius: f64 },
}

impl Shape {
    pub fn center(&self) -> Vec2 {
        match self {
            Shape::Rect(r) => r.center,
            Shape::Disc { center, .. } => *center,
        }
    }

    pub fn signed_distance(&self, p: Vec2) -> f64 {
        match self {
            Shape::Rect(r) => r.signed_distance(p),
            Shape::Disc { center, radius } => (p - *center).norm() - radius,
        }
    }

    pub fn overlaps_rect(&self, r: &Rect) -> bool {
        match self {
            Shape::Rect(s) => s.overlaps(r),
            Shape::Disc { center, radius } => r.signed_distance(*center) < *radius,
        }
    }
}

/// Distance from point `p` to segment `ab`.
pub fn point_segment_distance(p: Vec2, a: Vec2, b: Vec2) -> f64 {
    let ab = b - a;
    let len2 = ab.dot(ab);
    let s = if len2 > 0.0 { ((p - a).dot(ab) / len2).clamp(0.0, 1.0) } else { 0.0 };
    (p - (a + ab * s)).norm()
}

/// Minimum over the segment `ab` of the signed distance to `shape`.
///
/// Positive values are the Euclidean gap; a negative value is the deepest
/// penetration of the segment into the shape.
pub fn segment_signed_distance(a: Vec2, b: Vec2, shape: &Shape) -> f64 {
    match shape {
        Shape::Disc { center, radius } => point_segment_distance(*center, a, b) - radius,
        Shape::Rect(r) => {
            let (la, lb) = (r.to_local(a), r.to_local(b));
            if segment_hits_box(la, lb, r.half_len, r.half_wid) {
                // the box SDF is convex, so its restriction to the segment is unimodal
                golden_min(|s| r.sdf_local(la + (lb - la) * s))
            } else {
                let ends = r.sdf_local(la).min(r.sdf_local(lb));
                r.corners()
                    .iter()
                    .map(|&c| point_segment_distance(c, a, b))
                    .fold(ends, f64::min)
            }
        }
    }
}

/// Liang-Barsky clip of a local-frame segment against `[-hl,hl] x [-hw,hw]`.
fn segment_hits_box(a: Vec2, b: Vec2, hl: f64, hw: f64) -> bool {
    let d = b - a;
    let (mut t0, mut t1) = (0.0f64, 1.0f64);
    for (p, q) in [(-d.x, a.x + hl), (d.x, hl - a.x), (-d.y, a.y + hw), (d.y, hw - a.y)] {
        if p == 0.0 {
            if q < 0.0 {
                return false;
            }
        } else {
            let r = q / p;
            if p < 0.0 {
                t0 = t0.max(r);
            } else {
                t1 = t1.min(r);
            }
        }
    }
    t0 <= t1
}

fn golden_min(f: impl Fn(f64) -> f64) -> f64 {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let (mut lo, mut hi) = (0.0, 1.0);
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..60 {
        if f1 < f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2);
        }
    }
    f1.min(f2).min(f(0.0)).min(f(1.0))
}
