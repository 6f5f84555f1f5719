//! Planar geometry used by the simulator and the observation rasterizer.

use serde::{Deserialize, Serialize};
use std::ops::{Add, Mul, Neg, Sub};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn from_angle(theta: f64) -> Self {
        Self::new(theta.cos(), theta.sin())
    }

    pub fn dot(self, o: Vec2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    pub fn cross(self, o: Vec2) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn dist(self, o: Vec2) -> f64 {
        (self - o).norm()
    }

    /// Counter-clockwise rotation by `theta` radians.
    pub fn rotate(self, theta: f64) -> Vec2 {
        let (s, c) = theta.sin_cos();
        Vec2::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }

    pub fn perp(self) -> Vec2 {
        Vec2::new(-self.y, self.x)
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

/// Rigid planar transform: rotate by `angle`, then translate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rigid {
    pub angle: f64,
    pub offset: Vec2,
}

impl Rigid {
    pub fn apply(&self, p: Vec2) -> Vec2 {
        p.rotate(self.angle) + self.offset
    }
}

/// Axis-aligned bounding box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: Vec2,
    pub max: Vec2,
}

impl Aabb {
    pub fn from_points(points: &[Vec2]) -> Aabb {
        let mut min = Vec2::new(f64::INFINITY, f64::INFINITY);
        let mut max = Vec2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for p in points {
            min.x = min.x.min(p.x);
            min.y = min.y.min(p.y);
            max.x = max.x.max(p.x);
            max.y = max.y.max(p.y);
        }
        Aabb { min, max }
    }

    pub fn inflate(self, r: f64) -> Aabb {
        Aabb {
            min: self.min - Vec2::new(r, r),
            max: self.max + Vec2::new(r, r),
        }
    }

    pub fn contains(&self, p: Vec2) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.y >= self.min.y && p.y <= self.max.y
    }

    pub fn intersects(&self, o: &Aabb) -> bool {
        self.min.x <= o.max.x && o.min.x <= self.max.x && self.min.y <= o.max.y && o.min.y <= self.max.y
    }
}

/// Convex polygon with counter-clockwise vertices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvexPolygon {
    pub vertices: Vec<Vec2>,
    bounds: Aabb,
}

impl ConvexPolygon {
    /// Builds a polygon, reordering clockwise input to counter-clockwise.
    pub fn new(mut vertices: Vec<Vec2>) -> Self {
        let area2: f64 = (0..vertices.len())
            .map(|i| vertices[i].cross(vertices[(i + 1) % vertices.len()]))
            .sum();
        if area2 < 0.0 {
            vertices.reverse();
        }
        let bounds = Aabb::from_points(&vertices);
        Self { vertices, bounds }
    }

    pub fn rect(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Self::new(vec![
            Vec2::new(x0, y0),
            Vec2::new(x1, y0),
            Vec2::new(x1, y1),
            Vec2::new(x0, y1),
        ])
    }

    pub fn bounds(&self) -> &Aabb {
        &self.bounds
    }

    pub fn contains(&self, p: Vec2) -> bool {
        if !self.bounds.contains(p) {
            return false;
        }
        let n = self.vertices.len();
        (0..n).all(|i| {
            let a = self.vertices[i];
            let b = self.vertices[(i + 1) % n];
            (b - a).cross(p - a) >= 0.0
        })
    }

    pub fn transformed(&self, t: &Rigid) -> Self {
        Self::new(self.vertices.iter().map(|&v| t.apply(v)).collect())
    }
}

/// Oriented rectangle (vehicle footprint).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrientedRect {
    pub center: Vec2,
    pub heading: f64,
    pub half_length: f64,
    pub half_width: f64,
}

impl OrientedRect {
    pub fn axes(&self) -> (Vec2, Vec2) {
        let f = Vec2::from_angle(self.heading);
        (f, f.perp())
    }

    pub fn corners(&self) -> [Vec2; 4] {
        let (f, l) = self.axes();
        let a = f * self.half_length;
        let b = l * self.half_width;
        [
            self.center + a + b,
            self.center - a + b,
            self.center - a - b,
            self.center + a - b,
        ]
    }

    pub fn contains(&self, p: Vec2) -> bool {
        let (f, l) = self.axes();
        let d = p - self.center;
        d.dot(f).abs() <= self.half_length && d.dot(l).abs() <= self.half_width
    }

    pub fn bounds(&self) -> Aabb {
        Aabb::from_points(&self.corners())
    }

    /// Separating-axis overlap test between two oriented rectangles.
    pub fn overlaps(&self, other: &OrientedRect) -> bool {
        let (f1, l1) = self.axes();
        let (f2, l2) = other.axes();
        let d = other.center - self.center;
        for axis in [f1, l1, f2, l2] {
            let r1 = self.half_length * f1.dot(axis).abs() + self.half_width * l1.dot(axis).abs();
            let r2 = other.half_length * f2.dot(axis).abs() + other.half_width * l2.dot(axis).abs();
            if d.dot(axis).abs() > r1 + r2 {
                return false;
            }
        }
        true
    }

    /// Separating-axis overlap test against a convex polygon.
    pub fn overlaps_polygon(&self, poly: &ConvexPolygon) -> bool {
        if !self.bounds().intersects(poly.bounds()) {
            return false;
        }
        let corners = self.corners();
        let (f, l) = self.axes();
        let n = poly.vertices.len();
        let mut axes: Vec<Vec2> = vec![f, l];
        for i in 0..n {
            let e = poly.vertices[(i + 1) % n] - poly.vertices[i];
            axes.push(e.perp());
        }
        for axis in axes {
            let (mut a0, mut a1) = (f64::INFINITY, f64::NEG_INFINITY);
            for c in &corners {
                let v = c.dot(axis);
                a0 = a0.min(v);
                a1 = a1.max(v);
            }
            let (mut b0, mut b1) = (f64::INFINITY, f64::NEG_INFINITY);
            for v in &poly.vertices {
                let v = v.dot(axis);
                b0 = b0.min(v);
                b1 = b1.max(v);
            }
            if a1 < b0 || b1 < a0 {
                return false;
            }
        }
        true
    }
}

/// Closest point on segment `a..b` to `p` and its parameter in `[0, 1]`.
pub fn project_on_segment(p: Vec2, a: Vec2, b: Vec2) -> (Vec2, f64) {
    let ab = b - a;
    let len2 = ab.dot(ab);
    if len2 == 0.0 {
        return (a, 0.0);
    }
    let s = ((p - a).dot(ab) / len2).clamp(0.0, 1.0);
    (a + ab * s, s)
}

/// Polyline with a constant half-width; the area it covers is the union of
/// segment capsules.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Corridor {
    pub points: Vec<Vec2>,
    pub half_width: f64,
    bounds: Aabb,
    cumulative: Vec<f64>,
}

impl Corridor {
    pub fn new(points: Vec<Vec2>, half_width: f64) -> Self {
        assert!(points.len() >= 2, "corridor needs at least two points");
        let bounds = Aabb::from_points(&points).inflate(half_width);
        let mut cumulative = vec![0.0];
        for w in points.windows(2) {
            let last = *cumulative.last().unwrap();
            cumulative.push(last + w[0].dist(w[1]));
        }
        Self {
            points,
            half_width,
            bounds,
            cumulative,
        }
    }

    pub fn bounds(&self) -> &Aabb {
        &self.bounds
    }

    pub fn length(&self) -> f64 {
        *self.cumulative.last().unwrap()
    }

    /// Distance from `p` to the center polyline.
    pub fn distance(&self, p: Vec2) -> f64 {
        self.points
            .windows(2)
            .map(|w| project_on_segment(p, w[0], w[1]).0.dist(p))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn contains(&self, p: Vec2) -> bool {
        self.bounds.contains(p) && self.distance(p) <= self.half_width
    }

    /// Arc length of the closest point on the center polyline.
    pub fn arc_length_at(&self, p: Vec2) -> f64 {
        let mut best = (f64::INFINITY, 0.0);
        for (i, w) in self.points.windows(2).enumerate() {
            let (q, s) = project_on_segment(p, w[0], w[1]);
            let d = q.dist(p);
            if d < best.0 {
                best = (d, self.cumulative[i] + s * (self.cumulative[i + 1] - self.cumulative[i]));
            }
        }
        best.1
    }

    /// Point at arc length `s`, clamped to the polyline ends.
    pub fn point_at(&self, s: f64) -> Vec2 {
        let s = s.clamp(0.0, self.length());
        for i in 0..self.points.len() - 1 {
            let (s0, s1) = (self.cumulative[i], self.cumulative[i + 1]);
            if s <= s1 || i == self.points.len() - 2 {
                let seg = s1 - s0;
                let k = if seg > 0.0 { (s - s0) / seg } else { 0.0 };
                return self.points[i] + (self.points[i + 1] - self.points[i]) * k;
            }
        }
        *self.points.last().unwrap()
    }

    pub fn transformed(&self, t: &Rigid) -> Self {
        Self::new(self.points.iter().map(|&p| t.apply(p)).collect(), self.half_width)
    }
}

/// Wraps an angle into `(-pi, pi]`.
pub fn wrap_angle(a: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut a = a % two_pi;
    if a > std::f64::consts::PI {
        a -= two_pi;
    } else if a <= -std::f64::consts::PI {
        a += two_pi;
    }
    a
}
