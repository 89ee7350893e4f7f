//! Small 2D geometry kit: points, cubic Bézier evaluation and splitting.

use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const ZERO: Point = Point { x: 0.0, y: 0.0 };

    #[inline]
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    #[inline]
    pub fn dot(self, other: Point) -> f64 {
        self.x * other.x + self.y * other.y
    }

    #[inline]
    pub fn cross(self, other: Point) -> f64 {
        self.x * other.y - self.y * other.x
    }

    #[inline]
    pub fn length_squared(self) -> f64 {
        self.dot(self)
    }

    #[inline]
    pub fn length(self) -> f64 {
        self.length_squared().sqrt()
    }

    #[inline]
    pub fn distance(self, other: Point) -> f64 {
        (self - other).length()
    }

    #[inline]
    pub fn lerp(self, other: Point, t: f64) -> Point {
        self + (other - self) * t
    }

    #[inline]
    pub fn midpoint(self, other: Point) -> Point {
        Point::new(0.5 * (self.x + other.x), 0.5 * (self.y + other.y))
    }

    #[inline]
    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl Add for Point {
    type Output = Point;
    #[inline]
    fn add(self, rhs: Point) -> Point {
        Point::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl AddAssign for Point {
    #[inline]
    fn add_assign(&mut self, rhs: Point) {
        self.x += rhs.x;
        self.y += rhs.y;
    }
}

impl Sub for Point {
    type Output = Point;
    #[inline]
    fn sub(self, rhs: Point) -> Point {
        Point::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl SubAssign for Point {
    #[inline]
    fn sub_assign(&mut self, rhs: Point) {
        self.x -= rhs.x;
        self.y -= rhs.y;
    }
}

impl Mul<f64> for Point {
    type Output = Point;
    #[inline]
    fn mul(self, rhs: f64) -> Point {
        Point::new(self.x * rhs, self.y * rhs)
    }
}

impl Neg for Point {
    type Output = Point;
    #[inline]
    fn neg(self) -> Point {
        Point::new(-self.x, -self.y)
    }
}

/// Axis-aligned bounding box.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rect {
    pub min: Point,
    pub max: Point,
}

impl Rect {
    pub const EMPTY: Rect = Rect {
        min: Point::new(f64::INFINITY, f64::INFINITY),
        max: Point::new(f64::NEG_INFINITY, f64::NEG_INFINITY),
    };

    pub fn from_points<'a>(points: impl IntoIterator<Item = &'a Point>) -> Rect {
        let mut r = Rect::EMPTY;
        for p in points {
            r.include(*p);
        }
        r
    }

    #[inline]
    pub fn include(&mut self, p: Point) {
        self.min.x = self.min.x.min(p.x);
        self.min.y = self.min.y.min(p.y);
        self.max.x = self.max.x.max(p.x);
        self.max.y = self.max.y.max(p.y);
    }

    pub fn union(&self, other: &Rect) -> Rect {
        let mut r = *self;
        r.include(other.min);
        r.include(other.max);
        r
    }

    pub fn is_empty(&self) -> bool {
        !(self.min.x <= self.max.x && self.min.y <= self.max.y)
    }

    pub fn width(&self) -> f64 {
        (self.max.x - self.min.x).max(0.0)
    }

    pub fn height(&self) -> f64 {
        (self.max.y - self.min.y).max(0.0)
    }

    pub fn area(&self) -> f64 {
        if self.is_empty() {
            0.0
        } else {
            self.width() * self.height()
        }
    }

    /// Euclidean distance from `p` to the box (zero inside).
    #[inline]
    pub fn distance_to(&self, p: Point) -> f64 {
        let dx = (self.min.x - p.x).max(p.x - self.max.x).max(0.0);
        let dy = (self.min.y - p.y).max(p.y - self.max.y).max(0.0);
        (dx * dx + dy * dy).sqrt()
    }
}

/// A cubic Bézier curve given by its four control points.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CubicBez {
    pub p0: Point,
    pub p1: Point,
    pub p2: Point,
    pub p3: Point,
}

impl CubicBez {
    pub const fn new(p0: Point, p1: Point, p2: Point, p3: Point) -> Self {
        CubicBez { p0, p1, p2, p3 }
    }

    /// Bernstein weights of the four control points at `t`.
    #[inline]
    pub fn basis(t: f64) -> [f64; 4] {
        let mt = 1.0 - t;
        [mt * mt * mt, 3.0 * t * mt * mt, 3.0 * t * t * mt, t * t * t]
    }

    #[inline]
    pub fn eval(&self, t: f64) -> Point {
        let b = Self::basis(t);
        self.p0 * b[0] + self.p1 * b[1] + self.p2 * b[2] + self.p3 * b[3]
    }

    #[inline]
    pub fn deriv(&self, t: f64) -> Point {
        let mt = 1.0 - t;
        (self.p1 - self.p0) * (3.0 * mt * mt)
            + (self.p2 - self.p1) * (6.0 * mt * t)
            + (self.p3 - self.p2) * (3.0 * t * t)
    }

    #[inline]
    pub fn deriv2(&self, t: f64) -> Point {
        let a = self.p2 - self.p1 * 2.0 + self.p0;
        let b = self.p3 - self.p2 * 2.0 + self.p1;
        (a * (1.0 - t) + b * t) * 6.0
    }

    /// Splits at `t` with de Casteljau's construction.
    pub fn split(&self, t: f64) -> (CubicBez, CubicBez) {
        let p01 = self.p0.lerp(self.p1, t);
        let p12 = self.p1.lerp(self.p2, t);
        let p23 = self.p2.lerp(self.p3, t);
        let p012 = p01.lerp(p12, t);
        let p123 = p12.lerp(p23, t);
        let mid = p012.lerp(p123, t);
        (
            CubicBez::new(self.p0, p01, p012, mid),
            CubicBez::new(mid, p123, p23, self.p3),
        )
    }

    /// The portion of the curve between parameters `t0 < t1`.
    pub fn subsegment(&self, t0: f64, t1: f64) -> CubicBez {
        if t1 <= t0 {
            let p = self.eval(t0);
            return CubicBez::new(p, p, p, p);
        }
        let (_, right) = self.split(t0);
        if t0 >= 1.0 {
            return right;
        }
        let u = ((t1 - t0) / (1.0 - t0)).clamp(0.0, 1.0);
        right.split(u).0
    }

    pub fn control_box(&self) -> Rect {
        Rect::from_points([&self.p0, &self.p1, &self.p2, &self.p3])
    }

    /// Uniform subdivision count so that the chord error stays below `tolerance`.
    pub fn flatten_count(&self, tolerance: f64) -> usize {
        let dd1 = (self.p2 - self.p1 * 2.0 + self.p0).length();
        let dd2 = (self.p3 - self.p2 * 2.0 + self.p1).length();
        let dd = dd1.max(dd2) * 6.0;
        // Chord error of a uniform subdivision is bounded by |B''|max / (8 n^2).
        let n = (dd / (8.0 * tolerance.max(1e-12))).sqrt().ceil();
        (n as usize).clamp(1, 4096)
    }
}

/// Shoelace signed area (positive for counter-clockwise, y-up).
pub fn polygon_area(points: &[Point]) -> f64 {
    if points.len() < 3 {
        return 0.0;
    }
    let mut acc = 0.0;
    for i in 0..points.len() {
        let a = points[i];
        let b = points[(i + 1) % points.len()];
        acc += a.cross(b);
    }
    0.5 * acc
}
