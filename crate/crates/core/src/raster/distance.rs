//! Closest-point queries and scanline crossings for lines and cubics.
//!
//! All distance routines work on control points already expressed relative
//! to the query point, which keeps results bit-identical under translations
//! by exactly representable offsets.

use crate::geom::{CubicBez, Point};
use crate::glyph::{PathSet, Segment};

/// Number of uniform parameter samples used to seed the cubic Newton solve.
pub const CUBIC_SEEDS: usize = 32;
/// Maximum Newton iterations on the closest-point condition.
pub const NEWTON_ITERS: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Closest {
    pub dist: f64,
    pub t: f64,
    /// Closest point minus the query point.
    pub offset: Point,
}

/// Closest point on the segment `a -> b`, both given relative to the query.
#[inline]
pub fn closest_on_line(a: Point, b: Point) -> Closest {
    let d = b - a;
    let len2 = d.length_squared();
    let t = if len2 > 0.0 {
        (-a.dot(d) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let offset = a + d * t;
    Closest {
        dist: offset.length(),
        t,
        offset,
    }
}

/// Parameter-space samples of a cubic, stored relative to its first control
/// point.
#[derive(Clone, Debug)]
pub struct CubicSeeds {
    pub rel: [Point; CUBIC_SEEDS],
}

impl CubicSeeds {
    pub fn new(c: &CubicBez) -> Self {
        let r1 = c.p1 - c.p0;
        let r2 = c.p2 - c.p0;
        let r3 = c.p3 - c.p0;
        let mut rel = [Point::ZERO; CUBIC_SEEDS];
        for (i, r) in rel.iter_mut().enumerate() {
            let t = seed_t(i);
            let w = CubicBez::basis(t);
            *r = r1 * w[1] + r2 * w[2] + r3 * w[3];
        }
        CubicSeeds { rel }
    }
}

#[inline]
fn seed_t(i: usize) -> f64 {
    i as f64 / (CUBIC_SEEDS - 1) as f64
}

/// Closest point on a cubic whose control points are given relative to the
/// query point. Every local minimum among the [`CUBIC_SEEDS`] samples is
/// polished by at most [`NEWTON_ITERS`] Newton steps on
/// `(B(t) - p) . B'(t) = 0` inside its neighbouring sample bracket, and the
/// nearest result wins.
pub fn closest_on_cubic(rel: &CubicBez, seeds: &CubicSeeds) -> Closest {
    let mut d2 = [0.0f64; CUBIC_SEEDS];
    for (d, s) in d2.iter_mut().zip(&seeds.rel) {
        *d = (*s + rel.p0).length_squared();
    }
    let mut best = Closest {
        dist: f64::INFINITY,
        t: 0.0,
        offset: Point::ZERO,
    };
    for i in 0..CUBIC_SEEDS {
        let left = i == 0 || d2[i] <= d2[i - 1];
        let right = i + 1 == CUBIC_SEEDS || d2[i] < d2[i + 1];
        if !(left && right) {
            continue;
        }
        let c = polish(rel, seeds, i, d2[i]);
        if c.dist < best.dist {
            best = c;
        }
    }
    best
}

fn polish(rel: &CubicBez, seeds: &CubicSeeds, i: usize, seed_d2: f64) -> Closest {
    let step = 1.0 / (CUBIC_SEEDS - 1) as f64;
    let t0 = seed_t(i);
    let lo = (t0 - step).max(0.0);
    let hi = (t0 + step).min(1.0);
    let mut t = t0;
    for _ in 0..NEWTON_ITERS {
        let q = rel.eval(t);
        let d1 = rel.deriv(t);
        let dd = rel.deriv2(t);
        let f = q.dot(d1);
        let fp = d1.dot(d1) + q.dot(dd);
        if !(fp > 0.0) {
            break;
        }
        let nt = (t - f / fp).clamp(lo, hi);
        let done = (nt - t).abs() < 1e-13;
        t = nt;
        if done {
            break;
        }
    }
    let q = rel.eval(t);
    let d = q.length();
    let seed_d = seed_d2.sqrt();
    if d <= seed_d {
        Closest {
            dist: d,
            t,
            offset: q,
        }
    } else {
        Closest {
            dist: seed_d,
            t: t0,
            offset: seeds.rel[i] + rel.p0,
        }
    }
}

/// Appends the crossings of the horizontal line at height `y` with the segment
/// `a -> b` as `(x, direction)`; upward crossings count `+1`. The half-open
/// rule `min <= y < max` makes shared endpoints count once.
#[inline]
pub fn line_crossings(a: Point, b: Point, y: f64, out: &mut Vec<(f64, i32)>) {
    let dir = if a.y <= y && y < b.y {
        1
    } else if b.y <= y && y < a.y {
        -1
    } else {
        return;
    };
    let x = a.x + (y - a.y) * (b.x - a.x) / (b.y - a.y);
    out.push((x, dir));
}

/// Crossings of a cubic with the horizontal line at `y`, found exactly by
/// splitting the curve into y-monotone pieces and solving each one.
pub fn cubic_crossings(c: &CubicBez, y: f64, out: &mut Vec<(f64, i32)>) {
    let ymin = c.p0.y.min(c.p1.y).min(c.p2.y).min(c.p3.y);
    let ymax = c.p0.y.max(c.p1.y).max(c.p2.y).max(c.p3.y);
    if y < ymin || y > ymax {
        return;
    }
    // y(t) = a t^3 + b t^2 + c t + d
    let a = c.p3.y - 3.0 * c.p2.y + 3.0 * c.p1.y - c.p0.y;
    let b = 3.0 * (c.p2.y - 2.0 * c.p1.y + c.p0.y);
    let cc = 3.0 * (c.p1.y - c.p0.y);
    let mut breaks = [0.0f64; 4];
    let mut n = 1;
    for r in quadratic_roots(3.0 * a, 2.0 * b, cc) {
        if r > 0.0 && r < 1.0 {
            breaks[n] = r;
            n += 1;
        }
    }
    breaks[1..n].sort_by(|p, q| p.total_cmp(q));
    breaks[n] = 1.0;
    n += 1;

    let y_at = |t: f64| -> f64 {
        if t == 0.0 {
            c.p0.y
        } else if t == 1.0 {
            c.p3.y
        } else {
            c.eval(t).y
        }
    };
    for w in 0..n - 1 {
        let (ta, tb) = (breaks[w], breaks[w + 1]);
        let (ya, yb) = (y_at(ta), y_at(tb));
        let dir = if ya <= y && y < yb {
            1
        } else if yb <= y && y < ya {
            -1
        } else {
            continue;
        };
        let t = solve_monotone(|t| y_at(t) - y, ta, tb, ya - y);
        out.push((c.eval(t).x, dir));
    }
}

/// Real roots of `a x^2 + b x + c` (degenerate cases included).
fn quadratic_roots(a: f64, b: f64, c: f64) -> Vec<f64> {
    let scale = a.abs().max(b.abs()).max(c.abs());
    if scale == 0.0 {
        return Vec::new();
    }
    if a.abs() <= 1e-12 * scale {
        if b.abs() <= 1e-300 {
            return Vec::new();
        }
        return vec![-c / b];
    }
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return Vec::new();
    }
    let sq = disc.sqrt();
    let q = -0.5 * (b + b.signum() * sq);
    let mut r = vec![q / a];
    if q != 0.0 {
        r.push(c / q);
    }
    r
}

/// Root of a monotone function on `[lo, hi]` by bisection on the sign change.
fn solve_monotone(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, f_lo: f64) -> f64 {
    let lo_neg = f_lo < 0.0;
    for _ in 0..64 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return mid;
        }
        if (fm < 0.0) == lo_neg {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Distance from `point` to the nearest outline and the nonzero winding
/// number of the outlines around it (counter-clockwise contours count `+1`).
pub fn signed_distance_winding(point: Point, pathset: &PathSet) -> (f64, i32) {
    let mut best = f64::INFINITY;
    let mut crossings = Vec::new();
    for sp in &pathset.subpaths {
        for (i, seg) in sp.segments.iter().enumerate() {
            let start = sp.segment_start(i);
            match *seg {
                Segment::Line { end } => {
                    best = best.min(closest_on_line(start - point, end - point).dist);
                    line_crossings(start, end, point.y, &mut crossings);
                }
                Segment::Cubic { .. } => {
                    let c = seg.to_cubic(start);
                    let rel = CubicBez::new(c.p0 - point, c.p1 - point, c.p2 - point, c.p3 - point);
                    let seeds = CubicSeeds::new(&c);
                    best = best.min(closest_on_cubic(&rel, &seeds).dist);
                    cubic_crossings(&c, point.y, &mut crossings);
                }
            }
        }
    }
    let winding = crossings
        .iter()
        .filter(|(x, _)| *x > point.x)
        .map(|(_, d)| d)
        .sum();
    (best, winding)
}
