//! Pixel-space outline geometry and the per-row kernels shared by the
//! renderers and the gradient pass.

use super::distance::{
    closest_on_cubic, closest_on_line, cubic_crossings, line_crossings, CubicSeeds,
};
use super::PREFILTER_CUTOFF;
use crate::geom::{CubicBez, Point, Rect};
use crate::glyph::trace_commands;
use crate::glyph::{PathSet, Segment, Subpath, NO_SLOT};
use crate::Command;

/// One outline segment in pixel coordinates (y down).
pub(crate) struct PixSeg {
    pub curve: CubicBez,
    pub is_line: bool,
    pub seeds: Option<Box<CubicSeeds>>,
    pub bbox: Rect,
    pub slots: [u32; 4],
}

/// Nearest-segment query result for one pixel centre.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Hit {
    pub dist: f64,
    pub seg: u32,
    pub t: f64,
    /// Closest point minus pixel centre.
    pub offset: Point,
}

impl Hit {
    pub const MISS: Hit = Hit {
        dist: f64::INFINITY,
        seg: u32::MAX,
        t: 0.0,
        offset: Point::ZERO,
    };

    pub fn is_miss(&self) -> bool {
        self.seg == u32::MAX
    }
}

#[derive(Default)]
pub(crate) struct RowScratch {
    cands: Vec<u32>,
    crossings: Vec<(f64, i32)>,
}

pub(crate) struct Scene {
    pub width: usize,
    pub height: usize,
    pub segs: Vec<PixSeg>,
}

impl Scene {
    #[inline]
    pub fn to_px(p: Point, width: usize, height: usize) -> Point {
        Point::new(p.x * width as f64, (1.0 - p.y) * height as f64)
    }

    fn push_subpath(&mut self, sp: &Subpath, slots: Option<&[[u32; 4]]>) {
        let (w, h) = (self.width, self.height);
        for (i, seg) in sp.segments.iter().enumerate() {
            let start = Self::to_px(sp.segment_start(i), w, h);
            let s = slots.map_or([NO_SLOT; 4], |s| s[i]);
            let px = match *seg {
                Segment::Line { end } => {
                    let end = Self::to_px(end, w, h);
                    PixSeg {
                        curve: CubicBez::new(start, start, end, end),
                        is_line: true,
                        seeds: None,
                        bbox: Rect::from_points([&start, &end]),
                        slots: s,
                    }
                }
                Segment::Cubic { c1, c2, end } => {
                    let curve = CubicBez::new(
                        start,
                        Self::to_px(c1, w, h),
                        Self::to_px(c2, w, h),
                        Self::to_px(end, w, h),
                    );
                    PixSeg {
                        curve,
                        is_line: false,
                        seeds: Some(Box::new(CubicSeeds::new(&curve))),
                        bbox: curve.control_box(),
                        slots: s,
                    }
                }
            };
            if px.curve.p0.is_finite()
                && px.curve.p1.is_finite()
                && px.curve.p2.is_finite()
                && px.curve.p3.is_finite()
            {
                self.segs.push(px);
            }
        }
    }

    pub fn from_pathset(ps: &PathSet, width: usize, height: usize) -> Scene {
        let mut scene = Scene {
            width,
            height,
            segs: Vec::new(),
        };
        for sp in &ps.subpaths {
            scene.push_subpath(sp, None);
        }
        scene
    }

    /// Scene of a (possibly invalid) command list, with argument slots.
    pub fn from_commands(commands: &[Command], width: usize, height: usize) -> Scene {
        let mut scene = Scene {
            width,
            height,
            segs: Vec::new(),
        };
        for tr in trace_commands(commands) {
            scene.push_subpath(&tr.subpath, Some(&tr.slots));
        }
        scene
    }

    fn crossings_at(&self, y: f64, out: &mut Vec<(f64, i32)>) {
        out.clear();
        for s in &self.segs {
            if y < s.bbox.min.y || y > s.bbox.max.y {
                continue;
            }
            if s.is_line {
                line_crossings(s.curve.p0, s.curve.p3, y, out);
            } else {
                cubic_crossings(&s.curve, y, out);
            }
        }
        out.sort_by(|a, b| a.0.total_cmp(&b.0));
    }

    /// Nearest segment within `band` and nonzero-rule inside flag for every
    /// pixel centre of row `j`.
    pub fn row(
        &self,
        j: usize,
        band: f64,
        scratch: &mut RowScratch,
        hits: &mut [Hit],
        inside: &mut [bool],
    ) {
        let y = j as f64 + 0.5;

        self.crossings_at(y, &mut scratch.crossings);
        let mut total: i32 = scratch.crossings.iter().map(|c| c.1).sum();
        let mut next = 0;
        for (i, flag) in inside.iter_mut().enumerate() {
            let x = i as f64 + 0.5;
            while next < scratch.crossings.len() && scratch.crossings[next].0 <= x {
                total -= scratch.crossings[next].1;
                next += 1;
            }
            *flag = total != 0;
        }

        scratch.cands.clear();
        for (k, s) in self.segs.iter().enumerate() {
            if y >= s.bbox.min.y - band && y <= s.bbox.max.y + band {
                scratch.cands.push(k as u32);
            }
        }
        for (i, hit) in hits.iter_mut().enumerate() {
            let p = Point::new(i as f64 + 0.5, y);
            let mut best = Hit::MISS;
            best.dist = band;
            for &k in &scratch.cands {
                let s = &self.segs[k as usize];
                if s.bbox.distance_to(p) >= best.dist {
                    continue;
                }
                let c = if s.is_line {
                    closest_on_line(s.curve.p0 - p, s.curve.p3 - p)
                } else {
                    let rel = CubicBez::new(
                        s.curve.p0 - p,
                        s.curve.p1 - p,
                        s.curve.p2 - p,
                        s.curve.p3 - p,
                    );
                    closest_on_cubic(&rel, s.seeds.as_ref().unwrap())
                };
                if c.dist < best.dist {
                    best = Hit {
                        dist: c.dist,
                        seg: k,
                        t: c.t,
                        offset: c.offset,
                    };
                }
            }
            *hit = best;
        }
    }

    /// Box-filtered inside coverage of row `j` from `k x k` samples per pixel.
    pub fn oracle_row(&self, j: usize, k: usize, scratch: &mut RowScratch, out: &mut [f64]) {
        let mut counts = vec![0u32; out.len()];
        let kf = k as f64;
        for s in 0..k {
            let y = j as f64 + (s as f64 + 0.5) / kf;
            self.crossings_at(y, &mut scratch.crossings);
            let mut total: i32 = scratch.crossings.iter().map(|c| c.1).sum();
            let mut next = 0;
            for (i, count) in counts.iter_mut().enumerate() {
                for u in 0..k {
                    let x = i as f64 + (u as f64 + 0.5) / kf;
                    while next < scratch.crossings.len() && scratch.crossings[next].0 <= x {
                        total -= scratch.crossings[next].1;
                        next += 1;
                    }
                    if total != 0 {
                        *count += 1;
                    }
                }
            }
        }
        let n = (k * k) as f64;
        for (o, c) in out.iter_mut().zip(counts) {
            *o = c as f64 / n;
        }
    }
}

/// Signed distance to coverage: a logistic whose kernel has standard
/// deviation `sigma` pixels, cut off at [`PREFILTER_CUTOFF`] scales and
/// renormalized so coverage reaches exactly 0 and 1 at the cutoff.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Prefilter {
    pub scale: f64,
    pub band: f64,
    offset: f64,
    norm: f64,
}

#[inline]
fn logistic(u: f64) -> f64 {
    1.0 / (1.0 + u.exp())
}

impl Prefilter {
    pub fn new(sigma: f64) -> Self {
        let scale = sigma * 3f64.sqrt() / std::f64::consts::PI;
        let offset = logistic(PREFILTER_CUTOFF);
        Prefilter {
            scale,
            band: PREFILTER_CUTOFF * scale,
            offset,
            norm: 1.0 / (1.0 - 2.0 * offset),
        }
    }

    /// Coverage at a pixel whose nearest outline is `dist` pixels away.
    #[inline]
    pub fn value(&self, inside: bool, dist: f64) -> f64 {
        if dist >= self.band {
            return if inside { 1.0 } else { 0.0 };
        }
        let sd = if inside { -dist } else { dist };
        ((logistic(sd / self.scale) - self.offset) * self.norm).clamp(0.0, 1.0)
    }

    /// Coverage and its derivative with respect to the signed distance.
    #[inline]
    pub fn value_and_slope(&self, inside: bool, dist: f64) -> (f64, f64) {
        if dist >= self.band {
            return (if inside { 1.0 } else { 0.0 }, 0.0);
        }
        let sd = if inside { -dist } else { dist };
        let s = logistic(sd / self.scale);
        let v = ((s - self.offset) * self.norm).clamp(0.0, 1.0);
        (v, -s * (1.0 - s) * self.norm / self.scale)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prefilter_is_continuous_at_cutoff() {
        let f = Prefilter::new(0.7);
        let eps = 1e-9;
        assert!(f.value(false, f.band - eps) < 1e-9);
        assert!(f.value(true, f.band - eps) > 1.0 - 1e-9);
        assert!((f.value(false, 0.0) - 0.5).abs() < 1e-15);
        assert_eq!(f.value(false, f.band), 0.0);
    }

    #[test]
    fn prefilter_slope_matches_finite_difference() {
        let f = Prefilter::new(0.7);
        for &(inside, d) in &[(false, 0.3), (true, 0.8), (false, 2.0), (true, 0.01)] {
            let (_, slope) = f.value_and_slope(inside, d);
            let sd = if inside { -d } else { d };
            let g = |sd: f64| f.value(sd < 0.0, sd.abs());
            let fd = (g(sd + 1e-6) - g(sd - 1e-6)) / 2e-6;
            assert!((slope - fd).abs() < 1e-6, "{slope} vs {fd}");
        }
    }
}
