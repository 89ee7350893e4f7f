//! Removal of small loops formed where a contour crosses itself.

use serde::{Deserialize, Serialize};

use crate::geom::{polygon_area, Point, Rect};
use crate::glyph::{
    from_pathset, pathset_from_commands, validate, Glyph, PathSet, Segment, Subpath, L_MAX,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CleanupConfig {
    /// Chord tolerance of the polylines searched for crossings, in EM.
    pub tolerance: f64,
    /// Loops smaller than this fraction of the glyph's bounding-box area are
    /// removed.
    pub area_fraction: f64,
    pub max_excisions: usize,
}

impl Default for CleanupConfig {
    fn default() -> Self {
        CleanupConfig {
            tolerance: 1e-3,
            area_fraction: 0.005,
            max_excisions: 8,
        }
    }
}

impl CleanupConfig {
    /// Loop-area threshold for `glyph`, in square EM.
    pub fn threshold(&self, glyph: &Glyph) -> f64 {
        let ps = pathset_from_commands(&glyph.commands);
        let mut bbox = Rect::EMPTY;
        for sp in &ps.subpaths {
            for q in sp.flatten(self.tolerance) {
                bbox.include(q);
            }
        }
        if bbox.is_empty() {
            0.0
        } else {
            self.area_fraction * bbox.area()
        }
    }
}

/// A proper crossing of polyline edges `i < j` at `point`.
#[derive(Clone, Copy, Debug)]
struct Crossing {
    i: usize,
    j: usize,
    s: f64,
    u: f64,
    point: Point,
    /// Area of `point, v[i+1] .. v[j]`, the part between the two edges.
    inner: f64,
    /// Area of the rest of the contour.
    outer: f64,
}

impl Crossing {
    fn loop_area(&self) -> f64 {
        self.inner.abs().min(self.outer.abs())
    }
}

fn crossings(poly: &[Point]) -> Vec<Crossing> {
    let m = poly.len().saturating_sub(1);
    let total = polygon_area(&poly[..m]);
    let mut out = Vec::new();
    for i in 0..m {
        let (a, r) = (poly[i], poly[i + 1] - poly[i]);
        for j in i + 2..m {
            if i == 0 && j == m - 1 {
                continue;
            }
            let (c, q) = (poly[j], poly[j + 1] - poly[j]);
            let d = r.cross(q);
            if d.abs() < 1e-300 {
                continue;
            }
            let s = (c - a).cross(q) / d;
            let u = (c - a).cross(r) / d;
            const E: f64 = 1e-12;
            if !(s > E && s < 1.0 - E && u > E && u < 1.0 - E) {
                continue;
            }
            let point = a + r * s;
            let mut lobe = Vec::with_capacity(j - i + 1);
            lobe.push(point);
            lobe.extend_from_slice(&poly[i + 1..=j]);
            let inner = polygon_area(&lobe);
            out.push(Crossing {
                i,
                j,
                s,
                u,
                point,
                inner,
                outer: total - inner,
            });
        }
    }
    out
}

/// Number of proper self-crossings, over all contours of `glyph`, whose
/// smaller enclosed loop has area below `threshold`.
pub fn count_small_loops(glyph: &Glyph, tolerance: f64, threshold: f64) -> usize {
    pathset_from_commands(&glyph.commands)
        .subpaths
        .iter()
        .map(|sp| {
            crossings(&sp.flatten(tolerance))
                .iter()
                .filter(|c| c.loop_area() < threshold)
                .count()
        })
        .sum()
}

/// Part of segment `seg` of `sp` between parameters `t0 < t1`, with its
/// end replaced by `to`.
fn piece(sp: &Subpath, seg: usize, t0: f64, t1: f64, to: Point) -> Segment {
    match sp.segments[seg] {
        Segment::Line { .. } => Segment::Line { end: to },
        s => {
            let c = s.to_cubic(sp.segment_start(seg)).subsegment(t0, t1);
            Segment::Cubic {
                c1: c.p1,
                c2: c.p2,
                end: to,
            }
        }
    }
}

/// Segment and parameter of the point at fraction `s` along polyline edge
/// `e`.
fn locate(tags: &[(Point, usize, f64)], e: usize, s: f64) -> (usize, f64) {
    let seg = tags[e + 1].1;
    let t0 = if tags[e].1 == seg { tags[e].2 } else { 0.0 };
    let t1 = tags[e + 1].2;
    (seg, t0 + (t1 - t0) * s)
}

fn excise(sp: &Subpath, tags: &[(Point, usize, f64)], c: &Crossing) -> Subpath {
    let (sa, ta) = locate(tags, c.i, c.s);
    let (sb, tb) = locate(tags, c.j, c.u);
    let x = c.point;
    const MIN_SPAN: f64 = 1e-12;
    if c.inner.abs() <= c.outer.abs() {
        // Drop everything between the two crossing edges.
        let mut out = Subpath::new(sp.start);
        out.segments.extend_from_slice(&sp.segments[..sa]);
        if ta > MIN_SPAN {
            out.segments.push(piece(sp, sa, 0.0, ta, x));
        } else if let Some(last) = out.segments.last_mut() {
            *last = last.with_end(x);
        } else {
            out.start = x;
        }
        if tb < 1.0 - MIN_SPAN {
            let end = sp.segments[sb].end();
            out.segments.push(piece(sp, sb, tb, 1.0, end));
        }
        out.segments.extend_from_slice(&sp.segments[sb + 1..]);
        out
    } else {
        // Keep only the loop between the two crossing edges.
        let mut out = Subpath::new(x);
        if sa == sb {
            out.segments.push(piece(sp, sa, ta, tb, x));
            return out;
        }
        if ta < 1.0 - MIN_SPAN {
            let end = sp.segments[sa].end();
            out.segments.push(piece(sp, sa, ta, 1.0, end));
        }
        out.segments.extend_from_slice(&sp.segments[sa + 1..sb]);
        if tb > MIN_SPAN {
            out.segments.push(piece(sp, sb, 0.0, tb, x));
        } else if let Some(last) = out.segments.last_mut() {
            *last = last.with_end(x);
        }
        out
    }
}

/// Repeatedly cuts out the smallest self-intersection loop whose area is
/// below the configured fraction of the glyph's bounding box, splitting
/// the crossing segments at the intersection and reconnecting there. Loops
/// at or above the threshold are left alone. Returns the input unchanged if
/// the result would not be a valid glyph.
pub fn remove_intersection_artifacts(glyph: &Glyph, config: &CleanupConfig) -> Glyph {
    let threshold = config.threshold(glyph);
    let mut ps = pathset_from_commands(&glyph.commands);
    let mut changed = false;
    for _ in 0..config.max_excisions {
        let mut worst: Option<(usize, Crossing)> = None;
        for (k, sp) in ps.subpaths.iter().enumerate() {
            for c in crossings(&sp.flatten(config.tolerance)) {
                let a = c.loop_area();
                if a < threshold && worst.is_none_or(|(_, w)| a < w.loop_area()) {
                    worst = Some((k, c));
                }
            }
        }
        let Some((k, c)) = worst else { break };
        let sp = &ps.subpaths[k];
        let tags = sp.flatten_tagged(config.tolerance);
        let cut = excise(sp, &tags, &c);
        if cut.segments.is_empty() {
            ps.subpaths.remove(k);
        } else {
            ps.subpaths[k] = cut;
        }
        changed = true;
    }
    if !changed {
        return glyph.clone();
    }
    ps = PathSet::new(
        ps.subpaths
            .into_iter()
            .filter(|s| !s.segments.is_empty())
            .collect(),
    );
    match from_pathset(&ps, glyph.char_class, L_MAX) {
        Ok(g) if validate(&g).is_valid() => g,
        _ => {
            log::debug!("loop removal produced an invalid glyph; keeping the input");
            glyph.clone()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::glyph::Command;

    fn poly(points: &[(f64, f64)]) -> Glyph {
        let mut pen = Point::ZERO;
        let mut cmds = Vec::new();
        for (n, &(x, y)) in points.iter().chain(std::iter::once(&points[0])).enumerate() {
            let q = Point::new(x, y);
            cmds.push(if n == 0 {
                Command::move_by(q - pen)
            } else {
                Command::line_by(q - pen)
            });
            pen = q;
        }
        cmds.push(Command::end());
        Glyph::new(0, cmds)
    }

    #[test]
    fn convex_unchanged() {
        let g = poly(&[(0.1, 0.1), (0.9, 0.1), (0.9, 0.9), (0.1, 0.9)]);
        assert_eq!(
            remove_intersection_artifacts(&g, &CleanupConfig::default()),
            g
        );
    }

    #[test]
    fn equal_lobes_unchanged() {
        let g = poly(&[(0.1, 0.1), (0.9, 0.9), (0.9, 0.1), (0.1, 0.9)]);
        let cfg = CleanupConfig::default();
        assert_eq!(count_small_loops(&g, cfg.tolerance, cfg.threshold(&g)), 0);
        assert_eq!(remove_intersection_artifacts(&g, &cfg), g);
    }

    #[test]
    fn small_lobe_removed() {
        // A square whose right edge makes a tiny twisted loop.
        let g = poly(&[
            (0.1, 0.1),
            (0.9, 0.1),
            (0.9, 0.5),
            (0.93, 0.53),
            (0.93, 0.5),
            (0.9, 0.53),
            (0.9, 0.9),
            (0.1, 0.9),
        ]);
        let cfg = CleanupConfig::default();
        let theta = cfg.threshold(&g);
        assert_eq!(count_small_loops(&g, cfg.tolerance, theta), 1);
        let out = remove_intersection_artifacts(&g, &cfg);
        assert_ne!(out, g);
        assert!(out.is_valid());
        assert_eq!(count_small_loops(&out, cfg.tolerance, theta), 0);
        assert!(out.max_closure_gap() < 1e-9);
        let ps = pathset_from_commands(&out.commands);
        let pts = ps.subpaths[0].flatten(1e-3);
        assert!(pts.iter().all(|q| q.x <= 0.915 + 1e-12), "{pts:?}");
    }

    #[test]
    fn start_inside_small_loop() {
        // The contour starts on the small lobe; the large part is kept.
        let g = poly(&[
            (0.93, 0.53),
            (0.93, 0.5),
            (0.9, 0.53),
            (0.9, 0.9),
            (0.1, 0.9),
            (0.1, 0.1),
            (0.9, 0.1),
            (0.9, 0.5),
        ]);
        let cfg = CleanupConfig::default();
        let theta = cfg.threshold(&g);
        let out = remove_intersection_artifacts(&g, &cfg);
        assert!(out.is_valid());
        assert_eq!(count_small_loops(&out, cfg.tolerance, theta), 0);
        let area = pathset_from_commands(&out.commands).subpaths[0].signed_area(1e-3);
        assert!((area.abs() - 0.64).abs() < 0.01, "{area}");
    }
}
