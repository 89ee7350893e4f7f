//! Absolute outline geometry and its conversion to and from command sequences.

use super::{validate, Command, CommandType, Glyph, CLOSE_EPSILON};
use crate::error::{Error, Result};
use crate::geom::{polygon_area, CubicBez, Point, Rect};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Segment {
    Line { end: Point },
    Cubic { c1: Point, c2: Point, end: Point },
}

impl Segment {
    pub fn end(&self) -> Point {
        match *self {
            Segment::Line { end } | Segment::Cubic { end, .. } => end,
        }
    }

    fn end_mut(&mut self) -> &mut Point {
        match self {
            Segment::Line { end } | Segment::Cubic { end, .. } => end,
        }
    }

    /// Same segment ending at `p`.
    pub fn with_end(mut self, p: Point) -> Segment {
        *self.end_mut() = p;
        self
    }

    pub fn is_line(&self) -> bool {
        matches!(self, Segment::Line { .. })
    }

    pub fn to_cubic(&self, start: Point) -> CubicBez {
        match *self {
            Segment::Line { end } => CubicBez::new(
                start,
                start.lerp(end, 1.0 / 3.0),
                start.lerp(end, 2.0 / 3.0),
                end,
            ),
            Segment::Cubic { c1, c2, end } => CubicBez::new(start, c1, c2, end),
        }
    }

    pub fn map(&self, f: impl Fn(Point) -> Point) -> Segment {
        match *self {
            Segment::Line { end } => Segment::Line { end: f(end) },
            Segment::Cubic { c1, c2, end } => Segment::Cubic {
                c1: f(c1),
                c2: f(c2),
                end: f(end),
            },
        }
    }
}

/// One closed contour: a start point and the segments that follow it.
#[derive(Clone, Debug, PartialEq)]
pub struct Subpath {
    pub start: Point,
    pub segments: Vec<Segment>,
}

impl Subpath {
    pub fn new(start: Point) -> Self {
        Subpath {
            start,
            segments: Vec::new(),
        }
    }

    pub fn end_point(&self) -> Point {
        self.segments.last().map_or(self.start, Segment::end)
    }

    pub fn gap(&self) -> f64 {
        self.end_point().distance(self.start)
    }

    /// Closes the contour: gaps above [`CLOSE_EPSILON`] get an explicit
    /// `Line` back to the start, smaller ones are snapped shut.
    pub fn close(&mut self) {
        let gap = self.gap();
        if gap == 0.0 || self.segments.is_empty() {
            return;
        }
        if gap <= CLOSE_EPSILON {
            let start = self.start;
            if let Some(last) = self.segments.last_mut() {
                *last.end_mut() = start;
            }
        } else {
            self.segments.push(Segment::Line { end: self.start });
        }
    }

    /// Start point of segment `i`.
    pub fn segment_start(&self, i: usize) -> Point {
        if i == 0 {
            self.start
        } else {
            self.segments[i - 1].end()
        }
    }

    pub fn control_box(&self) -> Rect {
        let mut r = Rect::EMPTY;
        r.include(self.start);
        for s in &self.segments {
            match *s {
                Segment::Line { end } => r.include(end),
                Segment::Cubic { c1, c2, end } => {
                    r.include(c1);
                    r.include(c2);
                    r.include(end);
                }
            }
        }
        r
    }

    /// Same contour traversed in the opposite direction.
    pub fn reversed(&self) -> Subpath {
        let mut out = Subpath::new(self.end_point());
        for i in (0..self.segments.len()).rev() {
            let start = self.segment_start(i);
            out.segments.push(match self.segments[i] {
                Segment::Line { .. } => Segment::Line { end: start },
                Segment::Cubic { c1, c2, .. } => Segment::Cubic {
                    c1: c2,
                    c2: c1,
                    end: start,
                },
            });
        }
        out
    }

    /// Polyline through the contour, starting at `start`, with chord error at
    /// most `tolerance`. Every vertex is tagged with `(segment, t)`.
    pub fn flatten_tagged(&self, tolerance: f64) -> Vec<(Point, usize, f64)> {
        let mut out = vec![(self.start, 0, 0.0)];
        for (i, seg) in self.segments.iter().enumerate() {
            match *seg {
                Segment::Line { end } => out.push((end, i, 1.0)),
                Segment::Cubic { .. } => {
                    let c = seg.to_cubic(self.segment_start(i));
                    let n = c.flatten_count(tolerance);
                    for k in 1..=n {
                        let t = k as f64 / n as f64;
                        let p = if k == n { c.p3 } else { c.eval(t) };
                        out.push((p, i, t));
                    }
                }
            }
        }
        out
    }

    pub fn flatten(&self, tolerance: f64) -> Vec<Point> {
        self.flatten_tagged(tolerance)
            .into_iter()
            .map(|(p, _, _)| p)
            .collect()
    }

    /// Signed area of the flattened contour (positive = counter-clockwise).
    pub fn signed_area(&self, tolerance: f64) -> f64 {
        let mut pts = self.flatten(tolerance);
        pts.pop();
        polygon_area(&pts)
    }
}

/// Absolute closed-outline geometry in EM units, y pointing up.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PathSet {
    pub subpaths: Vec<Subpath>,
}

impl PathSet {
    pub fn new(subpaths: Vec<Subpath>) -> Self {
        PathSet { subpaths }
    }

    pub fn is_empty(&self) -> bool {
        self.subpaths.is_empty()
    }

    pub fn segment_count(&self) -> usize {
        self.subpaths.iter().map(|s| s.segments.len()).sum()
    }

    pub fn control_box(&self) -> Rect {
        self.subpaths
            .iter()
            .fold(Rect::EMPTY, |acc, s| acc.union(&s.control_box()))
    }

    pub fn map_points(&self, f: impl Fn(Point) -> Point + Copy) -> PathSet {
        PathSet {
            subpaths: self
                .subpaths
                .iter()
                .map(|s| Subpath {
                    start: f(s.start),
                    segments: s.segments.iter().map(|seg| seg.map(f)).collect(),
                })
                .collect(),
        }
    }

    pub fn translate(&self, d: Point) -> PathSet {
        self.map_points(|p| p + d)
    }

    pub fn max_gap(&self) -> f64 {
        self.subpaths.iter().map(Subpath::gap).fold(0.0, f64::max)
    }

    /// Every point (start, controls, ends) in traversal order.
    pub fn points(&self) -> Vec<Point> {
        let mut out = Vec::new();
        for s in &self.subpaths {
            out.push(s.start);
            for seg in &s.segments {
                match *seg {
                    Segment::Line { end } => out.push(end),
                    Segment::Cubic { c1, c2, end } => out.extend([c1, c2, end]),
                }
            }
        }
        out
    }
}

/// Marks a control point that does not come from any command argument.
pub(crate) const NO_SLOT: u32 = u32::MAX;

/// A contour together with, for every segment, the argument slots its
/// control points were derived from: `[start, c1, c2, end]`, where slot
/// `3 * j + k` is coordinate pair `k` of command `j` in absolute form.
#[derive(Clone, Debug)]
pub(crate) struct TracedSubpath {
    pub subpath: Subpath,
    pub slots: Vec<[u32; 4]>,
}

/// Walks a command list the way [`pathset_from_commands`] does, keeping
/// track of which command argument produced every control point.
pub(crate) fn trace_commands(commands: &[Command]) -> Vec<TracedSubpath> {
    let mut out = Vec::new();
    let mut current: Option<(TracedSubpath, u32)> = None;
    let mut pen = Point::ZERO;
    let mut pen_slot = NO_SLOT;

    let finish = |cur: Option<(TracedSubpath, u32)>, out: &mut Vec<TracedSubpath>| {
        if let Some((mut tr, move_slot)) = cur {
            if tr.subpath.segments.is_empty() {
                return;
            }
            let before = tr.subpath.segments.len();
            let last_slot = tr.slots.last().map_or(NO_SLOT, |s| s[3]);
            tr.subpath.close();
            if tr.subpath.segments.len() > before {
                tr.slots.push([last_slot, NO_SLOT, NO_SLOT, move_slot]);
            }
            out.push(tr);
        }
    };

    for (j, c) in commands.iter().enumerate() {
        if !c.args.iter().all(|v| v.is_finite()) {
            continue;
        }
        let slot = |k: u32| 3 * j as u32 + k;
        match c.kind {
            CommandType::End => break,
            CommandType::Move => {
                finish(current.take(), &mut out);
                pen += c.pair(2);
                pen_slot = slot(2);
                current = Some((
                    TracedSubpath {
                        subpath: Subpath::new(pen),
                        slots: Vec::new(),
                    },
                    pen_slot,
                ));
            }
            CommandType::Line => {
                if let Some((tr, _)) = current.as_mut() {
                    pen += c.pair(2);
                    tr.subpath.segments.push(Segment::Line { end: pen });
                    tr.slots.push([pen_slot, NO_SLOT, NO_SLOT, slot(2)]);
                    pen_slot = slot(2);
                }
            }
            CommandType::Curve => {
                if let Some((tr, _)) = current.as_mut() {
                    let start = pen;
                    pen += c.pair(2);
                    tr.subpath.segments.push(Segment::Cubic {
                        c1: start + c.pair(0),
                        c2: start + c.pair(1),
                        end: pen,
                    });
                    tr.slots.push([pen_slot, slot(0), slot(1), slot(2)]);
                    pen_slot = slot(2);
                }
            }
        }
    }
    finish(current, &mut out);
    out
}

/// Builds closed outlines from an arbitrary command list without failing:
/// commands after the first `End` and drawing commands before the first
/// `Move` are ignored, commands with non-finite arguments are skipped, open
/// contours are closed with a `Line`, and contours without segments are
/// dropped.
pub fn pathset_from_commands(commands: &[Command]) -> PathSet {
    PathSet {
        subpaths: trace_commands(commands)
            .into_iter()
            .map(|t| t.subpath)
            .collect(),
    }
}

/// Absolute outlines of a valid glyph. Pen positions are prefix sums of the
/// relative displacements; each `Move` opens a new contour and open contours
/// are closed with an inserted `Line`.
pub fn to_pathset(glyph: &Glyph) -> Result<PathSet> {
    let report = validate(glyph);
    if !report.is_valid() {
        return Err(Error::InvalidGlyph(report));
    }
    Ok(pathset_from_commands(&glyph.commands))
}

/// Relative command form of `pathset`; the closing segment of every contour is
/// emitted explicitly and the sequence ends with `End`.
pub fn from_pathset(pathset: &PathSet, char_class: usize, l_max: usize) -> Result<Glyph> {
    let len = pathset.subpaths.len() + pathset.segment_count() + 1;
    if len > l_max {
        return Err(Error::TooLong { len, max: l_max });
    }
    let mut commands = Vec::with_capacity(len);
    let mut pen = Point::ZERO;
    for sp in &pathset.subpaths {
        commands.push(Command::move_by(sp.start - pen));
        pen = sp.start;
        for seg in &sp.segments {
            match *seg {
                Segment::Line { end } => commands.push(Command::line_by(end - pen)),
                Segment::Cubic { c1, c2, end } => {
                    commands.push(Command::curve_by(c1 - pen, c2 - pen, end - pen))
                }
            }
            pen = seg.end();
        }
    }
    commands.push(Command::end());
    Ok(Glyph::new(char_class, commands))
}

/// Maps font units into the unit EM box:
/// `x' = x / units_per_em`, `y' = (y - descender) / (ascender - descender)`.
pub fn normalize(
    pathset: &PathSet,
    units_per_em: f64,
    ascender: f64,
    descender: f64,
) -> Result<PathSet> {
    if !(units_per_em > 0.0) || !units_per_em.is_finite() {
        return Err(Error::DegenerateMetrics(format!(
            "units_per_em must be positive, got {units_per_em}"
        )));
    }
    let span = ascender - descender;
    if !(span > 0.0) || !span.is_finite() {
        return Err(Error::DegenerateMetrics(format!(
            "ascender {ascender} must exceed descender {descender}"
        )));
    }
    Ok(pathset.map_points(|p| Point::new(p.x / units_per_em, (p.y - descender) / span)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(x: f64, y: f64) -> Point {
        Point::new(x, y)
    }

    #[test]
    fn prefix_sums_and_auto_close() {
        let g = Glyph::new(
            0,
            vec![
                Command::move_by(p(0.1, 0.1)),
                Command::line_by(p(0.2, 0.0)),
                Command::line_by(p(0.0, 0.2)),
                Command::end(),
            ],
        );
        let ps = to_pathset(&g).unwrap();
        assert_eq!(ps.subpaths.len(), 1);
        let sp = &ps.subpaths[0];
        assert_eq!(sp.start, p(0.1, 0.1));
        let ends: Vec<Point> = sp.segments.iter().map(Segment::end).collect();
        assert!(ends[0].distance(p(0.3, 0.1)) < 1e-15);
        assert!(ends[1].distance(p(0.3, 0.3)) < 1e-15);
        assert_eq!(ends[2], p(0.1, 0.1));
        assert_eq!(sp.segments.len(), 3);
        assert!(sp.segments[2].is_line());
    }

    #[test]
    fn exactly_closed_gets_no_extra_segment() {
        let g = Glyph::new(
            0,
            vec![
                Command::move_by(p(0.25, 0.25)),
                Command::line_by(p(0.5, 0.0)),
                Command::line_by(p(0.0, 0.5)),
                Command::line_by(p(-0.5, -0.5)),
                Command::end(),
            ],
        );
        let ps = to_pathset(&g).unwrap();
        assert_eq!(ps.subpaths[0].segments.len(), 3);
    }

    #[test]
    fn invalid_glyph_rejected() {
        let g = Glyph::new(0, vec![Command::line_by(p(0.1, 0.0)), Command::end()]);
        assert!(matches!(to_pathset(&g), Err(Error::InvalidGlyph(_))));
    }

    #[test]
    fn unit_square_to_commands() {
        let sq = PathSet::new(vec![Subpath {
            start: p(0.0, 0.0),
            segments: vec![
                Segment::Line { end: p(1.0, 0.0) },
                Segment::Line { end: p(1.0, 1.0) },
                Segment::Line { end: p(0.0, 1.0) },
                Segment::Line { end: p(0.0, 0.0) },
            ],
        }]);
        let g = from_pathset(&sq, 0, 70).unwrap();
        use CommandType::*;
        assert_eq!(g.kinds(), vec![Move, Line, Line, Line, Line, End]);
        assert_eq!(to_pathset(&g).unwrap(), sq);
        assert!(matches!(
            from_pathset(&sq, 0, 5),
            Err(Error::TooLong { len: 6, max: 5 })
        ));
    }

    #[test]
    fn two_subpaths_two_moves() {
        let tri = |o: Point| Subpath {
            start: o,
            segments: vec![
                Segment::Line {
                    end: o + p(0.2, 0.0),
                },
                Segment::Cubic {
                    c1: o + p(0.25, 0.1),
                    c2: o + p(0.2, 0.2),
                    end: o + p(0.1, 0.2),
                },
                Segment::Line { end: o },
            ],
        };
        let ps = PathSet::new(vec![tri(p(0.1, 0.1)), tri(p(0.6, 0.5))]);
        let g = from_pathset(&ps, 4, 70).unwrap();
        assert_eq!(g.count(CommandType::Move), 2);
        let back = to_pathset(&g).unwrap();
        for (a, b) in back.points().iter().zip(ps.points()) {
            assert!(a.distance(b) < 1e-12);
        }
    }

    #[test]
    fn normalize_maps_metrics() {
        let ps = PathSet::new(vec![Subpath {
            start: p(500.0, 300.0),
            segments: vec![
                Segment::Line {
                    end: p(0.0, -200.0),
                },
                Segment::Line {
                    end: p(500.0, 300.0),
                },
            ],
        }]);
        let n = normalize(&ps, 1000.0, 800.0, -200.0).unwrap();
        assert_eq!(n.subpaths[0].start, p(0.5, 0.5));
        assert_eq!(n.subpaths[0].segments[0].end(), p(0.0, 0.0));
        assert_eq!(normalize(&ps, 1.0, 1.0, 0.0).unwrap(), ps);
        assert!(matches!(
            normalize(&ps, 1000.0, 100.0, 100.0),
            Err(Error::DegenerateMetrics(_))
        ));
        assert!(normalize(&ps, 0.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn reversal_flips_area() {
        let sp = Subpath {
            start: p(0.0, 0.0),
            segments: vec![
                Segment::Line { end: p(1.0, 0.0) },
                Segment::Cubic {
                    c1: p(1.2, 0.5),
                    c2: p(1.0, 1.0),
                    end: p(0.5, 1.0),
                },
                Segment::Line { end: p(0.0, 0.0) },
            ],
        };
        let a = sp.signed_area(1e-4);
        assert!(a > 0.0);
        let r = sp.reversed();
        assert!((r.signed_area(1e-4) + a).abs() < 1e-9);
        assert_eq!(r.reversed(), sp);
    }

    #[test]
    fn lenient_conversion_skips_junk() {
        let cmds = vec![
            Command::line_by(p(0.3, 0.3)),
            Command::move_by(p(0.1, 0.1)),
            Command::move_by(p(0.1, 0.1)),
            Command::line_by(p(0.2, 0.0)),
            Command::line_by(p(0.0, 0.2)),
        ];
        let ps = pathset_from_commands(&cmds);
        assert_eq!(ps.subpaths.len(), 1);
        assert_eq!(ps.subpaths[0].start, p(0.2, 0.2));
        assert_eq!(ps.subpaths[0].segments.len(), 3);
    }
}
