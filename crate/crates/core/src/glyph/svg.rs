//! SVG path-data subset: `M L H V C S Q T Z` (absolute and relative).
//!
//! Coordinates are taken as-is, in the glyph's own y-up system. `H`/`V` lower
//! to lines, `S`/`T` expand by reflecting the previous control point, and
//! quadratics are degree-elevated to cubics. Arcs are rejected.

use serde::{Deserialize, Serialize};

use super::path::{PathSet, Segment, Subpath};
use crate::error::{Error, Result};
use crate::geom::Point;

/// Fill rule the source outlines were authored for. Outlines intended for
/// even-odd filling are re-oriented so that the nonzero rule fills them the
/// same way.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FillRule {
    #[default]
    NonZero,
    EvenOdd,
}

struct Lexer<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn skip_separators(&mut self) {
        while self.pos < self.bytes.len()
            && (self.bytes[self.pos].is_ascii_whitespace() || self.bytes[self.pos] == b',')
        {
            self.pos += 1;
        }
    }

    fn at_end(&mut self) -> bool {
        self.skip_separators();
        self.pos >= self.bytes.len()
    }

    fn error(&self, offset: usize, message: impl Into<String>) -> Error {
        Error::Parse {
            offset,
            message: message.into(),
        }
    }

    fn number(&mut self) -> Result<f64> {
        self.skip_separators();
        let start = self.pos;
        let b = self.bytes;
        let mut i = self.pos;
        if i < b.len() && (b[i] == b'+' || b[i] == b'-') {
            i += 1;
        }
        let mut digits = 0;
        while i < b.len() && b[i].is_ascii_digit() {
            i += 1;
            digits += 1;
        }
        if i < b.len() && b[i] == b'.' {
            i += 1;
            while i < b.len() && b[i].is_ascii_digit() {
                i += 1;
                digits += 1;
            }
        }
        if digits == 0 {
            return Err(self.error(start, "expected a number"));
        }
        if i < b.len() && (b[i] == b'e' || b[i] == b'E') {
            let mut j = i + 1;
            if j < b.len() && (b[j] == b'+' || b[j] == b'-') {
                j += 1;
            }
            let exp_start = j;
            while j < b.len() && b[j].is_ascii_digit() {
                j += 1;
            }
            if j == exp_start {
                return Err(self.error(i, "malformed exponent"));
            }
            i = j;
        }
        let text =
            std::str::from_utf8(&b[start..i]).map_err(|_| self.error(start, "invalid utf-8"))?;
        let v: f64 = text
            .parse()
            .map_err(|_| self.error(start, format!("malformed number {text:?}")))?;
        if !v.is_finite() {
            return Err(self.error(start, "number out of range"));
        }
        self.pos = i;
        Ok(v)
    }

    fn point(&mut self) -> Result<Point> {
        let x = self.number()?;
        let y = self.number()?;
        Ok(Point::new(x, y))
    }
}

#[derive(Clone, Copy, PartialEq)]
enum Prev {
    Other,
    Cubic(Point),
    Quad(Point),
}

struct Builder {
    done: Vec<Subpath>,
    open: Option<Subpath>,
    current: Point,
    prev: Prev,
}

impl Builder {
    fn finish(&mut self) {
        if let Some(mut sp) = self.open.take() {
            if !sp.segments.is_empty() {
                sp.close();
                self.done.push(sp);
            }
        }
    }

    fn ensure_open(&mut self) -> &mut Subpath {
        let current = self.current;
        self.open.get_or_insert_with(|| Subpath::new(current))
    }

    fn push(&mut self, seg: Segment) {
        self.ensure_open().segments.push(seg);
        self.current = seg.end();
    }
}

pub fn parse_svg_path(text: &str, fill_hint: FillRule) -> Result<PathSet> {
    let mut lx = Lexer {
        bytes: text.as_bytes(),
        pos: 0,
    };
    let mut b = Builder {
        done: Vec::new(),
        open: None,
        current: Point::ZERO,
        prev: Prev::Other,
    };
    let mut command: Option<u8> = None;

    while !lx.at_end() {
        let offset = lx.pos;
        let c = lx.bytes[offset];
        let cmd = if c.is_ascii_alphabetic() {
            lx.pos += 1;
            c
        } else {
            match command {
                // Implicit repetition; extra pairs after a moveto are linetos.
                Some(b'M') => b'L',
                Some(b'm') => b'l',
                Some(b'Z') | Some(b'z') | None => {
                    return Err(lx.error(offset, format!("unexpected character {:?}", c as char)))
                }
                Some(prev) => prev,
            }
        };
        let rel = cmd.is_ascii_lowercase();
        let base = if rel { b.current } else { Point::ZERO };
        let cur = b.current;
        match cmd.to_ascii_uppercase() {
            b'M' => {
                let p = lx.point()? + base;
                b.finish();
                b.current = p;
                b.open = Some(Subpath::new(p));
                b.prev = Prev::Other;
            }
            b'L' => {
                let p = lx.point()? + base;
                b.push(Segment::Line { end: p });
                b.prev = Prev::Other;
            }
            b'H' => {
                let x = lx.number()? + base.x;
                b.push(Segment::Line {
                    end: Point::new(x, cur.y),
                });
                b.prev = Prev::Other;
            }
            b'V' => {
                let y = lx.number()? + base.y;
                b.push(Segment::Line {
                    end: Point::new(cur.x, y),
                });
                b.prev = Prev::Other;
            }
            b'C' => {
                let c1 = lx.point()? + base;
                let c2 = lx.point()? + base;
                let end = lx.point()? + base;
                b.push(Segment::Cubic { c1, c2, end });
                b.prev = Prev::Cubic(c2);
            }
            b'S' => {
                let c1 = match b.prev {
                    Prev::Cubic(c2) => cur * 2.0 - c2,
                    _ => cur,
                };
                let c2 = lx.point()? + base;
                let end = lx.point()? + base;
                b.push(Segment::Cubic { c1, c2, end });
                b.prev = Prev::Cubic(c2);
            }
            b'Q' => {
                let q = lx.point()? + base;
                let end = lx.point()? + base;
                b.push(elevate(cur, q, end));
                b.prev = Prev::Quad(q);
            }
            b'T' => {
                let q = match b.prev {
                    Prev::Quad(q) => cur * 2.0 - q,
                    _ => cur,
                };
                let end = lx.point()? + base;
                b.push(elevate(cur, q, end));
                b.prev = Prev::Quad(q);
            }
            b'Z' => {
                if let Some(mut sp) = b.open.take() {
                    let start = sp.start;
                    if sp.end_point() != start && !sp.segments.is_empty() {
                        sp.segments.push(Segment::Line { end: start });
                    }
                    b.open = Some(sp);
                    b.finish();
                    b.current = start;
                }
                b.prev = Prev::Other;
            }
            b'A' => return Err(Error::ArcUnsupported { offset }),
            _ => {
                return Err(lx.error(offset, format!("unknown command {:?}", cmd as char)));
            }
        }
        command = Some(cmd);
    }
    b.finish();

    let mut ps = PathSet { subpaths: b.done };
    if fill_hint == FillRule::EvenOdd {
        orient_for_nonzero(&mut ps);
    }
    Ok(ps)
}

fn elevate(p0: Point, q: Point, p3: Point) -> Segment {
    Segment::Cubic {
        c1: p0 + (q - p0) * (2.0 / 3.0),
        c2: p3 + (q - p3) * (2.0 / 3.0),
        end: p3,
    }
}

/// Gives contours at even nesting depth counter-clockwise orientation and
/// odd-depth contours clockwise, so nonzero filling reproduces even-odd.
fn orient_for_nonzero(ps: &mut PathSet) {
    const TOL: f64 = 1e-3;
    let polys: Vec<Vec<Point>> = ps
        .subpaths
        .iter()
        .map(|s| {
            let mut v = s.flatten(TOL);
            v.pop();
            v
        })
        .collect();
    for i in 0..ps.subpaths.len() {
        let probe = ps.subpaths[i].start;
        let depth = polys
            .iter()
            .enumerate()
            .filter(|(j, poly)| *j != i && point_in_polygon(probe, poly))
            .count();
        let area = crate::geom::polygon_area(&polys[i]);
        let want_ccw = depth % 2 == 0;
        if (area > 0.0) != want_ccw && area != 0.0 {
            ps.subpaths[i] = ps.subpaths[i].reversed();
        }
    }
}

fn point_in_polygon(p: Point, poly: &[Point]) -> bool {
    let mut inside = false;
    let n = poly.len();
    for i in 0..n {
        let a = poly[i];
        let b = poly[(i + 1) % n];
        if (a.y > p.y) != (b.y > p.y) {
            let x = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
            if p.x < x {
                inside = !inside;
            }
        }
    }
    inside
}

fn fmt_num(v: f64, precision: usize) -> String {
    let mut s = format!("{v:.precision$}");
    if s.contains('.') {
        while s.ends_with('0') {
            s.pop();
        }
        if s.ends_with('.') {
            s.pop();
        }
    }
    if s == "-0" {
        s = "0".to_string();
    }
    s
}

/// Absolute `M`/`L`/`C`/`Z` path data. A contour's closing line is written as
/// `Z`.
pub fn serialize_svg_path(pathset: &PathSet, precision: usize) -> String {
    let mut out = String::new();
    let pt = |p: Point| format!("{} {}", fmt_num(p.x, precision), fmt_num(p.y, precision));
    for sp in &pathset.subpaths {
        out.push('M');
        out.push_str(&pt(sp.start));
        let n = sp.segments.len();
        for (i, seg) in sp.segments.iter().enumerate() {
            let closing_line = i + 1 == n && seg.is_line() && seg.end() == sp.start;
            if closing_line {
                break;
            }
            match *seg {
                Segment::Line { end } => {
                    out.push('L');
                    out.push_str(&pt(end));
                }
                Segment::Cubic { c1, c2, end } => {
                    out.push('C');
                    out.push_str(&pt(c1));
                    out.push(' ');
                    out.push_str(&pt(c2));
                    out.push(' ');
                    out.push_str(&pt(end));
                }
            }
        }
        out.push('Z');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(x: f64, y: f64) -> Point {
        Point::new(x, y)
    }

    #[test]
    fn square_closes_with_line() {
        let ps = parse_svg_path("M 0 0 L 10 0 L 10 10 Z", FillRule::NonZero).unwrap();
        assert_eq!(ps.subpaths.len(), 1);
        let sp = &ps.subpaths[0];
        assert_eq!(sp.segments.len(), 3);
        assert_eq!(sp.segments[2], Segment::Line { end: p(0.0, 0.0) });
    }

    #[test]
    fn quadratic_is_degree_elevated() {
        let ps = parse_svg_path("M0 0 Q 5 10 10 0 Z", FillRule::NonZero).unwrap();
        match ps.subpaths[0].segments[0] {
            Segment::Cubic { c1, c2, end } => {
                assert!(c1.distance(p(10.0 / 3.0, 20.0 / 3.0)) < 1e-12);
                assert!(c2.distance(p(20.0 / 3.0, 20.0 / 3.0)) < 1e-12);
                assert_eq!(end, p(10.0, 0.0));
            }
            _ => panic!("expected cubic"),
        }
    }

    #[test]
    fn arcs_rejected() {
        let err = parse_svg_path("M0 0 A 5 5 0 0 1 10 0", FillRule::NonZero).unwrap_err();
        assert!(matches!(err, Error::ArcUnsupported { offset: 5 }));
    }

    #[test]
    fn parse_errors_carry_offsets() {
        match parse_svg_path("M0 0 L 1 x", FillRule::NonZero) {
            Err(Error::Parse { offset, .. }) => assert_eq!(offset, 9),
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            parse_svg_path("M0 0 K 1 1", FillRule::NonZero),
            Err(Error::Parse { offset: 5, .. })
        ));
        assert!(matches!(
            parse_svg_path("M0 0 L 1 1e", FillRule::NonZero),
            Err(Error::Parse { .. })
        ));
        assert!(matches!(
            parse_svg_path("M0 0 L", FillRule::NonZero),
            Err(Error::Parse { offset: 6, .. })
        ));
    }

    #[test]
    fn relative_shorthand_and_reflections() {
        let ps = parse_svg_path(
            "m1 1 h2 v2 H1 z M5 5 c0 1 1 2 2 2 s2 -1 2 -2 t1 1 q1 1 2 0 l-3,-3z",
            FillRule::NonZero,
        )
        .unwrap();
        assert_eq!(ps.subpaths.len(), 2);
        let a = &ps.subpaths[0];
        assert_eq!(a.start, p(1.0, 1.0));
        assert_eq!(a.segments[0].end(), p(3.0, 1.0));
        assert_eq!(a.segments[1].end(), p(3.0, 3.0));
        assert_eq!(a.segments[2].end(), p(1.0, 3.0));
        assert_eq!(a.segments[3].end(), p(1.0, 1.0));
        let b = &ps.subpaths[1];
        // S reflects the previous second control (6,7) about (7,7).
        match b.segments[1] {
            Segment::Cubic { c1, c2, end } => {
                assert_eq!(c1, p(8.0, 7.0));
                assert_eq!(c2, p(9.0, 6.0));
                assert_eq!(end, p(9.0, 5.0));
            }
            _ => panic!(),
        }
        // T after a non-quadratic uses the current point as control.
        match b.segments[2] {
            Segment::Cubic { c1, end, .. } => {
                assert!(c1.distance(p(9.0, 5.0)) < 1e-12);
                assert_eq!(end, p(10.0, 6.0));
            }
            _ => panic!(),
        }
        assert!(b.gap() == 0.0);
    }

    #[test]
    fn implicit_lineto_after_move() {
        let ps = parse_svg_path("M0 0 1 0 1 1", FillRule::NonZero).unwrap();
        assert_eq!(ps.subpaths[0].segments.len(), 3);
    }

    #[test]
    fn serialize_unit_square() {
        let ps = parse_svg_path("M0 0 L1 0 L1 1 L0 1 Z", FillRule::NonZero).unwrap();
        assert_eq!(serialize_svg_path(&ps, 0), "M0 0L1 0L1 1L0 1Z");
        assert_eq!(serialize_svg_path(&PathSet::default(), 3), "");
    }

    #[test]
    fn even_odd_hint_reorients_holes() {
        // Both contours clockwise-agnostic: same orientation for outer and hole.
        let text = "M0 0 L1 0 L1 1 L0 1 Z M0.25 0.25 L0.75 0.25 L0.75 0.75 L0.25 0.75 Z";
        let nz = parse_svg_path(text, FillRule::NonZero).unwrap();
        assert!(nz.subpaths[1].signed_area(1e-3) > 0.0);
        let eo = parse_svg_path(text, FillRule::EvenOdd).unwrap();
        assert!(eo.subpaths[0].signed_area(1e-3) > 0.0);
        assert!(eo.subpaths[1].signed_area(1e-3) < 0.0);
    }
}
