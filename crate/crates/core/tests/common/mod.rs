#![allow(dead_code)]

use proptest::prelude::*;
use vecglyph::glyph::{from_pathset, Segment, Subpath, L_MAX};
use vecglyph::{Glyph, PathSet, Point};

/// Coordinates on a 1/1024 grid inside the unit box, so that shifting by
/// whole pixels at power-of-two resolutions is exact.
pub fn grid_point() -> impl Strategy<Value = Point> {
    (51i32..973, 51i32..973).prop_map(|(x, y)| Point::new(x as f64 / 1024.0, y as f64 / 1024.0))
}

pub fn segment() -> impl Strategy<Value = Segment> {
    (any::<bool>(), grid_point(), grid_point(), grid_point()).prop_map(|(curve, c1, c2, end)| {
        if curve {
            Segment::Cubic { c1, c2, end }
        } else {
            Segment::Line { end }
        }
    })
}

pub fn subpath() -> impl Strategy<Value = Subpath> {
    (grid_point(), prop::collection::vec(segment(), 1..6)).prop_map(|(start, segments)| {
        let mut sp = Subpath { start, segments };
        sp.close();
        sp
    })
}

pub fn pathset() -> impl Strategy<Value = PathSet> {
    prop::collection::vec(subpath(), 1..4).prop_map(PathSet::new)
}

pub fn glyph() -> impl Strategy<Value = Glyph> {
    (pathset(), 0usize..52).prop_map(|(ps, c)| from_pathset(&ps, c, L_MAX).expect("fixture fits"))
}

/// Closed polygon glyph through absolute `points`.
pub fn polygon(char_class: usize, points: &[(f64, f64)]) -> Glyph {
    let mut sp = Subpath::new(Point::new(points[0].0, points[0].1));
    for &(x, y) in &points[1..] {
        sp.segments.push(Segment::Line {
            end: Point::new(x, y),
        });
    }
    sp.close();
    from_pathset(&PathSet::new(vec![sp]), char_class, L_MAX).unwrap()
}

pub fn max_point_deviation(a: &PathSet, b: &PathSet) -> f64 {
    let (pa, pb) = (a.points(), b.points());
    assert_eq!(pa.len(), pb.len(), "point counts differ");
    pa.iter()
        .zip(&pb)
        .map(|(p, q)| p.distance(*q))
        .fold(0.0, f64::max)
}
