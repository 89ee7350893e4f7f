//! Comparisons against independent brute-force implementations.

mod common;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use vecglyph::dataset::{synthetic_fonts, ProceduralConfig};
use vecglyph::eval::{evaluate_fonts, font_stats, oracle_image};
use vecglyph::glyph::{
    from_pathset, normalize, to_pathset, write_glyph_file, Segment, Subpath, L_MAX, RECORD_BYTES,
};
use vecglyph::raster::{
    l1_loss_and_gradients, render, render_commands, render_oracle, signed_distance_winding,
};
use vecglyph::refine::count_small_loops;
use vecglyph::{Command, CoverageImage, Exec, Font, Glyph, PathSet, Point, RasterConfig};

fn p(x: f64, y: f64) -> Point {
    Point::new(x, y)
}

fn seq(resolution: usize) -> RasterConfig {
    RasterConfig {
        exec: Exec::Sequential,
        ..RasterConfig::with_resolution(resolution)
    }
}

fn fonts(n: usize, seed: u64) -> Vec<Font> {
    synthetic_fonts(&ProceduralConfig {
        n_fonts: n,
        seed,
        ..Default::default()
    })
    .unwrap()
}

/// Each contour as a dense closed polyline, 4096 pieces per cubic.
fn dense(ps: &PathSet) -> Vec<Vec<Point>> {
    ps.subpaths
        .iter()
        .map(|sp| {
            let mut pts = vec![sp.start];
            let mut pen = sp.start;
            for seg in &sp.segments {
                match *seg {
                    Segment::Line { end } => pts.push(end),
                    Segment::Cubic { c1, c2, end } => {
                        for k in 1..=4096 {
                            let t = k as f64 / 4096.0;
                            let s = 1.0 - t;
                            let w = [s * s * s, 3.0 * s * s * t, 3.0 * s * t * t, t * t * t];
                            pts.push(Point::new(
                                w[0] * pen.x + w[1] * c1.x + w[2] * c2.x + w[3] * end.x,
                                w[0] * pen.y + w[1] * c1.y + w[2] * c2.y + w[3] * end.y,
                            ));
                        }
                    }
                }
                pen = seg.end();
            }
            pts
        })
        .collect()
}

fn point_segment_distance(q: Point, a: Point, b: Point) -> f64 {
    let ab = b - a;
    let len2 = ab.dot(ab);
    let t = if len2 > 0.0 {
        ((q - a).dot(ab) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    q.distance(a + ab * t)
}

fn brute_distance_winding(q: Point, polys: &[Vec<Point>]) -> (f64, i32) {
    let mut d = f64::INFINITY;
    let mut w = 0;
    for poly in polys {
        for e in poly.windows(2) {
            let (a, b) = (e[0], e[1]);
            d = d.min(point_segment_distance(q, a, b));
            let side = (b - a).cross(q - a);
            if a.y <= q.y && b.y > q.y && side > 0.0 {
                w += 1;
            } else if b.y <= q.y && a.y > q.y && side < 0.0 {
                w -= 1;
            }
        }
    }
    (d, w)
}

/// Truncated logistic of the signed pixel distance, written out directly.
fn coverage(inside: bool, dist_px: f64, sigma: f64) -> f64 {
    let scale = sigma * 3f64.sqrt() / std::f64::consts::PI;
    if dist_px >= 10.0 * scale {
        return if inside { 1.0 } else { 0.0 };
    }
    let f = |u: f64| 1.0 / (1.0 + u.exp());
    let off = f(10.0);
    let sd = if inside { -dist_px } else { dist_px };
    ((f(sd / scale) - off) / (1.0 - 2.0 * off)).clamp(0.0, 1.0)
}

fn brute_render(ps: &PathSet, res: usize, sigma: f64) -> CoverageImage {
    let polys = dense(ps);
    let mut img = CoverageImage::new(res, res);
    for j in 0..res {
        for i in 0..res {
            let q = p(
                (i as f64 + 0.5) / res as f64,
                1.0 - (j as f64 + 0.5) / res as f64,
            );
            let (d, w) = brute_distance_winding(q, &polys);
            img.set(i, j, coverage(w != 0, d * res as f64, sigma));
        }
    }
    img
}

#[test]
fn prefilter_render_matches_brute_force() {
    let res = 32;
    let cfg = seq(res);
    let fs = fonts(1, 5);
    for c in [0usize, 14, 33, 51] {
        let ps = to_pathset(&fs[0].glyphs[&c]).unwrap();
        let a = render(&ps, &cfg);
        let b = brute_render(&ps, res, cfg.prefilter_sigma);
        let worst = a
            .data
            .iter()
            .zip(&b.data)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
        assert!(worst < 1e-3, "class {c}: max diff {worst}");
    }
}

#[test]
fn distance_and_winding_match_dense_flattening() {
    let fs = fonts(2, 9);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for g in fs.iter().flat_map(|f| f.glyphs.values()).step_by(7) {
        let ps = to_pathset(g).unwrap();
        let polys = dense(&ps);
        for _ in 0..40 {
            let q = p(rng.gen_range(-0.2..1.2), rng.gen_range(-0.2..1.2));
            let (d, w) = signed_distance_winding(q, &ps);
            let (bd, bw) = brute_distance_winding(q, &polys);
            assert!((d - bd).abs() < 1e-5, "class {}: {d} vs {bd}", g.char_class);
            if bd > 1e-6 {
                assert_eq!(w, bw, "class {} at {q:?}", g.char_class);
            }
        }
    }
}

#[test]
fn prefilter_tracks_supersampled_oracle() {
    let mut cfg = seq(128);
    cfg.exec = Exec::default();
    let mut diffs = Vec::new();
    for g in fonts(1, 2)[0].glyphs.values() {
        let ps = to_pathset(g).unwrap();
        let a = render(&ps, &cfg);
        let b = render_oracle(&ps, &cfg);
        diffs.extend(a.data.iter().zip(&b.data).map(|(x, y)| (x - y).abs()));
    }
    let mean = diffs.iter().sum::<f64>() / diffs.len() as f64;
    diffs.sort_by(f64::total_cmp);
    let p99 = diffs[(0.99 * (diffs.len() - 1) as f64).round() as usize];
    assert!(mean < 0.02, "mean {mean}");
    assert!(p99 < 0.2, "p99 {p99}");
}

/// Two contours shaped like a 'D': a clockwise bowl with a counter-clockwise
/// counter, as absolute outlines.
fn d_outline() -> PathSet {
    let cubic = |c1, c2, end| Segment::Cubic { c1, c2, end };
    let line = |end| Segment::Line { end };
    let outer = Subpath {
        start: p(0.15, 0.1),
        segments: vec![
            line(p(0.15, 0.9)),
            line(p(0.45, 0.9)),
            cubic(p(0.75, 0.9), p(0.85, 0.7), p(0.85, 0.5)),
            cubic(p(0.85, 0.3), p(0.75, 0.1), p(0.45, 0.1)),
            line(p(0.15, 0.1)),
        ],
    };
    let inner = Subpath {
        start: p(0.3, 0.25),
        segments: vec![
            line(p(0.45, 0.25)),
            cubic(p(0.63, 0.25), p(0.7, 0.37), p(0.7, 0.5)),
            cubic(p(0.7, 0.63), p(0.63, 0.75), p(0.45, 0.75)),
            line(p(0.3, 0.75)),
            line(p(0.3, 0.25)),
        ],
    };
    PathSet::new(vec![outer, inner])
}

/// The same 'D' as a hand-written relative command table.
fn d_table() -> Glyph {
    let mv = |x, y| Command::move_by(p(x, y));
    let ln = |x, y| Command::line_by(p(x, y));
    let cv = |a: (f64, f64), b: (f64, f64), e: (f64, f64)| {
        Command::curve_by(p(a.0, a.1), p(b.0, b.1), p(e.0, e.1))
    };
    Glyph::new(
        3,
        vec![
            mv(0.15, 0.1),
            ln(0.0, 0.8),
            ln(0.3, 0.0),
            cv((0.3, 0.0), (0.4, -0.2), (0.4, -0.4)),
            cv((0.0, -0.2), (-0.1, -0.4), (-0.4, -0.4)),
            ln(-0.3, 0.0),
            mv(0.15, 0.15),
            ln(0.15, 0.0),
            cv((0.18, 0.0), (0.25, 0.12), (0.25, 0.25)),
            cv((0.0, 0.13), (-0.07, 0.25), (-0.25, 0.25)),
            ln(-0.15, 0.0),
            ln(0.0, -0.5),
            Command::end(),
        ],
    )
}

#[test]
fn d_table_renders_like_its_outline() {
    let g = d_table();
    assert!(g.is_valid());
    assert_eq!(g.count(vecglyph::CommandType::Move), 2);
    let cfg = seq(64);
    let a = render_oracle(&to_pathset(&g).unwrap(), &cfg);
    let b = render_oracle(&d_outline(), &cfg);
    assert!(a.mean_abs_diff(&b) < 1e-3, "{}", a.mean_abs_diff(&b));
    // Stem filled, counter empty under the nonzero rule.
    assert_eq!(a.get(11, 32), 1.0);
    assert_eq!(a.get(36, 32), 0.0);
}

#[test]
fn normalize_matches_affine_sampling() {
    let (upem, asc, desc) = (1000.0, 800.0, -200.0);
    let units = d_outline().map_points(|q| p(q.x * upem, q.y * (asc - desc) + desc));
    let norm = normalize(&units, upem, asc, desc).unwrap();
    let res = 64;
    let k = 4;
    let mut cfg = seq(res);
    cfg.oracle_supersample = k;
    let ours = render_oracle(&norm, &cfg);

    // Sample the font-unit outline at pixel sample positions pulled back
    // through the affine map.
    let polys = dense(&units);
    let mut theirs = CoverageImage::new(res, res);
    for j in 0..res {
        for i in 0..res {
            let mut hits = 0;
            for sy in 0..k {
                for sx in 0..k {
                    let x = (i as f64 + (sx as f64 + 0.5) / k as f64) / res as f64;
                    let y = 1.0 - (j as f64 + (sy as f64 + 0.5) / k as f64) / res as f64;
                    let q = p(x * upem, y * (asc - desc) + desc);
                    if brute_distance_winding(q, &polys).1 != 0 {
                        hits += 1;
                    }
                }
            }
            theirs.set(i, j, hits as f64 / (k * k) as f64);
        }
    }
    assert!(
        ours.mean_abs_diff(&theirs) < 1e-3,
        "{}",
        ours.mean_abs_diff(&theirs)
    );
}

#[test]
fn command_stats_match_byte_scan() {
    let dir = tempfile::tempdir().unwrap();
    let font = &fonts(1, 11)[0];
    let mut counts = [0usize; 4];
    for (c, g) in &font.glyphs {
        let path = dir.path().join(format!("{c}.bin"));
        write_glyph_file(&path, g, L_MAX).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        assert_eq!(bytes.len(), L_MAX * RECORD_BYTES);
        for rec in bytes.chunks(RECORD_BYTES) {
            counts[rec[0] as usize] += 1;
            if rec[0] == 3 {
                break;
            }
        }
    }
    let s = font_stats(font);
    let n = font.glyphs.len();
    assert_eq!(s.counts.glyphs, n);
    assert_eq!(s.counts.moves, counts[0]);
    assert_eq!(s.counts.lines, counts[1]);
    assert_eq!(s.counts.curves, counts[2]);
    assert_eq!(counts[3], n);
    assert!((s.mean_curves - counts[2] as f64 / n as f64).abs() < 1e-12);
}

#[test]
fn eval_matches_exported_pixel_diff() {
    let res = 64;
    let refs = fonts(1, 4);
    let mut moved = Font::new(refs[0].font_id.clone());
    for g in refs[0].glyphs.values().take(12) {
        let ps = to_pathset(g).unwrap().translate(p(4.0 / res as f64, 0.0));
        moved.insert(from_pathset(&ps, g.char_class, L_MAX).unwrap());
    }
    let mut partial_ref = Font::new(refs[0].font_id.clone());
    for c in moved.glyphs.keys() {
        partial_ref.insert(refs[0].glyphs[c].clone());
    }
    let report = evaluate_fonts(
        &[moved.clone()],
        &[partial_ref.clone()],
        res,
        Exec::default(),
    )
    .unwrap();

    let dir = tempfile::tempdir().unwrap();
    let mut total = 0.0;
    for s in &report.glyphs {
        let files: Vec<_> = [&moved, &partial_ref]
            .iter()
            .enumerate()
            .map(|(k, f)| {
                let path = dir.path().join(format!("{k}_{}.pgm", s.char_class));
                oracle_image(&f.glyphs[&s.char_class], res)
                    .unwrap()
                    .save_pgm(&path)
                    .unwrap();
                std::fs::read(&path).unwrap()
            })
            .collect();
        // Pixel bytes follow the fixed-size header.
        let header = format!("P5\n{res} {res}\n255\n").len();
        let diff: f64 = files[0][header..]
            .iter()
            .zip(&files[1][header..])
            .map(|(a, b)| (*a as f64 - *b as f64).abs() / 255.0)
            .sum::<f64>()
            / (res * res) as f64;
        assert!(
            (diff - s.l1).abs() <= 1.0 / 255.0,
            "class {}: {diff} vs {}",
            s.char_class,
            s.l1
        );
        assert!(s.l1 > 0.0);
        total += s.l1;
    }
    assert!((report.corpus_mean - total / report.glyphs.len() as f64).abs() < 1e-12);
}

/// Proper crossings between nonadjacent edges of a closed polygon.
fn brute_crossings(pts: &[Point]) -> usize {
    let n = pts.len();
    let edge = |k: usize| (pts[k], pts[(k + 1) % n]);
    let mut count = 0;
    for i in 0..n {
        for j in i + 2..n {
            if i == 0 && j == n - 1 {
                continue;
            }
            let ((a, b), (c, d)) = (edge(i), edge(j));
            let o = |p: Point, q: Point, r: Point| (q - p).cross(r - p);
            if o(a, b, c) * o(a, b, d) < 0.0 && o(c, d, a) * o(c, d, b) < 0.0 {
                count += 1;
            }
        }
    }
    count
}

#[test]
fn figure_eight_has_one_crossing() {
    let g = common::polygon(0, &[(0.1, 0.1), (0.9, 0.9), (0.9, 0.1), (0.1, 0.9)]);
    assert_eq!(count_small_loops(&g, 1e-3, f64::INFINITY), 1);
    assert_eq!(count_small_loops(&g, 1e-3, 0.0), 0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn crossing_count_matches_brute_force(
        pts in prop::collection::vec((0.05f64..0.95, 0.05f64..0.95), 3..10),
    ) {
        let g = common::polygon(0, &pts);
        let poly: Vec<Point> = pts.iter().map(|&(x, y)| p(x, y)).collect();
        prop_assert_eq!(count_small_loops(&g, 1e-3, f64::INFINITY), brute_crossings(&poly));
    }
}

#[test]
fn gradients_match_central_differences() {
    let res = 64;
    let cfg = seq(res);
    let h = 1e-4;
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let (mut checked, mut agree) = (0usize, 0usize);
    for g in fonts(1, 8)[0].glyphs.values() {
        // Evaluate at the glyph with every absolute point jittered, against
        // a point-sampled render of the original.
        let mut base = g.to_absolute();
        for a in &mut base {
            for k in 0..3 {
                *a.point_mut(k) =
                    a.point(k) + p(rng.gen_range(-0.01..0.01), rng.gen_range(-0.01..0.01));
            }
        }
        let moved = Glyph::from_absolute(g.char_class, &base);
        let binary = RasterConfig {
            oracle_supersample: 1,
            ..cfg.clone()
        };
        let target = render_oracle(&to_pathset(g).unwrap(), &binary);
        let (_, grads) = l1_loss_and_gradients(&moved, &target, &cfg).unwrap();
        let analytic = grads.to_absolute(&moved.commands);
        let loss_at = |abs: &[vecglyph::glyph::AbsCommand]| {
            render_commands(&Glyph::from_absolute(g.char_class, abs).commands, &cfg)
                .mean_abs_diff(&target)
        };
        for (j, a) in base.iter().enumerate() {
            let used = a.kind.used_pairs();
            for k in 0..3 {
                if !used[k] {
                    continue;
                }
                for axis in 0..2 {
                    let an = if axis == 0 {
                        analytic[j][k].x
                    } else {
                        analytic[j][k].y
                    };
                    if an.abs() <= 1e-6 {
                        continue;
                    }
                    let bump = |s: f64| {
                        let mut v = base.clone();
                        let q = v[j].point_mut(k);
                        if axis == 0 {
                            q.x += s
                        } else {
                            q.y += s
                        }
                        loss_at(&v)
                    };
                    let fd = (bump(h) - bump(-h)) / (2.0 * h);
                    checked += 1;
                    if (an - fd).abs() / an.abs().max(fd.abs()) < 1e-3 {
                        agree += 1;
                    }
                }
            }
        }
    }
    let rate = agree as f64 / checked as f64;
    assert!(checked > 50, "{checked}");
    assert!(rate >= 0.95, "{agree}/{checked} = {rate}");
}
