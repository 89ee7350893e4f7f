//! Procedural fonts: 13 crude compositions of stems, bars, bowls, frames and
//! wedges, each in 4 proportion variants, drawn with per-font stroke weight,
//! slant and corner rounding.
//!
//! Primitives inside one glyph never overlap. All coordinates are snapped to
//! a 1/4096 EM grid, which keeps them exact through the decimal corpus files,
//! the font-unit normalization and the `f32` records.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{build_dataset, write_file, DatasetConfig, FontMetrics, Manifest, METRICS_FILE};
use crate::error::{Error, Result};
use crate::geom::Point;
use crate::glyph::{
    from_pathset, serialize_svg_path, Font, PathSet, Segment, Subpath, L_MAX, N_CHAR,
};

const GRID: f64 = 4096.0;
const KAPPA: f64 = 0.552_284_749_830_793_4;
const COMPOSITIONS: usize = 13;

/// Font-unit metrics used for the written corpus.
const UPEM: f64 = 1000.0;
const ASCENDER: f64 = 800.0;
const DESCENDER: f64 = -200.0;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct ProceduralConfig {
    pub n_fonts: usize,
    pub seed: u64,
    /// Stroke weight range, EM.
    pub weight: (f64, f64),
    /// Horizontal shear range.
    pub slant: (f64, f64),
    /// Corner radius range, EM.
    pub corner_radius: (f64, f64),
}

impl Default for ProceduralConfig {
    fn default() -> Self {
        ProceduralConfig {
            n_fonts: 4,
            seed: 1,
            weight: (0.04, 0.16),
            slant: (-0.25, 0.25),
            corner_radius: (0.0, 0.06),
        }
    }
}

impl ProceduralConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_fonts < 1 {
            return Err(Error::Config("n_fonts must be at least 1".into()));
        }
        for (name, (lo, hi)) in [
            ("weight", self.weight),
            ("slant", self.slant),
            ("corner_radius", self.corner_radius),
        ] {
            if !(lo <= hi) || !lo.is_finite() || !hi.is_finite() {
                return Err(Error::Config(format!("{name} range [{lo}, {hi}] is empty")));
            }
        }
        if self.weight.0 <= 0.0 || self.weight.1 > 0.16 || self.corner_radius.0 < 0.0 {
            return Err(Error::Config(
                "style ranges outside supported limits".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug)]
struct Style {
    weight: f64,
    slant: f64,
    radius: f64,
}

fn draw(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        rng.gen_range(lo..=hi)
    } else {
        lo
    }
}

fn p(x: f64, y: f64) -> Point {
    Point::new(x, y)
}

/// Closed contour from a start point and segments; orientation is the
/// caller's.
struct Pen(Subpath);

impl Pen {
    fn at(start: Point) -> Self {
        Pen(Subpath::new(start))
    }
    fn line(mut self, end: Point) -> Self {
        self.0.segments.push(Segment::Line { end });
        self
    }
    fn curve(mut self, c1: Point, c2: Point, end: Point) -> Self {
        self.0.segments.push(Segment::Cubic { c1, c2, end });
        self
    }
    fn done(self) -> Subpath {
        self.0
    }
}

/// Counter-clockwise rectangle, corners rounded by `r` with quarter-circle
/// cubics.
fn rect(x0: f64, y0: f64, x1: f64, y1: f64, r: f64) -> Subpath {
    let r = r.min(0.45 * (x1 - x0).min(y1 - y0));
    if r * GRID < 1.0 {
        return Pen::at(p(x0, y0))
            .line(p(x1, y0))
            .line(p(x1, y1))
            .line(p(x0, y1))
            .line(p(x0, y0))
            .done();
    }
    let k = r * (1.0 - KAPPA);
    Pen::at(p(x0 + r, y0))
        .line(p(x1 - r, y0))
        .curve(p(x1 - k, y0), p(x1, y0 + k), p(x1, y0 + r))
        .line(p(x1, y1 - r))
        .curve(p(x1, y1 - k), p(x1 - k, y1), p(x1 - r, y1))
        .line(p(x0 + r, y1))
        .curve(p(x0 + k, y1), p(x0, y1 - k), p(x0, y1 - r))
        .line(p(x0, y0 + r))
        .curve(p(x0, y0 + k), p(x0 + k, y0), p(x0 + r, y0))
        .done()
}

/// Counter-clockwise ellipse from four cubics, starting at the bottom.
fn ellipse(cx: f64, cy: f64, rx: f64, ry: f64) -> Subpath {
    let (kx, ky) = (rx * KAPPA, ry * KAPPA);
    Pen::at(p(cx, cy - ry))
        .curve(p(cx + kx, cy - ry), p(cx + rx, cy - ky), p(cx + rx, cy))
        .curve(p(cx + rx, cy + ky), p(cx + kx, cy + ry), p(cx, cy + ry))
        .curve(p(cx - kx, cy + ry), p(cx - rx, cy + ky), p(cx - rx, cy))
        .curve(p(cx - rx, cy - ky), p(cx - kx, cy - ry), p(cx, cy - ry))
        .done()
}

/// Elliptical ring; the counter is dropped when the stroke fills it.
fn ring(cx: f64, cy: f64, rx: f64, ry: f64, w: f64) -> Vec<Subpath> {
    let mut out = vec![ellipse(cx, cy, rx, ry)];
    if rx - w > 0.02 && ry - w > 0.02 {
        out.push(ellipse(cx, cy, rx - w, ry - w).reversed());
    }
    out
}

fn frame(x0: f64, y0: f64, x1: f64, y1: f64, w: f64, r: f64) -> Vec<Subpath> {
    let mut out = vec![rect(x0, y0, x1, y1, r)];
    if x1 - x0 - 2.0 * w > 0.04 && y1 - y0 - 2.0 * w > 0.04 {
        out.push(rect(x0 + w, y0 + w, x1 - w, y1 - w, (r - w).max(0.0)).reversed());
    }
    out
}

fn wedge(a: Point, b: Point, c: Point) -> Subpath {
    let sp = Pen::at(a).line(b).line(c).line(a).done();
    if (b - a).cross(c - a) < 0.0 {
        sp.reversed()
    } else {
        sp
    }
}

fn composition(kind: usize, s: &Style) -> Vec<Subpath> {
    let w = s.weight;
    let r = s.radius;
    let stem = |x: f64, y0: f64, y1: f64| rect(x, y0, x + w, y1, r);
    let bar = |y: f64, x0: f64, x1: f64| rect(x0, y, x1, y + w, r);
    match kind {
        0 => vec![stem(0.5 - w / 2.0, 0.1, 0.9)],
        1 => vec![stem(0.2, 0.1, 0.9), stem(0.8 - w, 0.1, 0.9)],
        2 => ring(0.5, 0.5, 0.3, 0.38, w),
        3 => {
            let mut v = vec![stem(0.18, 0.1, 0.9)];
            v.extend(ring(0.62, 0.32, 0.2, 0.22, w));
            v
        }
        4 => vec![wedge(p(0.15, 0.1), p(0.85, 0.1), p(0.5, 0.9))],
        5 => vec![bar(0.1, 0.2, 0.8), bar(0.42, 0.2, 0.7), bar(0.74, 0.2, 0.8)],
        6 => {
            let mut v = ring(0.5, 0.63, 0.25, 0.25, w);
            v.push(bar(0.1, 0.2, 0.8));
            v
        }
        7 => frame(0.2, 0.1, 0.8, 0.9, w, r),
        8 => vec![
            wedge(p(0.2, 0.4), p(0.8, 0.4), p(0.5, 0.9)),
            bar(0.1, 0.2, 0.8),
        ],
        9 => {
            let mut v = ring(0.5, 0.29, 0.25, 0.19, w);
            v.extend(ring(0.5, 0.72, 0.22, 0.17, w));
            v
        }
        10 => vec![
            stem(0.15, 0.1, 0.9),
            wedge(p(0.4, 0.1), p(0.85, 0.1), p(0.85, 0.8)),
        ],
        11 => {
            let mut v = frame(0.15, 0.1, 0.6, 0.9, w, r);
            v.push(stem(0.7, 0.1, 0.9));
            v
        }
        12 => vec![
            stem(0.5 - w / 2.0, 0.1, 0.65),
            ellipse(0.5, 0.8, 0.08, 0.08),
        ],
        _ => unreachable!("composition index out of range"),
    }
}

/// Absolute outlines of class `char_class` in the given style, in EM units.
fn glyph_outline(char_class: usize, s: &Style) -> PathSet {
    let kind = char_class % COMPOSITIONS;
    let variant = char_class / COMPOSITIONS;
    let dx = [0.0, 0.03, -0.03, 0.05][variant];
    let sy = [1.0, 0.9, 0.95, 0.85][variant];
    let subpaths = composition(kind, s);
    let snap = |v: f64| (v * GRID).round() / GRID;
    PathSet::new(subpaths).map_points(|q| {
        let y = 0.1 + (q.y - 0.1) * sy;
        let x = q.x + dx + s.slant * (y - 0.5);
        Point::new(snap(x), snap(y))
    })
}

/// The procedural fonts, named `synth000`, `synth001`, ...
pub fn synthetic_fonts(config: &ProceduralConfig) -> Result<Vec<Font>> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    (0..config.n_fonts)
        .map(|i| {
            let style = Style {
                weight: draw(&mut rng, config.weight),
                slant: draw(&mut rng, config.slant),
                radius: draw(&mut rng, config.corner_radius),
            };
            let mut font = Font::new(format!("synth{i:03}"));
            for c in 0..N_CHAR {
                font.insert(from_pathset(&glyph_outline(c, &style), c, L_MAX)?);
            }
            Ok(font)
        })
        .collect()
}

/// Writes fonts as a corpus directory in font units (1000 units per EM,
/// ascender 800, descender -200).
pub fn write_corpus(fonts: &[Font], dir: &Path) -> Result<()> {
    let metrics = FontMetrics {
        units_per_em: UPEM,
        ascender: ASCENDER,
        descender: DESCENDER,
    };
    let span = ASCENDER - DESCENDER;
    for font in fonts {
        let fdir = dir.join(&font.font_id);
        write_file(
            &fdir.join(METRICS_FILE),
            serde_json::to_string_pretty(&metrics)?.as_bytes(),
        )?;
        for (c, g) in &font.glyphs {
            let ps = crate::glyph::to_pathset(g)?
                .map_points(|q| Point::new(q.x * UPEM, q.y * span + DESCENDER));
            let mut text = serialize_svg_path(&ps, 9);
            text.push('\n');
            write_file(&fdir.join(format!("{c:02}.path")), text.as_bytes())?;
        }
    }
    Ok(())
}

/// Writes the procedural corpus to `out/corpus` and builds the dataset in
/// `out`.
pub fn make_synthetic_corpus(config: &ProceduralConfig, out: &Path) -> Result<Manifest> {
    let fonts = synthetic_fonts(config)?;
    let corpus = out.join("corpus");
    write_corpus(&fonts, &corpus)?;
    let dc = DatasetConfig {
        name: format!("synthetic-{}", config.seed),
        ..Default::default()
    };
    build_dataset(&corpus, out, &dc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::glyph::{validate, CommandType};

    #[test]
    fn fonts_are_valid_and_mixed() {
        let fonts = synthetic_fonts(&ProceduralConfig {
            n_fonts: 3,
            ..Default::default()
        })
        .unwrap();
        assert_eq!(fonts.iter().map(|f| f.glyphs.len()).sum::<usize>(), 156);
        for f in &fonts {
            let mut lines = 0;
            let mut curves = 0;
            for g in f.glyphs.values() {
                assert!(validate(g).is_valid(), "{} {}", f.font_id, g.char_class);
                lines += g.count(CommandType::Line);
                curves += g.count(CommandType::Curve);
            }
            assert!(lines > 0 && curves > 0);
        }
    }

    #[test]
    fn contours_are_exactly_closed() {
        let fonts = synthetic_fonts(&ProceduralConfig::default()).unwrap();
        for g in fonts.iter().flat_map(|f| f.glyphs.values()) {
            assert_eq!(g.max_closure_gap(), 0.0);
        }
    }

    #[test]
    fn seeds_change_coordinates() {
        let cfg = |seed| ProceduralConfig {
            n_fonts: 1,
            seed,
            ..Default::default()
        };
        let a = synthetic_fonts(&cfg(1)).unwrap();
        let b = synthetic_fonts(&cfg(2)).unwrap();
        assert_ne!(a[0].glyphs[&0].commands, b[0].glyphs[&0].commands);
    }
}
