//! Reconstruction error between fonts, command statistics and the
//! end-to-end self-test.

mod selftest;

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::glyph::{to_pathset, CommandType, Font, Glyph};
use crate::raster::{render_oracle, CoverageImage, RasterConfig};

pub use selftest::{
    check_fidelity, check_fuzz, check_gradient, check_recovery, check_selection, check_structural,
    perturb, pipeline_trials, recovery_trials, run_selftest, CriterionResult, PipelineTrial,
    RecoveryTrial, SelftestConfig, SelftestReport, CRITERIA,
};

/// Resolution of the reconstruction-error metric.
pub const EVAL_RESOLUTION: usize = 256;

/// Published mean L1 errors of several systems, shown for context only.
pub const REFERENCE_POINTS: [(&str, f64); 5] = [
    ("DVF", 0.021),
    ("AIT", 0.031),
    ("SVG-VAE", 0.090),
    ("DeepSVG", 0.120),
    ("DVF(RFS)", 0.058),
];

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CommandCounts {
    pub glyphs: usize,
    pub moves: usize,
    pub lines: usize,
    pub curves: usize,
}

impl CommandCounts {
    pub fn add(&mut self, glyph: &Glyph) {
        self.glyphs += 1;
        self.moves += glyph.count(CommandType::Move);
        self.lines += glyph.count(CommandType::Line);
        self.curves += glyph.count(CommandType::Curve);
    }

    pub fn of<'a>(glyphs: impl IntoIterator<Item = &'a Glyph>) -> Self {
        let mut c = CommandCounts::default();
        for g in glyphs {
            c.add(g);
        }
        c
    }

    /// Per-glyph averages of `[moves, lines, curves]`.
    pub fn means(&self) -> [f64; 3] {
        let n = self.glyphs.max(1) as f64;
        [
            self.moves as f64 / n,
            self.lines as f64 / n,
            self.curves as f64 / n,
        ]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FontStats {
    pub font_id: String,
    pub counts: CommandCounts,
    pub mean_moves: f64,
    pub mean_lines: f64,
    pub mean_curves: f64,
}

pub fn font_stats(font: &Font) -> FontStats {
    let counts = CommandCounts::of(font.glyphs.values());
    let [mean_moves, mean_lines, mean_curves] = counts.means();
    FontStats {
        font_id: font.font_id.clone(),
        counts,
        mean_moves,
        mean_lines,
        mean_curves,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GlyphScore {
    pub font_id: String,
    pub char_class: usize,
    pub l1: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub resolution: usize,
    pub glyphs: Vec<GlyphScore>,
    pub font_means: BTreeMap<String, f64>,
    pub corpus_mean: f64,
    pub pred_counts: CommandCounts,
    pub ref_counts: CommandCounts,
}

impl EvalReport {
    pub fn summary(&self) -> String {
        let mut s = String::new();
        for (f, m) in &self.font_means {
            let _ = writeln!(s, "{f}\t{m:.6}");
        }
        let _ = writeln!(
            s,
            "mean L1 at {0}x{0}: {1:.6}",
            self.resolution, self.corpus_mean
        );
        let (p, r) = (self.pred_counts.means(), self.ref_counts.means());
        let _ = writeln!(
            s,
            "commands per glyph (move/line/curve): pred {:.2}/{:.2}/{:.2}, ref {:.2}/{:.2}/{:.2}",
            p[0], p[1], p[2], r[0], r[1], r[2]
        );
        s.push_str(&reference_footer());
        s
    }
}

/// Published numbers for orientation; not comparable to a synthetic corpus.
pub fn reference_footer() -> String {
    let items: Vec<String> = REFERENCE_POINTS
        .iter()
        .map(|(n, v)| format!("{n} {v:.3}"))
        .collect();
    format!(
        "reference L1 (published, full-scale data): {}\n",
        items.join(", ")
    )
}

/// Oracle render of `glyph` at `resolution`.
pub fn oracle_image(glyph: &Glyph, resolution: usize) -> Result<CoverageImage> {
    let cfg = RasterConfig {
        exec: Exec::Sequential,
        ..RasterConfig::with_resolution(resolution)
    };
    Ok(render_oracle(&to_pathset(glyph)?, &cfg))
}

/// Mean L1 between oracle renders of matching glyphs of `pred` and `refs`.
/// Every class of every reference font must be present in the prediction
/// with the same font id.
pub fn evaluate_fonts(
    pred: &[Font],
    refs: &[Font],
    resolution: usize,
    exec: Exec,
) -> Result<EvalReport> {
    let by_id: BTreeMap<&str, &Font> = pred.iter().map(|f| (f.font_id.as_str(), f)).collect();
    let mut pairs: Vec<(&Glyph, &Glyph, &str)> = Vec::new();
    let mut pred_counts = CommandCounts::default();
    let mut ref_counts = CommandCounts::default();
    for r in refs {
        let p = by_id.get(r.font_id.as_str());
        let missing: Vec<usize> = r
            .glyphs
            .keys()
            .copied()
            .filter(|c| p.is_none_or(|p| !p.glyphs.contains_key(c)))
            .collect();
        if !missing.is_empty() {
            return Err(Error::MissingGlyph {
                font_id: r.font_id.clone(),
                classes: missing,
            });
        }
        let p = p.unwrap();
        for (c, rg) in &r.glyphs {
            let pg = &p.glyphs[c];
            pred_counts.add(pg);
            ref_counts.add(rg);
            pairs.push((pg, rg, &r.font_id));
        }
    }
    let scores = exec.map_slice(&pairs, |(pg, rg, font)| -> Result<GlyphScore> {
        let l1 = if pg == rg {
            0.0
        } else {
            oracle_image(pg, resolution)?.mean_abs_diff(&oracle_image(rg, resolution)?)
        };
        Ok(GlyphScore {
            font_id: font.to_string(),
            char_class: rg.char_class,
            l1,
        })
    });
    let glyphs = scores.into_iter().collect::<Result<Vec<_>>>()?;
    let mut sums: BTreeMap<String, (f64, usize)> = BTreeMap::new();
    for s in &glyphs {
        let e = sums.entry(s.font_id.clone()).or_default();
        e.0 += s.l1;
        e.1 += 1;
    }
    let font_means = sums
        .into_iter()
        .map(|(f, (s, n))| (f, s / n as f64))
        .collect();
    let corpus_mean = if glyphs.is_empty() {
        0.0
    } else {
        glyphs.iter().map(|s| s.l1).sum::<f64>() / glyphs.len() as f64
    };
    Ok(EvalReport {
        resolution,
        glyphs,
        font_means,
        corpus_mean,
        pred_counts,
        ref_counts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{synthetic_fonts, ProceduralConfig};
    use crate::geom::Point;
    use crate::glyph::Command;

    #[test]
    fn identity_is_zero_and_missing_reported() {
        let fonts = synthetic_fonts(&ProceduralConfig {
            n_fonts: 2,
            ..Default::default()
        })
        .unwrap();
        let r = evaluate_fonts(&fonts, &fonts, 32, Exec::default()).unwrap();
        assert_eq!(r.corpus_mean, 0.0);
        assert_eq!(r.glyphs.len(), 104);

        let mut partial = fonts.clone();
        partial[1].glyphs.remove(&7);
        partial[1].glyphs.remove(&9);
        match evaluate_fonts(&partial, &fonts, 32, Exec::default()).unwrap_err() {
            Error::MissingGlyph { font_id, classes } => {
                assert_eq!(font_id, fonts[1].font_id);
                assert_eq!(classes, vec![7, 9]);
            }
            e => panic!("{e}"),
        }
    }

    #[test]
    fn square_has_no_curves() {
        let sq = Glyph::new(
            0,
            vec![
                Command::move_by(Point::new(0.0, 0.0)),
                Command::line_by(Point::new(1.0, 0.0)),
                Command::line_by(Point::new(0.0, 1.0)),
                Command::line_by(Point::new(-1.0, 0.0)),
                Command::line_by(Point::new(0.0, -1.0)),
                Command::end(),
            ],
        );
        let mut f = Font::new("sq");
        f.insert(sq);
        let s = font_stats(&f);
        assert_eq!(s.mean_curves, 0.0);
        assert_eq!(s.mean_lines, 4.0);
        assert_eq!(s.counts.moves, 1);
    }

    #[test]
    fn footer_lists_reference_points() {
        let f = reference_footer();
        for (name, v) in REFERENCE_POINTS {
            assert!(f.contains(&format!("{name} {v:.3}")));
        }
    }
}
