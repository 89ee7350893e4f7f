//! Candidate sets and the end-to-end refinement pipeline.

use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    close_paths, refine_coordinates, remove_intersection_artifacts, render_loss, select_min,
    CleanupConfig, RefineConfig, StopReason,
};
use crate::error::{Error, Result};
use crate::glyph::{
    read_glyph_file, to_pathset, validate, write_glyph_file, Command, CommandType, Glyph, L_MAX,
};
use crate::mdn::{greedy_sequence, sample_sequence, SampleConfig, SequenceDistribution};
use crate::raster::{render_oracle, CoverageImage, RasterConfig};

/// A candidate in a candidate-set file: a glyph binary path, relative to the
/// file, or inline `[kind, a0, .., a5]` rows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CandidateEntry {
    Path(String),
    Inline(Vec<[f64; 7]>),
}

/// On-disk form of a [`CandidateSet`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CandidateSetFile {
    pub font_id: String,
    pub char_class: usize,
    pub target_image: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gt_image: Option<String>,
    pub candidates: Vec<CandidateEntry>,
    /// Index of the greedy decoding among the candidates, if present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub greedy: Option<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CandidateSet {
    pub font_id: String,
    pub char_class: usize,
    pub target: CoverageImage,
    pub gt: Option<CoverageImage>,
    pub candidates: Vec<Glyph>,
    pub greedy: Option<usize>,
}

fn inline_glyph(rows: &[[f64; 7]], char_class: usize) -> std::result::Result<Glyph, String> {
    let commands = rows
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let code = r[0];
            let kind = (code.fract() == 0.0 && (0.0..4.0).contains(&code))
                .then(|| CommandType::from_code(code as u8))
                .flatten()
                .ok_or_else(|| format!("row {i}: bad command code {code}"))?;
            let mut args = [0.0; 6];
            args.copy_from_slice(&r[1..]);
            Ok(Command::new(kind, args))
        })
        .collect::<std::result::Result<Vec<_>, String>>()?;
    Ok(Glyph::new(char_class, commands))
}

fn inline_rows(glyph: &Glyph) -> Vec<[f64; 7]> {
    glyph
        .commands
        .iter()
        .map(|c| {
            let mut r = [0.0; 7];
            r[0] = c.kind.code() as f64;
            r[1..].copy_from_slice(&c.args);
            r
        })
        .collect()
}

impl CandidateSet {
    /// Samples `config.n_samples` candidates from `dist`; with
    /// `include_greedy` the first one is the greedy decoding.
    pub fn from_distribution(
        dist: &SequenceDistribution,
        target: CoverageImage,
        font_id: impl Into<String>,
        char_class: usize,
        config: &PipelineConfig,
    ) -> Result<CandidateSet> {
        let candidates = sample_candidates(
            dist,
            char_class,
            config.n_samples,
            config.include_greedy,
            &config.sample,
        )?;
        Ok(CandidateSet {
            font_id: font_id.into(),
            char_class,
            target,
            gt: None,
            candidates,
            greedy: config.include_greedy.then_some(0),
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.candidates.is_empty() {
            return Err(Error::Config("candidate set has no candidates".into()));
        }
        for (i, g) in self.candidates.iter().enumerate() {
            if g.char_class != self.char_class {
                return Err(Error::Config(format!(
                    "candidate {i} has class {}, set has {}",
                    g.char_class, self.char_class
                )));
            }
            let report = validate(g);
            if !report.is_valid() {
                return Err(Error::InvalidGlyph(report).context(format!("candidate {i}")));
            }
        }
        if let Some(k) = self.greedy {
            if k >= self.candidates.len() {
                return Err(Error::Config(format!("greedy index {k} out of range")));
            }
        }
        Ok(())
    }

    /// Bicubically resamples the target (and ground truth) to `resolution`
    /// if needed.
    pub fn fit_resolution(&mut self, resolution: usize) {
        if self.target.width != resolution || self.target.height != resolution {
            log::info!(
                "resampling target {}x{} to {resolution}",
                self.target.width,
                self.target.height
            );
            self.target = self.target.resize_bicubic(resolution, resolution);
        }
    }

    pub fn load(path: &Path) -> Result<CandidateSet> {
        let ctx = |e: Error| e.context(path.display().to_string());
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let file: CandidateSetFile = serde_json::from_str(&text).map_err(|e| ctx(e.into()))?;
        let dir = path.parent().unwrap_or(Path::new("."));
        let target = CoverageImage::load_pgm(&dir.join(&file.target_image))?;
        let gt = match &file.gt_image {
            Some(p) => Some(CoverageImage::load_pgm(&dir.join(p))?),
            None => None,
        };
        let mut candidates = Vec::with_capacity(file.candidates.len());
        for (i, entry) in file.candidates.iter().enumerate() {
            candidates.push(match entry {
                CandidateEntry::Path(p) => read_glyph_file(&dir.join(p), file.char_class)?,
                CandidateEntry::Inline(rows) => {
                    inline_glyph(rows, file.char_class).map_err(|message| Error::Format {
                        path: path.to_path_buf(),
                        message: format!("candidate {i}: {message}"),
                    })?
                }
            });
        }
        let set = CandidateSet {
            font_id: file.font_id,
            char_class: file.char_class,
            target,
            gt,
            candidates,
            greedy: file.greedy,
        };
        set.validate().map_err(ctx)?;
        Ok(set)
    }

    /// Writes the set as JSON at `path` with the images beside it, and the
    /// candidates either inline or as glyph binaries.
    pub fn save(&self, path: &Path, inline: bool) -> Result<()> {
        let dir = path.parent().unwrap_or(Path::new("."));
        let stem = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "candidates".into());
        let side = |suffix: &str| -> (String, PathBuf) {
            let name = format!("{stem}_{suffix}");
            let full = dir.join(&name);
            (name, full)
        };
        let (target_name, target_path) = side("target.pgm");
        self.target.save_pgm(&target_path)?;
        let gt_image = match &self.gt {
            Some(img) => {
                let (name, full) = side("gt.pgm");
                img.save_pgm(&full)?;
                Some(name)
            }
            None => None,
        };
        let mut candidates = Vec::new();
        for (i, g) in self.candidates.iter().enumerate() {
            candidates.push(if inline {
                CandidateEntry::Inline(inline_rows(g))
            } else {
                let (name, full) = side(&format!("c{i:02}.bin"));
                write_glyph_file(&full, g, L_MAX)?;
                CandidateEntry::Path(name)
            });
        }
        let file = CandidateSetFile {
            font_id: self.font_id.clone(),
            char_class: self.char_class,
            target_image: target_name,
            gt_image,
            candidates,
            greedy: self.greedy,
        };
        let text = serde_json::to_string_pretty(&file)?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub n_samples: usize,
    pub include_greedy: bool,
    pub sample: SampleConfig,
    pub refine: RefineConfig,
    pub cleanup: CleanupConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            n_samples: 20,
            include_greedy: true,
            sample: SampleConfig::default(),
            refine: RefineConfig::default(),
            cleanup: CleanupConfig::default(),
        }
    }
}

/// `n` candidate glyphs drawn from `dist`, the first being the greedy
/// decoding when `include_greedy` is set.
pub fn sample_candidates(
    dist: &SequenceDistribution,
    char_class: usize,
    n: usize,
    include_greedy: bool,
    config: &SampleConfig,
) -> Result<Vec<Glyph>> {
    if n == 0 {
        return Err(Error::Config("at least one candidate is required".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut out = Vec::with_capacity(n);
    if include_greedy {
        out.push(greedy_sequence(dist, char_class)?);
    }
    while out.len() < n {
        out.push(sample_sequence(dist, char_class, &mut rng, config)?);
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CandidateReport {
    pub initial_loss: f64,
    /// Render loss of the refined candidate; the selection criterion.
    pub final_loss: f64,
    pub iters: usize,
    pub stop: StopReason,
    pub greedy: bool,
    pub trace: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub font_id: String,
    pub char_class: usize,
    pub candidates: Vec<CandidateReport>,
    pub selected: usize,
    pub selected_loss: f64,
    /// Loss after loop removal.
    pub final_loss: f64,
    /// Oracle-render L1 against the ground-truth image, when one is given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gt_loss: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub final_svg: Option<String>,
}

/// Closes, refines and scores every candidate against the set's target,
/// keeps the closest one and strips its small self-intersection loops.
pub fn refine_pipeline(
    set: &CandidateSet,
    config: &PipelineConfig,
) -> Result<(Glyph, PipelineReport)> {
    set.validate()?;
    config.refine.validate()?;
    let rc = &config.refine;
    let closed: Vec<Glyph> = set.candidates.iter().map(close_paths).collect();
    let results = rc
        .exec
        .map_slice(&closed, |g| refine_coordinates(g, &set.target, rc));
    let mut refined = Vec::with_capacity(results.len());
    let mut traces = Vec::with_capacity(results.len());
    for (i, r) in results.into_iter().enumerate() {
        let (g, t) = r.map_err(|e| e.context(format!("candidate {i}")))?;
        refined.push(g);
        traces.push(t);
    }
    let losses: Vec<f64> = rc
        .exec
        .map_slice(&refined, |g| render_loss(g, &set.target, rc));
    let (selected, selected_loss) = select_min(&losses);

    let final_glyph = remove_intersection_artifacts(&refined[selected], &config.cleanup);
    let final_loss = if final_glyph == refined[selected] {
        selected_loss
    } else {
        render_loss(&final_glyph, &set.target, rc)
    };
    let gt_loss = match &set.gt {
        Some(gt) => {
            let raster = RasterConfig {
                exec: rc.exec,
                ..RasterConfig::with_resolution(gt.width)
            };
            Some(render_oracle(&to_pathset(&final_glyph)?, &raster).mean_abs_diff(gt))
        }
        None => None,
    };

    let candidates = traces
        .into_iter()
        .zip(&losses)
        .enumerate()
        .map(|(i, (t, &l))| CandidateReport {
            initial_loss: t.initial_loss(),
            final_loss: l,
            iters: t.iters,
            stop: t.stop,
            greedy: set.greedy == Some(i),
            trace: t.losses,
        })
        .collect();
    let report = PipelineReport {
        font_id: set.font_id.clone(),
        char_class: set.char_class,
        candidates,
        selected,
        selected_loss,
        final_loss,
        gt_loss,
        final_svg: None,
    };
    Ok((final_glyph, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Point;
    use crate::raster::render;

    fn square() -> Glyph {
        let p = Point::new;
        Glyph::new(
            3,
            vec![
                Command::move_by(p(0.25, 0.25)),
                Command::line_by(p(0.5, 0.0)),
                Command::curve_by(p(0.1, 0.2), p(0.1, 0.3), p(0.0, 0.5)),
                Command::line_by(p(-0.5, 0.0)),
                Command::line_by(p(0.0, -0.5)),
                Command::end(),
            ],
        )
    }

    #[test]
    fn file_round_trip_both_forms() {
        let dir = tempfile::tempdir().unwrap();
        let g = square();
        let target = render(&to_pathset(&g).unwrap(), &RasterConfig::with_resolution(32));
        let set = CandidateSet {
            font_id: "f".into(),
            char_class: 3,
            target: target.quantized(),
            gt: Some(target.quantized()),
            candidates: vec![g.clone(), g.clone()],
            greedy: Some(1),
        };
        for inline in [true, false] {
            let path = dir.path().join(format!("set{inline}.json"));
            set.save(&path, inline).unwrap();
            let back = CandidateSet::load(&path).unwrap();
            assert_eq!(back.target, set.target);
            assert_eq!(back.greedy, Some(1));
            for c in &back.candidates {
                assert_eq!(c.kinds(), g.kinds());
                for (a, b) in c.commands.iter().zip(&g.commands) {
                    for k in 0..6 {
                        assert!((a.args[k] - b.args[k]).abs() < 1e-6);
                    }
                }
            }
        }
    }

    #[test]
    fn inline_json_shape() {
        let text = r#"{"font_id":"x","char_class":0,"target_image":"t.pgm",
            "candidates":[[[0,0,0,0,0,0.1,0.1],[1,0,0,0,0,0.5,0],[3,0,0,0,0,0,0]], "c.bin"]}"#;
        let f: CandidateSetFile = serde_json::from_str(text).unwrap();
        assert!(matches!(f.candidates[0], CandidateEntry::Inline(ref r) if r.len() == 3));
        assert_eq!(f.candidates[1], CandidateEntry::Path("c.bin".into()));
        assert!(inline_glyph(&[[7.0, 0., 0., 0., 0., 0., 0.]], 0).is_err());
    }

    #[test]
    fn identity_pipeline() {
        let g = square();
        let config = PipelineConfig {
            refine: RefineConfig {
                resolution: 64,
                ..Default::default()
            },
            ..Default::default()
        };
        let target = render(&to_pathset(&g).unwrap(), &config.refine.raster());
        let set = CandidateSet {
            font_id: "f".into(),
            char_class: 3,
            target,
            gt: None,
            candidates: vec![g],
            greedy: None,
        };
        let (out, report) = refine_pipeline(&set, &config).unwrap();
        assert!(report.final_loss < 1e-3);
        assert_eq!(report.selected, 0);
        assert!(out.is_valid());
    }
}
