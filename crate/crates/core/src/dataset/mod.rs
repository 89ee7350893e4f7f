//! Corpus ingestion, font-level splits and the procedural corpus.
//!
//! A corpus directory holds one subdirectory per font with a `metrics.json`
//! (`units_per_em`, `ascender`, `descender`) and one SVG path-data file per
//! class named `NN.path`. [`build_dataset`] turns it into fixed-length binary
//! command records plus 64x64 PGM renders, listed in a JSON [`Manifest`].

mod synth;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use log::{info, warn};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::glyph::{
    encode_record, from_pathset, normalize, parse_svg_path, read_glyph_file, to_pathset, validate,
    FillRule, Font, Glyph, L_MAX, N_CHAR,
};
use crate::raster::{encode_pgm, render, CoverageImage, RasterConfig};

pub use synth::{make_synthetic_corpus, synthetic_fonts, write_corpus, ProceduralConfig};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const METRICS_FILE: &str = "metrics.json";
/// Resolution of the stored record images.
pub const RECORD_RESOLUTION: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecordEntry {
    pub font_id: String,
    pub char_class: usize,
    /// Paths relative to the manifest directory.
    pub commands: String,
    pub image: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub name: String,
    pub n_char: usize,
    pub l_max: usize,
    pub records: Vec<RecordEntry>,
    pub splits: BTreeMap<String, Split>,
    /// Hex SHA-256 of every record file, keyed by relative path.
    pub sha256: BTreeMap<String, String>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FontMetrics {
    pub units_per_em: f64,
    pub ascender: f64,
    pub descender: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct DatasetConfig {
    pub name: String,
    pub n_char: usize,
    pub l_max: usize,
    #[serde(skip)]
    pub exec: Exec,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig {
            name: "glyphs".into(),
            n_char: N_CHAR,
            l_max: L_MAX,
            exec: Exec::default(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct DatasetRecord {
    pub font_id: String,
    pub char_class: usize,
    pub glyph: Glyph,
    pub image: CoverageImage,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn read_font_dir(dir: &Path, font_id: &str, config: &DatasetConfig) -> Result<Option<Font>> {
    let metrics_path = dir.join(METRICS_FILE);
    let text = std::fs::read_to_string(&metrics_path).map_err(|e| Error::io(&metrics_path, e))?;
    let metrics: FontMetrics = serde_json::from_str(&text)
        .map_err(|e| Error::from(e).context(metrics_path.display().to_string()))?;

    let missing: Vec<usize> = (0..config.n_char)
        .filter(|c| !dir.join(format!("{c:02}.path")).is_file())
        .collect();
    if !missing.is_empty() {
        let err = Error::MissingGlyph {
            font_id: font_id.to_string(),
            classes: missing,
        };
        warn!("skipping font: {err}");
        return Ok(None);
    }

    read_font_classes(
        dir,
        font_id,
        &metrics,
        &(0..config.n_char).collect::<Vec<_>>(),
        config,
    )
    .map(Some)
}

fn read_font_classes(
    dir: &Path,
    font_id: &str,
    metrics: &FontMetrics,
    classes: &[usize],
    config: &DatasetConfig,
) -> Result<Font> {
    let glyphs = config.exec.map_slice(classes, |&c| -> Result<Glyph> {
        let path = dir.join(format!("{c:02}.path"));
        let ctx = |e: Error| e.context(format!("font {font_id}, class {c}"));
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let ps = parse_svg_path(&text, FillRule::NonZero).map_err(ctx)?;
        let ps = normalize(
            &ps,
            metrics.units_per_em,
            metrics.ascender,
            metrics.descender,
        )
        .map_err(ctx)?;
        let glyph = from_pathset(&ps, c, config.l_max).map_err(ctx)?;
        let report = validate(&glyph);
        if !report.is_valid() {
            return Err(ctx(Error::InvalidGlyph(report)));
        }
        Ok(glyph)
    });
    let mut font = Font::new(font_id);
    for g in glyphs {
        font.insert(g?);
    }
    Ok(font)
}

/// Fonts stored under `path`: a built dataset (its manifest is verified
/// first) or a corpus directory of per-font outline folders, in which case
/// fonts may be incomplete.
pub fn load_fonts(path: &Path, config: &DatasetConfig) -> Result<Vec<Font>> {
    if path.join(MANIFEST_FILE).is_file() {
        let manifest = load_manifest(path)?;
        return Ok(records_to_fonts(&load_records(path, &manifest)?));
    }
    let mut fonts = Vec::new();
    for font_id in font_dirs(path)? {
        let dir = path.join(&font_id);
        let metrics_path = dir.join(METRICS_FILE);
        let text =
            std::fs::read_to_string(&metrics_path).map_err(|e| Error::io(&metrics_path, e))?;
        let metrics: FontMetrics = serde_json::from_str(&text)
            .map_err(|e| Error::from(e).context(metrics_path.display().to_string()))?;
        let present: Vec<usize> = (0..config.n_char)
            .filter(|c| dir.join(format!("{c:02}.path")).is_file())
            .collect();
        fonts.push(read_font_classes(
            &dir, &font_id, &metrics, &present, config,
        )?);
    }
    Ok(fonts)
}

/// Names of the subdirectories of `dir`, sorted.
fn font_dirs(dir: &Path) -> Result<Vec<String>> {
    let mut names: Vec<String> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok())
        .filter(|e| e.path().is_dir())
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    Ok(names)
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Builds records for every complete font under `corpus_dir` and writes them
/// with a manifest into `out`. Fonts are processed in name order; a font with
/// missing classes is logged and skipped. All fonts start in the train split.
pub fn build_dataset(corpus_dir: &Path, out: &Path, config: &DatasetConfig) -> Result<Manifest> {
    let font_dirs: Vec<(String, PathBuf)> = font_dirs(corpus_dir)?
        .into_iter()
        .map(|id| {
            let dir = corpus_dir.join(&id);
            (id, dir)
        })
        .collect();

    let raster = RasterConfig {
        exec: config.exec,
        ..RasterConfig::with_resolution(RECORD_RESOLUTION)
    };
    let mut manifest = Manifest {
        name: config.name.clone(),
        n_char: config.n_char,
        l_max: config.l_max,
        records: Vec::new(),
        splits: BTreeMap::new(),
        sha256: BTreeMap::new(),
    };
    for (font_id, dir) in &font_dirs {
        let Some(font) = read_font_dir(dir, font_id, config)? else {
            continue;
        };
        let glyphs: Vec<&Glyph> = font.glyphs.values().collect();
        let encoded = config
            .exec
            .map_slice(&glyphs, |g| -> Result<(Vec<u8>, Vec<u8>)> {
                // Render what will be read back: the stored arguments are f32.
                let bytes = encode_record(g, config.l_max)?;
                let stored =
                    crate::glyph::decode_record(&bytes, g.char_class).map_err(Error::Config)?;
                let img = render(&to_pathset(&stored)?, &raster);
                Ok((bytes, encode_pgm(&img)))
            });
        for (g, enc) in glyphs.iter().zip(encoded) {
            let (bin, pgm) = enc?;
            let stem = format!("records/{font_id}/{:02}", g.char_class);
            let entry = RecordEntry {
                font_id: font_id.clone(),
                char_class: g.char_class,
                commands: format!("{stem}.bin"),
                image: format!("{stem}.pgm"),
            };
            write_file(&out.join(&entry.commands), &bin)?;
            write_file(&out.join(&entry.image), &pgm)?;
            manifest
                .sha256
                .insert(entry.commands.clone(), sha256_hex(&bin));
            manifest
                .sha256
                .insert(entry.image.clone(), sha256_hex(&pgm));
            manifest.records.push(entry);
        }
        manifest.splits.insert(font_id.clone(), Split::Train);
    }
    info!(
        "built {} records from {} fonts",
        manifest.records.len(),
        manifest.splits.len()
    );
    save_manifest(out, &manifest)?;
    Ok(manifest)
}

pub fn save_manifest(dir: &Path, manifest: &Manifest) -> Result<()> {
    let mut text = serde_json::to_string_pretty(manifest)?;
    text.push('\n');
    write_file(&dir.join(MANIFEST_FILE), text.as_bytes())
}

/// Reads `dir/manifest.json`.
pub fn load_manifest(dir: &Path) -> Result<Manifest> {
    let path = dir.join(MANIFEST_FILE);
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::from(e).context(path.display().to_string()))
}

/// Checks every listed file against its recorded hash.
pub fn verify_manifest(dir: &Path, manifest: &Manifest) -> Result<()> {
    for (rel, want) in &manifest.sha256 {
        let path = dir.join(rel);
        let bytes = std::fs::read(&path).map_err(|e| Error::io(&path, e))?;
        if &sha256_hex(&bytes) != want {
            return Err(Error::HashMismatch(rel.clone()));
        }
    }
    for r in &manifest.records {
        if !manifest.splits.contains_key(&r.font_id) {
            return Err(Error::Config(format!("font {} has no split", r.font_id)));
        }
    }
    Ok(())
}

/// Verifies hashes, then loads every record.
pub fn load_records(dir: &Path, manifest: &Manifest) -> Result<Vec<DatasetRecord>> {
    verify_manifest(dir, manifest)?;
    manifest
        .records
        .iter()
        .map(|r| {
            Ok(DatasetRecord {
                font_id: r.font_id.clone(),
                char_class: r.char_class,
                glyph: read_glyph_file(&dir.join(&r.commands), r.char_class)?,
                image: CoverageImage::load_pgm(&dir.join(&r.image))?,
            })
        })
        .collect()
}

/// Groups records into fonts, in manifest order.
pub fn records_to_fonts(records: &[DatasetRecord]) -> Vec<Font> {
    let mut fonts: Vec<Font> = Vec::new();
    for r in records {
        if fonts.last().is_none_or(|f| f.font_id != r.font_id) {
            fonts.push(Font::new(r.font_id.clone()));
        }
        fonts.last_mut().unwrap().insert(r.glyph.clone());
    }
    fonts
}

/// Assigns whole fonts to train or test. `round(ratio * n)` fonts (at least
/// one on each side) go to train, chosen by a seeded shuffle of the sorted
/// font ids.
pub fn split(manifest: &Manifest, ratio: f64, seed: u64) -> Result<Manifest> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::Config(format!("split ratio {ratio} not in (0, 1)")));
    }
    let mut fonts: Vec<String> = manifest.splits.keys().cloned().collect();
    for r in &manifest.records {
        if !manifest.splits.contains_key(&r.font_id) && !fonts.contains(&r.font_id) {
            fonts.push(r.font_id.clone());
        }
    }
    fonts.sort();
    let n = fonts.len();
    if n < 2 {
        return Err(Error::TooFewFonts(n));
    }
    let n_train = ((ratio * n as f64).round() as usize).clamp(1, n - 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    fonts.shuffle(&mut rng);
    let mut out = manifest.clone();
    out.splits = fonts
        .into_iter()
        .enumerate()
        .map(|(i, f)| {
            (
                f,
                if i < n_train {
                    Split::Train
                } else {
                    Split::Test
                },
            )
        })
        .collect();
    Ok(out)
}
