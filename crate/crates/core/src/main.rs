use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use vecglyph::dataset::{
    build_dataset, load_fonts, load_manifest, make_synthetic_corpus, save_manifest, split,
    DatasetConfig, ProceduralConfig,
};
use vecglyph::eval::{
    evaluate_fonts, font_stats, oracle_image, run_selftest, SelftestConfig, EVAL_RESOLUTION,
};
use vecglyph::glyph::{
    parse_svg_path, read_glyph_file, serialize_svg_path, to_pathset, write_glyph_file, FillRule,
    L_MAX,
};
use vecglyph::mdn::SequenceDistribution;
use vecglyph::raster::{render, render_oracle};
use vecglyph::refine::{refine_pipeline, sample_candidates, CandidateSet, PipelineConfig};
use vecglyph::{Error, Exec, PathSet, RasterConfig};

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_ASSERT: u8 = 3;

#[derive(Parser)]
#[command(
    name = "vecglyph",
    version,
    about = "Vector glyph dataset, rendering and refinement tools"
)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Args)]
struct Global {
    /// JSON file with `raster`, `pipeline`, `dataset`, `synth` and `selftest` sections.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    resolution: Option<usize>,
    /// Number of candidates to sample.
    #[arg(long, global = true)]
    candidates: Option<usize>,
    /// Refinement iteration limit.
    #[arg(long, global = true)]
    max_iters: Option<usize>,
    /// Only print warnings and errors.
    #[arg(long, global = true)]
    quiet: bool,
    /// Run every loop on the calling thread.
    #[arg(long, global = true)]
    sequential: bool,
}

#[derive(Subcommand)]
enum Cmd {
    /// Build a dataset from a corpus of per-font outline folders.
    Prepare { corpus: PathBuf },
    /// Generate a procedural corpus and build a dataset from it.
    Synthcorpus {
        #[arg(long)]
        fonts: Option<usize>,
    },
    /// Assign fonts of a dataset to train and test splits.
    Split {
        dataset: PathBuf,
        #[arg(long, default_value_t = 0.8)]
        ratio: f64,
    },
    /// Rasterize a glyph binary or SVG path file to PGM.
    Render {
        input: PathBuf,
        /// Character class of a glyph binary.
        #[arg(long, default_value_t = 0)]
        class: usize,
        /// Use the supersampled reference renderer.
        #[arg(long)]
        oracle: bool,
    },
    /// Draw candidate glyphs from a sequence distribution.
    Sample {
        distribution: PathBuf,
        #[arg(long, default_value_t = 0)]
        class: usize,
        #[arg(long)]
        temperature: Option<f64>,
        /// Target image; when given, a candidate-set file is written too.
        #[arg(long)]
        target: Option<PathBuf>,
    },
    /// Run the refinement pipeline on a candidate-set file.
    Refine {
        #[arg(value_name = "CANDIDATES")]
        candidate_set: PathBuf,
    },
    /// Mean L1 between oracle renders of predicted and reference fonts.
    Eval {
        pred: PathBuf,
        reference: PathBuf,
        /// Write both renders of every glyph as PGM here.
        #[arg(long)]
        export: Option<PathBuf>,
    },
    /// Command counts per font.
    Stats { input: PathBuf },
    /// Build a synthetic corpus and check every acceptance criterion.
    Selftest {
        /// Comma-separated subset of criteria.
        #[arg(long, value_delimiter = ',')]
        criteria: Vec<String>,
        /// Write the report as JSON here.
        #[arg(long)]
        report: Option<PathBuf>,
    },
}

#[derive(Deserialize, Default)]
#[serde(default)]
struct FileConfig {
    raster: RasterConfig,
    pipeline: PipelineConfig,
    dataset: DatasetConfig,
    synth: ProceduralConfig,
    selftest: SelftestConfig,
}

struct Ctx {
    cfg: FileConfig,
    out: Option<PathBuf>,
    resolution: Option<usize>,
    quiet: bool,
}

impl Ctx {
    fn new(g: &Global) -> Result<Ctx, Error> {
        let mut cfg: FileConfig = match &g.config {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
                serde_json::from_str(&text)
                    .map_err(|e| Error::from(e).context(p.display().to_string()))?
            }
            None => FileConfig::default(),
        };
        let exec = if g.sequential {
            Exec::Sequential
        } else {
            Exec::default()
        };
        cfg.raster.exec = exec;
        cfg.pipeline.refine.exec = exec;
        cfg.dataset.exec = exec;
        cfg.selftest.exec = exec;
        if let Some(s) = g.seed {
            cfg.synth.seed = s;
            cfg.selftest.seed = s;
            cfg.pipeline.sample.seed = s;
        }
        if let Some(r) = g.resolution {
            cfg.raster.resolution = r;
            cfg.pipeline.refine.resolution = r;
        }
        if let Some(n) = g.candidates {
            cfg.pipeline.n_samples = n;
            cfg.selftest.pipeline_candidates = n;
        }
        if let Some(m) = g.max_iters {
            cfg.pipeline.refine.max_iters = m;
            cfg.selftest.max_iters = m;
        }
        Ok(Ctx {
            cfg,
            out: g.out.clone(),
            resolution: g.resolution,
            quiet: g.quiet,
        })
    }

    fn out_dir(&self, default: &str) -> Result<PathBuf, Error> {
        let dir = self.out.clone().unwrap_or_else(|| PathBuf::from(default));
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        Ok(dir)
    }

    fn say(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            println!("{}", msg.as_ref());
        }
    }
}

enum Failure {
    Data(Error),
    Assert(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Data(e)
    }
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<(), Error> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

fn load_glyph_like(path: &Path, class: usize) -> Result<PathSet, Error> {
    if path.extension().is_some_and(|e| e == "bin") {
        to_pathset(&read_glyph_file(path, class)?)
    } else {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        parse_svg_path(&text, FillRule::NonZero)
    }
}

fn run(cmd: Cmd, ctx: &Ctx) -> Result<(), Failure> {
    match cmd {
        Cmd::Prepare { corpus } => {
            let out = ctx.out_dir("dataset")?;
            let m = build_dataset(&corpus, &out, &ctx.cfg.dataset)?;
            ctx.say(format!(
                "{} records written to {}",
                m.records.len(),
                out.display()
            ));
        }
        Cmd::Synthcorpus { fonts } => {
            let out = ctx.out_dir("synthetic")?;
            let mut synth = ctx.cfg.synth.clone();
            if let Some(n) = fonts {
                synth.n_fonts = n;
            }
            let m = make_synthetic_corpus(&synth, &out)?;
            ctx.say(format!(
                "{} records written to {}",
                m.records.len(),
                out.display()
            ));
        }
        Cmd::Split { dataset, ratio } => {
            let m = load_manifest(&dataset)?;
            let seed = ctx.cfg.synth.seed;
            let m = split(&m, ratio, seed)?;
            save_manifest(&dataset, &m)?;
            let train = m
                .splits
                .values()
                .filter(|s| **s == vecglyph::dataset::Split::Train)
                .count();
            ctx.say(format!(
                "{train} train / {} test fonts",
                m.splits.len() - train
            ));
        }
        Cmd::Render {
            input,
            class,
            oracle,
        } => {
            let ps = load_glyph_like(&input, class)?;
            ctx.cfg.raster.validate()?;
            let img = if oracle {
                render_oracle(&ps, &ctx.cfg.raster)
            } else {
                render(&ps, &ctx.cfg.raster)
            };
            let out = ctx
                .out
                .clone()
                .unwrap_or_else(|| input.with_extension("pgm"));
            img.save_pgm(&out)?;
            ctx.say(format!("wrote {}", out.display()));
        }
        Cmd::Sample {
            distribution,
            class,
            temperature,
            target,
        } => {
            let dist = SequenceDistribution::load(&distribution)?;
            let mut pc = ctx.cfg.pipeline.clone();
            if let Some(t) = temperature {
                pc.sample.temperature = t;
            }
            let out = ctx.out_dir("samples")?;
            match target {
                Some(t) => {
                    let img = vecglyph::CoverageImage::load_pgm(&t)?;
                    let set = CandidateSet::from_distribution(&dist, img, "sampled", class, &pc)?;
                    let path = out.join("candidates.json");
                    set.save(&path, false)?;
                    ctx.say(format!(
                        "wrote {} candidates to {}",
                        set.candidates.len(),
                        path.display()
                    ));
                }
                None => {
                    let glyphs = sample_candidates(
                        &dist,
                        class,
                        pc.n_samples,
                        pc.include_greedy,
                        &pc.sample,
                    )?;
                    for (i, g) in glyphs.iter().enumerate() {
                        write_glyph_file(&out.join(format!("c{i:02}.bin")), g, L_MAX)?;
                    }
                    ctx.say(format!(
                        "wrote {} candidates to {}",
                        glyphs.len(),
                        out.display()
                    ));
                }
            }
        }
        Cmd::Refine { candidate_set } => {
            let pc = &ctx.cfg.pipeline;
            let mut set = CandidateSet::load(&candidate_set)?;
            set.fit_resolution(pc.refine.resolution);
            let (glyph, mut report) = refine_pipeline(&set, pc)?;
            let out = ctx.out_dir("refined")?;
            let ps = to_pathset(&glyph)?;
            std::fs::write(out.join("final.svg"), svg_document(&ps))
                .map_err(|e| Error::io(out.join("final.svg"), e))?;
            write_glyph_file(&out.join("final.bin"), &glyph, L_MAX)?;
            render(&ps, &pc.refine.raster()).save_pgm(&out.join("final.pgm"))?;
            report.final_svg = Some("final.svg".into());
            write_json(&out.join("report.json"), &report)?;
            ctx.say(format!(
                "selected candidate {} of {}: loss {:.5}, after cleanup {:.5}",
                report.selected,
                report.candidates.len(),
                report.selected_loss,
                report.final_loss
            ));
        }
        Cmd::Eval {
            pred,
            reference,
            export,
        } => {
            let dc = &ctx.cfg.dataset;
            let res = ctx.resolution.unwrap_or(EVAL_RESOLUTION);
            let pf = load_fonts(&pred, dc)?;
            let rf = load_fonts(&reference, dc)?;
            let report = evaluate_fonts(&pf, &rf, res, ctx.cfg.raster.exec)?;
            if let Some(dir) = export {
                export_pgms(&dir, &pf, &rf, res)?;
            }
            if let Some(out) = &ctx.out {
                write_json(out, &report)?;
            }
            ctx.say(report.summary().trim_end());
        }
        Cmd::Stats { input } => {
            let fonts = load_fonts(&input, &ctx.cfg.dataset)?;
            let stats: Vec<_> = fonts.iter().map(font_stats).collect();
            for s in &stats {
                ctx.say(format!(
                    "{}\tglyphs {}\tmove {:.2}\tline {:.2}\tcurve {:.2}",
                    s.font_id, s.counts.glyphs, s.mean_moves, s.mean_lines, s.mean_curves
                ));
            }
            if let Some(out) = &ctx.out {
                write_json(out, &stats)?;
            }
        }
        Cmd::Selftest { criteria, report } => {
            let mut cfg = ctx.cfg.selftest.clone();
            if !criteria.is_empty() {
                for c in &criteria {
                    if !vecglyph::eval::CRITERIA.contains(&c.as_str()) {
                        return Err(Error::Config(format!("unknown criterion {c}")).into());
                    }
                }
                cfg.criteria = criteria;
            }
            let r = run_selftest(ctx.out.as_deref(), &cfg, |c| println!("{c}"))?;
            if let Some(p) = report {
                write_json(&p, &r)?;
            }
            if let Some(f) = r.first_failure() {
                return Err(Failure::Assert(format!("criterion failed: {}", f.name)));
            }
            println!("all {} criteria passed", r.criteria.len());
        }
    }
    Ok(())
}

fn svg_document(ps: &PathSet) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 1 1\">\n  <path transform=\"matrix(1 0 0 -1 0 1)\" d=\"{}\"/>\n</svg>\n",
        serialize_svg_path(ps, 6)
    )
}

fn export_pgms(
    dir: &Path,
    pred: &[vecglyph::Font],
    refs: &[vecglyph::Font],
    res: usize,
) -> Result<(), Error> {
    for (tag, fonts) in [("pred", pred), ("ref", refs)] {
        for f in fonts {
            let d = dir.join(tag).join(&f.font_id);
            std::fs::create_dir_all(&d).map_err(|e| Error::io(&d, e))?;
            for (c, g) in &f.glyphs {
                oracle_image(g, res)?.save_pgm(&d.join(format!("{c:02}.pgm")))?;
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let level = if cli.global.quiet { "warn" } else { "info" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    let ctx = match Ctx::new(&cli.global) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_USAGE);
        }
    };
    match run(cli.command, &ctx) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Data(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_DATA)
        }
        Err(Failure::Assert(m)) => {
            eprintln!("{m}");
            ExitCode::from(EXIT_ASSERT)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn argument_definitions_are_consistent() {
        Cli::command().debug_assert();
    }
}
