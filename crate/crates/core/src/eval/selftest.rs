//! End-to-end checks on a freshly built synthetic corpus.

use std::fmt;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::dataset::{
    load_manifest, load_records, make_synthetic_corpus, ProceduralConfig, MANIFEST_FILE,
};
use crate::error::Result;
use crate::exec::Exec;
use crate::geom::Point;
use crate::glyph::{
    parse_svg_path, serialize_svg_path, to_pathset, validate, Command, CommandType, FillRule,
    Glyph, L_MAX,
};
use crate::mdn::{
    mixture_nll, repair, sample_scalar, sample_sequence, MixtureParams, Provenance, SampleConfig,
    SequenceDistribution, StepDistribution,
};
use crate::raster::{l1_loss_and_gradients, render, render_commands, render_oracle, RasterConfig};
use crate::refine::{
    close_paths, count_small_loops, refine_coordinates, refine_pipeline,
    remove_intersection_artifacts, render_loss, CandidateSet, CleanupConfig, PipelineConfig,
    PipelineReport, RefineConfig,
};

/// Names of the self-test criteria, in run order.
pub const CRITERIA: [&str; 6] = [
    "gradient",
    "fidelity",
    "recovery",
    "selection",
    "structural",
    "fuzz",
];

/// Offset applied to every point of the stand-in greedy candidate, in EM.
const LOCATION_SHIFT: Point = Point { x: 0.015, y: -0.01 };

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SelftestConfig {
    pub seed: u64,
    pub n_fonts: usize,
    pub max_iters: usize,
    pub gradient_glyphs: usize,
    pub recovery_trials: usize,
    pub pipeline_glyphs: usize,
    pub pipeline_candidates: usize,
    pub distribution_trials: usize,
    pub fuzz_cases: usize,
    /// Criteria to run; empty runs all of them.
    pub criteria: Vec<String>,
    #[serde(skip)]
    pub exec: Exec,
}

impl Default for SelftestConfig {
    fn default() -> Self {
        SelftestConfig {
            seed: 1,
            n_fonts: 4,
            max_iters: 400,
            gradient_glyphs: 50,
            recovery_trials: 100,
            pipeline_glyphs: 25,
            pipeline_candidates: 4,
            distribution_trials: 5,
            fuzz_cases: 1000,
            criteria: Vec::new(),
            exec: Exec::default(),
        }
    }
}

impl SelftestConfig {
    fn wants(&self, name: &str) -> bool {
        self.criteria.is_empty() || self.criteria.iter().any(|c| c == name)
    }

    fn rng(&self, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        rng
    }

    fn refine(&self) -> RefineConfig {
        RefineConfig {
            max_iters: self.max_iters,
            exec: self.exec,
            ..Default::default()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriterionResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget_seconds: Option<f64>,
}

impl fmt::Display for CriterionResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let status = if self.passed { "PASS" } else { "FAIL" };
        write!(
            f,
            "{status} {}: {} [{:.1} s",
            self.name, self.detail, self.seconds
        )?;
        if let Some(b) = self.budget_seconds {
            write!(f, ", budget {b:.0} s")?;
        }
        write!(f, "]")
    }
}

fn timed(
    name: &str,
    budget: Option<f64>,
    f: impl FnOnce() -> Result<(bool, String)>,
) -> Result<CriterionResult> {
    let start = Instant::now();
    let (ok, detail) = f()?;
    let seconds = start.elapsed().as_secs_f64();
    let in_budget = budget.is_none_or(|b| seconds < b);
    let detail = if in_budget {
        detail
    } else {
        format!("{detail}; over the time budget")
    };
    Ok(CriterionResult {
        name: name.to_string(),
        passed: ok && in_budget,
        detail,
        seconds,
        budget_seconds: budget,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelftestReport {
    pub seed: u64,
    pub criteria: Vec<CriterionResult>,
}

impl SelftestReport {
    pub fn passed(&self) -> bool {
        self.criteria.iter().all(|c| c.passed)
    }

    pub fn first_failure(&self) -> Option<&CriterionResult> {
        self.criteria.iter().find(|c| !c.passed)
    }
}

/// Adds independent Gaussian noise to the absolute position of every used
/// point. Contours generally end up open.
pub fn perturb<R: Rng + ?Sized>(glyph: &Glyph, sigma: f64, rng: &mut R) -> Glyph {
    let noise = Normal::new(0.0, sigma).expect("sigma must be finite and non-negative");
    let mut abs = glyph.to_absolute();
    for a in &mut abs {
        let used = a.kind.used_pairs();
        for (k, u) in used.iter().enumerate() {
            if *u {
                let p = a.point_mut(k);
                p.x += noise.sample(rng);
                p.y += noise.sample(rng);
            }
        }
    }
    Glyph::from_absolute(glyph.char_class, &abs)
}

fn translate(glyph: &Glyph, d: Point) -> Glyph {
    let mut abs = glyph.to_absolute();
    for a in &mut abs {
        a.ctrl1 += d;
        a.ctrl2 += d;
        a.end += d;
    }
    Glyph::from_absolute(glyph.char_class, &abs)
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs())
}

/// Analytic gradients against central differences with step 1e-4 EM at
/// 64x64, on noisy glyphs fitted to a point-sampled render of the
/// original. Agreement is measured per absolute point coordinate; the rate
/// for the relative arguments is reported alongside.
pub fn check_gradient(glyphs: &[Glyph], config: &SelftestConfig) -> Result<CriterionResult> {
    timed("gradient", Some(120.0), || {
        const H: f64 = 1e-4;
        let cfg = RasterConfig {
            exec: Exec::Sequential,
            ..RasterConfig::with_resolution(64)
        };
        let binary = RasterConfig {
            oracle_supersample: 1,
            ..cfg.clone()
        };
        let mut rng = config.rng(1);
        let cases: Vec<(Glyph, Glyph)> = (0..config.gradient_glyphs)
            .map(|i| {
                let g = glyphs[(i * 7919) % glyphs.len()].clone();
                let p = perturb(&g, 0.01, &mut rng);
                (g, p)
            })
            .collect();
        let counts = config
            .exec
            .map_slice(&cases, |(g, pg)| -> Result<[usize; 4]> {
                let target = render_oracle(&to_pathset(g)?, &binary);
                let loss = |x: &Glyph| l1_loss_and_gradients(x, &target, &cfg).map(|r| r.0);
                let (_, grads) = l1_loss_and_gradients(pg, &target, &cfg)?;
                let abs_grads = grads.to_absolute(&pg.commands);
                let abs = pg.to_absolute();
                let mut c = [0usize; 4];
                for (j, cmd) in pg.commands.iter().enumerate() {
                    let used = cmd.kind.used_pairs();
                    for k in 0..3 {
                        if !used[k] {
                            continue;
                        }
                        for axis in 0..2 {
                            let a = [abs_grads[j][k].x, abs_grads[j][k].y][axis];
                            if a.abs() <= 1e-6 {
                                continue;
                            }
                            let at = |d: f64| {
                                let mut moved = abs.clone();
                                let p = moved[j].point_mut(k);
                                if axis == 0 {
                                    p.x += d
                                } else {
                                    p.y += d
                                }
                                loss(&Glyph::from_absolute(pg.char_class, &moved))
                            };
                            let fd = (at(H)? - at(-H)?) / (2.0 * H);
                            c[1] += 1;
                            c[0] += (rel_err(a, fd) < 1e-3) as usize;
                        }
                    }
                    for k in 0..6 {
                        let a = grads.grads[j][k];
                        if a.abs() <= 1e-6 {
                            continue;
                        }
                        let at = |d: f64| {
                            let mut x = pg.clone();
                            x.commands[j].args[k] += d;
                            loss(&x)
                        };
                        let fd = (at(H)? - at(-H)?) / (2.0 * H);
                        c[3] += 1;
                        c[2] += (rel_err(a, fd) < 1e-3) as usize;
                    }
                }
                Ok(c)
            });
        let mut total = [0usize; 4];
        for c in counts {
            let c = c?;
            for k in 0..4 {
                total[k] += c[k];
            }
        }
        let rate = total[0] as f64 / total[1].max(1) as f64;
        let rel_rate = total[2] as f64 / total[3].max(1) as f64;
        Ok((
            total[1] > 0 && rate >= 0.95,
            format!(
                "{}/{} point coordinates within 1e-3 ({:.1}%, need 95%) over {} glyphs; relative arguments {:.1}%",
                total[0],
                total[1],
                100.0 * rate,
                cases.len(),
                100.0 * rel_rate
            ),
        ))
    })
}

/// Prefilter render against the 16x16 supersampled oracle at 128x128 over
/// every glyph.
pub fn check_fidelity(glyphs: &[Glyph], config: &SelftestConfig) -> Result<CriterionResult> {
    timed("fidelity", Some(60.0), || {
        let cfg = RasterConfig {
            exec: Exec::Sequential,
            ..RasterConfig::with_resolution(128)
        };
        let diffs = config.exec.map_slice(glyphs, |g| -> Result<Vec<f64>> {
            let ps = to_pathset(g)?;
            let a = render(&ps, &cfg);
            let b = render_oracle(&ps, &cfg);
            Ok(a.data
                .iter()
                .zip(&b.data)
                .map(|(x, y)| (x - y).abs())
                .collect())
        });
        let mut all = Vec::new();
        for d in diffs {
            all.extend(d?);
        }
        let mean = all.iter().sum::<f64>() / all.len() as f64;
        all.sort_by(f64::total_cmp);
        let p99 = all[((0.99 * all.len() as f64).ceil() as usize).saturating_sub(1)];
        Ok((
            mean < 0.02 && p99 < 0.2,
            format!(
                "mean |diff| {mean:.4} (< 0.02), p99 {p99:.4} (< 0.2) over {} glyphs",
                glyphs.len()
            ),
        ))
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecoveryTrial {
    pub char_class: usize,
    pub initial_loss: f64,
    pub final_loss: f64,
    pub iters: usize,
    pub kinds_preserved: bool,
    pub closure_gap: f64,
}

/// Noisy copies (0.02 EM per coordinate) of corpus glyphs refined against
/// the render of the original at 256x256.
pub fn recovery_trials(glyphs: &[Glyph], config: &SelftestConfig) -> Result<Vec<RecoveryTrial>> {
    let rc = config.refine();
    let mut rng = config.rng(2);
    let mut out = Vec::with_capacity(config.recovery_trials);
    for k in 0..config.recovery_trials {
        let g = &glyphs[(k * 37) % glyphs.len()];
        let target = render(&to_pathset(g)?, &rc.raster());
        let start = close_paths(&perturb(g, 0.02, &mut rng));
        let (refined, trace) = refine_coordinates(&start, &target, &rc)?;
        out.push(RecoveryTrial {
            char_class: g.char_class,
            initial_loss: trace.initial_loss(),
            final_loss: render_loss(&refined, &target, &rc),
            iters: trace.iters,
            kinds_preserved: refined.kinds() == start.kinds(),
            closure_gap: refined.max_closure_gap(),
        });
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineTrial {
    /// `perturbed` or `sampled`.
    pub source: String,
    pub report: PipelineReport,
}

/// Full pipeline runs. `perturbed` trials use a shifted copy of the glyph
/// as the greedy candidate plus noisy copies; `sampled` trials draw their
/// candidates from a mixture distribution centred on the glyph.
pub fn pipeline_trials(glyphs: &[Glyph], config: &SelftestConfig) -> Result<Vec<PipelineTrial>> {
    let pc = PipelineConfig {
        n_samples: config.pipeline_candidates.max(1),
        refine: config.refine(),
        ..Default::default()
    };
    let raster = pc.refine.raster();
    let mut rng = config.rng(3);
    let mut out = Vec::new();
    for k in 0..config.pipeline_glyphs {
        let g = &glyphs[(k * 41 + 3) % glyphs.len()];
        let ps = to_pathset(g)?;
        let mut candidates = vec![translate(g, LOCATION_SHIFT)];
        while candidates.len() < pc.n_samples {
            candidates.push(perturb(g, 0.02, &mut rng));
        }
        let set = CandidateSet {
            font_id: "selftest".into(),
            char_class: g.char_class,
            target: render(&ps, &raster),
            gt: Some(render_oracle(&ps, &raster)),
            candidates,
            greedy: Some(0),
        };
        let (_, report) = refine_pipeline(&set, &pc)?;
        out.push(PipelineTrial {
            source: "perturbed".into(),
            report,
        });
    }
    for k in 0..config.distribution_trials {
        let g = &glyphs[(k * 43 + 5) % glyphs.len()];
        let dist = centred_distribution(g)?;
        let pc = PipelineConfig {
            sample: SampleConfig {
                seed: config.seed.wrapping_add(k as u64),
                ..Default::default()
            },
            ..pc.clone()
        };
        let target = render(&to_pathset(g)?, &raster);
        let set = CandidateSet::from_distribution(&dist, target, "selftest", g.char_class, &pc)?;
        let (_, report) = refine_pipeline(&set, &pc)?;
        out.push(PipelineTrial {
            source: "sampled".into(),
            report,
        });
    }
    Ok(out)
}

/// Two components per used argument, both centred on the glyph's value.
fn centred_distribution(glyph: &Glyph) -> Result<SequenceDistribution> {
    let mut steps = Vec::new();
    for c in &glyph.commands {
        let mut type_probs = [0.0; 4];
        type_probs[c.kind.index()] = 1.0;
        let used = c.kind.used_pairs();
        let mut coords = Vec::with_capacity(6);
        for (i, &a) in c.args.iter().enumerate() {
            coords.push(if used[i / 2] {
                MixtureParams::new(vec![0.6, 0.4], vec![a, a], vec![0.002, 0.006])?
            } else {
                MixtureParams::point_mass(0.0)
            });
        }
        steps.push(StepDistribution { type_probs, coords });
    }
    Ok(SequenceDistribution {
        provenance: Provenance::Rollout,
        steps,
    })
}

/// Refinement brings the loss to at most a fifth of its starting value in at
/// least 90% of trials, and the pipeline's median final loss is below 0.03.
pub fn check_recovery(
    glyphs: &[Glyph],
    config: &SelftestConfig,
) -> Result<(CriterionResult, Vec<PipelineTrial>)> {
    let mut pipelines = Vec::new();
    let result = timed("recovery", Some(600.0), || {
        let trials = recovery_trials(glyphs, config)?;
        let good = trials
            .iter()
            .filter(|t| t.final_loss <= 0.2 * t.initial_loss)
            .count();
        let frac = good as f64 / trials.len().max(1) as f64;
        pipelines = pipeline_trials(glyphs, config)?;
        let mut finals: Vec<f64> = pipelines
            .iter()
            .filter(|p| p.source == "perturbed")
            .map(|p| p.report.final_loss)
            .collect();
        finals.sort_by(f64::total_cmp);
        let median = if finals.is_empty() {
            f64::NAN
        } else if finals.len() % 2 == 1 {
            finals[finals.len() / 2]
        } else {
            0.5 * (finals[finals.len() / 2 - 1] + finals[finals.len() / 2])
        };
        Ok((
            !trials.is_empty() && frac >= 0.9 && median < 0.03,
            format!(
                "{good}/{} trials reach <= 0.2x initial L1 ({:.0}%, need 90%); pipeline median final L1 {median:.5} (< 0.03) over {} glyphs",
                trials.len(),
                100.0 * frac,
                finals.len()
            ),
        ))
    })?;
    Ok((result, pipelines))
}

/// The pipeline keeps the candidate with the smallest refined loss, which
/// is therefore never worse than the refined greedy candidate.
pub fn check_selection(trials: &[PipelineTrial]) -> Result<CriterionResult> {
    timed("selection", None, || {
        let mut bad = Vec::new();
        for (i, t) in trials.iter().enumerate() {
            let r = &t.report;
            let min = r
                .candidates
                .iter()
                .map(|c| c.final_loss)
                .fold(f64::INFINITY, f64::min);
            let greedy_ok = r
                .candidates
                .iter()
                .filter(|c| c.greedy)
                .all(|c| r.selected_loss <= c.final_loss);
            if r.selected_loss != min || r.candidates[r.selected].final_loss != min || !greedy_ok {
                bad.push(i);
            }
        }
        let with_greedy = trials
            .iter()
            .filter(|t| t.report.candidates.iter().any(|c| c.greedy))
            .count();
        let greedy_won = trials
            .iter()
            .filter(|t| t.report.candidates[t.report.selected].greedy)
            .count();
        Ok((
            !trials.is_empty() && bad.is_empty(),
            format!(
                "{}/{} trials select the minimum ({with_greedy} with a greedy candidate, greedy chosen in {greedy_won})",
                trials.len() - bad.len(),
                trials.len()
            ),
        ))
    })
}

fn square_with_twist(at: Point, size: f64, lobe: f64) -> Glyph {
    let pts = [
        Point::new(at.x, at.y),
        Point::new(at.x + size, at.y),
        Point::new(at.x + size, at.y + size / 2.0),
        Point::new(at.x + size + lobe, at.y + size / 2.0 + lobe),
        Point::new(at.x + size + lobe, at.y + size / 2.0),
        Point::new(at.x + size, at.y + size / 2.0 + lobe),
        Point::new(at.x + size, at.y + size),
        Point::new(at.x, at.y + size),
    ];
    let mut cmds = vec![Command::move_by(pts[0])];
    for w in pts.windows(2) {
        cmds.push(Command::line_by(w[1] - w[0]));
    }
    cmds.push(Command::line_by(pts[0] - pts[7]));
    cmds.push(Command::end());
    Glyph::new(0, cmds)
}

/// Four-moment check of a sampler against a mixture: the sample mean and
/// variance must both fall within four standard errors.
fn moments_ok(
    m: &MixtureParams,
    cfg: &SampleConfig,
    n: usize,
    rng: &mut ChaCha8Rng,
) -> Result<(bool, String)> {
    let tau = cfg.temperature;
    // Tempered mixture: weights raised to 1/tau, widths scaled by tau.
    let w: Vec<f64> = m.lambda.iter().map(|l| l.powf(1.0 / tau)).collect();
    let ws: f64 = w.iter().sum();
    let t = MixtureParams::new(
        w.iter().map(|v| v / ws).collect(),
        m.mu.clone(),
        m.sigma.iter().map(|s| s * tau).collect(),
    )?;
    let (mean, var) = (t.mean(), t.variance());
    let m4: f64 = (0..t.len())
        .map(|k| {
            let d = t.mu[k] - mean;
            let s2 = t.sigma[k] * t.sigma[k];
            t.lambda[k] * (d.powi(4) + 6.0 * d * d * s2 + 3.0 * s2 * s2)
        })
        .sum();
    let xs: Vec<f64> = (0..n)
        .map(|_| sample_scalar(m, rng, cfg))
        .collect::<Result<_>>()?;
    let sm = xs.iter().sum::<f64>() / n as f64;
    let sv = xs.iter().map(|x| (x - sm).powi(2)).sum::<f64>() / (n - 1) as f64;
    let se_mean = (var / n as f64).sqrt();
    let se_var = ((m4 - var * var) / n as f64).sqrt();
    let ok = (sm - mean).abs() < 4.0 * se_mean && (sv - var).abs() < 4.0 * se_var;
    Ok((
        ok,
        format!("tau {tau}: mean {sm:.4} vs {mean:.4}, var {sv:.4} vs {var:.4}"),
    ))
}

/// Type preservation and closure under refinement, loop removal, SVG
/// round trips and closed-form mixture checks.
pub fn check_structural(glyphs: &[Glyph], config: &SelftestConfig) -> Result<CriterionResult> {
    timed("structural", Some(120.0), || {
        let mut failures: Vec<String> = Vec::new();
        let mut rng = config.rng(4);

        // Refinement keeps kinds, zero unused arguments and closure.
        let rc = RefineConfig {
            resolution: 64,
            max_iters: config.max_iters.min(60),
            exec: config.exec,
            ..Default::default()
        };
        let mut refined = 0;
        for k in 0..8 {
            let g = &glyphs[(k * 13 + 1) % glyphs.len()];
            let target = render(&to_pathset(g)?, &rc.raster());
            let start = close_paths(&perturb(g, 0.02, &mut rng));
            let (out, _) = refine_coordinates(&start, &target, &rc)?;
            let masked = out.commands.iter().all(|c| c.masked() == *c);
            if out.kinds() != start.kinds() || !masked || out.max_closure_gap() >= 1e-9 {
                failures.push(format!(
                    "refinement changed structure of glyph {}",
                    g.char_class
                ));
            }
            refined += 1;
        }

        let mut worst_gap: f64 = 0.0;
        for k in 0..200 {
            let g = perturb(&glyphs[k % glyphs.len()], 0.03, &mut rng);
            worst_gap = worst_gap.max(close_paths(&g).max_closure_gap());
        }
        if worst_gap >= 1e-9 {
            failures.push(format!("closed contour gap {worst_gap:e}"));
        }

        // Loop removal.
        let cleanup = CleanupConfig::default();
        let mut fixtures: Vec<Glyph> = (0..8)
            .map(|k| {
                let at = Point::new(0.1 + 0.02 * k as f64, 0.15);
                square_with_twist(at, 0.6, 0.01 + 0.004 * k as f64)
            })
            .collect();
        fixtures.extend(
            (0..60)
                .map(|k| close_paths(&perturb(&glyphs[(k * 17) % glyphs.len()], 0.02, &mut rng))),
        );
        let mut removed = 0;
        let mut remaining = 0;
        for g in &fixtures {
            let theta = cleanup.threshold(g);
            let before = count_small_loops(g, cleanup.tolerance, theta);
            let out = remove_intersection_artifacts(g, &cleanup);
            let after = count_small_loops(&out, cleanup.tolerance, theta);
            removed += before.saturating_sub(after);
            remaining += after;
            if !validate(&out).is_valid() || out.max_closure_gap() >= 1e-9 {
                failures.push("loop removal produced an invalid glyph".into());
            }
        }
        if remaining > 0 {
            failures.push(format!("{remaining} small loops left after removal"));
        }

        // SVG round trip.
        let mut worst_svg: f64 = 0.0;
        for g in glyphs {
            let ps = to_pathset(g)?;
            let back = parse_svg_path(&serialize_svg_path(&ps, 9), FillRule::NonZero)?;
            let (a, b) = (ps.points(), back.points());
            if a.len() != b.len() {
                worst_svg = f64::INFINITY;
                continue;
            }
            for (p, q) in a.iter().zip(&b) {
                worst_svg = worst_svg.max(p.distance(*q));
            }
        }
        if worst_svg >= 1e-6 {
            failures.push(format!("SVG round trip error {worst_svg:e}"));
        }

        // Closed-form NLL.
        let std = MixtureParams::new(vec![1.0], vec![0.0], vec![1.0])?;
        let nll_err = (mixture_nll(&std, 0.0)? - 0.5 * (2.0 * std::f64::consts::PI).ln()).abs();
        if nll_err > 1e-9 {
            failures.push(format!("standard normal NLL off by {nll_err:e}"));
        }

        // Sampling moments.
        let mix = MixtureParams::new(
            vec![0.2, 0.5, 0.3],
            vec![-1.0, 0.5, 2.0],
            vec![0.3, 0.5, 0.2],
        )?;
        let mut moment_notes = Vec::new();
        for tau in [1.0, 0.5] {
            let cfg = SampleConfig {
                temperature: tau,
                ..Default::default()
            };
            let (ok, note) = moments_ok(&mix, &cfg, 20_000, &mut rng)?;
            if !ok {
                failures.push(format!("moments: {note}"));
            }
            moment_notes.push(note);
        }

        let detail = if failures.is_empty() {
            format!(
                "{refined} refinements keep kinds and closure, max closing gap {worst_gap:.1e}, {removed} small loops removed / 0 left, SVG error {worst_svg:.1e}, NLL error {nll_err:.1e}, {}",
                moment_notes.join("; ")
            )
        } else {
            failures.join("; ")
        };
        Ok((failures.is_empty(), detail))
    })
}

fn mutate(base: &Glyph, rng: &mut ChaCha8Rng) -> Vec<Command> {
    let mut cmds = base.commands.clone();
    let kinds = CommandType::ALL;
    let wild = [
        f64::NAN,
        f64::INFINITY,
        f64::NEG_INFINITY,
        1e6,
        -1e6,
        0.0,
        1e-300,
    ];
    for _ in 0..rng.gen_range(1..=4) {
        let n = cmds.len();
        match rng.gen_range(0..8) {
            0 if n > 0 => {
                let i = rng.gen_range(0..n);
                cmds[i].kind = kinds[rng.gen_range(0..4)];
            }
            1 if n > 0 => {
                let i = rng.gen_range(0..n);
                let k = rng.gen_range(0..6);
                cmds[i].args[k] = if rng.gen_bool(0.5) {
                    wild[rng.gen_range(0..wild.len())]
                } else {
                    rng.gen_range(-3.0..3.0)
                };
            }
            2 if n > 0 => {
                cmds.remove(rng.gen_range(0..n));
            }
            3 if n > 0 => {
                let i = rng.gen_range(0..n);
                let c = cmds[i];
                cmds.insert(i, c);
            }
            4 => {
                let mut args = [0.0; 6];
                for a in &mut args {
                    *a = rng.gen_range(-1.0..1.0);
                }
                let i = rng.gen_range(0..=n);
                cmds.insert(i, Command::new(kinds[rng.gen_range(0..4)], args));
            }
            5 => cmds.retain(|c| c.kind != CommandType::End),
            6 if n > 1 => {
                let i = rng.gen_range(1..n);
                cmds.truncate(i);
            }
            7 => {
                for _ in 0..rng.gen_range(0..100) {
                    cmds.push(Command::line_by(Point::new(rng.gen_range(-0.2..0.2), 0.1)));
                }
            }
            _ => cmds.clear(),
        }
    }
    cmds
}

fn random_distribution(rng: &mut ChaCha8Rng) -> SequenceDistribution {
    let steps = (0..rng.gen_range(1..90))
        .map(|_| {
            let raw: [f64; 4] = std::array::from_fn(|_| rng.gen_range(0.0..1.0));
            let s: f64 = raw.iter().sum::<f64>().max(1e-12);
            let mut type_probs = raw.map(|v| v / s);
            let fix: f64 = 1.0 - type_probs.iter().sum::<f64>();
            type_probs[0] += fix;
            let coords = (0..6)
                .map(|_| {
                    let k = rng.gen_range(1..4);
                    let w: Vec<f64> = (0..k).map(|_| rng.gen_range(0.05..1.0)).collect();
                    let ws: f64 = w.iter().sum();
                    MixtureParams {
                        lambda: w.iter().map(|v| v / ws).collect(),
                        mu: (0..k).map(|_| rng.gen_range(-1.0..1.0)).collect(),
                        sigma: (0..k).map(|_| rng.gen_range(0.01..0.5)).collect(),
                    }
                })
                .collect();
            StepDistribution { type_probs, coords }
        })
        .collect();
    SequenceDistribution {
        provenance: Provenance::Rollout,
        steps,
    }
}

/// Mutated and randomly sampled command sequences render without failing,
/// with every pixel in [0, 1], and repair into valid glyphs.
pub fn check_fuzz(glyphs: &[Glyph], config: &SelftestConfig) -> Result<CriterionResult> {
    timed("fuzz", None, || {
        let mut rng = config.rng(5);
        let cases: Vec<(Vec<Command>, SequenceDistribution, f64, u64)> = (0..config.fuzz_cases)
            .map(|k| {
                let base = &glyphs[(k * 31) % glyphs.len()];
                let cmds = mutate(base, &mut rng);
                let dist = random_distribution(&mut rng);
                let tau = [0.0, 0.5, 1.0, 2.0][rng.gen_range(0..4)];
                (cmds, dist, tau, rng.gen())
            })
            .collect();
        let raster = RasterConfig {
            exec: Exec::Sequential,
            ..RasterConfig::with_resolution(24)
        };
        let results = config
            .exec
            .map_slice(&cases, |(cmds, dist, tau, seed)| -> Result<bool> {
                let in_range = |cmds: &[Command]| {
                    render_commands(cmds, &raster)
                        .data
                        .iter()
                        .all(|v| v.is_finite() && (0.0..=1.0).contains(v))
                };
                let repaired = repair(cmds, 0, L_MAX);
                let cfg = SampleConfig {
                    temperature: *tau,
                    seed: *seed,
                    ..Default::default()
                };
                let sampled = sample_sequence(dist, 1, &mut cfg.rng(), &cfg)?;
                Ok(in_range(cmds)
                    && in_range(&repaired.commands)
                    && in_range(&sampled.commands)
                    && validate(&repaired).is_valid()
                    && validate(&sampled).is_valid())
            });
        let mut good = 0;
        for r in results {
            good += r? as usize;
        }
        Ok((
            good == cases.len(),
            format!("{good}/{} mutated and sampled sequences render in [0, 1] and repair to valid glyphs", cases.len()),
        ))
    })
}

/// Glyphs of the dataset in `dir`, building a synthetic one there first if
/// it has no manifest. The manifest hashes are always verified.
fn corpus_glyphs(dir: &Path, config: &SelftestConfig) -> Result<Vec<Glyph>> {
    if !dir.join(MANIFEST_FILE).is_file() {
        let pc = ProceduralConfig {
            n_fonts: config.n_fonts,
            seed: config.seed,
            ..Default::default()
        };
        make_synthetic_corpus(&pc, dir)?;
    }
    let manifest = load_manifest(dir)?;
    Ok(load_records(dir, &manifest)?
        .into_iter()
        .map(|r| r.glyph)
        .collect())
}

/// Runs the selected criteria on the dataset in `dir` (built if absent; a
/// temporary directory when `None`), calling `progress` after each one.
pub fn run_selftest(
    dir: Option<&Path>,
    config: &SelftestConfig,
    mut progress: impl FnMut(&CriterionResult),
) -> Result<SelftestReport> {
    let temp: Option<PathBuf> = dir.is_none().then(|| {
        std::env::temp_dir().join(format!(
            "vecglyph-selftest-{}-{}",
            std::process::id(),
            config.seed
        ))
    });
    let root = dir.map(Path::to_path_buf).or(temp.clone()).unwrap();
    let result = run_in(&root, config, &mut progress);
    if let Some(t) = temp {
        let _ = std::fs::remove_dir_all(t);
    }
    result
}

fn run_in(
    dir: &Path,
    config: &SelftestConfig,
    progress: &mut impl FnMut(&CriterionResult),
) -> Result<SelftestReport> {
    let glyphs = corpus_glyphs(dir, config)?;
    let mut criteria = Vec::new();
    let mut push = |r: CriterionResult, criteria: &mut Vec<CriterionResult>| {
        progress(&r);
        criteria.push(r);
    };
    if config.wants("gradient") {
        push(check_gradient(&glyphs, config)?, &mut criteria);
    }
    if config.wants("fidelity") {
        push(check_fidelity(&glyphs, config)?, &mut criteria);
    }
    let mut pipelines = None;
    if config.wants("recovery") {
        let (r, p) = check_recovery(&glyphs, config)?;
        pipelines = Some(p);
        push(r, &mut criteria);
    }
    if config.wants("selection") {
        let p = match pipelines {
            Some(p) => p,
            None => pipeline_trials(&glyphs, config)?,
        };
        push(check_selection(&p)?, &mut criteria);
    }
    if config.wants("structural") {
        push(check_structural(&glyphs, config)?, &mut criteria);
    }
    if config.wants("fuzz") {
        push(check_fuzz(&glyphs, config)?, &mut criteria);
    }
    Ok(SelftestReport {
        seed: config.seed,
        criteria,
    })
}
