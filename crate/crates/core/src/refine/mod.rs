//! Raster-guided refinement of candidate glyphs: path closing, coordinate
//! optimization against a target image, best-candidate selection and
//! removal of small self-intersection loops.

mod cleanup;
mod pipeline;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::geom::Point;
use crate::glyph::{validate, AbsCommand, CommandType, Glyph, CLOSE_EPSILON, PEN_MAX, PEN_MIN};
use crate::raster::{
    check_target, evaluate_commands, render_commands, CoverageImage, RasterConfig,
};

pub use cleanup::{count_small_loops, remove_intersection_artifacts, CleanupConfig};
pub use pipeline::{
    refine_pipeline, sample_candidates, CandidateEntry, CandidateReport, CandidateSet,
    CandidateSetFile, PipelineConfig, PipelineReport,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RefineConfig {
    pub resolution: usize,
    pub max_iters: usize,
    /// Adam base step, in EM units.
    pub step: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Prefilter width at the first iteration, in pixels.
    pub sigma_start: f64,
    /// Width reached at `anneal_fraction * max_iters` and kept afterwards.
    /// Losses in the trace and selection are measured at this width.
    pub sigma_end: f64,
    pub anneal_fraction: f64,
    /// Stop once the best loss improved by less than `min_improvement`
    /// (relative) over the last `patience` iterations.
    pub patience: usize,
    pub min_improvement: f64,
    /// Reserved for a curvature penalty; only 0 is accepted.
    pub smoothness: f64,
    #[serde(skip)]
    pub exec: Exec,
}

impl Default for RefineConfig {
    fn default() -> Self {
        RefineConfig {
            resolution: 256,
            max_iters: 400,
            step: 2e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            sigma_start: 2.0,
            sigma_end: 0.7,
            anneal_fraction: 0.5,
            patience: 20,
            min_improvement: 1e-4,
            smoothness: 0.0,
            exec: Exec::default(),
        }
    }
}

impl RefineConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.max_iters < 1 {
            return bad("max_iters must be at least 1".into());
        }
        if !(self.step > 0.0) {
            return bad(format!("step {} must be positive", self.step));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return bad("moment decays must lie in [0, 1)".into());
        }
        if !(self.epsilon > 0.0) || !(self.sigma_start > 0.0) || !(self.sigma_end > 0.0) {
            return bad("epsilon and prefilter widths must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.anneal_fraction) {
            return bad("anneal_fraction must lie in [0, 1]".into());
        }
        if self.smoothness != 0.0 {
            return bad("smoothness regularization is not implemented".into());
        }
        if self.resolution < 8 {
            return bad(format!("resolution {} is below 8", self.resolution));
        }
        Ok(())
    }

    /// Prefilter width used for the gradient at iteration `it`.
    pub fn sigma_at(&self, it: usize) -> f64 {
        let span = (self.max_iters as f64 * self.anneal_fraction).floor();
        if span < 1.0 {
            return self.sigma_end;
        }
        let f = (it as f64 / span).min(1.0);
        self.sigma_start + (self.sigma_end - self.sigma_start) * f
    }

    /// Raster settings for rendering at the final width.
    pub fn raster(&self) -> RasterConfig {
        RasterConfig {
            resolution: self.resolution,
            prefilter_sigma: self.sigma_end,
            exec: self.exec,
            ..RasterConfig::default()
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Converged,
    MaxIters,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RefinementTrace {
    /// Loss of the iterate evaluated at each iteration, at the final width.
    pub losses: Vec<f64>,
    pub iters: usize,
    pub stop: StopReason,
}

impl RefinementTrace {
    pub fn initial_loss(&self) -> f64 {
        self.losses[0]
    }

    /// Loss of the returned iterate.
    pub fn final_loss(&self) -> f64 {
        self.losses.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Replaces the start and final endpoint of every open contour by their
/// midpoint. Only the arguments that place those two points change; control
/// points keep their absolute positions.
pub fn close_paths(glyph: &Glyph) -> Glyph {
    let mut out = glyph.clone();
    let abs = glyph.to_absolute();
    for r in glyph.subpath_ranges() {
        let last = r.end - 1;
        if last == r.start {
            continue;
        }
        let (a, b) = (abs[r.start].end, abs[last].end);
        if a == b {
            continue;
        }
        let m = a.midpoint(b);
        shift_end(&mut out, r.start, m - a);
        shift_end(&mut out, last, m - b);
    }
    out
}

/// Moves the absolute endpoint of command `j` by `d` without moving anything
/// that follows it.
fn shift_end(glyph: &mut Glyph, j: usize, d: Point) {
    let c = &mut glyph.commands[j];
    c.set_pair(2, c.pair(2) + d);
    if let Some(next) = glyph.commands.get_mut(j + 1) {
        match next.kind {
            CommandType::End => {}
            CommandType::Curve => {
                for k in 0..3 {
                    next.set_pair(k, next.pair(k) - d);
                }
            }
            _ => next.set_pair(2, next.pair(2) - d),
        }
    }
}

/// Free coordinate pairs of a glyph in absolute form, with each closed
/// contour's final endpoint tied to its start.
struct Params {
    /// `(command, pair)` of every free point.
    free: Vec<(usize, usize)>,
    /// `(follower, leader)` command indices of tied endpoints.
    tied: Vec<(usize, usize)>,
}

impl Params {
    fn new(glyph: &Glyph, abs: &[AbsCommand]) -> Params {
        let mut followers = vec![None; glyph.len()];
        for r in glyph.subpath_ranges() {
            let last = r.end - 1;
            if last > r.start && abs[last].end.distance(abs[r.start].end) <= CLOSE_EPSILON {
                followers[last] = Some(r.start);
            }
        }
        let mut free = Vec::new();
        let mut tied = Vec::new();
        for (j, c) in glyph.commands.iter().enumerate() {
            let used = c.kind.used_pairs();
            for k in 0..3 {
                if !used[k] {
                    continue;
                }
                match followers[j] {
                    Some(lead) if k == 2 => tied.push((j, lead)),
                    _ => free.push((j, k)),
                }
            }
        }
        Params { free, tied }
    }
}

/// Adam on the absolute positions of every used argument pair, minimizing
/// the L1 distance between the prefilter render and `target` while the
/// prefilter narrows from `sigma_start` to `sigma_end`. Command kinds and
/// count never change, closed contours stay closed, and the best iterate
/// seen (by loss at `sigma_end`) is returned.
pub fn refine_coordinates(
    glyph: &Glyph,
    target: &CoverageImage,
    config: &RefineConfig,
) -> Result<(Glyph, RefinementTrace)> {
    config.validate()?;
    let report = validate(glyph);
    if !report.is_valid() {
        return Err(Error::InvalidGlyph(report));
    }
    check_target(target, config.resolution)?;

    let mut abs = glyph.to_absolute();
    let params = Params::new(glyph, &abs);
    for &(f, lead) in &params.tied {
        abs[f].end = abs[lead].end;
    }
    let mut m = vec![Point::ZERO; params.free.len()];
    let mut v = vec![Point::ZERO; params.free.len()];
    let mut best = (f64::INFINITY, abs.clone());
    let mut best_history = Vec::new();
    let mut losses = Vec::new();
    let mut stop = StopReason::MaxIters;
    let lo = PEN_MIN + 1e-9;
    let hi = PEN_MAX - 1e-9;

    for it in 0..config.max_iters {
        let sigma = config.sigma_at(it);
        let commands = Glyph::from_absolute(glyph.char_class, &abs).commands;
        let aux = (sigma != config.sigma_end).then_some(config.sigma_end);
        let sl = evaluate_commands(&commands, target, sigma, aux, config.exec);
        let loss = sl.aux_loss.unwrap_or(sl.loss);
        losses.push(loss);
        if loss < best.0 {
            best = (loss, abs.clone());
        }
        best_history.push(best.0);
        if it >= config.patience {
            let before = best_history[it - config.patience];
            if before - best.0 <= config.min_improvement * before {
                stop = StopReason::Converged;
                break;
            }
        }
        if it + 1 == config.max_iters {
            break;
        }

        let mut grads = sl.grads;
        for &(f, lead) in &params.tied {
            let g = grads[3 * f + 2];
            grads[3 * lead + 2] += g;
        }
        let t = (it + 1) as i32;
        let c1 = 1.0 - config.beta1.powi(t);
        let c2 = 1.0 - config.beta2.powi(t);
        for (n, &(j, k)) in params.free.iter().enumerate() {
            let g = grads[3 * j + k];
            m[n] = m[n] * config.beta1 + g * (1.0 - config.beta1);
            v[n] = v[n] * config.beta2 + Point::new(g.x * g.x, g.y * g.y) * (1.0 - config.beta2);
            let step =
                |mv: f64, vv: f64| config.step * (mv / c1) / ((vv / c2).sqrt() + config.epsilon);
            let p = abs[j].point_mut(k);
            p.x -= step(m[n].x, v[n].x);
            p.y -= step(m[n].y, v[n].y);
            if k == 2 {
                *p = Point::new(p.x.clamp(lo, hi), p.y.clamp(lo, hi));
            }
        }
        for &(f, lead) in &params.tied {
            abs[f].end = abs[lead].end;
        }
    }

    let out = Glyph::from_absolute(glyph.char_class, &best.1);
    let iters = losses.len();
    Ok((
        out,
        RefinementTrace {
            losses,
            iters,
            stop,
        },
    ))
}

/// Mean L1 distance between the prefilter render of `glyph` at the final
/// width and `target`.
pub fn render_loss(glyph: &Glyph, target: &CoverageImage, config: &RefineConfig) -> f64 {
    let mut raster = config.raster();
    raster.resolution = target.width;
    render_commands(&glyph.commands, &raster).mean_abs_diff(target)
}

/// Index of the glyph whose render is closest to `target`, with its loss.
/// Ties go to the lowest index.
pub fn select_best(
    refined: &[Glyph],
    target: &CoverageImage,
    config: &RefineConfig,
) -> (usize, f64) {
    let losses: Vec<f64> = refined
        .iter()
        .map(|g| render_loss(g, target, config))
        .collect();
    select_min(&losses)
}

pub(crate) fn select_min(losses: &[f64]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (i, &l) in losses.iter().enumerate() {
        if l < best.1 {
            best = (i, l);
        }
    }
    best
}
