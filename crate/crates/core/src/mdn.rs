//! Gaussian-mixture and categorical math for command sequences: densities,
//! negative log-likelihood, tempered sampling, greedy decoding and the
//! repair that turns any sampled sequence into a valid glyph.

use std::path::Path;

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::Point;
use crate::glyph::{Command, CommandType, Glyph, L_MAX, PEN_MAX, PEN_MIN};

/// Default number of mixture components per coordinate.
pub const N_GAUSSIANS: usize = 50;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// A univariate Gaussian mixture.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixtureParams {
    pub lambda: Vec<f64>,
    pub mu: Vec<f64>,
    pub sigma: Vec<f64>,
}

impl MixtureParams {
    pub fn new(lambda: Vec<f64>, mu: Vec<f64>, sigma: Vec<f64>) -> Result<Self> {
        let m = MixtureParams { lambda, mu, sigma };
        m.validate()?;
        Ok(m)
    }

    /// A single very narrow component at `x`.
    pub fn point_mass(x: f64) -> Self {
        MixtureParams {
            lambda: vec![1.0],
            mu: vec![x],
            sigma: vec![1e-12],
        }
    }

    pub fn len(&self) -> usize {
        self.lambda.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambda.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.lambda.len();
        if n == 0 {
            return Err(Error::InvalidParams("mixture has no components".into()));
        }
        if self.mu.len() != n || self.sigma.len() != n {
            return Err(Error::InvalidParams(format!(
                "component counts differ: lambda {n}, mu {}, sigma {}",
                self.mu.len(),
                self.sigma.len()
            )));
        }
        for k in 0..n {
            let (l, m, s) = (self.lambda[k], self.mu[k], self.sigma[k]);
            if !(l.is_finite() && m.is_finite() && s.is_finite()) {
                return Err(Error::InvalidParams(format!("component {k} not finite")));
            }
            if l < 0.0 {
                return Err(Error::InvalidParams(format!(
                    "component {k}: negative weight"
                )));
            }
            if s <= 0.0 {
                return Err(Error::InvalidParams(format!(
                    "component {k}: sigma {s} <= 0"
                )));
            }
        }
        let sum: f64 = self.lambda.iter().sum();
        if (sum - 1.0).abs() > 1e-6 {
            return Err(Error::InvalidParams(format!("weights sum to {sum}")));
        }
        Ok(())
    }

    /// Index of the heaviest component; ties go to the lowest index.
    pub fn argmax(&self) -> usize {
        argmax(&self.lambda)
    }

    /// `ln p(x)`, evaluated with log-sum-exp.
    pub fn log_density(&self, x: f64) -> f64 {
        let terms: Vec<f64> = (0..self.len())
            .filter(|&k| self.lambda[k] > 0.0)
            .map(|k| {
                let z = (x - self.mu[k]) / self.sigma[k];
                self.lambda[k].ln() - self.sigma[k].ln() - LN_SQRT_2PI - 0.5 * z * z
            })
            .collect();
        log_sum_exp(&terms)
    }

    pub fn density(&self, x: f64) -> f64 {
        self.log_density(x).exp()
    }

    pub fn mean(&self) -> f64 {
        self.lambda.iter().zip(&self.mu).map(|(l, m)| l * m).sum()
    }

    pub fn variance(&self) -> f64 {
        let mean = self.mean();
        (0..self.len())
            .map(|k| self.lambda[k] * (self.sigma[k].powi(2) + (self.mu[k] - mean).powi(2)))
            .sum()
    }
}

/// Lowest index of the maximum.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

pub fn log_sum_exp(values: &[f64]) -> f64 {
    let m = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + values.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let lse = log_sum_exp(logits);
    logits.iter().map(|l| (l - lse).exp()).collect()
}

/// `-ln softmax(logits)[target]`.
pub fn cross_entropy(logits: &[f64], target: usize) -> f64 {
    log_sum_exp(logits) - logits[target]
}

/// `-ln sum_k lambda_k N(x; mu_k, sigma_k^2)`.
pub fn mixture_nll(params: &MixtureParams, x: f64) -> Result<f64> {
    params.validate()?;
    Ok(-params.log_density(x))
}

/// Probabilities raised to `1 / tau` and renormalized.
fn temper(probs: &[f64], tau: f64) -> Vec<f64> {
    let logs: Vec<f64> = probs
        .iter()
        .map(|p| {
            if *p > 0.0 {
                p.ln() / tau
            } else {
                f64::NEG_INFINITY
            }
        })
        .collect();
    softmax(&logs)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleMode {
    #[default]
    Stochastic,
    Greedy,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SampleConfig {
    pub mode: SampleMode,
    /// Scales every sigma and sharpens weights and type probabilities by a
    /// `1 / temperature` power; zero means greedy.
    pub temperature: f64,
    pub seed: u64,
}

impl Default for SampleConfig {
    fn default() -> Self {
        SampleConfig {
            mode: SampleMode::Stochastic,
            temperature: 1.0,
            seed: 0,
        }
    }
}

impl SampleConfig {
    pub fn is_greedy(&self) -> bool {
        self.mode == SampleMode::Greedy || self.temperature == 0.0
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.temperature >= 0.0) || !self.temperature.is_finite() {
            return Err(Error::Config(format!(
                "temperature {} must be >= 0",
                self.temperature
            )));
        }
        Ok(())
    }

    pub fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed)
    }
}

fn categorical<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    match WeightedIndex::new(probs) {
        Ok(d) => d.sample(rng),
        Err(_) => argmax(probs),
    }
}

pub fn sample_scalar<R: Rng + ?Sized>(
    params: &MixtureParams,
    rng: &mut R,
    config: &SampleConfig,
) -> Result<f64> {
    params.validate()?;
    config.validate()?;
    Ok(draw_scalar(params, rng, config))
}

fn draw_scalar<R: Rng + ?Sized>(params: &MixtureParams, rng: &mut R, config: &SampleConfig) -> f64 {
    if config.is_greedy() {
        return params.mu[params.argmax()];
    }
    let tau = config.temperature;
    let k = categorical(&temper(&params.lambda, tau), rng);
    let z: f64 = rng.sample(StandardNormal);
    params.mu[k] + tau * params.sigma[k] * z
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepDistribution {
    /// Over `Move, Line, Curve, End`.
    pub type_probs: [f64; 4],
    /// One mixture per argument scalar.
    pub coords: Vec<MixtureParams>,
}

impl StepDistribution {
    /// A distribution concentrated on `command`.
    pub fn point_mass(command: &Command) -> Self {
        let mut type_probs = [0.0; 4];
        type_probs[command.kind.index()] = 1.0;
        StepDistribution {
            type_probs,
            coords: command
                .args
                .iter()
                .map(|&a| MixtureParams::point_mass(a))
                .collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let sum: f64 = self.type_probs.iter().sum();
        if (sum - 1.0).abs() > 1e-6 || self.type_probs.iter().any(|p| !(*p >= 0.0)) {
            return Err(Error::InvalidParams(format!(
                "type probabilities {:?} do not form a distribution",
                self.type_probs
            )));
        }
        if self.coords.len() != 6 {
            return Err(Error::InvalidParams(format!(
                "expected 6 coordinate mixtures, found {}",
                self.coords.len()
            )));
        }
        self.coords.iter().try_for_each(MixtureParams::validate)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Rollout,
    TeacherForced,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SequenceDistribution {
    pub provenance: Provenance,
    pub steps: Vec<StepDistribution>,
}

impl SequenceDistribution {
    /// Point masses on every command of `glyph`.
    pub fn point_mass(glyph: &Glyph) -> Self {
        SequenceDistribution {
            provenance: Provenance::Rollout,
            steps: glyph
                .commands
                .iter()
                .map(StepDistribution::point_mass)
                .collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps.is_empty() {
            return Err(Error::InvalidParams(
                "sequence distribution has no steps".into(),
            ));
        }
        for (i, s) in self.steps.iter().enumerate() {
            s.validate().map_err(|e| e.context(format!("step {i}")))?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let d: SequenceDistribution = serde_json::from_str(&text)
            .map_err(|e| Error::from(e).context(path.display().to_string()))?;
        d.validate()
            .map_err(|e| e.context(path.display().to_string()))?;
        Ok(d)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

/// Draws one command sequence step by step: a type from the tempered type
/// probabilities, then the used coordinates from their mixtures. Stops at a
/// sampled `End` or after `l_max - 1` commands, then [`repair`]s the result.
///
/// Teacher-forced distributions are sampled the same way, which ignores the
/// dependence between steps.
pub fn sample_sequence<R: Rng + ?Sized>(
    dist: &SequenceDistribution,
    char_class: usize,
    rng: &mut R,
    config: &SampleConfig,
) -> Result<Glyph> {
    dist.validate()?;
    config.validate()?;
    if dist.provenance == Provenance::TeacherForced {
        log::debug!("sampling a teacher-forced distribution step by step");
    }
    let mut raw = Vec::new();
    for step in dist.steps.iter().take(L_MAX - 1) {
        let kind = if config.is_greedy() {
            argmax(&step.type_probs)
        } else {
            categorical(&temper(&step.type_probs, config.temperature), rng)
        };
        let kind = CommandType::ALL[kind];
        if kind == CommandType::End {
            break;
        }
        let used = kind.used_pairs();
        let mut args = [0.0; 6];
        for (i, a) in args.iter_mut().enumerate() {
            if used[i / 2] {
                *a = draw_scalar(&step.coords[i], rng, config);
            }
        }
        raw.push(Command::new(kind, args));
    }
    Ok(repair(&raw, char_class, L_MAX))
}

/// Argmax type and heaviest-component mean at every step.
pub fn greedy_sequence(dist: &SequenceDistribution, char_class: usize) -> Result<Glyph> {
    let config = SampleConfig {
        mode: SampleMode::Greedy,
        ..Default::default()
    };
    sample_sequence(dist, char_class, &mut ChaCha8Rng::seed_from_u64(0), &config)
}

/// Makes any finite command list a valid glyph: everything from the first
/// `End` on is dropped, non-finite commands are dropped, the first command
/// becomes a `Move`, runs of `Move`s collapse into one, a trailing `Move` is
/// dropped, a zero `Line` is added to an otherwise empty glyph, pen positions
/// are clamped into the EM slack box and the list is cut to `l_max - 1`
/// commands before the final `End`.
pub fn repair(commands: &[Command], char_class: usize, l_max: usize) -> Glyph {
    let mut body: Vec<Command> = Vec::new();
    for c in commands {
        if c.kind == CommandType::End {
            break;
        }
        if !c.args.iter().all(|v| v.is_finite()) {
            continue;
        }
        let mut c = c.masked();
        if body.is_empty() {
            c = Command::move_by(c.pair(2));
        }
        match body.last_mut() {
            Some(prev) if prev.kind == CommandType::Move && c.kind == CommandType::Move => {
                prev.set_pair(2, prev.pair(2) + c.pair(2));
            }
            _ => body.push(c),
        }
    }
    let max_body = l_max.saturating_sub(1).max(2);
    body.truncate(max_body);
    while body.last().is_some_and(|c| c.kind == CommandType::Move) && body.len() > 1 {
        body.pop();
    }
    if body.is_empty() {
        body.push(Command::move_by(Point::ZERO));
    }
    if body.len() == 1 {
        body.push(Command::line_by(Point::ZERO));
    }

    // Keep every pen position inside the slack box; controls stay relative.
    let lo = PEN_MIN + 1e-9;
    let hi = PEN_MAX - 1e-9;
    let mut pen = Point::ZERO;
    for c in &mut body {
        let next = pen + c.pair(2);
        let clamped = Point::new(next.x.clamp(lo, hi), next.y.clamp(lo, hi));
        if clamped != next {
            c.set_pair(2, clamped - pen);
        }
        pen += c.pair(2);
    }
    body.push(Command::end());
    Glyph::new(char_class, body)
}
