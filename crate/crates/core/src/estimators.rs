//! Maximum likelihood (zero-type singularities only) and posterior-mean
//! estimators of the shift.
//!
//! Both work on a grid of candidate shifts. Log-likelihoods are always taken
//! against the midpoint of `(α, β)`; that constant cancels in the posterior
//! and in the argmax. Grid nodes that coincide exactly with an event are
//! nudged by `1e-12·T` so no node ever evaluates the singular term.

use serde::Serialize;
use statrs::distribution::{Continuous, ContinuousCDF, Normal};
use thiserror::Error;

use crate::config::{ConfigError, KeyValues};
use crate::exec;
use crate::likelihood::{Likelihood, ReferencedLikelihood};
use crate::model::{IntensityFamily, ThetaInterval};
use crate::optimize::golden_section_max;
use crate::sampler::SampleBatch;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EstimatorError {
    #[error("the maximum likelihood estimator is undefined for p = {0} < 0")]
    MleUndefinedForNegativeP(f64),
    #[error("every grid node sits on an event")]
    AllNodesSingular,
    #[error("degenerate posterior grid: {0}")]
    DegenerateGrid(String),
    #[error("invalid prior: {0}")]
    InvalidPrior(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
}

/// Prior density on `(α, β)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Prior {
    Uniform,
    TruncatedNormal { mean: f64, sd: f64 },
}

impl Default for Prior {
    fn default() -> Self {
        Prior::Uniform
    }
}

impl Prior {
    pub fn validate(&self) -> Result<(), EstimatorError> {
        match *self {
            Prior::Uniform => Ok(()),
            Prior::TruncatedNormal { mean, sd } => {
                if mean.is_finite() && sd.is_finite() && sd > 0.0 {
                    Ok(())
                } else {
                    Err(EstimatorError::InvalidPrior(format!("mean {mean}, sd {sd}")))
                }
            }
        }
    }

    /// Normalized log-density on the interval.
    pub fn log_density(&self, theta: f64, interval: ThetaInterval) -> f64 {
        match *self {
            Prior::Uniform => -interval.width().ln(),
            Prior::TruncatedNormal { mean, sd } => {
                let std = Normal::standard();
                let z = (theta - mean) / sd;
                let mass = std.cdf((interval.beta - mean) / sd) - std.cdf((interval.alpha - mean) / sd);
                std.ln_pdf(z) - sd.ln() - mass.ln()
            }
        }
    }
}

/// Grid and prior settings shared by both estimators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EstimatorConfig {
    /// Nodes of the initial posterior grid, and the node budget of each
    /// refinement pass.
    pub grid_size: usize,
    /// Upper bound on refinement passes of the posterior grid.
    pub refine_passes: usize,
    /// Nodes of the coarse likelihood scan for the MLE.
    pub mle_grid_size: usize,
    pub prior: Prior,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            grid_size: 2048,
            refine_passes: 16,
            mle_grid_size: 4096,
            prior: Prior::Uniform,
        }
    }
}

pub const ESTIMATOR_KEYS: [&str; 6] = [
    "grid_size",
    "refine_passes",
    "mle_grid_size",
    "prior_kind",
    "prior_mean",
    "prior_sd",
];

impl EstimatorConfig {
    pub fn from_key_values(kv: &KeyValues) -> Result<Self, EstimatorError> {
        let defaults = Self::default();
        let prior = match kv.get("prior_kind").unwrap_or("uniform") {
            "uniform" => Prior::Uniform,
            "truncated-normal" => Prior::TruncatedNormal {
                mean: kv.required("prior_mean")?,
                sd: kv.required("prior_sd")?,
            },
            other => {
                return Err(EstimatorError::Config(ConfigError::BadValue {
                    key: "prior_kind".into(),
                    value: other.into(),
                }))
            }
        };
        let cfg = Self {
            grid_size: kv.or("grid_size", defaults.grid_size)?,
            refine_passes: kv.or("refine_passes", defaults.refine_passes)?,
            mle_grid_size: kv.or("mle_grid_size", defaults.mle_grid_size)?,
            prior,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_key_values(&self) -> KeyValues {
        let mut kv = KeyValues::new();
        kv.insert("grid_size", self.grid_size.to_string());
        kv.insert("refine_passes", self.refine_passes.to_string());
        kv.insert("mle_grid_size", self.mle_grid_size.to_string());
        match self.prior {
            Prior::Uniform => kv.insert("prior_kind", "uniform"),
            Prior::TruncatedNormal { mean, sd } => {
                kv.insert("prior_kind", "truncated-normal");
                kv.insert_f64("prior_mean", mean);
                kv.insert_f64("prior_sd", sd);
            }
        }
        kv
    }

    pub fn validate(&self) -> Result<(), EstimatorError> {
        if self.grid_size < MIN_GRID || self.mle_grid_size < MIN_GRID {
            return Err(EstimatorError::DegenerateGrid(format!(
                "grid sizes must be at least {MIN_GRID} (got {} and {})",
                self.grid_size, self.mle_grid_size
            )));
        }
        self.prior.validate()
    }
}

const MIN_GRID: usize = 64;

/// Posterior on a (possibly nonuniform) grid of shifts.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorGrid {
    pub thetas: Vec<f64>,
    pub log_lik: Vec<f64>,
    pub log_prior: Vec<f64>,
    /// Normalized so that the trapezoid integral of its exponential is 1.
    pub log_posterior: Vec<f64>,
}

impl PosteriorGrid {
    fn build(thetas: Vec<f64>, log_lik: Vec<f64>, log_prior: Vec<f64>) -> Result<Self, EstimatorError> {
        let unnorm: Vec<f64> = log_lik.iter().zip(&log_prior).map(|(l, q)| l + q).collect();
        let max = unnorm.iter().copied().filter(|v| !v.is_nan()).fold(f64::NEG_INFINITY, f64::max);
        if !max.is_finite() {
            return Err(EstimatorError::DegenerateGrid(format!("maximum log posterior is {max}")));
        }
        let weights: Vec<f64> = unnorm.iter().map(|v| (v - max).exp()).collect();
        let mass = trapezoid(&thetas, &weights);
        if !(mass.is_finite() && mass > 0.0) {
            return Err(EstimatorError::DegenerateGrid(format!("posterior mass {mass}")));
        }
        let shift = max + mass.ln();
        let log_posterior = unnorm.iter().map(|v| v - shift).collect();
        Ok(Self {
            thetas,
            log_lik,
            log_prior,
            log_posterior,
        })
    }

    pub fn len(&self) -> usize {
        self.thetas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.thetas.is_empty()
    }

    pub fn density(&self) -> Vec<f64> {
        self.log_posterior.iter().map(|v| v.exp()).collect()
    }

    /// Trapezoid integral of the posterior density.
    pub fn mass(&self) -> f64 {
        trapezoid(&self.thetas, &self.density())
    }

    /// Trapezoid integral of `θ` times the posterior density, accumulated
    /// relative to the posterior mode to avoid cancellation.
    pub fn mean(&self) -> f64 {
        let density = self.density();
        let mode = argmax(&density).map(|k| self.thetas[k]).unwrap_or(0.0);
        let offsets: Vec<f64> = self
            .thetas
            .iter()
            .zip(&density)
            .map(|(t, d)| (t - mode) * d)
            .collect();
        mode + trapezoid(&self.thetas, &offsets) / trapezoid(&self.thetas, &density)
    }

    /// Trapezoid mass of each cell, normalized to sum to one.
    fn cell_masses(&self) -> Vec<f64> {
        let density = self.density();
        let cells: Vec<f64> = self
            .thetas
            .windows(2)
            .zip(density.windows(2))
            .map(|(t, d)| 0.5 * (t[1] - t[0]) * (d[0] + d[1]))
            .collect();
        let total: f64 = cells.iter().sum();
        cells.into_iter().map(|c| c / total).collect()
    }

    /// Mass in the first and last cell.
    pub fn boundary_mass(&self) -> f64 {
        let cells = self.cell_masses();
        match cells.len() {
            0 => 0.0,
            1 => cells[0],
            k => cells[0] + cells[k - 1],
        }
    }
}

fn trapezoid(xs: &[f64], ys: &[f64]) -> f64 {
    xs.windows(2)
        .zip(ys.windows(2))
        .map(|(x, y)| 0.5 * (x[1] - x[0]) * (y[0] + y[1]))
        .sum()
}

fn argmax(values: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (k, v) in values.iter().enumerate() {
        if v.is_nan() {
            continue;
        }
        match best {
            Some(b) if values[b] >= *v => {}
            _ => best = Some(k),
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum EstimatorKind {
    Mle,
    Bayes,
}

impl EstimatorKind {
    pub fn name(&self) -> &'static str {
        match self {
            EstimatorKind::Mle => "mle",
            EstimatorKind::Bayes => "bayes",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct Diagnostics {
    /// Nodes of the final grid.
    pub grid_size: usize,
    /// Refinement passes (Bayes) or refined brackets (MLE).
    pub refinement_iterations: usize,
    /// Posterior mass in the two outermost cells (Bayes only).
    pub boundary_mass: f64,
    /// Candidates tying with the reported maximum (MLE only).
    pub ties: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EstimateResult {
    pub estimate: f64,
    pub estimator_kind: EstimatorKind,
    pub diagnostics: Diagnostics,
}

/// Anything that can produce a log-likelihood (up to a constant) at a
/// shift, together with the event times the grid has to dodge.
pub trait LogLikelihoodSource: Sync {
    fn log_likelihood(&self, theta: f64) -> f64;
    fn events(&self) -> &[f64];
}

impl LogLikelihoodSource for ReferencedLikelihood<'_> {
    fn log_likelihood(&self, theta: f64) -> f64 {
        self.eval(theta).value
    }

    fn events(&self) -> &[f64] {
        self.likelihood().events()
    }
}

/// Wraps a closure as a [`LogLikelihoodSource`]; used to inject arbitrary
/// likelihoods into the posterior machinery.
pub struct FnLikelihood<'e, F> {
    pub f: F,
    pub events: &'e [f64],
}

impl<F: Fn(f64) -> f64 + Sync> LogLikelihoodSource for FnLikelihood<'_, F> {
    fn log_likelihood(&self, theta: f64) -> f64 {
        (self.f)(theta)
    }

    fn events(&self) -> &[f64] {
        self.events
    }
}

/// Grid span `[α + ε_b, β − ε_b]` with `ε_b = 1e-6 (β − α)`.
pub fn grid_span(interval: ThetaInterval) -> (f64, f64) {
    let eps = 1e-6 * interval.width();
    (interval.alpha + eps, interval.beta - eps)
}

/// Moves `theta` off any event it coincides with exactly.
fn dodge_events(theta: f64, events: &[f64], nudge: f64) -> f64 {
    let mut th = theta;
    while events.binary_search_by(|e| e.total_cmp(&th)).is_ok() {
        th += nudge;
    }
    th
}

fn uniform_nodes(lo: f64, hi: f64, count: usize, events: &[f64], nudge: f64) -> Vec<f64> {
    let step = (hi - lo) / (count - 1) as f64;
    (0..count)
        .map(|k| {
            let raw = if k + 1 == count { hi } else { lo + step * k as f64 };
            dodge_events(raw, events, nudge)
        })
        .collect()
}

fn evaluate<S: LogLikelihoodSource + ?Sized>(source: &S, thetas: &[f64]) -> Vec<f64> {
    let work = source.events().len().max(1);
    exec::map_indexed_weighted(thetas.len(), work, |k| source.log_likelihood(thetas[k]))
}

/// Posterior on the uniform jittered grid of `grid_size` nodes.
pub fn posterior_grid_from<S: LogLikelihoodSource + ?Sized>(
    source: &S,
    family: &IntensityFamily,
    prior: Prior,
    grid_size: usize,
) -> Result<PosteriorGrid, EstimatorError> {
    if grid_size < MIN_GRID {
        return Err(EstimatorError::DegenerateGrid(format!(
            "grid_size {grid_size} below {MIN_GRID}"
        )));
    }
    prior.validate()?;
    let (lo, hi) = grid_span(family.interval);
    let thetas = uniform_nodes(lo, hi, grid_size, source.events(), 1e-12 * family.t_end);
    let log_lik = evaluate(source, &thetas);
    let log_prior = thetas.iter().map(|&t| prior.log_density(t, family.interval)).collect();
    PosteriorGrid::build(thetas, log_lik, log_prior)
}

/// Posterior of a batch on the uniform jittered grid.
pub fn posterior_grid(
    batch: &SampleBatch,
    family: &IntensityFamily,
    prior: Prior,
    grid_size: usize,
) -> Result<PosteriorGrid, EstimatorError> {
    let likelihood = Likelihood::new(batch, family);
    let source = likelihood.against(family.interval.midpoint());
    posterior_grid_from(&source, family, prior, grid_size)
}

/// Refines the posterior grid where it carries mass: every cell holding
/// more than `1/grid_size` of the mass is split into equal parts, about
/// `mass·grid_size` of them, until no cell is that heavy or the pass budget
/// is spent. Returns the refined grid and the number of passes used.
pub fn refined_posterior_from<S: LogLikelihoodSource + ?Sized>(
    source: &S,
    family: &IntensityFamily,
    cfg: &EstimatorConfig,
) -> Result<(PosteriorGrid, usize), EstimatorError> {
    cfg.validate()?;
    let mut grid = posterior_grid_from(source, family, cfg.prior, cfg.grid_size)?;
    let nudge = 1e-12 * family.t_end;
    let threshold = 2.0 / cfg.grid_size as f64;
    let mut passes = 0;
    while passes < cfg.refine_passes {
        let cells = grid.cell_masses();
        if cells.iter().all(|&c| c <= threshold) {
            break;
        }
        let mut fresh = Vec::new();
        for (k, &c) in cells.iter().enumerate() {
            if c <= threshold {
                continue;
            }
            let (lo, hi) = (grid.thetas[k], grid.thetas[k + 1]);
            let parts = ((c * cfg.grid_size as f64).ceil() as usize).clamp(2, cfg.grid_size);
            let step = (hi - lo) / parts as f64;
            for j in 1..parts {
                let th = dodge_events(lo + step * j as f64, source.events(), nudge);
                if th > lo && th < hi {
                    fresh.push(th);
                }
            }
        }
        if fresh.is_empty() {
            break;
        }
        passes += 1;
        let fresh_ll = evaluate(source, &fresh);
        grid = merge_nodes(grid, fresh, fresh_ll, cfg.prior, family.interval)?;
    }
    Ok((grid, passes))
}

fn merge_nodes(
    grid: PosteriorGrid,
    fresh: Vec<f64>,
    fresh_ll: Vec<f64>,
    prior: Prior,
    interval: ThetaInterval,
) -> Result<PosteriorGrid, EstimatorError> {
    let mut nodes: Vec<(f64, f64)> = grid.thetas.into_iter().zip(grid.log_lik).collect();
    nodes.extend(fresh.into_iter().zip(fresh_ll));
    nodes.sort_by(|x, y| x.0.total_cmp(&y.0));
    nodes.dedup_by(|x, y| x.0 == y.0);
    let thetas: Vec<f64> = nodes.iter().map(|n| n.0).collect();
    let log_lik = nodes.iter().map(|n| n.1).collect();
    let log_prior = thetas.iter().map(|&t| prior.log_density(t, interval)).collect();
    PosteriorGrid::build(thetas, log_lik, log_prior)
}

/// Posterior mean under quadratic loss for any likelihood source.
pub fn bayes_estimate_from<S: LogLikelihoodSource + ?Sized>(
    source: &S,
    family: &IntensityFamily,
    cfg: &EstimatorConfig,
) -> Result<EstimateResult, EstimatorError> {
    let (grid, passes) = refined_posterior_from(source, family, cfg)?;
    let (lo, hi) = grid_span(family.interval);
    let estimate = grid.mean().clamp(lo, hi);
    Ok(EstimateResult {
        estimate,
        estimator_kind: EstimatorKind::Bayes,
        diagnostics: Diagnostics {
            grid_size: grid.len(),
            refinement_iterations: passes,
            boundary_mass: grid.boundary_mass(),
            ties: 0,
        },
    })
}

/// Posterior-mean estimate of the shift from a batch.
pub fn bayes_estimate(
    batch: &SampleBatch,
    family: &IntensityFamily,
    cfg: &EstimatorConfig,
) -> Result<EstimateResult, EstimatorError> {
    let likelihood = Likelihood::new(batch, family);
    let source = likelihood.against(family.interval.midpoint());
    bayes_estimate_from(&source, family, cfg)
}

const MLE_CANDIDATES: usize = 6;

/// Maximum likelihood estimate of the shift (`p > 0` only).
///
/// A coarse scan of the jittered grid picks the best local maxima; around
/// each, the bracket between its neighbors is cut at every event (where the
/// log-likelihood dips to `−∞`) and each piece is searched by golden
/// section, staying `1e-12·T` away from the events. Exact ties go to the
/// smallest shift.
pub fn mle_estimate(
    batch: &SampleBatch,
    family: &IntensityFamily,
    cfg: &EstimatorConfig,
) -> Result<EstimateResult, EstimatorError> {
    let likelihood = Likelihood::new(batch, family);
    let source = likelihood.against(family.interval.midpoint());
    mle_estimate_from(&source, family, cfg)
}

pub fn mle_estimate_from<S: LogLikelihoodSource + ?Sized>(
    source: &S,
    family: &IntensityFamily,
    cfg: &EstimatorConfig,
) -> Result<EstimateResult, EstimatorError> {
    let p = family.singularity.p;
    if p < 0.0 {
        return Err(EstimatorError::MleUndefinedForNegativeP(p));
    }
    cfg.validate()?;
    let events = source.events();
    let guard = 1e-12 * family.t_end;
    let (lo, hi) = grid_span(family.interval);
    let thetas = uniform_nodes(lo, hi, cfg.mle_grid_size, events, guard);
    let values = evaluate(source, &thetas);
    let finite = |v: f64| v.is_finite() || v == f64::INFINITY;
    if !values.iter().any(|&v| finite(v)) {
        return Err(EstimatorError::AllNodesSingular);
    }
    let key = |k: usize| if finite(values[k]) { values[k] } else { f64::NEG_INFINITY };
    let last = thetas.len() - 1;
    let mut candidates: Vec<usize> = (0..=last)
        .filter(|&k| {
            let v = key(k);
            v > f64::NEG_INFINITY && (k == 0 || key(k - 1) <= v) && (k == last || key(k + 1) <= v)
        })
        .collect();
    candidates.sort_by(|&x, &y| key(y).total_cmp(&key(x)).then(x.cmp(&y)));
    candidates.truncate(MLE_CANDIDATES);

    let mut best_x = f64::NAN;
    let mut best_v = f64::NEG_INFINITY;
    let mut ties = 0;
    for &k in &candidates {
        let b_lo = thetas[k.saturating_sub(1)];
        let b_hi = thetas[(k + 1).min(last)];
        for (g_lo, g_hi) in gaps_between_events(b_lo, b_hi, events, guard) {
            let tol = 1e-13 * family.t_end;
            let m = golden_section_max(|th| source.log_likelihood(th), g_lo, g_hi, tol, 400);
            if m.value > best_v || (m.value == best_v && m.x < best_x) {
                ties = if m.value == best_v { ties + 1 } else { 0 };
                best_v = m.value;
                best_x = m.x;
            } else if m.value == best_v {
                ties += 1;
            }
        }
        // the coarse node itself stays in the running
        let v = key(k);
        if v > best_v || (v == best_v && thetas[k] < best_x) {
            best_v = v;
            best_x = thetas[k];
        }
    }
    if !best_x.is_finite() {
        return Err(EstimatorError::AllNodesSingular);
    }
    Ok(EstimateResult {
        estimate: best_x.clamp(lo, hi),
        estimator_kind: EstimatorKind::Mle,
        diagnostics: Diagnostics {
            grid_size: thetas.len(),
            refinement_iterations: candidates.len(),
            boundary_mass: 0.0,
            ties,
        },
    })
}

/// Splits `[lo, hi]` at the events inside it, keeping `guard` clear of each.
fn gaps_between_events(lo: f64, hi: f64, events: &[f64], guard: f64) -> Vec<(f64, f64)> {
    let start = events.partition_point(|&e| e <= lo - guard);
    let mut gaps = Vec::new();
    let mut left = lo;
    for &e in events[start..].iter().take_while(|&&e| e < hi + guard) {
        let right = (e - guard).min(hi);
        if right > left {
            gaps.push((left, right));
        }
        left = left.max(e + guard);
    }
    if hi > left {
        gaps.push((left, hi));
    }
    gaps
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::IntensityModel;
    use crate::sampler::{sample_batch, EventPath};

    fn family(p: f64) -> IntensityFamily {
        IntensityModel::pure_power(1.0, 1.0, p, 1.0, 2.0, 0.5, 1.5).unwrap().family
    }

    #[test]
    fn constant_likelihood_gives_prior() {
        let fam = family(0.5);
        let flat = FnLikelihood { f: |_t: f64| 0.0, events: &[] };
        let grid = posterior_grid_from(&flat, &fam, Prior::Uniform, 257).unwrap();
        for d in grid.density() {
            assert!((d - 1.0).abs() < 1e-5, "{d}");
        }
        assert!((grid.mass() - 1.0).abs() < 1e-8);
        let est = bayes_estimate_from(&flat, &fam, &EstimatorConfig::default()).unwrap();
        assert!((est.estimate - 1.0).abs() < 1e-6);
    }

    #[test]
    fn mass_is_one_after_refinement() {
        let m = IntensityModel::new(family(-0.5), 1.0).unwrap();
        let batch = sample_batch(&m, 64, 17).unwrap();
        let lik = Likelihood::new(&batch, &m.family);
        let src = lik.against(1.0);
        let (grid, passes) = refined_posterior_from(&src, &m.family, &EstimatorConfig::default()).unwrap();
        assert!(passes >= 1);
        assert!((grid.mass() - 1.0).abs() < 1e-8);
        assert!(grid.thetas.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn mle_rejects_infinite_type() {
        let m = IntensityModel::new(family(-0.5), 1.0).unwrap();
        let batch = sample_batch(&m, 4, 1).unwrap();
        assert_eq!(
            mle_estimate(&batch, &m.family, &EstimatorConfig::default()).unwrap_err(),
            EstimatorError::MleUndefinedForNegativeP(-0.5)
        );
    }

    #[test]
    fn grid_nodes_dodge_events() {
        let fam = family(-0.5);
        let (lo, hi) = grid_span(fam.interval);
        let probe = uniform_nodes(lo, hi, 101, &[], 0.0);
        // put an event exactly on a node
        let events = vec![probe[40]];
        let nodes = uniform_nodes(lo, hi, 101, &events, 1e-12 * fam.t_end);
        assert!(nodes[40] != events[0]);
        assert!((nodes[40] - events[0]).abs() <= 2e-12);
        let m = IntensityModel::new(fam, 1.0).unwrap();
        let batch = SampleBatch::from_paths(vec![EventPath::new(events, 2.0).unwrap()], &m, 0).unwrap();
        let grid = posterior_grid(&batch, &fam, Prior::Uniform, 101).unwrap();
        assert!(grid.log_posterior.iter().all(|v| v.is_finite()));
        let est = bayes_estimate(&batch, &fam, &EstimatorConfig::default()).unwrap();
        assert!(est.estimate.is_finite());
    }

    #[test]
    fn gaps_skip_events() {
        let gaps = gaps_between_events(0.0, 1.0, &[-0.5, 0.25, 0.5, 2.0], 1e-3);
        assert_eq!(gaps.len(), 3);
        assert!((gaps[0].1 - 0.249).abs() < 1e-12);
        assert!((gaps[1].0 - 0.251).abs() < 1e-12);
        assert_eq!(gaps[2].1, 1.0);
    }

    #[test]
    fn config_round_trip() {
        let cfg = EstimatorConfig {
            prior: Prior::TruncatedNormal { mean: 1.2, sd: 0.1 },
            ..Default::default()
        };
        assert_eq!(EstimatorConfig::from_key_values(&cfg.to_key_values()).unwrap(), cfg);
        let mut kv = cfg.to_key_values();
        kv.insert("grid_size", "8");
        assert!(matches!(
            EstimatorConfig::from_key_values(&kv),
            Err(EstimatorError::DegenerateGrid(_))
        ));
    }
}
