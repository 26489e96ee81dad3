//! Monte Carlo experiments: convergence rate, limit laws, moments,
//! efficiency ordering, and the Hölder and exponential bounds on the
//! likelihood ratio process.
//!
//! Every number in a report is a function of the configuration and the seed
//! alone. Replicate `r` at ladder size `n` for the `i`-th shift always draws
//! its batch from `derive_seed(seed, [i, n, r])`, so the Bayes and ML
//! estimators see the same data, and the parallel schedule never matters:
//! results are collected in replicate order before any reduction.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use crate::config::{ConfigError, KeyValues};
use crate::estimators::{
    bayes_estimate, mle_estimate, EstimatorConfig, EstimatorError, EstimatorKind, ESTIMATOR_KEYS,
};
use crate::exec;
use crate::likelihood::{Likelihood, LikelihoodError};
use crate::limit::{draw_zeta_xi, limit_cf, LimitConfig, LimitDraws, LimitError, LIMIT_KEYS};
use crate::model::{IntensityModel, ModelError, MODEL_KEYS};
use crate::rng::derive_seed;
use crate::sampler::{sample_batch, SampleError};
use crate::stats::{abs_moment, ks_two_sample, median, mean_and_se, ols, MeanEstimate};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HarnessError {
    #[error("invalid experiment configuration: {0}")]
    Invalid(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Sample(#[from] SampleError),
    #[error(transparent)]
    Likelihood(#[from] LikelihoodError),
    #[error(transparent)]
    Estimator(#[from] EstimatorError),
    #[error(transparent)]
    Limit(#[from] LimitError),
}

impl HarnessError {
    /// Whether the failure comes from the inputs rather than from running.
    pub fn is_validation(&self) -> bool {
        match self {
            HarnessError::Invalid(_) | HarnessError::Config(_) | HarnessError::Model(_) => true,
            HarnessError::Estimator(e) => matches!(
                e,
                EstimatorError::MleUndefinedForNegativeP(_)
                    | EstimatorError::InvalidPrior(_)
                    | EstimatorError::Config(_)
            ),
            HarnessError::Limit(e) => matches!(
                e,
                LimitError::InvalidConfig(_) | LimitError::XiUndefinedForNegativeP(_) | LimitError::Config(_)
            ),
            HarnessError::Likelihood(LikelihoodError::LocalOutOfRange { .. }) => true,
            _ => false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Rate,
    LimitDist,
    Efficiency,
    Lemma1,
    Lemma2,
    Lemma3,
    Moments,
}

impl ExperimentKind {
    pub fn name(&self) -> &'static str {
        match self {
            ExperimentKind::Rate => "rate",
            ExperimentKind::LimitDist => "limit-dist",
            ExperimentKind::Efficiency => "efficiency",
            ExperimentKind::Lemma1 => "lemma1",
            ExperimentKind::Lemma2 => "lemma2",
            ExperimentKind::Lemma3 => "lemma3",
            ExperimentKind::Moments => "moments",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [
            ExperimentKind::Rate,
            ExperimentKind::LimitDist,
            ExperimentKind::Efficiency,
            ExperimentKind::Lemma1,
            ExperimentKind::Lemma2,
            ExperimentKind::Lemma3,
            ExperimentKind::Moments,
        ]
        .into_iter()
        .find(|k| k.name() == s)
    }

    fn needs_distribution(&self) -> bool {
        matches!(
            self,
            ExperimentKind::LimitDist | ExperimentKind::Efficiency | ExperimentKind::Moments
        )
    }

    fn default_ladder(&self) -> Vec<usize> {
        match self {
            ExperimentKind::Lemma1 => vec![16, 256, 4096],
            ExperimentKind::Lemma2 => vec![16, 256],
            ExperimentKind::Lemma3 => vec![64],
            _ => vec![16, 64, 256, 1024],
        }
    }
}

pub const EXPERIMENT_KEYS: [&str; 10] = [
    "kind",
    "n_ladder",
    "replicates",
    "limit_replicates",
    "seed",
    "estimators",
    "thetas",
    "lambdas",
    "us",
    "pairs_us",
];

/// Everything an experiment depends on.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub model: IntensityModel,
    pub estimator: EstimatorConfig,
    pub limit: LimitConfig,
    pub n_ladder: Vec<usize>,
    /// `M`: replicates per ladder point.
    pub replicates: usize,
    /// Draws of the limit variables (defaults to `replicates`).
    pub limit_replicates: usize,
    pub seed: u64,
    pub estimators: Vec<EstimatorKind>,
    /// Shifts to run at; defaults to the model's own.
    pub thetas: Vec<f64>,
    /// `λ` values of the characteristic-function check.
    pub lambdas: Vec<f64>,
    /// `u` values: characteristic-function points (lemma1) or the grid of
    /// the exponential bound (lemma3).
    pub us: Vec<f64>,
    /// Grid whose pairs `(u₁, u₂)` enter the Hölder bound (lemma2).
    pub pairs_us: Vec<f64>,
}

impl ExperimentConfig {
    /// Defaults for `kind` around `model`.
    pub fn new(kind: ExperimentKind, model: IntensityModel) -> Self {
        let (replicates, us) = match kind {
            ExperimentKind::Lemma1 => (5000, vec![1.0]),
            ExperimentKind::Lemma2 => (1000, vec![]),
            ExperimentKind::Lemma3 => (10_000, vec![-4.0, -2.0, -1.0, -0.5, -0.25, 0.25, 0.5, 1.0, 2.0, 4.0]),
            ExperimentKind::LimitDist | ExperimentKind::Efficiency => (1000, vec![]),
            _ => (500, vec![]),
        };
        let estimators = match kind {
            ExperimentKind::LimitDist | ExperimentKind::Efficiency if model.singularity().p > 0.0 => {
                vec![EstimatorKind::Bayes, EstimatorKind::Mle]
            }
            _ => vec![EstimatorKind::Bayes],
        };
        Self {
            kind,
            model,
            estimator: EstimatorConfig::default(),
            limit: LimitConfig::default(),
            n_ladder: kind.default_ladder(),
            replicates,
            limit_replicates: replicates,
            seed: 1,
            estimators,
            thetas: vec![model.theta],
            lambdas: vec![1.0],
            us,
            pairs_us: vec![-1.0, -0.75, -0.5, -0.25, 0.0, 0.25, 0.5, 0.75, 1.0],
        }
    }

    pub fn from_key_values(kv: &KeyValues) -> Result<Self, HarnessError> {
        for key in kv.keys() {
            let ok = match key.split_once('.') {
                Some(("model", k)) => MODEL_KEYS.contains(&k),
                Some(("estimator", k)) => ESTIMATOR_KEYS.contains(&k),
                Some(("limit", k)) => LIMIT_KEYS.contains(&k),
                Some(("experiment", k)) => EXPERIMENT_KEYS.contains(&k),
                _ => false,
            };
            if !ok {
                return Err(ConfigError::Unknown(key.to_string()).into());
            }
        }
        let model = IntensityModel::from_key_values(&kv.section("model"))?;
        let ex = kv.section("experiment");
        let kind_name: String = ex.required("kind")?;
        let kind = ExperimentKind::parse(&kind_name).ok_or_else(|| ConfigError::BadValue {
            key: "experiment.kind".into(),
            value: kind_name.clone(),
        })?;
        let mut cfg = Self::new(kind, model);
        cfg.estimator = EstimatorConfig::from_key_values(&kv.section("estimator"))?;
        cfg.limit = LimitConfig::from_key_values(&kv.section("limit"))?;
        if let Some(l) = ex.list("n_ladder")? {
            cfg.n_ladder = l;
        }
        cfg.replicates = ex.or("replicates", cfg.replicates)?;
        cfg.limit_replicates = ex.or("limit_replicates", cfg.replicates)?;
        cfg.seed = ex.or("seed", cfg.seed)?;
        if let Some(names) = ex.list::<String>("estimators")? {
            cfg.estimators = names
                .iter()
                .map(|s| match s.as_str() {
                    "bayes" => Ok(EstimatorKind::Bayes),
                    "mle" => Ok(EstimatorKind::Mle),
                    _ => Err(ConfigError::BadValue {
                        key: "experiment.estimators".into(),
                        value: s.clone(),
                    }),
                })
                .collect::<Result<_, _>>()?;
        }
        if let Some(t) = ex.list("thetas")? {
            cfg.thetas = t;
        }
        if let Some(l) = ex.list("lambdas")? {
            cfg.lambdas = l;
        }
        if let Some(u) = ex.list("us")? {
            cfg.us = u;
        }
        if let Some(u) = ex.list("pairs_us")? {
            cfg.pairs_us = u;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_text(text: &str) -> Result<Self, HarnessError> {
        Self::from_key_values(&KeyValues::parse(text)?)
    }

    pub fn to_key_values(&self) -> KeyValues {
        let join = |v: &[f64]| v.iter().map(|x| format!("{x}")).collect::<Vec<_>>().join(",");
        let mut kv = KeyValues::new();
        kv.merge_section("model", &self.model.to_key_values());
        kv.merge_section("estimator", &self.estimator.to_key_values());
        kv.merge_section("limit", &self.limit.to_key_values());
        let mut ex = KeyValues::new();
        ex.insert("kind", self.kind.name());
        ex.insert(
            "n_ladder",
            self.n_ladder.iter().map(usize::to_string).collect::<Vec<_>>().join(","),
        );
        ex.insert("replicates", self.replicates.to_string());
        ex.insert("limit_replicates", self.limit_replicates.to_string());
        ex.insert("seed", self.seed.to_string());
        ex.insert(
            "estimators",
            self.estimators.iter().map(EstimatorKind::name).collect::<Vec<_>>().join(","),
        );
        ex.insert("thetas", join(&self.thetas));
        ex.insert("lambdas", join(&self.lambdas));
        ex.insert("us", join(&self.us));
        ex.insert("pairs_us", join(&self.pairs_us));
        kv.merge_section("experiment", &ex);
        kv
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::Invalid(m));
        if self.n_ladder.is_empty() || self.n_ladder[0] == 0 {
            return bad("n_ladder must be a nonempty list of positive sizes".into());
        }
        if self.n_ladder.windows(2).any(|w| w[0] >= w[1]) {
            return bad("n_ladder must be strictly increasing".into());
        }
        if self.replicates == 0 {
            return bad("replicates must be positive".into());
        }
        if self.kind.needs_distribution() && (self.replicates < 100 || self.limit_replicates < 100) {
            return bad(format!(
                "{} needs at least 100 replicates (got {} and {})",
                self.kind.name(),
                self.replicates,
                self.limit_replicates
            ));
        }
        if self.kind == ExperimentKind::Rate && self.n_ladder.len() < 4 {
            return bad("the rate fit needs at least 4 ladder points".into());
        }
        if self.estimators.is_empty() {
            return bad("at least one estimator is required".into());
        }
        if self.thetas.is_empty() {
            return bad("thetas must not be empty".into());
        }
        for &theta in &self.thetas {
            self.model.family.at(theta)?;
        }
        let p = self.model.singularity().p;
        if p < 0.0 && self.estimators.contains(&EstimatorKind::Mle) {
            return Err(EstimatorError::MleUndefinedForNegativeP(p).into());
        }
        self.estimator.validate()?;
        self.limit.validate()?;
        Ok(())
    }

    fn rate_exponent(&self) -> f64 {
        self.model.singularity().rate_exponent()
    }

    fn max_n(&self) -> usize {
        *self.n_ladder.last().expect("validated nonempty ladder")
    }
}

/// One estimator's error on one replicate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ErrorRow {
    pub theta: f64,
    pub n: usize,
    pub replicate: usize,
    pub estimator: EstimatorKind,
    pub error: f64,
    pub rescaled_error: f64,
}

/// Seed of the batch for shift index `i`, size `n`, replicate `r`.
pub fn batch_seed(seed: u64, theta_index: usize, n: usize, replicate: usize) -> u64 {
    derive_seed(seed, &[theta_index as u64, n as u64, replicate as u64])
}

const LIMIT_LABEL: u64 = 0x4C49_4D49_54;

/// Seed of the limit-variable draws.
pub fn limit_seed(seed: u64) -> u64 {
    derive_seed(seed, &[LIMIT_LABEL])
}

/// Errors of every configured estimator over the `M` replicates at `n`.
pub fn estimator_errors(
    cfg: &ExperimentConfig,
    theta_index: usize,
    n: usize,
) -> Result<Vec<ErrorRow>, HarnessError> {
    let theta = cfg.thetas[theta_index];
    let model = cfg.model.family.at(theta)?;
    let scale = (n as f64).powf(cfg.rate_exponent());
    let per_replicate = exec::map_indexed(cfg.replicates, |r| -> Result<Vec<ErrorRow>, HarnessError> {
        let batch = sample_batch(&model, n, batch_seed(cfg.seed, theta_index, n, r))?;
        let mut rows = Vec::with_capacity(cfg.estimators.len());
        for &kind in &cfg.estimators {
            let est = match kind {
                EstimatorKind::Bayes => bayes_estimate(&batch, &model.family, &cfg.estimator)?,
                EstimatorKind::Mle => mle_estimate(&batch, &model.family, &cfg.estimator)?,
            };
            let error = est.estimate - theta;
            rows.push(ErrorRow {
                theta,
                n,
                replicate: r,
                estimator: kind,
                error,
                rescaled_error: scale * error,
            });
        }
        Ok(rows)
    });
    let mut rows = Vec::new();
    for r in per_replicate {
        rows.extend(r?);
    }
    Ok(rows)
}

fn rescaled_of(rows: &[ErrorRow], kind: EstimatorKind) -> Vec<f64> {
    rows.iter().filter(|r| r.estimator == kind).map(|r| r.rescaled_error).collect()
}

/// Error summary at one ladder size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RatePoint {
    pub n: usize,
    pub rmse: f64,
    pub median_abs_error: f64,
    pub mean_error: f64,
}

/// `ln RMSE` against `ln n` for one estimator and shift. The slope's
/// standard error is the homoscedastic OLS one,
/// `sqrt(Σ residual² / (k − 2) / Σ (ln n − mean ln n)²)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateReport {
    pub theta: f64,
    pub estimator: EstimatorKind,
    pub points: Vec<RatePoint>,
    pub slope: f64,
    pub slope_std_error: f64,
    pub intercept: f64,
    pub target_slope: f64,
}

/// Ladder sweep: RMSE per `n` and the fitted log-log slope.
pub fn run_rate_experiment(cfg: &ExperimentConfig) -> Result<(Vec<RateReport>, Vec<ErrorRow>), HarnessError> {
    cfg.validate()?;
    let mut all_rows = Vec::new();
    let mut reports = Vec::new();
    for (ti, &theta) in cfg.thetas.iter().enumerate() {
        let mut per_n = Vec::new();
        for &n in &cfg.n_ladder {
            let rows = estimator_errors(cfg, ti, n)?;
            per_n.push((n, rows.clone()));
            all_rows.extend(rows);
        }
        for &kind in &cfg.estimators {
            let points: Vec<RatePoint> = per_n
                .iter()
                .map(|(n, rows)| {
                    let errs: Vec<f64> = rows.iter().filter(|r| r.estimator == kind).map(|r| r.error).collect();
                    let abs: Vec<f64> = errs.iter().map(|e| e.abs()).collect();
                    RatePoint {
                        n: *n,
                        rmse: (errs.iter().map(|e| e * e).sum::<f64>() / errs.len() as f64).sqrt(),
                        median_abs_error: median(&abs),
                        mean_error: mean_and_se(&errs).mean,
                    }
                })
                .collect();
            let x: Vec<f64> = points.iter().map(|pt| (pt.n as f64).ln()).collect();
            let y: Vec<f64> = points.iter().map(|pt| pt.rmse.ln()).collect();
            let fit = ols(&x, &y);
            reports.push(RateReport {
                theta,
                estimator: kind,
                points,
                slope: fit.slope,
                slope_std_error: fit.slope_std_error,
                intercept: fit.intercept,
                target_slope: -cfg.rate_exponent(),
            });
        }
    }
    Ok((reports, all_rows))
}

/// `E|X|^k` of a sample next to that of the limit variable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MomentGap {
    pub k: i32,
    pub sample: MeanEstimate,
    pub limit: MeanEstimate,
    pub gap: f64,
}

fn moment_gaps(sample: &[f64], limit: &[f64]) -> Vec<MomentGap> {
    [1, 2]
        .into_iter()
        .map(|k| {
            let s = abs_moment(sample, k);
            let l = abs_moment(limit, k);
            MomentGap {
                k,
                sample: s,
                limit: l,
                gap: s.mean - l.mean,
            }
        })
        .collect()
}

/// Rescaled errors of one estimator against draws of its limit variable.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistComparison {
    pub estimator: EstimatorKind,
    /// `zeta` or `xi`.
    pub limit_variable: &'static str,
    pub ks: f64,
    pub sample_size: usize,
    pub limit_size: usize,
    pub moments: Vec<MomentGap>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistReport {
    pub theta: f64,
    pub n: usize,
    pub comparisons: Vec<DistComparison>,
    /// KS between the `ζ` draws and an independent set of the same size
    /// (same-law control).
    pub split_half_ks: f64,
    pub split_half_sizes: (usize, usize),
}

fn limit_draws(cfg: &ExperimentConfig) -> Result<LimitDraws, HarnessError> {
    Ok(draw_zeta_xi(
        &cfg.model.singularity(),
        &cfg.limit,
        cfg.limit_replicates,
        limit_seed(cfg.seed),
    )?)
}

fn compare(rows: &[ErrorRow], draws: &LimitDraws, kind: EstimatorKind) -> DistComparison {
    let sample = rescaled_of(rows, kind);
    let (limit, name) = match kind {
        EstimatorKind::Bayes => (&draws.zetas, "zeta"),
        EstimatorKind::Mle => (&draws.xis, "xi"),
    };
    DistComparison {
        estimator: kind,
        limit_variable: name,
        ks: ks_two_sample(&sample, limit),
        sample_size: sample.len(),
        limit_size: limit.len(),
        moments: moment_gaps(&sample, limit),
    }
}

/// Rescaled errors at the largest ladder size against `ζ` (Bayes) and `ξ`
/// (MLE).
pub fn run_limit_dist_experiment(cfg: &ExperimentConfig) -> Result<(Vec<DistReport>, Vec<ErrorRow>), HarnessError> {
    cfg.validate()?;
    let draws = limit_draws(cfg)?;
    // the control compares the comparison draws with a second independent set of the same size
    let control = draw_zeta_xi(
        &cfg.model.singularity(),
        &cfg.limit,
        cfg.limit_replicates,
        derive_seed(cfg.seed, &[LIMIT_LABEL, 1]),
    )?;
    let split_half_ks = ks_two_sample(&draws.zetas, &control.zetas);
    let n = cfg.max_n();
    let mut reports = Vec::new();
    let mut all_rows = Vec::new();
    for (ti, &theta) in cfg.thetas.iter().enumerate() {
        let rows = estimator_errors(cfg, ti, n)?;
        reports.push(DistReport {
            theta,
            n,
            comparisons: cfg.estimators.iter().map(|&k| compare(&rows, &draws, k)).collect(),
            split_half_ks,
            split_half_sizes: (draws.zetas.len(), control.zetas.len()),
        });
        all_rows.extend(rows);
    }
    Ok((reports, all_rows))
}

/// Second moments at the largest ladder size: Bayes against MLE and
/// against the bound `E ζ²`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EfficiencyReport {
    pub theta: f64,
    pub n: usize,
    pub bayes_second_moment: MeanEstimate,
    pub mle_second_moment: Option<MeanEstimate>,
    pub zeta_second_moment: MeanEstimate,
    pub xi_second_moment: Option<MeanEstimate>,
    /// Bayes ≤ MLE + 2 combined standard errors.
    pub bayes_not_worse_than_mle: Option<bool>,
    /// |Bayes − E ζ²| ≤ 3 combined standard errors.
    pub bayes_matches_bound: bool,
}

fn combined_se(x: &MeanEstimate, y: &MeanEstimate) -> f64 {
    x.std_error.hypot(y.std_error)
}

pub fn run_efficiency_experiment(
    cfg: &ExperimentConfig,
) -> Result<(Vec<EfficiencyReport>, Vec<ErrorRow>), HarnessError> {
    cfg.validate()?;
    if !cfg.estimators.contains(&EstimatorKind::Bayes) {
        return Err(HarnessError::Invalid("efficiency needs the Bayes estimator".into()));
    }
    let draws = limit_draws(cfg)?;
    let zeta2 = abs_moment(&draws.zetas, 2);
    let xi2 = (!draws.xis.is_empty()).then(|| abs_moment(&draws.xis, 2));
    let n = cfg.max_n();
    let mut reports = Vec::new();
    let mut all_rows = Vec::new();
    for (ti, &theta) in cfg.thetas.iter().enumerate() {
        let rows = estimator_errors(cfg, ti, n)?;
        let bayes = abs_moment(&rescaled_of(&rows, EstimatorKind::Bayes), 2);
        let mle = cfg
            .estimators
            .contains(&EstimatorKind::Mle)
            .then(|| abs_moment(&rescaled_of(&rows, EstimatorKind::Mle), 2));
        reports.push(EfficiencyReport {
            theta,
            n,
            bayes_second_moment: bayes,
            mle_second_moment: mle,
            zeta_second_moment: zeta2,
            xi_second_moment: xi2,
            bayes_not_worse_than_mle: mle.map(|m| bayes.mean <= m.mean + 2.0 * combined_se(&bayes, &m)),
            bayes_matches_bound: (bayes.mean - zeta2.mean).abs() <= 3.0 * combined_se(&bayes, &zeta2),
        });
        all_rows.extend(rows);
    }
    Ok((reports, all_rows))
}

/// `E|n^ν(θ* − θ)|^k` along the ladder next to the limit moments.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentsPoint {
    pub n: usize,
    pub estimator: EstimatorKind,
    pub moments: Vec<MomentGap>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentsReport {
    pub theta: f64,
    pub points: Vec<MomentsPoint>,
}

pub fn run_moments_experiment(cfg: &ExperimentConfig) -> Result<(Vec<MomentsReport>, Vec<ErrorRow>), HarnessError> {
    cfg.validate()?;
    let draws = limit_draws(cfg)?;
    let mut reports = Vec::new();
    let mut all_rows = Vec::new();
    for (ti, &theta) in cfg.thetas.iter().enumerate() {
        let mut points = Vec::new();
        for &n in &cfg.n_ladder {
            let rows = estimator_errors(cfg, ti, n)?;
            for &kind in &cfg.estimators {
                let limit = match kind {
                    EstimatorKind::Bayes => &draws.zetas,
                    EstimatorKind::Mle => &draws.xis,
                };
                points.push(MomentsPoint {
                    n,
                    estimator: kind,
                    moments: moment_gaps(&rescaled_of(&rows, kind), limit),
                });
            }
            all_rows.extend(rows);
        }
        reports.push(MomentsReport { theta, points });
    }
    Ok((reports, all_rows))
}

/// Empirical characteristic function of `ln Z_n(u)` at one `n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CfAtN {
    pub n: usize,
    pub empirical: [f64; 2],
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CfPoint {
    pub lambda: f64,
    pub u: f64,
    /// `exp(𝓛(λ))` as `[re, im]`.
    pub limit: [f64; 2],
    pub per_n: Vec<CfAtN>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Lemma1Report {
    pub theta: f64,
    pub replicates: usize,
    pub points: Vec<CfPoint>,
    /// Largest modulus gap over the `(λ, u)` points, per ladder size.
    pub max_gap_per_n: Vec<(usize, f64)>,
}

/// `E exp(iλ ln Z_n(u))` over the replicates against `exp 𝓛(λ)`.
pub fn run_lemma1_check(cfg: &ExperimentConfig) -> Result<Vec<Lemma1Report>, HarnessError> {
    cfg.validate()?;
    let sing = cfg.model.singularity();
    let pairs: Vec<(f64, f64)> = cfg
        .lambdas
        .iter()
        .flat_map(|&l| cfg.us.iter().map(move |&u| (l, u)))
        .collect();
    let limits: Vec<Complex64> = pairs
        .iter()
        .map(|&(l, u)| limit_cf(l, u, &sing, cfg.limit.quad_tol).exp())
        .collect();
    let mut reports = Vec::new();
    for (ti, &theta) in cfg.thetas.iter().enumerate() {
        let model = cfg.model.family.at(theta)?;
        let mut sums = vec![Vec::new(); pairs.len()];
        for &n in &cfg.n_ladder {
            let per_rep = exec::map_indexed(cfg.replicates, |r| -> Result<Vec<Complex64>, HarnessError> {
                let batch = sample_batch(&model, n, batch_seed(cfg.seed, ti, n, r))?;
                let lik = Likelihood::new(&batch, &model.family);
                let local = lik.local(theta);
                pairs
                    .iter()
                    .map(|&(l, u)| {
                        let v = local.log_z(u)?.value;
                        Ok(if v.is_finite() {
                            Complex64::from_polar(1.0, l * v)
                        } else if u == 0.0 || l == 0.0 {
                            Complex64::new(1.0, 0.0)
                        } else {
                            // Z_n(u) = 0 or ∞ has no phase; probability zero
                            Complex64::new(0.0, 0.0)
                        })
                    })
                    .collect()
            });
            let mut acc = vec![Complex64::new(0.0, 0.0); pairs.len()];
            for rep in per_rep {
                for (a, v) in acc.iter_mut().zip(rep?) {
                    *a += v;
                }
            }
            for (k, a) in acc.into_iter().enumerate() {
                sums[k].push((n, a / cfg.replicates as f64));
            }
        }
        let points: Vec<CfPoint> = pairs
            .iter()
            .zip(&limits)
            .zip(&sums)
            .map(|((&(lambda, u), lim), per)| CfPoint {
                lambda,
                u,
                limit: [lim.re, lim.im],
                per_n: per
                    .iter()
                    .map(|&(n, e)| CfAtN {
                        n,
                        empirical: [e.re, e.im],
                        gap: if lambda == 0.0 || u == 0.0 { 0.0 } else { (e - lim).norm() },
                    })
                    .collect(),
            })
            .collect();
        let max_gap_per_n = cfg
            .n_ladder
            .iter()
            .enumerate()
            .map(|(k, &n)| (n, points.iter().map(|pt| pt.per_n[k].gap).fold(0.0, f64::max)))
            .collect();
        reports.push(Lemma1Report {
            theta,
            replicates: cfg.replicates,
            points,
            max_gap_per_n,
        });
    }
    Ok(reports)
}

/// Measured value against a bound at one grid point; `margin = bound −
/// measured`, so a nonnegative margin means the bound holds there.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundEntry {
    pub u1: f64,
    pub u2: f64,
    pub measured: f64,
    pub std_error: f64,
    pub bound: f64,
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    pub part: &'static str,
    pub n: usize,
    pub entries: Vec<BoundEntry>,
    /// `C` (lemma 2) or `c` (lemma 3) fitted on the grid.
    pub fitted_constant: f64,
    pub worst_margin: f64,
}

impl BoundReport {
    fn new(part: &'static str, n: usize, entries: Vec<BoundEntry>, fitted_constant: f64) -> Self {
        let worst_margin = entries.iter().map(|e| e.margin).fold(f64::INFINITY, f64::min);
        Self {
            part,
            n,
            entries,
            fitted_constant,
            worst_margin,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LemmaReport {
    pub theta: f64,
    pub deterministic: Vec<BoundReport>,
    pub stochastic: Vec<BoundReport>,
    /// Largest over smallest fitted constant across the ladder.
    pub constant_spread: f64,
}

fn spread(reports: &[BoundReport]) -> f64 {
    let cs: Vec<f64> = reports.iter().map(|r| r.fitted_constant).collect();
    let hi = cs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = cs.iter().copied().fold(f64::INFINITY, f64::min);
    hi / lo
}

fn check_local(model: &IntensityModel, n: usize, u: f64) -> Result<f64, HarnessError> {
    let scale = (n as f64).powf(-model.singularity().rate_exponent());
    let interval = model.family.interval;
    let theta_u = model.theta + u * scale;
    if !interval.contains(theta_u) {
        return Err(LikelihoodError::LocalOutOfRange {
            u,
            lo: (interval.alpha - model.theta) / scale,
            hi: (interval.beta - model.theta) / scale,
        }
        .into());
    }
    Ok(theta_u)
}

/// Hölder bound `E|Z_n^{1/2}(u₁) − Z_n^{1/2}(u₂)|² ≤ C|u₁ − u₂|^{p+1}`.
///
/// The deterministic part fits `C` as the largest ratio of
/// `n ∫(√S_{θ_{u₁}} − √S_{θ_{u₂}})²` to `|u₁ − u₂|^{p+1}` over the grid
/// pairs at most 1 apart, per ladder size (farther pairs are trivially
/// bounded by 4). The stochastic part compares the Monte Carlo
/// mean at the largest `n` with `C|u₁ − u₂|^{p+1}`, allowing 3 standard
/// errors.
pub fn run_lemma2_check(cfg: &ExperimentConfig) -> Result<Vec<LemmaReport>, HarnessError> {
    cfg.validate()?;
    let q = cfg.model.singularity().p + 1.0;
    let grid = &cfg.pairs_us;
    let pairs: Vec<(f64, f64)> = (0..grid.len())
        .flat_map(|i| (i + 1..grid.len()).map(move |j| (grid[i], grid[j])))
        .filter(|(x, y)| x != y && (x - y).abs() <= 1.0)
        .collect();
    if pairs.is_empty() {
        return Err(HarnessError::Invalid("pairs_us needs two values at most 1 apart".into()));
    }
    let mut reports = Vec::new();
    for (ti, &theta) in cfg.thetas.iter().enumerate() {
        let model = cfg.model.family.at(theta)?;
        let mut deterministic = Vec::new();
        for &n in &cfg.n_ladder {
            let entries = pairs
                .iter()
                .map(|&(u1, u2)| -> Result<BoundEntry, HarnessError> {
                    let t1 = check_local(&model, n, u1)?;
                    let t2 = check_local(&model, n, u2)?;
                    let h = n as f64 * model.family.hellinger_between(t1, t2, 1e-10)?;
                    let ratio = h / (u1 - u2).abs().powf(q);
                    Ok(BoundEntry {
                        u1,
                        u2,
                        measured: h,
                        std_error: 0.0,
                        bound: ratio,
                        margin: 0.0,
                    })
                })
                .collect::<Result<Vec<_>, _>>()?;
            let c = entries.iter().map(|e| e.bound).fold(0.0, f64::max);
            let entries = entries
                .into_iter()
                .map(|e| {
                    let bound = c * (e.u1 - e.u2).abs().powf(q);
                    BoundEntry {
                        bound,
                        margin: bound - e.measured,
                        ..e
                    }
                })
                .collect();
            deterministic.push(BoundReport::new("deterministic", n, entries, c));
        }
        let n = cfg.max_n();
        let c = deterministic.last().expect("nonempty ladder").fitted_constant;
        let per_rep = exec::map_indexed(cfg.replicates, |r| -> Result<Vec<f64>, HarnessError> {
            let batch = sample_batch(&model, n, batch_seed(cfg.seed, ti, n, r))?;
            let lik = Likelihood::new(&batch, &model.family);
            let local = lik.local(theta);
            pairs
                .iter()
                .map(|&(u1, u2)| {
                    let d = local.sqrt_z(u1)? - local.sqrt_z(u2)?;
                    Ok(d * d)
                })
                .collect()
        });
        let mut columns = vec![Vec::with_capacity(cfg.replicates); pairs.len()];
        for rep in per_rep {
            for (col, v) in columns.iter_mut().zip(rep?) {
                col.push(v);
            }
        }
        let entries = pairs
            .iter()
            .zip(&columns)
            .map(|(&(u1, u2), col)| {
                let m = mean_and_se(col);
                let bound = c * (u1 - u2).abs().powf(q);
                BoundEntry {
                    u1,
                    u2,
                    measured: m.mean,
                    std_error: m.std_error,
                    bound,
                    margin: bound + 3.0 * m.std_error - m.mean,
                }
            })
            .collect();
        let stochastic = vec![BoundReport::new("stochastic", n, entries, c)];
        reports.push(LemmaReport {
            theta,
            constant_spread: spread(&deterministic),
            deterministic,
            stochastic,
        });
    }
    Ok(reports)
}

/// Exponential bound `E Z_n^{1/2}(u) ≤ exp(−½ n F(u n^{−ν}))`.
///
/// The deterministic part fits `c` as the smallest ratio of
/// `n F(u n^{−ν})` to `|u|^{p+1}` over the grid; the stochastic part
/// compares the Monte Carlo mean of `√Z_n(u)` with the bound, allowing
/// 3 standard errors.
pub fn run_lemma3_check(cfg: &ExperimentConfig) -> Result<Vec<LemmaReport>, HarnessError> {
    cfg.validate()?;
    let q = cfg.model.singularity().p + 1.0;
    let us: Vec<f64> = cfg.us.iter().copied().filter(|&u| u != 0.0).collect();
    if us.is_empty() {
        return Err(HarnessError::Invalid("us needs a nonzero value".into()));
    }
    let mut reports = Vec::new();
    for (ti, &theta) in cfg.thetas.iter().enumerate() {
        let model = cfg.model.family.at(theta)?;
        let mut deterministic = Vec::new();
        let mut stochastic = Vec::new();
        for &n in &cfg.n_ladder {
            let nf: Vec<f64> = us
                .iter()
                .map(|&u| -> Result<f64, HarnessError> {
                    let tu = check_local(&model, n, u)?;
                    Ok(n as f64 * model.hellinger_F(tu - theta)?)
                })
                .collect::<Result<_, _>>()?;
            let ratios: Vec<f64> = us.iter().zip(&nf).map(|(u, f)| f / u.abs().powf(q)).collect();
            let c = ratios.iter().copied().fold(f64::INFINITY, f64::min);
            let det_entries = us
                .iter()
                .zip(&nf)
                .map(|(&u, &f)| {
                    let bound = c * u.abs().powf(q);
                    BoundEntry {
                        u1: u,
                        u2: 0.0,
                        measured: f,
                        std_error: 0.0,
                        bound,
                        margin: f - bound,
                    }
                })
                .collect();
            deterministic.push(BoundReport::new("deterministic", n, det_entries, c));

            let per_rep = exec::map_indexed(cfg.replicates, |r| -> Result<Vec<f64>, HarnessError> {
                let batch = sample_batch(&model, n, batch_seed(cfg.seed, ti, n, r))?;
                let lik = Likelihood::new(&batch, &model.family);
                let local = lik.local(theta);
                us.iter().map(|&u| Ok(local.sqrt_z(u)?)).collect()
            });
            let mut columns = vec![Vec::with_capacity(cfg.replicates); us.len()];
            for rep in per_rep {
                for (col, v) in columns.iter_mut().zip(rep?) {
                    col.push(v);
                }
            }
            let entries = us
                .iter()
                .zip(&nf)
                .zip(&columns)
                .map(|((&u, &f), col)| {
                    let m = mean_and_se(col);
                    let bound = (-0.5 * f).exp();
                    BoundEntry {
                        u1: u,
                        u2: 0.0,
                        measured: m.mean,
                        std_error: m.std_error,
                        bound,
                        margin: bound + 3.0 * m.std_error - m.mean,
                    }
                })
                .collect();
            stochastic.push(BoundReport::new("stochastic", n, entries, c));
        }
        reports.push(LemmaReport {
            theta,
            constant_spread: spread(&deterministic),
            deterministic,
            stochastic,
        });
    }
    Ok(reports)
}

/// Results of any experiment kind.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Results {
    Rate(Vec<RateReport>),
    Dist(Vec<DistReport>),
    Efficiency(Vec<EfficiencyReport>),
    Moments(Vec<MomentsReport>),
    Lemma1(Vec<Lemma1Report>),
    Bound(Vec<LemmaReport>),
}

/// What `report.json` holds, plus the per-replicate rows for the CSV.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub experiment: &'static str,
    pub config_echo: BTreeMap<String, String>,
    pub seed: u64,
    pub results: Results,
    pub version: &'static str,
    #[serde(skip)]
    pub rows: Vec<ErrorRow>,
}

impl Report {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// `n,replicate,estimator,error,rescaled_error`, plus `theta` when more
    /// than one shift was run.
    pub fn rows_csv(&self) -> String {
        let multi = self.rows.iter().any(|r| r.theta != self.rows[0].theta);
        let mut out = String::from("n,replicate,estimator,error,rescaled_error");
        out.push_str(if multi { ",theta\n" } else { "\n" });
        for r in &self.rows {
            let _ = write!(
                out,
                "{},{},{},{:.16e},{:.16e}",
                r.n,
                r.replicate,
                r.estimator.name(),
                r.error,
                r.rescaled_error
            );
            if multi {
                let _ = write!(out, ",{}", r.theta);
            }
            out.push('\n');
        }
        out
    }
}

/// Runs the configured experiment.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Report, HarnessError> {
    let (results, rows) = match cfg.kind {
        ExperimentKind::Rate => {
            let (r, rows) = run_rate_experiment(cfg)?;
            (Results::Rate(r), rows)
        }
        ExperimentKind::LimitDist => {
            let (r, rows) = run_limit_dist_experiment(cfg)?;
            (Results::Dist(r), rows)
        }
        ExperimentKind::Efficiency => {
            let (r, rows) = run_efficiency_experiment(cfg)?;
            (Results::Efficiency(r), rows)
        }
        ExperimentKind::Moments => {
            let (r, rows) = run_moments_experiment(cfg)?;
            (Results::Moments(r), rows)
        }
        ExperimentKind::Lemma1 => (Results::Lemma1(run_lemma1_check(cfg)?), Vec::new()),
        ExperimentKind::Lemma2 => (Results::Bound(run_lemma2_check(cfg)?), Vec::new()),
        ExperimentKind::Lemma3 => (Results::Bound(run_lemma3_check(cfg)?), Vec::new()),
    };
    Ok(Report {
        experiment: cfg.kind.name(),
        config_echo: cfg
            .to_key_values()
            .iter()
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect(),
        seed: cfg.seed,
        results,
        version: VERSION,
        rows,
    })
}
