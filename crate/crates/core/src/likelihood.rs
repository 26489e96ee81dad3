//! Log-likelihood ratio of the shift parameter and the normalized local
//! likelihood-ratio process `Z_n(u)`.
//!
//! The log-likelihood ratio of `θ` against `θ₁` is
//!
//! ```text
//! Σ_i Σ_{t ∈ X_i} ln(S_θ(t)/S_{θ₁}(t)) − n·(Λ_θ(T) − Λ_{θ₁}(T))
//! ```
//!
//! where the compensator uses `∫[S_θ/S_{θ₁} − 1]S_{θ₁} = Λ_θ(T) − Λ_{θ₁}(T)`.
//! It only depends on the pooled event times, so [`Likelihood`] keeps them
//! sorted once and reuses them for every candidate shift.

use thiserror::Error;

use crate::model::{IntensityFamily, PowerSingularity};
use crate::sampler::SampleBatch;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LikelihoodError {
    #[error("shift {theta} is outside the parameter interval ({alpha}, {beta})")]
    OutOfInterval { theta: f64, alpha: f64, beta: f64 },
    #[error("local parameter u = {u} is outside ({lo}, {hi})")]
    LocalOutOfRange { u: f64, lo: f64, hi: f64 },
}

/// Extended-real log-likelihood. `at_event_singularity` is set when an
/// event coincides exactly with one of the shifts involved.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogLikelihoodValue {
    pub value: f64,
    pub at_event_singularity: bool,
}

impl LogLikelihoodValue {
    pub fn finite(value: f64) -> Self {
        Self {
            value,
            at_event_singularity: false,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.value.is_finite()
    }
}

/// `Σ ln s(t − θ) − n Λ_θ(T)` split into the part from events not sitting
/// exactly on `θ` and the number of events that do.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogLikelihoodParts {
    pub regular: f64,
    pub singular_events: usize,
}

/// Pooled events of a batch together with the family, ready for repeated
/// evaluation at many shifts.
#[derive(Debug, Clone)]
pub struct Likelihood {
    family: IntensityFamily,
    events: Vec<f64>,
    n: usize,
}

impl Likelihood {
    pub fn new(batch: &SampleBatch, family: &IntensityFamily) -> Self {
        Self::from_pooled(batch.pooled_times(), batch.n, family)
    }

    /// `events` must be sorted.
    pub fn from_pooled(events: Vec<f64>, n: usize, family: &IntensityFamily) -> Self {
        debug_assert!(events.windows(2).all(|w| w[0] <= w[1]));
        Self {
            family: *family,
            events,
            n,
        }
    }

    pub fn events(&self) -> &[f64] {
        &self.events
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn family(&self) -> &IntensityFamily {
        &self.family
    }

    /// Unnormalized log-likelihood at `theta`, up to a `θ`-free constant.
    pub fn parts(&self, theta: f64) -> LogLikelihoodParts {
        let first = self.events.partition_point(|&t| t < theta);
        let last = first + self.events[first..].partition_point(|&t| t <= theta);
        let left = &self.events[..first];
        let right = &self.events[last..];
        let sum = if self.family.smooth.is_zero() {
            let PowerSingularity { a, b, p } = self.family.singularity;
            left.len() as f64 * a.ln()
                + right.len() as f64 * b.ln()
                + p * (sum_ln_abs_diff(left, theta) + sum_ln_abs_diff(right, theta))
        } else {
            sum_ln_positive(left.iter().chain(right).map(|&t| self.family.shape(t - theta)))
        };
        LogLikelihoodParts {
            regular: sum - self.n as f64 * self.family.total_mass(theta),
            singular_events: last - first,
        }
    }

    /// Log-likelihood ratio of `theta` against `theta1`.
    pub fn ratio(&self, theta: f64, theta1: f64) -> Result<LogLikelihoodValue, LikelihoodError> {
        for th in [theta, theta1] {
            if !self.family.interval.contains(th) {
                return Err(LikelihoodError::OutOfInterval {
                    theta: th,
                    alpha: self.family.interval.alpha,
                    beta: self.family.interval.beta,
                });
            }
        }
        if theta == theta1 {
            return Ok(LogLikelihoodValue::finite(0.0));
        }
        Ok(combine(self.parts(theta), self.parts(theta1), self.family.singularity.p))
    }

    /// Fixes a reference shift so that repeated ratios against it only
    /// evaluate the candidate.
    pub fn against(&self, theta1: f64) -> ReferencedLikelihood<'_> {
        ReferencedLikelihood {
            likelihood: self,
            theta1,
            reference: self.parts(theta1),
        }
    }

    /// The local process `u ↦ ln Z_n(u)` around `theta_true`.
    pub fn local(&self, theta_true: f64) -> LocalLikelihood<'_> {
        let nu = self.family.singularity.rate_exponent();
        let scale = (self.n as f64).powf(-nu);
        let interval = self.family.interval;
        LocalLikelihood {
            inner: self.against(theta_true),
            theta_true,
            scale,
            lo: (interval.alpha - theta_true) / scale,
            hi: (interval.beta - theta_true) / scale,
        }
    }
}

fn combine(num: LogLikelihoodParts, den: LogLikelihoodParts, p: f64) -> LogLikelihoodValue {
    let flagged = num.singular_events > 0 || den.singular_events > 0;
    let excess = num.singular_events as i64 - den.singular_events as i64;
    // each event on the candidate contributes p·ln 0
    let value = match excess.signum() {
        0 => num.regular - den.regular,
        1 => {
            if p < 0.0 {
                f64::INFINITY
            } else {
                f64::NEG_INFINITY
            }
        }
        _ => {
            if p < 0.0 {
                f64::NEG_INFINITY
            } else {
                f64::INFINITY
            }
        }
    };
    LogLikelihoodValue {
        value,
        at_event_singularity: flagged,
    }
}

/// A [`Likelihood`] with a cached reference shift.
#[derive(Debug, Clone, Copy)]
pub struct ReferencedLikelihood<'a> {
    likelihood: &'a Likelihood,
    theta1: f64,
    reference: LogLikelihoodParts,
}

impl<'a> ReferencedLikelihood<'a> {
    pub fn likelihood(&self) -> &'a Likelihood {
        self.likelihood
    }

    pub fn theta1(&self) -> f64 {
        self.theta1
    }

    /// Ratio without the interval check (callers keep `theta` inside).
    pub fn eval(&self, theta: f64) -> LogLikelihoodValue {
        if theta == self.theta1 {
            return LogLikelihoodValue::finite(0.0);
        }
        combine(
            self.likelihood.parts(theta),
            self.reference,
            self.likelihood.family.singularity.p,
        )
    }
}

/// `u ↦ ln Z_n(u) = ln L(θ + u n^{−ν}, θ, Xⁿ)`.
#[derive(Debug, Clone, Copy)]
pub struct LocalLikelihood<'a> {
    inner: ReferencedLikelihood<'a>,
    theta_true: f64,
    scale: f64,
    lo: f64,
    hi: f64,
}

impl LocalLikelihood<'_> {
    /// `n^{−1/(p+1)}`.
    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// The open range `U_n` of admissible `u`.
    pub fn range(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    pub fn theta_at(&self, u: f64) -> f64 {
        self.theta_true + u * self.scale
    }

    pub fn log_z(&self, u: f64) -> Result<LogLikelihoodValue, LikelihoodError> {
        if !(u > self.lo && u < self.hi) {
            return Err(LikelihoodError::LocalOutOfRange {
                u,
                lo: self.lo,
                hi: self.hi,
            });
        }
        if u == 0.0 {
            return Ok(LogLikelihoodValue::finite(0.0));
        }
        Ok(self.inner.eval(self.theta_at(u)))
    }

    /// `Z_n(u)^{1/2}`, continuous at `ln Z_n = −∞`.
    pub fn sqrt_z(&self, u: f64) -> Result<f64, LikelihoodError> {
        self.log_z(u).map(|v| (0.5 * v.value).exp())
    }
}

/// Log-likelihood ratio of `theta` against `theta1` for a batch.
pub fn log_likelihood_ratio(
    batch: &SampleBatch,
    family: &IntensityFamily,
    theta: f64,
    theta1: f64,
) -> Result<LogLikelihoodValue, LikelihoodError> {
    Likelihood::new(batch, family).ratio(theta, theta1)
}

/// `ln Z_n(u)` for a batch around `theta_true`.
pub fn normalized_llr(
    batch: &SampleBatch,
    family: &IntensityFamily,
    theta_true: f64,
    u: f64,
) -> Result<LogLikelihoodValue, LikelihoodError> {
    Likelihood::new(batch, family).local(theta_true).log_z(u)
}

/// `Z_n(u)^{1/2}` for a batch around `theta_true`.
pub fn sqrt_llr(batch: &SampleBatch, family: &IntensityFamily, theta_true: f64, u: f64) -> Result<f64, LikelihoodError> {
    Likelihood::new(batch, family).local(theta_true).sqrt_z(u)
}

/// `Σ ln|t − θ|` over events distinct from `θ`, taking one logarithm per
/// block of eight factors.
pub fn sum_ln_abs_diff(events: &[f64], theta: f64) -> f64 {
    let mut acc = 0.0;
    for chunk in events.chunks(8) {
        let prod: f64 = chunk.iter().map(|&t| (t - theta).abs()).product();
        if prod.is_normal() {
            acc += prod.ln();
        } else {
            acc += chunk.iter().map(|&t| (t - theta).abs().ln()).sum::<f64>();
        }
    }
    acc
}

/// `Σ ln x` over positive values, blockwise as in [`sum_ln_abs_diff`].
pub fn sum_ln_positive(values: impl Iterator<Item = f64>) -> f64 {
    let mut acc = 0.0;
    let mut block = [0.0; 8];
    let mut filled = 0;
    let flush = |block: &[f64]| {
        let prod: f64 = block.iter().product();
        if prod.is_normal() {
            prod.ln()
        } else {
            block.iter().map(|x| x.ln()).sum()
        }
    };
    for v in values {
        block[filled] = v;
        filled += 1;
        if filled == block.len() {
            acc += flush(&block);
            filled = 0;
        }
    }
    if filled > 0 {
        acc += flush(&block[..filled]);
    }
    acc
}
