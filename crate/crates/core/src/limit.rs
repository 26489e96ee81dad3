//! The limit process `Z(u)`, the limit variables `ζ` and `ξ`, and the
//! limiting log-characteristic function of `ln Z(u)`.
//!
//! `Y` is a Poisson process on the line with intensity `d(z)|z|^p`, kept on
//! the window `[−U, U]`. On that window
//!
//! ```text
//! ln Z_U(u) = p Σ_j ln|1 − u/z_j| + ln(a/b)·sign(u)·#{z_j strictly between 0 and u}
//!             − D_U(u) − (a − b)/(p + 1)·|u|^{p+1}·sign(u)
//! D_U(u)    = ∫_{−U}^{U} d(z)(|z − u|^p − |z|^p) dz
//! ```
//!
//! `D_U` carries both the deterministic integral and the compensator of the
//! centered stochastic integral. Those two diverge separately over the line
//! and are never formed on their own here. With this normalization
//! `E Z_U(u) = 1` for every window.
//!
//! The events beyond `±U` still tilt `ln Z` by a random amount of order
//! `U^{(p−1)/2}|u|`, which for `p` near one is far from negligible at
//! practical windows. With [`TailCorrection::Gaussian`] that part is added
//! back: for `|z| > U` the summand `p ln|1 − u/z|` is expanded in `u/z`, the
//! centered Poisson integrals of `z^{−k}` are replaced by a Gaussian vector
//! with their exact covariance, and the compensator
//! `∫_{|z|>U} (|1 − u/z|^p − 1 − p ln|1 − u/z|) d(z)|z|^p dz` is summed as a
//! power series. Both are polynomials in `u/U`.

use std::fmt::Write as _;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;
use thiserror::Error;

use crate::config::{ConfigError, KeyValues};
use crate::exec;
use crate::likelihood::sum_ln_abs_diff;
use crate::model::{ModelError, PowerSingularity};
use crate::optimize::golden_section_max;
use crate::quad::{integrate, Tolerance};
use crate::rng::{open_unit, RngStream};
use crate::sampler::poisson_count;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LimitError {
    #[error("xi is only defined for p > 0 (got p = {0})")]
    XiUndefinedForNegativeP(f64),
    #[error("invalid limit configuration: {0}")]
    InvalidConfig(String),
    #[error("|u| = {u} exceeds half the window U = {z_window}")]
    OutsideWindow { u: f64, z_window: f64 },
    #[error("malformed draws file: {0}")]
    Format(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Config(#[from] ConfigError),
}

/// Treatment of the events of `Y` outside `[−U, U]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum TailCorrection {
    /// Drop them.
    None,
    /// Add their Gaussian approximation back.
    #[default]
    Gaussian,
}

impl TailCorrection {
    pub fn name(&self) -> &'static str {
        match self {
            TailCorrection::None => "none",
            TailCorrection::Gaussian => "gaussian",
        }
    }
}

impl std::str::FromStr for TailCorrection {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "none" => Ok(TailCorrection::None),
            "gaussian" => Ok(TailCorrection::Gaussian),
            other => Err(format!("unknown tail correction {other:?}")),
        }
    }
}

/// Window and grid for simulating `Z`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LimitConfig {
    /// `U`: events of `Y` are kept on `[−U, U]`.
    pub z_window: f64,
    /// `V`: `ζ` is integrated and `ξ` searched on `[−V, V]`.
    pub u_window: f64,
    pub u_step: f64,
    /// Relative tolerance for the characteristic-function quadrature.
    pub quad_tol: f64,
    pub tail: TailCorrection,
}

impl Default for LimitConfig {
    fn default() -> Self {
        Self {
            z_window: 64.0,
            u_window: 16.0,
            u_step: 16.0 / 800.0,
            quad_tol: 1e-10,
            tail: TailCorrection::Gaussian,
        }
    }
}

pub const LIMIT_KEYS: [&str; 5] = ["z_window", "u_window", "u_step", "quad_tol", "tail_correction"];

impl LimitConfig {
    /// Window `V` with the default step `V/800` and `U = 4V`.
    pub fn with_u_window(v: f64) -> Self {
        Self {
            z_window: 4.0 * v,
            u_window: v,
            u_step: v / 800.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), LimitError> {
        let positive = [self.z_window, self.u_window, self.u_step, self.quad_tol]
            .iter()
            .all(|v| v.is_finite() && *v > 0.0);
        if !positive {
            return Err(LimitError::InvalidConfig("all settings must be positive".into()));
        }
        if self.z_window < 4.0 * self.u_window {
            return Err(LimitError::InvalidConfig(format!(
                "z_window {} must be at least 4 * u_window {}",
                self.z_window, self.u_window
            )));
        }
        if self.u_step > self.u_window / 200.0 {
            return Err(LimitError::InvalidConfig(format!(
                "u_step {} must not exceed u_window/200 = {}",
                self.u_step,
                self.u_window / 200.0
            )));
        }
        Ok(())
    }

    pub fn from_key_values(kv: &KeyValues) -> Result<Self, LimitError> {
        let d = Self::default();
        let u_window = kv.or("u_window", d.u_window)?;
        let cfg = Self {
            z_window: kv.or("z_window", (4.0 * u_window).max(d.z_window))?,
            u_window,
            u_step: kv.or("u_step", u_window / 800.0)?,
            quad_tol: kv.or("quad_tol", d.quad_tol)?,
            tail: kv.or("tail_correction", d.tail)?,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_key_values(&self) -> KeyValues {
        let mut kv = KeyValues::new();
        kv.insert_f64("z_window", self.z_window);
        kv.insert_f64("u_window", self.u_window);
        kv.insert_f64("u_step", self.u_step);
        kv.insert_f64("quad_tol", self.quad_tol);
        kv.insert("tail_correction", self.tail.name());
        kv
    }

    /// Uniform grid on `[−V, V]`, symmetric and containing 0.
    pub fn u_grid(&self) -> Vec<f64> {
        let half = (self.u_window / self.u_step).round() as i64;
        let step = self.u_window / half as f64;
        (-half..=half).map(|k| k as f64 * step).collect()
    }
}

/// One realization of `Y` on `[−U, U]`, sorted.
#[derive(Debug, Clone, PartialEq)]
pub struct LimitPath {
    pub y_events: Vec<f64>,
    pub z_window: f64,
    /// Coefficients of the outside contribution as a polynomial in `u/U`
    /// (index = power); empty when the outside is dropped.
    pub tail: Vec<f64>,
}

impl LimitPath {
    /// Keeps only sorted, nonzero events inside the window.
    pub fn new(mut y_events: Vec<f64>, z_window: f64) -> Self {
        y_events.retain(|&z| z != 0.0 && z.abs() <= z_window);
        y_events.sort_by(f64::total_cmp);
        Self {
            y_events,
            z_window,
            tail: Vec::new(),
        }
    }

    pub fn with_tail(mut self, tail: Vec<f64>) -> Self {
        self.tail = tail;
        self
    }

    /// The outside contribution to `ln Z(u)`.
    pub fn tail_at(&self, u: f64) -> f64 {
        let y = u / self.z_window;
        self.tail.iter().rev().fold(0.0, |acc, c| acc * y + c)
    }

    /// Signed count `sign(u)·#{events strictly between 0 and u}`.
    pub fn signed_count(&self, u: f64) -> i64 {
        let ev = &self.y_events;
        if u > 0.0 {
            let lo = ev.partition_point(|&z| z <= 0.0);
            let hi = ev.partition_point(|&z| z < u);
            (hi - lo) as i64
        } else if u < 0.0 {
            let lo = ev.partition_point(|&z| z <= u);
            let hi = ev.partition_point(|&z| z < 0.0);
            -((hi - lo) as i64)
        } else {
            0
        }
    }
}

/// Draws `Y` on `[−U, U]`, then the outside contribution if requested.
pub fn sample_limit_path<R: Rng + ?Sized>(
    sing: &PowerSingularity,
    z_window: f64,
    tail: TailCorrection,
    rng: &mut R,
) -> LimitPath {
    let PowerSingularity { a, b, p } = *sing;
    let q = p + 1.0;
    let mean = (a + b) * z_window.powf(q) / q;
    let count = poisson_count(mean, rng);
    let left = a / (a + b);
    let events = (0..count)
        .map(|_| {
            let side: f64 = rng.random();
            let r = z_window * open_unit(rng).powf(1.0 / q);
            if side < left {
                -r
            } else {
                r
            }
        })
        .collect();
    let path = LimitPath::new(events, z_window);
    match tail {
        TailCorrection::None => path,
        TailCorrection::Gaussian => {
            let normals: Vec<f64> = (0..TAIL_GAUSSIAN_TERMS).map(|_| rng.sample(StandardNormal)).collect();
            path.with_tail(tail_coefficients(sing, z_window, &normals))
        }
    }
}

/// Powers of `u/z` kept in the Gaussian part; the next one is below
/// `4^{−7}` of the first on `|u| ≤ U/4`.
const TAIL_GAUSSIAN_TERMS: usize = 6;
/// Powers kept in the compensator series, enough for `|u| ≤ U/2`.
const TAIL_SERIES_TERMS: usize = 48;

/// `∫_{|z|>U} z^{−k} d(z)|z|^p dz / U^{p+1−k}`.
fn outside_moment(k: usize, sing: &PowerSingularity) -> f64 {
    let PowerSingularity { a, b, p } = *sing;
    let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
    (b + sign * a) / (k as f64 - p - 1.0)
}

/// Polynomial in `y = u/U` for the outside of the window, given standard
/// normals `g`.
///
/// With `Π_k` the centered Poisson integral of `(U/z)^k` over `|z| > U`,
/// `p Σ ln|1 − u/z| − (compensation) = −p Σ_k Π_k y^k/k − Σ_k e_k y^k`. The
/// `Π_k` have covariance `U^{p+1}·m_{j+k}` and are drawn as `L g` with `L`
/// the Cholesky factor; `e_k = U^{p+1} m_k (binom(p,k)(−1)^k + p/k)`.
fn tail_coefficients(sing: &PowerSingularity, z_window: f64, g: &[f64]) -> Vec<f64> {
    let p = sing.p;
    let scale = z_window.powf(p + 1.0);
    let k_max = g.len();
    let cov: Vec<Vec<f64>> = (1..=k_max)
        .map(|j| (1..=k_max).map(|k| scale * outside_moment(j + k, sing)).collect())
        .collect();
    let chol = cholesky(&cov);
    let mut coeffs = vec![0.0; TAIL_SERIES_TERMS + 1];
    for k in 1..=k_max {
        let pi: f64 = (0..k).map(|i| chol[k - 1][i] * g[i]).sum();
        coeffs[k] -= p * pi / k as f64;
    }
    // binom(p, k)(−1)^k by recurrence
    let mut binom = 1.0;
    for k in 1..=TAIL_SERIES_TERMS {
        binom *= (k as f64 - 1.0 - p) / k as f64;
        if k >= 2 {
            coeffs[k] -= scale * outside_moment(k, sing) * (binom + p / k as f64);
        }
    }
    coeffs
}

/// Lower Cholesky factor of a positive semidefinite matrix; pivots lost
/// to rounding are taken as zero.
fn cholesky(m: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = m.len();
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[i][k] * l[j][k]).sum();
            if i == j {
                l[i][i] = (m[i][i] - s).max(0.0).sqrt();
            } else if l[j][j] > 0.0 {
                l[i][j] = (m[i][j] - s) / l[j][j];
            }
        }
    }
    l
}

/// `sign(x)|x|^{p+1}/(p+1)`.
fn signed_power_integral(x: f64, p: f64) -> f64 {
    x.signum() * x.abs().powf(p + 1.0) / (p + 1.0)
}

/// `((U + δ)^{p+1} − U^{p+1})/(p+1)` without cancellation for small `δ`.
fn power_increment(z_window: f64, delta: f64, p: f64) -> f64 {
    let q = p + 1.0;
    z_window.powf(q) * (q * (delta / z_window).ln_1p()).exp_m1() / q
}

/// `D_U(u) = ∫_{−U}^{U} d(z)(|z − u|^p − |z|^p) dz` in closed form.
pub fn det_integral(u: f64, z_window: f64, sing: &PowerSingularity) -> f64 {
    let PowerSingularity { a, b, p } = *sing;
    if u == 0.0 {
        return 0.0;
    }
    (a - b) * signed_power_integral(-u, p) + a * power_increment(z_window, u, p) + b * power_increment(z_window, -u, p)
}

/// Evaluates `ln Z_U` along one path, caching what does not depend on `u`.
#[derive(Debug, Clone)]
pub struct LimitProcess<'a> {
    path: &'a LimitPath,
    sing: PowerSingularity,
    ln_ratio: f64,
    /// `Σ_j ln|z_j|`.
    ln_abs_sum: f64,
}

impl<'a> LimitProcess<'a> {
    pub fn new(path: &'a LimitPath, sing: &PowerSingularity) -> Self {
        Self {
            path,
            sing: *sing,
            ln_ratio: (sing.a / sing.b).ln(),
            ln_abs_sum: sum_ln_abs_diff(&path.y_events, 0.0),
        }
    }

    /// Everything except the stochastic sum `p Σ ln|1 − u/z_j|`, with the
    /// counting term taken as `count`.
    fn deterministic(&self, u: f64, count: i64) -> f64 {
        let PowerSingularity { a, b, p } = self.sing;
        self.ln_ratio * count as f64 - det_integral(u, self.path.z_window, &self.sing)
            - (a - b) * signed_power_integral(u, p)
            + self.path.tail_at(u)
    }

    /// `ln Z_U(u)`; `∓∞` when `u` is an event (sign opposite to `p`).
    pub fn log_z(&self, u: f64) -> f64 {
        if u == 0.0 {
            return 0.0;
        }
        let p = self.sing.p;
        let stochastic = sum_ln_abs_diff(&self.path.y_events, u) - self.ln_abs_sum;
        if stochastic == f64::NEG_INFINITY {
            return if p > 0.0 { f64::NEG_INFINITY } else { f64::INFINITY };
        }
        p * stochastic + self.deterministic(u, self.path.signed_count(u))
    }

    /// `ln(Z_U(u)/|u − z|^p)` for the event `z = events[k]`, extended
    /// continuously to `u = z`; `count` is the counting term on the side
    /// of `z` being integrated.
    fn log_z_without(&self, u: f64, k: usize, count: i64) -> f64 {
        let ev = &self.path.y_events;
        let p = self.sing.p;
        let others = sum_ln_abs_diff(&ev[..k], u) + sum_ln_abs_diff(&ev[k + 1..], u);
        p * (others - self.ln_abs_sum) + self.deterministic(u, count)
    }
}

/// `ln Z_U` of one path on the uniform `u` grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ZGrid {
    pub us: Vec<f64>,
    pub log_z: Vec<f64>,
}

impl ZGrid {
    pub fn evaluate(path: &LimitPath, sing: &PowerSingularity, cfg: &LimitConfig) -> Self {
        let process = LimitProcess::new(path, sing);
        let us = cfg.u_grid();
        let log_z = us.iter().map(|&u| process.log_z(u)).collect();
        Self { us, log_z }
    }
}

/// `ln Z_U(u)` for a single path.
pub fn log_z(u: f64, path: &LimitPath, sing: &PowerSingularity) -> Result<f64, LimitError> {
    if u.abs() > 0.5 * path.z_window {
        return Err(LimitError::OutsideWindow { u, z_window: path.z_window });
    }
    Ok(LimitProcess::new(path, sing).log_z(u))
}

/// One piece of the `ζ` integration.
struct Piece {
    lo: f64,
    hi: f64,
    /// Log of the integrand factor at each end; with `weight` this is
    /// `ln(Z/|u − z|^p)`, otherwise `ln Z`.
    f_lo: f64,
    f_hi: f64,
    /// Event whose `|u − z|^p` factor is integrated exactly.
    weight: Option<f64>,
}

/// `∫_lo^hi |u − z|^p du` and `∫_lo^hi (u − lo)|u − z|^p du`.
fn power_moments(lo: f64, hi: f64, z: f64, p: f64) -> (f64, f64) {
    let k0 = |y: f64| signed_power_integral(y, p);
    let k1 = |y: f64| y.abs().powf(p + 2.0) / (p + 2.0);
    let m0 = k0(hi - z) - k0(lo - z);
    let m1 = k1(hi - z) - k1(lo - z) - (lo - z) * m0;
    (m0, m1)
}

/// `(∫ Z, ∫ u Z)` over `[−V, V]` scaled by `exp(−shift)`, and the shift.
///
/// Events inside the range become breakpoints. Pieces next to an event
/// integrate `g(u)|u − z|^p` with `g` linear and the power exact, which
/// captures the spikes (`p < 0`) and kinks (`p > 0`) that a plain
/// trapezoid misses; other pieces use the trapezoid rule.
fn zeta_integrals(process: &LimitProcess<'_>, cfg: &LimitConfig) -> (f64, f64) {
    let ev = &process.path.y_events;
    let v = cfg.u_window;
    let grid = cfg.u_grid();
    let first = ev.partition_point(|&z| z < -v);
    let last = ev.partition_point(|&z| z <= v);
    let inside = &ev[first..last];
    // Breakpoints: grid nodes, events, and a node between two events with
    // no grid node between them.
    let mut points: Vec<(f64, Option<usize>)> = grid.iter().map(|&u| (u, None)).collect();
    for (j, &z) in inside.iter().enumerate() {
        points.push((z, Some(first + j)));
    }
    // events sort ahead of a grid node at the same place, which is dropped
    points.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.is_none().cmp(&y.1.is_none())));
    points.dedup_by(|x, y| x.0 == y.0);
    let mut extra = Vec::new();
    for w in points.windows(2) {
        if w[0].1.is_some() && w[1].1.is_some() {
            extra.push((0.5 * (w[0].0 + w[1].0), None));
        }
    }
    points.extend(extra);
    points.sort_by(|x, y| x.0.total_cmp(&y.0));

    let node_log: Vec<f64> = points
        .iter()
        .map(|&(u, e)| if e.is_some() { f64::NAN } else { process.log_z(u) })
        .collect();
    let h = cfg.u_step;
    let p = process.sing.p;
    let mut pieces = Vec::with_capacity(points.len());
    for k in 0..points.len() - 1 {
        let ((lo, e_lo), (hi, e_hi)) = (points[k], points[k + 1]);
        if hi <= lo {
            continue;
        }
        // nearest event to the piece, if within one step of it
        let mid = 0.5 * (lo + hi);
        let near = match (e_lo, e_hi) {
            (Some(j), _) | (_, Some(j)) => Some(j),
            _ => {
                let pos = ev.partition_point(|&z| z < mid);
                [pos.checked_sub(1), Some(pos)]
                    .into_iter()
                    .flatten()
                    .filter(|&j| j < ev.len())
                    .min_by(|&x, &y| (ev[x] - mid).abs().total_cmp(&(ev[y] - mid).abs()))
                    .filter(|&j| ev[j] > lo - h && ev[j] < hi + h)
            }
        };
        let piece = match near {
            None => Piece {
                lo,
                hi,
                f_lo: node_log[k],
                f_hi: node_log[k + 1],
                weight: None,
            },
            Some(j) => {
                let z = ev[j];
                let count = process.path.signed_count(mid);
                let strip = |u: f64, is_event: bool, log: f64| {
                    if is_event {
                        process.log_z_without(u, j, count)
                    } else {
                        log - p * (u - z).abs().ln()
                    }
                };
                Piece {
                    lo,
                    hi,
                    f_lo: strip(lo, e_lo == Some(j), node_log[k]),
                    f_hi: strip(hi, e_hi == Some(j), node_log[k + 1]),
                    weight: Some(z),
                }
            }
        };
        pieces.push(piece);
    }
    let shift = pieces
        .iter()
        .flat_map(|pc| [pc.f_lo, pc.f_hi])
        .filter(|v| !v.is_nan())
        .fold(f64::NEG_INFINITY, f64::max);
    let mut mass = 0.0;
    let mut moment = 0.0;
    for pc in &pieces {
        let g_lo = (pc.f_lo - shift).exp();
        let g_hi = (pc.f_hi - shift).exp();
        let width = pc.hi - pc.lo;
        match pc.weight {
            None => {
                mass += 0.5 * width * (g_lo + g_hi);
                moment += 0.5 * width * (pc.lo * g_lo + pc.hi * g_hi);
            }
            Some(z) => {
                let (m0, m1) = power_moments(pc.lo, pc.hi, z, p);
                let c_hi = m1 / width;
                let c_lo = m0 - c_hi;
                mass += c_lo * g_lo + c_hi * g_hi;
                moment += c_lo * pc.lo * g_lo + c_hi * pc.hi * g_hi;
            }
        }
    }
    (mass, moment)
}

/// `ζ = ∫ u Z(u) du / ∫ Z(u) du` over `[−V, V]` for one path.
pub fn zeta_of_path(path: &LimitPath, sing: &PowerSingularity, cfg: &LimitConfig) -> f64 {
    let process = LimitProcess::new(path, sing);
    let (mass, moment) = zeta_integrals(&process, cfg);
    moment / mass
}

const XI_CANDIDATES: usize = 4;

/// `ξ = argmax Z` over `[−V, V]` for one path (`p > 0`). Exact ties go to
/// the smallest `u`.
pub fn xi_of_path(path: &LimitPath, sing: &PowerSingularity, cfg: &LimitConfig) -> Result<f64, LimitError> {
    if sing.p < 0.0 {
        return Err(LimitError::XiUndefinedForNegativeP(sing.p));
    }
    let process = LimitProcess::new(path, sing);
    let grid = ZGrid::evaluate(path, sing, cfg);
    let values = &grid.log_z;
    let last = values.len() - 1;
    let mut candidates: Vec<usize> = (0..=last)
        .filter(|&k| {
            let v = values[k];
            v > f64::NEG_INFINITY && (k == 0 || values[k - 1] <= v) && (k == last || values[k + 1] <= v)
        })
        .collect();
    candidates.sort_by(|&x, &y| values[y].total_cmp(&values[x]).then(x.cmp(&y)));
    candidates.truncate(XI_CANDIDATES);
    let guard = 1e-12 * path.z_window;
    let ev = &path.y_events;
    let mut best = (f64::NAN, f64::NEG_INFINITY);
    let mut offer = |x: f64, v: f64| {
        if v > best.1 || (v == best.1 && x < best.0) {
            best = (x, v);
        }
    };
    for &k in &candidates {
        offer(grid.us[k], values[k]);
        let lo = grid.us[k.saturating_sub(1)];
        let hi = grid.us[(k + 1).min(last)];
        let start = ev.partition_point(|&z| z <= lo - guard);
        let mut left = lo;
        let mut gaps = Vec::new();
        for &z in ev[start..].iter().take_while(|&&z| z < hi + guard) {
            if z - guard > left {
                gaps.push((left, (z - guard).min(hi)));
            }
            left = left.max(z + guard);
        }
        if hi > left {
            gaps.push((left, hi));
        }
        for (g_lo, g_hi) in gaps {
            let m = golden_section_max(|u| process.log_z(u), g_lo, g_hi, 1e-12 * cfg.u_window, 300);
            offer(m.x, m.value);
        }
    }
    Ok(best.0)
}

/// Monte Carlo draws of `ζ` and, for `p > 0`, `ξ`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LimitDraws {
    pub zetas: Vec<f64>,
    /// Empty when `p < 0`.
    pub xis: Vec<f64>,
    pub config: LimitConfig,
    pub seed: u64,
    pub a: f64,
    pub b: f64,
    pub p: f64,
}

/// `M` independent replicates; replicate `r` uses stream `(seed, r)`.
pub fn draw_zeta_xi(
    sing: &PowerSingularity,
    cfg: &LimitConfig,
    replicates: usize,
    seed: u64,
) -> Result<LimitDraws, LimitError> {
    cfg.validate()?;
    let with_xi = sing.p > 0.0;
    let expected_events = (sing.a + sing.b) * cfg.z_window.powf(sing.p + 1.0) / (sing.p + 1.0);
    let nodes = 2.0 * cfg.u_window / cfg.u_step;
    let work = (expected_events * nodes) as usize;
    let pairs = exec::map_indexed_weighted(replicates, work.max(1), |r| {
        let mut rng = RngStream::new(seed, r as u64).rng();
        let path = sample_limit_path(sing, cfg.z_window, cfg.tail, &mut rng);
        let zeta = zeta_of_path(&path, sing, cfg);
        let xi = if with_xi { xi_of_path(&path, sing, cfg).ok() } else { None };
        (zeta, xi)
    });
    Ok(LimitDraws {
        zetas: pairs.iter().map(|x| x.0).collect(),
        xis: pairs.iter().filter_map(|x| x.1).collect(),
        config: *cfg,
        seed,
        a: sing.a,
        b: sing.b,
        p: sing.p,
    })
}

impl LimitDraws {
    /// Header comment with the parameters, then `replicate,zeta,xi` rows;
    /// `xi` is blank when `p < 0`.
    pub fn to_csv(&self) -> String {
        let c = &self.config;
        let mut out = format!(
            "# a={:e} b={:e} p={:e} U={:e} V={:e} u_step={:e} tail={} seed={}\nreplicate,zeta,xi\n",
            self.a,
            self.b,
            self.p,
            c.z_window,
            c.u_window,
            c.u_step,
            c.tail.name(),
            self.seed
        );
        for (r, zeta) in self.zetas.iter().enumerate() {
            let xi = self.xis.get(r).map(|x| format!("{x:.16e}")).unwrap_or_default();
            let _ = writeln!(out, "{r},{zeta:.16e},{xi}");
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self, LimitError> {
        let bad = |m: &str| LimitError::Format(m.to_string());
        let mut lines = text.lines();
        let header = lines
            .next()
            .and_then(|l| l.strip_prefix('#'))
            .ok_or_else(|| bad("missing header comment"))?;
        let mut kv = KeyValues::new();
        for field in header.split_whitespace() {
            let (k, v) = field.split_once('=').ok_or_else(|| bad("bad header field"))?;
            kv.insert(k, v);
        }
        let config = LimitConfig {
            z_window: kv.required("U")?,
            u_window: kv.required("V")?,
            u_step: kv.required("u_step")?,
            quad_tol: LimitConfig::default().quad_tol,
            tail: kv.or("tail", TailCorrection::default())?,
        };
        if lines.next().map(str::trim) != Some("replicate,zeta,xi") {
            return Err(bad("missing column header"));
        }
        let mut zetas = Vec::new();
        let mut xis = Vec::new();
        for line in lines.filter(|l| !l.trim().is_empty()) {
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 3 || cols[0].parse::<usize>() != Ok(zetas.len()) {
                return Err(bad("bad row"));
            }
            zetas.push(cols[1].parse().map_err(|_| bad("bad zeta"))?);
            if !cols[2].is_empty() {
                xis.push(cols[2].parse().map_err(|_| bad("bad xi"))?);
            }
        }
        Ok(Self {
            zetas,
            xis,
            config,
            seed: kv.required("seed")?,
            a: kv.required("a")?,
            b: kv.required("b")?,
            p: kv.required("p")?,
        })
    }
}

/// The limiting log-characteristic function `𝓛(λ)` of `ln Z(u)`.
///
/// With `w(z) = p ln|1 − u/z| + ln(d(z − u)/d(z))` the two integrals
/// combine into `∫ [e^{iλw} − 1 − iλ(e^w − 1)] d(z)|z|^p dz`. It is
/// integrated on `[−R, R]`, `R = max(10⁴, 10⁴|u|)`, and the tail uses the
/// first two terms of the expansion in `u/z`.
pub fn limit_cf(lambda: f64, u: f64, sing: &PowerSingularity, quad_tol: f64) -> Complex64 {
    if lambda == 0.0 || u == 0.0 {
        return Complex64::new(0.0, 0.0);
    }
    let PowerSingularity { a, b, p } = *sing;
    let ln_ratio = (a / b).ln();
    // `from_u` is `z − u`, passed separately so it stays exact next to `u`
    let integrand = move |z: f64, from_u: f64| -> Complex64 {
        if z == 0.0 || from_u == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        let d = sing.amplitude(z);
        let between = (u > 0.0 && z > 0.0 && z < u) || (u < 0.0 && z < 0.0 && z > u);
        let ln_r = if between { ln_ratio * u.signum() } else { 0.0 };
        let weight = d * z.abs().powf(p);
        if z.abs() > 2.0 * u.abs() {
            // far field: keep the cancellations explicit
            let w = p * (-u / z).ln_1p();
            let lw = lambda * w;
            let c_half = (0.5 * lw).sin();
            let re = -2.0 * c_half * c_half;
            let im = lw.sin() - lambda * w.exp_m1();
            Complex64::new(re, im) * weight
        } else {
            // near field: e^w d|z|^p = d(z − u)|z − u|^p stays finite
            let w = p * (from_u.abs().ln() - z.abs().ln()) + ln_r;
            let lw = lambda * w;
            let c_half = (0.5 * lw).sin();
            let shifted = sing.amplitude(from_u) * from_u.abs().powf(p);
            let re = -2.0 * c_half * c_half * weight;
            let im = lw.sin() * weight - lambda * (shifted - weight);
            Complex64::new(re, im)
        }
    };
    let r = 1e4f64.max(1e4 * u.abs());
    let mut points = vec![-r, r, 0.0, u];
    let mut s = u.abs() * 2.0;
    while s < r {
        points.push(s);
        points.push(-s);
        s *= 4.0;
    }
    points.sort_by(f64::total_cmp);
    points.dedup();
    // Piece k is mapped onto [k, k + 1] by z = lo + (hi − lo)(3t² − 2t³),
    // which turns the integrable power singularities at 0 and u into
    // bounded integrands.
    let pieces: Vec<(f64, f64)> = points.windows(2).map(|w| (w[0], w[1])).collect();
    let mapped = |tau: f64| -> Complex64 {
        let k = (tau.floor() as usize).min(pieces.len() - 1);
        let (lo, hi) = pieces[k];
        let t = tau - k as f64;
        let width = hi - lo;
        let from_lo = width * t * t * (3.0 - 2.0 * t);
        let to_hi = width * (1.0 - t) * (1.0 - t) * (1.0 + 2.0 * t);
        let (z, from_u) = if t < 0.5 {
            (lo + from_lo, if lo == u { from_lo } else { lo + from_lo - u })
        } else {
            (hi - to_hi, if hi == u { -to_hi } else { hi - to_hi - u })
        };
        integrand(z, from_u) * (6.0 * width * t * (1.0 - t))
    };
    let nodes: Vec<f64> = (0..=pieces.len()).map(|k| k as f64).collect();
    let tol = Tolerance::relative(quad_tol).with_abs(1e-15);
    let re = integrate(|tau| mapped(tau).re, &nodes, tol).value;
    let im = integrate(|tau| mapped(tau).im, &nodes, tol).value;
    // with x = u/z the integrand is d|z|^p·(c₂x² + c₃x³ + O(x⁴)) beyond R
    let c2 = Complex64::new(-0.5 * lambda * lambda, -0.5 * lambda) * (p * p);
    let c3 = Complex64::new(
        -0.5 * lambda * lambda * p * p,
        lambda * p * p * (p - 3.0) / 6.0 + lambda.powi(3) * p.powi(3) / 6.0,
    );
    let moment = |k: i32| {
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        u.powi(k) * (b + sign * a) * r.powf(p + 1.0 - k as f64) / (k as f64 - p - 1.0)
    };
    let tail = c2 * moment(2) + c3 * moment(3);
    Complex64::new(re, im) + tail
}
