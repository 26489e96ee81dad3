//! Independent numerical oracles for the integration tests.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use singloc::model::{IntensityFamily, IntensityModel, PowerSingularity, SmoothPart, ThetaInterval};

/// An abscissa together with its exact distances to both ends of the piece,
/// so integrands singular at an end can be evaluated without the roundoff
/// of `x − end`.
pub struct Node {
    pub x: f64,
    lo: f64,
    hi: f64,
    from_lo: f64,
    to_hi: f64,
}

impl Node {
    /// `x − point`, exact when `point` is an end of the piece.
    pub fn minus(&self, point: f64) -> f64 {
        if point == self.lo {
            self.from_lo
        } else if point == self.hi {
            -self.to_hi
        } else {
            self.x - point
        }
    }
}

/// Tanh-sinh (double exponential) quadrature on `[lo, hi]`. Endpoint
/// singularities of integrable power type are handled by the change of
/// variables; interior singularities must be placed at the ends by the
/// caller.
pub fn tanh_sinh_nodes(f: impl Fn(&Node) -> f64, lo: f64, hi: f64) -> f64 {
    use std::f64::consts::FRAC_PI_2;
    let half = 0.5 * (hi - lo);
    let h = 1.0 / 128.0;
    let mut sum = 0.0;
    for k in -(6 * 128)..=(6 * 128) {
        let t = k as f64 * h;
        let s = FRAC_PI_2 * t.sinh();
        let w = FRAC_PI_2 * t.cosh() / s.cosh().powi(2);
        // distance to the nearer end without cancellation
        let gap = 2.0 * half / (1.0 + (2.0 * s.abs()).exp());
        if w == 0.0 || gap == 0.0 {
            continue;
        }
        let node = if s < 0.0 {
            Node { x: lo + gap, lo, hi, from_lo: gap, to_hi: 2.0 * half - gap }
        } else {
            Node { x: hi - gap, lo, hi, from_lo: 2.0 * half - gap, to_hi: gap }
        };
        sum += w * f(&node);
    }
    sum * h * half
}

pub fn tanh_sinh(f: impl Fn(f64) -> f64, lo: f64, hi: f64) -> f64 {
    tanh_sinh_nodes(|n| f(n.x), lo, hi)
}

/// Tanh-sinh over consecutive breakpoints.
pub fn tanh_sinh_pieces(f: impl Fn(f64) -> f64, points: &[f64]) -> f64 {
    tanh_sinh_pieces_nodes(|n| f(n.x), points)
}

pub fn tanh_sinh_pieces_nodes(f: impl Fn(&Node) -> f64, points: &[f64]) -> f64 {
    points
        .windows(2)
        .filter(|w| w[1] > w[0])
        .map(|w| tanh_sinh_nodes(&f, w[0], w[1]))
        .sum()
}

/// Midpoint rule with `n` cells.
pub fn midpoint(f: impl Fn(f64) -> f64, lo: f64, hi: f64, n: usize) -> f64 {
    let h = (hi - lo) / n as f64;
    (0..n).map(|k| f(lo + (k as f64 + 0.5) * h)).sum::<f64>() * h
}

/// `Φ` via the complementary error function, independent of statrs.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Numerical Recipes' Chebyshev fit of erfc, relative error below 1.2e-7.
fn erfc(x: f64) -> f64 {
    let z = x.abs();
    let t = 1.0 / (1.0 + 0.5 * z);
    let r = t * (-z * z - 1.265_512_23
        + t * (1.000_023_68
            + t * (0.374_091_96
                + t * (0.096_784_18
                    + t * (-0.186_288_06
                        + t * (0.278_868_07
                            + t * (-1.135_203_98 + t * (1.488_515_87 + t * (-0.822_152_23 + t * 0.170_872_77)))))))))
        .exp();
    if x >= 0.0 {
        r
    } else {
        2.0 - r
    }
}

/// Mean of a normal(mean, sd) truncated to `(lo, hi)`.
pub fn truncated_normal_mean(mean: f64, sd: f64, lo: f64, hi: f64) -> f64 {
    let (a, b) = ((lo - mean) / sd, (hi - mean) / sd);
    mean + sd * (normal_pdf(a) - normal_pdf(b)) / (normal_cdf(b) - normal_cdf(a))
}

pub fn build(a: f64, b: f64, p: f64, psi: [f64; 4], theta: f64, t_end: f64, alpha: f64, beta: f64) -> Option<IntensityModel> {
    let sing = PowerSingularity::new(a, b, p).ok()?;
    let fam = IntensityFamily::new(sing, SmoothPart::new(psi), t_end, ThetaInterval { alpha, beta }).ok()?;
    fam.at(theta).ok()
}

/// Random valid models, with a cubic part when positivity allows it.
pub fn random_models(count: usize, seed: u64) -> Vec<IntensityModel> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    while out.len() < count {
        let p = if rng.random::<bool>() { rng.random_range(0.1..0.9) } else { -rng.random_range(0.1..0.9) };
        let t_end = rng.random_range(1.0..5.0);
        let alpha = t_end * rng.random_range(0.05..0.3);
        let beta = t_end * rng.random_range(0.7..0.95);
        let theta = rng.random_range(alpha..beta);
        let c0 = if p < 0.0 { rng.random_range(0.0..0.5) } else { 0.0 };
        let psi = [c0, rng.random_range(-0.2..0.2), rng.random_range(-0.1..0.1), rng.random_range(-0.02..0.02)];
        let (a, b) = (rng.random_range(0.5..2.0), rng.random_range(0.5..2.0));
        if let Some(m) = build(a, b, p, psi, theta, t_end, alpha, beta) {
            out.push(m);
        }
    }
    out
}

pub fn quadrature_cumulative(m: &IntensityModel, t: f64) -> f64 {
    let f = |n: &Node| m.family.shape(n.minus(m.theta));
    if t > m.theta {
        tanh_sinh_pieces_nodes(f, &[0.0, m.theta, t])
    } else {
        tanh_sinh_pieces_nodes(f, &[0.0, t])
    }
}

/// `D_U(u)` by quadrature of its defining integral.
pub fn det_oracle(u: f64, z_window: f64, s: &PowerSingularity) -> f64 {
    let mut points = vec![-z_window, 0.0, u, z_window];
    points.sort_by(f64::total_cmp);
    tanh_sinh_pieces_nodes(
        |n| s.amplitude(n.x) * (n.minus(u).abs().powf(s.p) - n.minus(0.0).abs().powf(s.p)),
        &points,
    )
}

/// Random `(u, U, singularity)` cases for the `D_U` check.
pub fn random_det_cases(count: usize, seed: u64) -> Vec<(f64, f64, PowerSingularity)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let p = if rng.random::<bool>() { rng.random_range(0.05..0.95) } else { -rng.random_range(0.05..0.95) };
            let s = PowerSingularity::new(rng.random_range(0.2..3.0), rng.random_range(0.2..3.0), p).unwrap();
            let z_window = rng.random_range(4.0..100.0);
            (rng.random_range(-0.25..0.25) * z_window, z_window, s)
        })
        .collect()
}
