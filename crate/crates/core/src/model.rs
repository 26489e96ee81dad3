//! The singular intensity family `S_θ(t) = s(t − θ)` with
//! `s(x) = d(x)|x|^p + ψ(x)`, where `d` is `a` left of the singularity and
//! `b` right of it, and `ψ` is a cubic polynomial.
//!
//! The family (everything except the shift) is [`IntensityFamily`]; pinning
//! the shift gives an [`IntensityModel`]. Cumulative intensities are exact
//! closed forms, which is what makes sampling and the likelihood's
//! compensator term free of quadrature error.

use std::fmt;

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::config::{ConfigError, KeyValues};
use crate::quad::{self, Tolerance};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("singularity order p = {0} must lie in (-1,0) or (0,1)")]
    InvalidOrder(f64),
    #[error("amplitudes must be positive and finite (a = {a}, b = {b})")]
    InvalidAmplitude { a: f64, b: f64 },
    #[error("intensity s({x}) = {value} is not positive")]
    NonpositiveIntensity { x: f64, value: f64 },
    #[error("smooth part must vanish at the singularity when p > 0 (psi(0) = {0})")]
    SmoothPartNonzeroAtOrigin(f64),
    #[error("parameter interval ({alpha}, {beta}) must lie in (0, {t_end}) and contain theta = {theta}")]
    BadInterval {
        alpha: f64,
        beta: f64,
        theta: f64,
        t_end: f64,
    },
    #[error("{what} = {value} is not finite or out of range")]
    InvalidParameter { what: &'static str, value: f64 },
    #[error("shift {theta} lies outside the parameter interval ({alpha}, {beta})")]
    OutOfInterval { theta: f64, alpha: f64, beta: f64 },
    #[error("quadrature did not reach the requested accuracy (estimate {value}, error {error})")]
    Quadrature { value: f64, error: f64 },
    #[error(transparent)]
    Config(#[from] ConfigError),
}

/// Amplitudes and order of the power-law part `d(x)|x|^p`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerSingularity {
    pub a: f64,
    pub b: f64,
    pub p: f64,
}

impl PowerSingularity {
    pub fn new(a: f64, b: f64, p: f64) -> Result<Self, ModelError> {
        let s = Self { a, b, p };
        s.check()?;
        Ok(s)
    }

    fn check(&self) -> Result<(), ModelError> {
        if !(self.a.is_finite() && self.b.is_finite() && self.a > 0.0 && self.b > 0.0) {
            return Err(ModelError::InvalidAmplitude { a: self.a, b: self.b });
        }
        if !(self.p.is_finite() && self.p > -1.0 && self.p < 1.0 && self.p != 0.0) {
            return Err(ModelError::InvalidOrder(self.p));
        }
        Ok(())
    }

    /// `d(x)`: `a` for `x < 0`, `b` for `x > 0`.
    #[inline]
    pub fn amplitude(&self, x: f64) -> f64 {
        if x < 0.0 {
            self.a
        } else {
            self.b
        }
    }

    /// Rate exponent `1/(p+1)`.
    pub fn rate_exponent(&self) -> f64 {
        1.0 / (self.p + 1.0)
    }

    pub fn is_zero_type(&self) -> bool {
        self.p > 0.0
    }
}

/// Cubic `ψ(x) = c0 + c1 x + c2 x² + c3 x³`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SmoothPart {
    pub coeffs: [f64; 4],
}

impl SmoothPart {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn new(coeffs: [f64; 4]) -> Self {
        Self { coeffs }
    }

    #[inline]
    pub fn value(&self, x: f64) -> f64 {
        let [c0, c1, c2, c3] = self.coeffs;
        c0 + x * (c1 + x * (c2 + x * c3))
    }

    #[inline]
    pub fn antiderivative(&self, x: f64) -> f64 {
        let [c0, c1, c2, c3] = self.coeffs;
        x * (c0 + x * (c1 / 2.0 + x * (c2 / 3.0 + x * c3 / 4.0)))
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|&c| c == 0.0)
    }
}

/// Observation window `[0, T]` and parameter interval `(α, β)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThetaInterval {
    pub alpha: f64,
    pub beta: f64,
}

impl ThetaInterval {
    pub fn contains(&self, theta: f64) -> bool {
        theta > self.alpha && theta < self.beta
    }

    pub fn width(&self) -> f64 {
        self.beta - self.alpha
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.alpha + self.beta)
    }
}

/// The intensity family with the shift left free.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntensityFamily {
    pub singularity: PowerSingularity,
    pub smooth: SmoothPart,
    pub t_end: f64,
    pub interval: ThetaInterval,
}

const VALIDATION_GRID: usize = 10_000;

impl IntensityFamily {
    pub fn new(
        singularity: PowerSingularity,
        smooth: SmoothPart,
        t_end: f64,
        interval: ThetaInterval,
    ) -> Result<Self, ModelError> {
        let family = Self {
            singularity,
            smooth,
            t_end,
            interval,
        };
        family.validate_shape()?;
        Ok(family)
    }

    /// Checks everything that does not involve a particular shift.
    pub fn validate_shape(&self) -> Result<(), ModelError> {
        self.singularity.check()?;
        if !(self.t_end.is_finite() && self.t_end > 0.0) {
            return Err(ModelError::InvalidParameter {
                what: "T",
                value: self.t_end,
            });
        }
        for (i, &c) in self.smooth.coeffs.iter().enumerate() {
            if !c.is_finite() {
                const NAMES: [&str; 4] = ["psi_c0", "psi_c1", "psi_c2", "psi_c3"];
                return Err(ModelError::InvalidParameter { what: NAMES[i], value: c });
            }
        }
        if self.singularity.p > 0.0 && self.smooth.coeffs[0] != 0.0 {
            return Err(ModelError::SmoothPartNonzeroAtOrigin(self.smooth.coeffs[0]));
        }
        let ThetaInterval { alpha, beta } = self.interval;
        if !(alpha.is_finite() && beta.is_finite() && alpha >= 0.0 && beta <= self.t_end && alpha < beta) {
            return Err(ModelError::BadInterval {
                alpha,
                beta,
                theta: f64::NAN,
                t_end: self.t_end,
            });
        }
        self.check_positivity()
    }

    /// Positivity of `s` on `[-T, T] \ {0}`: a uniform grid, then a
    /// geometric sweep toward the origin on both sides where `d(x)|x|^p`
    /// has to dominate `ψ`.
    fn check_positivity(&self) -> Result<(), ModelError> {
        let t = self.t_end;
        let check = |x: f64| -> Result<(), ModelError> {
            if x == 0.0 {
                return Ok(());
            }
            let v = self.shape(x);
            if v > 0.0 {
                Ok(())
            } else {
                Err(ModelError::NonpositiveIntensity { x, value: v })
            }
        };
        for k in 0..=VALIDATION_GRID {
            check(-t + 2.0 * t * k as f64 / VALIDATION_GRID as f64)?;
        }
        let mut r = t;
        for _ in 0..200 {
            r *= 0.5;
            check(r)?;
            check(-r)?;
        }
        Ok(())
    }

    /// `s(x)`. Infinite at `x = 0` when `p < 0`, `ψ(0)` when `p > 0`.
    #[inline]
    pub fn shape(&self, x: f64) -> f64 {
        let PowerSingularity { p, .. } = self.singularity;
        if x == 0.0 {
            return if p < 0.0 { f64::INFINITY } else { self.smooth.value(0.0) };
        }
        self.singularity.amplitude(x) * x.abs().powf(p) + self.smooth.value(x)
    }

    /// `ln s(x)`, with the pure power law handled without `powf`.
    #[inline]
    pub fn ln_shape(&self, x: f64) -> f64 {
        if self.smooth.is_zero() {
            let PowerSingularity { p, .. } = self.singularity;
            if x == 0.0 {
                return if p < 0.0 { f64::INFINITY } else { f64::NEG_INFINITY };
            }
            self.singularity.amplitude(x).ln() + p * x.abs().ln()
        } else {
            self.shape(x).ln()
        }
    }

    /// Antiderivative of `s` vanishing at 0.
    #[inline]
    pub fn shape_antiderivative(&self, x: f64) -> f64 {
        let PowerSingularity { p, .. } = self.singularity;
        let q = p + 1.0;
        let power = if x == 0.0 {
            0.0
        } else {
            x.signum() * self.singularity.amplitude(x) * x.abs().powf(q) / q
        };
        power + self.smooth.antiderivative(x)
    }

    /// `Λ_θ(t) = ∫₀ᵗ s(x − θ) dx`.
    #[inline]
    pub fn cumulative(&self, theta: f64, t: f64) -> f64 {
        self.shape_antiderivative(t - theta) - self.shape_antiderivative(-theta)
    }

    /// `Λ_θ(T)`, the expected event count of one path.
    #[inline]
    pub fn total_mass(&self, theta: f64) -> f64 {
        self.cumulative(theta, self.t_end)
    }

    /// Solves `Λ_θ(t) = v` by bisection to absolute tolerance `1e-12·T`.
    pub fn inverse_cumulative(&self, theta: f64, v: f64) -> f64 {
        let tol = 1e-12 * self.t_end;
        let (mut lo, mut hi) = (0.0, self.t_end);
        while hi - lo > tol {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.cumulative(theta, mid) < v {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// `∫₀ᵀ [√S_{θ₁}(t) − √S_{θ₂}(t)]² dt` by adaptive quadrature.
    ///
    /// The domain is cut midway between the two singular points and each
    /// half is integrated in coordinates centered on its own singularity,
    /// so that the singular end is resolved without cancellation.
    pub fn hellinger_between(&self, theta1: f64, theta2: f64, rel_tol: f64) -> Result<f64, ModelError> {
        if theta1 == theta2 {
            return Ok(0.0);
        }
        let (hi_theta, lo_theta) = if theta1 > theta2 { (theta1, theta2) } else { (theta2, theta1) };
        let d = hi_theta - lo_theta;
        let root = |x: f64| self.shape(x).max(0.0).sqrt();
        // Left half, coordinates x = t − lo_theta, singular at 0.
        let left = |x: f64| {
            let diff = root(x - d) - root(x);
            diff * diff
        };
        let lo_start = -lo_theta;
        let lo_end = 0.5 * d;
        // Right half, coordinates x = t − hi_theta, singular at 0.
        let right = |x: f64| {
            let diff = root(x) - root(x + d);
            diff * diff
        };
        let hi_start = -0.5 * d;
        let hi_end = self.t_end - hi_theta;
        let tol = Tolerance::relative(rel_tol).with_abs(1e-300);
        let left_pts = breakpoints_around_zero(lo_start, lo_end);
        let right_pts = breakpoints_around_zero(hi_start, hi_end);
        let l = quad::integrate(left, &left_pts, tol);
        let r = quad::integrate(right, &right_pts, tol);
        let value = l.value + r.value;
        let error = l.abs_error + r.abs_error;
        // accept up to 100x the requested tolerance before calling it a failure
        if error > 100.0 * rel_tol * value.abs() && error > 1e-280 {
            return Err(ModelError::Quadrature { value, error });
        }
        Ok(value)
    }

    fn check_shift(&self, theta: f64) -> Result<(), ModelError> {
        if self.interval.contains(theta) {
            Ok(())
        } else {
            Err(ModelError::OutOfInterval {
                theta,
                alpha: self.interval.alpha,
                beta: self.interval.beta,
            })
        }
    }

    pub fn at(&self, theta: f64) -> Result<IntensityModel, ModelError> {
        IntensityModel::new(*self, theta)
    }

    pub fn to_key_values(&self) -> KeyValues {
        let mut kv = KeyValues::new();
        let PowerSingularity { a, b, p } = self.singularity;
        kv.insert_f64("a", a);
        kv.insert_f64("b", b);
        kv.insert_f64("p", p);
        kv.insert_f64("T", self.t_end);
        kv.insert_f64("alpha", self.interval.alpha);
        kv.insert_f64("beta", self.interval.beta);
        for (i, c) in self.smooth.coeffs.iter().enumerate() {
            kv.insert_f64(format!("psi_c{i}"), *c);
        }
        kv
    }
}

/// `lo < 0 < hi` gets 0 as an interior breakpoint; otherwise the ends only.
fn breakpoints_around_zero(lo: f64, hi: f64) -> Vec<f64> {
    if lo < 0.0 && hi > 0.0 {
        vec![lo, 0.0, hi]
    } else {
        vec![lo, hi]
    }
}

/// A validated family with its shift fixed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntensityModel {
    pub family: IntensityFamily,
    pub theta: f64,
}

/// Keys of the serialized model block.
pub const MODEL_KEYS: [&str; 11] = [
    "a", "b", "p", "theta", "T", "alpha", "beta", "psi_c0", "psi_c1", "psi_c2", "psi_c3",
];

impl IntensityModel {
    pub fn new(family: IntensityFamily, theta: f64) -> Result<Self, ModelError> {
        let model = Self { family, theta };
        model.validate()?;
        Ok(model)
    }

    /// Convenience constructor with `ψ = 0`.
    pub fn pure_power(a: f64, b: f64, p: f64, theta: f64, t_end: f64, alpha: f64, beta: f64) -> Result<Self, ModelError> {
        let family = IntensityFamily {
            singularity: PowerSingularity { a, b, p },
            smooth: SmoothPart::zero(),
            t_end,
            interval: ThetaInterval { alpha, beta },
        };
        Self::new(family, theta)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if !self.theta.is_finite() {
            return Err(ModelError::InvalidParameter {
                what: "theta",
                value: self.theta,
            });
        }
        self.family.validate_shape().map_err(|e| match e {
            ModelError::BadInterval { alpha, beta, t_end, .. } => ModelError::BadInterval {
                alpha,
                beta,
                theta: self.theta,
                t_end,
            },
            other => other,
        })?;
        if !self.family.interval.contains(self.theta) {
            let ThetaInterval { alpha, beta } = self.family.interval;
            return Err(ModelError::BadInterval {
                alpha,
                beta,
                theta: self.theta,
                t_end: self.family.t_end,
            });
        }
        Ok(())
    }

    pub fn singularity(&self) -> PowerSingularity {
        self.family.singularity
    }

    pub fn t_end(&self) -> f64 {
        self.family.t_end
    }

    /// `S_θ(t)`.
    pub fn intensity_at(&self, t: f64) -> f64 {
        self.family.shape(t - self.theta)
    }

    /// `Λ(t) = ∫₀ᵗ S_θ(x) dx` in closed form.
    pub fn cumulative_intensity(&self, t: f64) -> f64 {
        self.family.cumulative(self.theta, t)
    }

    pub fn total_mass(&self) -> f64 {
        self.family.total_mass(self.theta)
    }

    /// `F(u) = ∫₀ᵀ [√S_{θ+u} − √S_θ]² dt`, relative accuracy `1e-8`.
    #[allow(non_snake_case)]
    pub fn hellinger_F(&self, u: f64) -> Result<f64, ModelError> {
        let shifted = self.theta + u;
        self.family.check_shift(shifted)?;
        self.family.hellinger_between(shifted, self.theta, 1e-10)
    }

    pub fn to_key_values(&self) -> KeyValues {
        let mut kv = self.family.to_key_values();
        kv.insert_f64("theta", self.theta);
        kv
    }

    pub fn to_text(&self) -> String {
        self.to_key_values().to_text()
    }

    pub fn from_key_values(kv: &KeyValues) -> Result<Self, ModelError> {
        kv.reject_unknown(&MODEL_KEYS)?;
        let family = IntensityFamily {
            singularity: PowerSingularity {
                a: kv.required("a")?,
                b: kv.required("b")?,
                p: kv.required("p")?,
            },
            smooth: SmoothPart::new([
                kv.or("psi_c0", 0.0)?,
                kv.or("psi_c1", 0.0)?,
                kv.or("psi_c2", 0.0)?,
                kv.or("psi_c3", 0.0)?,
            ]),
            t_end: kv.required("T")?,
            interval: ThetaInterval {
                alpha: kv.required("alpha")?,
                beta: kv.required("beta")?,
            },
        };
        Self::new(family, kv.required("theta")?)
    }

    pub fn from_text(text: &str) -> Result<Self, ModelError> {
        Self::from_key_values(&KeyValues::parse(text)?)
    }

    /// First 16 hex digits of the SHA-256 of the serialized block.
    pub fn fingerprint(&self) -> String {
        let digest = Sha256::digest(self.to_text().as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}

impl fmt::Display for IntensityModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let PowerSingularity { a, b, p } = self.family.singularity;
        write!(
            f,
            "a={a} b={b} p={p} theta={} T={} Theta=({}, {})",
            self.theta, self.family.t_end, self.family.interval.alpha, self.family.interval.beta
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> IntensityModel {
        IntensityModel::pure_power(1.0, 1.0, 0.5, 1.0, 2.0, 0.5, 1.5).unwrap()
    }

    fn with_psi(a: f64, b: f64, p: f64, coeffs: [f64; 4]) -> Result<IntensityModel, ModelError> {
        let family = IntensityFamily {
            singularity: PowerSingularity { a, b, p },
            smooth: SmoothPart::new(coeffs),
            t_end: 2.0,
            interval: ThetaInterval { alpha: 0.5, beta: 1.5 },
        };
        IntensityModel::new(family, 1.0)
    }

    #[test]
    fn validation_examples() {
        assert!(base().validate().is_ok());
        assert_eq!(
            with_psi(1.0, 1.0, 0.5, [0.3, 0.0, 1.0, 0.0]).unwrap_err(),
            ModelError::SmoothPartNonzeroAtOrigin(0.3)
        );
        assert!(matches!(
            with_psi(0.5, 0.5, -0.5, [-1.0, 0.0, 0.0, 0.0]),
            Err(ModelError::NonpositiveIntensity { .. })
        ));
    }

    #[test]
    fn validation_errors() {
        assert!(matches!(
            IntensityModel::pure_power(1.0, 1.0, 0.0, 1.0, 2.0, 0.5, 1.5),
            Err(ModelError::InvalidOrder(_))
        ));
        assert!(matches!(
            IntensityModel::pure_power(1.0, 1.0, 1.2, 1.0, 2.0, 0.5, 1.5),
            Err(ModelError::InvalidOrder(_))
        ));
        assert!(matches!(
            IntensityModel::pure_power(1.0, 1.0, 0.5, 1.0, 2.0, 0.5, 2.5),
            Err(ModelError::BadInterval { .. })
        ));
        assert!(matches!(
            IntensityModel::pure_power(1.0, 1.0, 0.5, 1.6, 2.0, 0.5, 1.5),
            Err(ModelError::BadInterval { .. })
        ));
        assert!(matches!(
            IntensityModel::pure_power(-1.0, 1.0, 0.5, 1.0, 2.0, 0.5, 1.5),
            Err(ModelError::InvalidAmplitude { .. })
        ));
    }

    #[test]
    fn negative_psi_dominated_near_zero_is_fine_for_infinite_type() {
        // s(x) = |x|^-0.5 - 0.2 stays positive on [-2, 2]
        assert!(with_psi(1.0, 1.0, -0.5, [-0.2, 0.0, 0.0, 0.0]).is_ok());
    }

    #[test]
    fn intensity_examples() {
        assert!((base().intensity_at(1.25) - 0.5).abs() < 1e-15);
        assert_eq!(base().intensity_at(1.0), 0.0);
        let m = IntensityModel::pure_power(1.0, 2.0, -0.5, 1.0, 2.0, 0.5, 1.5).unwrap();
        assert_eq!(m.intensity_at(1.0), f64::INFINITY);
        let m = with_psi(1.0, 2.0, -0.5, [0.0, 0.0, 1.0, 0.0]).unwrap();
        assert!((m.intensity_at(0.75) - 2.0625).abs() < 1e-14);
    }

    #[test]
    fn cumulative_examples() {
        let m = base();
        assert!((m.cumulative_intensity(2.0) - 4.0 / 3.0).abs() < 1e-14);
        assert_eq!(m.cumulative_intensity(0.0), 0.0);
        assert!((m.cumulative_intensity(1.0) - 2.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn inverse_cumulative_recovers_time() {
        let m = with_psi(1.0, 2.0, -0.5, [0.1, 0.2, 1.0, -0.1]).unwrap();
        for &t in &[1e-6, 0.3, 0.999_999, 1.0, 1.000_001, 1.7, 2.0 - 1e-9] {
            let v = m.cumulative_intensity(t);
            let back = m.family.inverse_cumulative(m.theta, v);
            assert!((back - t).abs() < 3e-12, "{t} -> {back}");
        }
    }

    #[test]
    fn hellinger_zero_and_out_of_interval() {
        let m = base();
        assert_eq!(m.hellinger_F(0.0).unwrap(), 0.0);
        assert!(matches!(m.hellinger_F(0.6), Err(ModelError::OutOfInterval { .. })));
    }

    #[test]
    fn hellinger_symmetry() {
        for p in [-0.5, 0.5] {
            let c0 = if p < 0.0 { 0.3 } else { 0.0 };
            let m = with_psi(1.3, 1.3, p, [c0, 0.0, 0.7, 0.0]).unwrap();
            for u in [0.01, 0.1, 0.3] {
                let f1 = m.hellinger_F(u).unwrap();
                let f2 = m.hellinger_F(-u).unwrap();
                assert!((f1 - f2).abs() <= 1e-8 * f1, "p={p} u={u}: {f1} vs {f2}");
            }
        }
    }

    #[test]
    fn serialization_round_trip_and_fingerprint() {
        let m = with_psi(1.0 / 3.0, 2.0, -0.5, [0.1, 0.2, 1.0 / 7.0, -0.1]).unwrap();
        let back = IntensityModel::from_text(&m.to_text()).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.fingerprint(), m.fingerprint());
        assert_eq!(m.fingerprint().len(), 16);
        assert_ne!(base().fingerprint(), m.fingerprint());
    }

    #[test]
    fn unknown_key_rejected() {
        let text = format!("{}extra = 1\n", base().to_text());
        assert!(matches!(
            IntensityModel::from_text(&text),
            Err(ModelError::Config(ConfigError::Unknown(_)))
        ));
    }
}
