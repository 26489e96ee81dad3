//! Exact simulation of the inhomogeneous Poisson process on `[0, T]`.
//!
//! Conditionally on the count `N ~ Poisson(Λ(T))`, the events are i.i.d.
//! with density `S/Λ(T)`, so each one is `Λ⁻¹(U·Λ(T))` for a uniform `U`.
//! This works for unbounded (`p < 0`) intensities where thinning would not.

use std::fmt::Write as _;

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use thiserror::Error;

use crate::exec;
use crate::model::IntensityModel;
use crate::rng::{open_unit, RngStream};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SampleError {
    #[error("event times must be strictly increasing and inside (0, {t_end})")]
    InvalidPath { t_end: f64 },
    #[error("batch size must be at least 1")]
    EmptyBatch,
    #[error("malformed batch file: {0}")]
    Format(String),
    #[error("batch was generated for model {found}, expected {expected}")]
    FingerprintMismatch { expected: String, found: String },
}

/// One realization: strictly increasing event times in `(0, T)`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EventPath {
    times: Vec<f64>,
}

impl EventPath {
    pub fn new(times: Vec<f64>, t_end: f64) -> Result<Self, SampleError> {
        let inside = times.iter().all(|&t| t > 0.0 && t < t_end);
        let increasing = times.windows(2).all(|w| w[0] < w[1]);
        if inside && increasing {
            Ok(Self { times })
        } else {
            Err(SampleError::InvalidPath { t_end })
        }
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// The path under `t ↦ T − t`.
    pub fn mirrored(&self, t_end: f64) -> Self {
        Self {
            times: self.times.iter().rev().map(|&t| t_end - t).collect(),
        }
    }
}

/// `n` independent paths drawn from one model.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleBatch {
    pub paths: Vec<EventPath>,
    pub model_fingerprint: String,
    pub seed: u64,
    pub n: usize,
}

impl SampleBatch {
    pub fn from_paths(paths: Vec<EventPath>, model: &IntensityModel, seed: u64) -> Result<Self, SampleError> {
        if paths.is_empty() {
            return Err(SampleError::EmptyBatch);
        }
        Ok(Self {
            n: paths.len(),
            paths,
            model_fingerprint: model.fingerprint(),
            seed,
        })
    }

    /// All event times of all paths, sorted. The likelihood only sees this.
    pub fn pooled_times(&self) -> Vec<f64> {
        let mut all: Vec<f64> = self.paths.iter().flat_map(|p| p.times.iter().copied()).collect();
        all.sort_by(f64::total_cmp);
        all
    }

    pub fn total_events(&self) -> usize {
        self.paths.iter().map(EventPath::len).sum()
    }

    pub fn mirrored(&self, t_end: f64) -> Self {
        Self {
            paths: self.paths.iter().map(|p| p.mirrored(t_end)).collect(),
            model_fingerprint: self.model_fingerprint.clone(),
            seed: self.seed,
            n: self.n,
        }
    }

    /// Header `n=<n> seed=<seed> model=<fingerprint>`, then one line of
    /// comma-separated times per path.
    pub fn to_text(&self) -> String {
        let mut out = format!("n={} seed={} model={}\n", self.n, self.seed, self.model_fingerprint);
        for path in &self.paths {
            let line: Vec<String> = path.times.iter().map(|t| format!("{t:.16e}")).collect();
            let _ = writeln!(out, "{}", line.join(","));
        }
        out
    }

    pub fn from_text(text: &str, model: &IntensityModel) -> Result<Self, SampleError> {
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| SampleError::Format("empty file".into()))?;
        let mut n = None;
        let mut seed = None;
        let mut fingerprint = None;
        for field in header.split_whitespace() {
            let (k, v) = field
                .split_once('=')
                .ok_or_else(|| SampleError::Format(format!("bad header field {field:?}")))?;
            match k {
                "n" => n = v.parse::<usize>().ok(),
                "seed" => seed = v.parse::<u64>().ok(),
                "model" => fingerprint = Some(v.to_string()),
                _ => return Err(SampleError::Format(format!("unknown header field {k:?}"))),
            }
        }
        let (Some(n), Some(seed), Some(found)) = (n, seed, fingerprint) else {
            return Err(SampleError::Format("header needs n, seed and model".into()));
        };
        let expected = model.fingerprint();
        if found != expected {
            return Err(SampleError::FingerprintMismatch { expected, found });
        }
        let mut paths = Vec::with_capacity(n);
        for line in lines.by_ref().take(n) {
            let times = line
                .split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(|s| s.parse::<f64>().map_err(|_| SampleError::Format(format!("bad time {s:?}"))))
                .collect::<Result<Vec<_>, _>>()?;
            paths.push(EventPath::new(times, model.t_end())?);
        }
        if paths.len() != n || lines.any(|l| !l.trim().is_empty()) {
            return Err(SampleError::Format(format!("expected exactly {n} path lines")));
        }
        if n == 0 {
            return Err(SampleError::EmptyBatch);
        }
        Ok(Self {
            paths,
            model_fingerprint: found,
            seed,
            n,
        })
    }
}

/// Draws `N ~ Poisson(mean)`; zero for a nonpositive mean.
pub fn poisson_count<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> usize {
    if mean <= 0.0 {
        return 0;
    }
    let dist = Poisson::new(mean).expect("finite positive Poisson mean");
    dist.sample(rng) as usize
}

/// One realization of the process under `model`.
pub fn sample_path(model: &IntensityModel, stream: RngStream) -> EventPath {
    let family = &model.family;
    let theta = model.theta;
    let total = model.total_mass();
    let mut rng = stream.rng();
    let count = poisson_count(total, &mut rng);
    let draw = |rng: &mut rand_chacha::ChaCha8Rng| family.inverse_cumulative(theta, open_unit(rng) * total);
    let mut times: Vec<f64> = (0..count).map(|_| draw(&mut rng)).collect();
    times.sort_by(f64::total_cmp);
    // Exact ties have probability zero; redraw them if rounding produces one.
    loop {
        let dup = times.windows(2).position(|w| w[0] == w[1]);
        match dup {
            None => break,
            Some(i) => {
                times[i + 1] = draw(&mut rng);
                times.sort_by(f64::total_cmp);
            }
        }
    }
    EventPath { times }
}

/// `n` paths, path `i` drawn from stream `(seed, i)`.
pub fn sample_batch(model: &IntensityModel, n: usize, seed: u64) -> Result<SampleBatch, SampleError> {
    if n == 0 {
        return Err(SampleError::EmptyBatch);
    }
    let expected_events = (model.total_mass() as usize).max(1);
    let paths = exec::map_indexed_weighted(n, 64 * expected_events, |i| {
        sample_path(model, RngStream::new(seed, i as u64))
    });
    SampleBatch::from_paths(paths, model, seed)
}
