//! Synthetic data: covariate processes, Poisson responses and test intensities.
//!
//! Every generator is a pure function of its inputs and an explicit seed.
//! Monte Carlo replicates draw from independent streams obtained with
//! [`replicate_seed`], so a replicate's data does not depend on the order in
//! which replicates are executed.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Random stream used by every generator in the crate.
pub type Stream = ChaCha8Rng;

/// Largest mean for which Poisson draws use the multiplication method.
const MULTIPLICATION_MAX_MEAN: f64 = 30.0;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of replicate `r` under `master`.
pub fn replicate_seed(master: u64, r: u64) -> u64 {
    splitmix64(master ^ splitmix64(r.wrapping_add(0x6A09_E667_F3BC_C909)))
}

pub fn stream(seed: u64) -> Stream {
    Stream::seed_from_u64(seed)
}

/// An intensity function `λ: [0, 1] → [0, ∞)` with optional closed-form norms.
#[derive(Clone)]
pub struct Intensity {
    name: String,
    f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    sup_norm: Option<f64>,
    l2_norm_sq: Option<f64>,
    l1_norm: Option<f64>,
    breakpoints: Vec<f64>,
}

impl fmt::Debug for Intensity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Intensity")
            .field("name", &self.name)
            .field("sup_norm", &self.sup_norm)
            .field("l2_norm_sq", &self.l2_norm_sq)
            .field("l1_norm", &self.l1_norm)
            .field("breakpoints", &self.breakpoints)
            .finish()
    }
}

impl Intensity {
    /// Wraps an arbitrary non-negative function. No norms are declared.
    pub fn from_fn(name: impl Into<String>, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            name: name.into(),
            f: Arc::new(f),
            sup_norm: None,
            l2_norm_sq: None,
            l1_norm: None,
            breakpoints: Vec::new(),
        }
    }

    /// `λ(x) = (5 + 5cos(2πx))·1[0, 1/2](x) + 10x·1(1/2, 1](x)`.
    pub fn piecewise_test() -> Self {
        Self {
            name: "piecewise".into(),
            f: Arc::new(|x: f64| {
                if x <= 0.5 {
                    5.0 + 5.0 * (2.0 * PI * x).cos()
                } else {
                    10.0 * x
                }
            }),
            sup_norm: Some(10.0),
            // 75/4 on the cosine half plus 175/6 on the linear half.
            l2_norm_sq: Some(575.0 / 12.0),
            l1_norm: Some(25.0 / 4.0),
            breakpoints: vec![0.5],
        }
    }

    pub fn constant(c: f64) -> Result<Self> {
        if !c.is_finite() || c < 0.0 {
            return invalid(format!("constant intensity must be finite and >= 0, got {c}"));
        }
        Ok(Self {
            name: format!("const:{c}"),
            f: Arc::new(move |_| c),
            sup_norm: Some(c),
            l2_norm_sq: Some(c * c),
            l1_norm: Some(c),
            breakpoints: Vec::new(),
        })
    }

    /// `λ(x) = level + amplitude·cos(2πx)`, requiring `level ≥ |amplitude|`.
    pub fn cosine(level: f64, amplitude: f64) -> Result<Self> {
        if !(level.is_finite() && amplitude.is_finite()) || level < amplitude.abs() {
            return invalid(format!(
                "cosine intensity needs level >= |amplitude|, got {level} and {amplitude}"
            ));
        }
        Ok(Self {
            name: format!("cosine:{level}:{amplitude}"),
            f: Arc::new(move |x: f64| level + amplitude * (2.0 * PI * x).cos()),
            sup_norm: Some(level + amplitude.abs()),
            l2_norm_sq: Some(level * level + amplitude * amplitude / 2.0),
            l1_norm: Some(level),
            breakpoints: Vec::new(),
        })
    }

    /// Declares interior points where the function jumps.
    pub fn with_breakpoints(mut self, mut points: Vec<f64>) -> Self {
        points.retain(|p| *p > 0.0 && *p < 1.0);
        points.sort_by(f64::total_cmp);
        points.dedup();
        self.breakpoints = points;
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        (self.f)(x)
    }

    pub fn sup_norm(&self) -> Option<f64> {
        self.sup_norm
    }

    pub fn l2_norm_sq(&self) -> Option<f64> {
        self.l2_norm_sq
    }

    pub fn l1_norm(&self) -> Option<f64> {
        self.l1_norm
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CovariateKind {
    IidUniform,
    MixingAr,
}

/// Law of the covariate sequence `X_1, …, X_n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CovariateProcess {
    pub kind: CovariateKind,
    pub ar_coefficient: f64,
    pub noise_sd: f64,
}

impl CovariateProcess {
    pub fn iid() -> Self {
        Self {
            kind: CovariateKind::IidUniform,
            ar_coefficient: 0.5,
            noise_sd: 1.0,
        }
    }

    /// `X_i = frac(0.5·X_{i−1} + ε_i)` with standard Gaussian noise.
    pub fn mixing() -> Self {
        Self {
            kind: CovariateKind::MixingAr,
            ..Self::iid()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.ar_coefficient) {
            return invalid(format!(
                "ar_coefficient must lie in [0, 1), got {}",
                self.ar_coefficient
            ));
        }
        if !(self.noise_sd > 0.0 && self.noise_sd.is_finite()) {
            return invalid(format!("noise_sd must be > 0, got {}", self.noise_sd));
        }
        Ok(())
    }
}

impl Default for CovariateProcess {
    fn default() -> Self {
        Self::iid()
    }
}

/// Paired observations `(x_i, y_i)` with `x_i ∈ [0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    xs: Vec<f64>,
    ys: Vec<u64>,
}

impl Sample {
    pub fn new(xs: Vec<f64>, ys: Vec<u64>) -> Result<Self> {
        if xs.len() != ys.len() {
            return invalid(format!(
                "covariates and counts differ in length ({} vs {})",
                xs.len(),
                ys.len()
            ));
        }
        if xs.is_empty() {
            return invalid("sample is empty");
        }
        if let Some(x) = xs.iter().find(|x| !(0.0..=1.0).contains(*x)) {
            return invalid(format!("covariate {x} outside [0, 1]"));
        }
        Ok(Self { xs, ys })
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    pub fn xs(&self) -> &[f64] {
        &self.xs
    }

    pub fn ys(&self) -> &[u64] {
        &self.ys
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, u64)> + '_ {
        self.xs.iter().copied().zip(self.ys.iter().copied())
    }
}

fn frac(v: f64) -> f64 {
    let r = v - v.floor();
    // -1e-18 floors to -1 and rounds back up to exactly 1.0
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

/// Draws `n` covariates from `spec` on an existing stream.
pub fn gen_covariates_with<R: Rng + ?Sized>(
    spec: &CovariateProcess,
    n: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    spec.validate()?;
    if n == 0 {
        return invalid("number of covariates must be >= 1");
    }
    let xs = match spec.kind {
        CovariateKind::IidUniform => (0..n).map(|_| rng.random::<f64>()).collect(),
        CovariateKind::MixingAr => {
            let mut xs = Vec::with_capacity(n);
            let mut prev = rng.random::<f64>();
            xs.push(prev);
            for _ in 1..n {
                let eps: f64 = rng.sample(StandardNormal);
                prev = frac(spec.ar_coefficient * prev + spec.noise_sd * eps);
                xs.push(prev);
            }
            xs
        }
    };
    Ok(xs)
}

pub fn gen_covariates(spec: &CovariateProcess, n: usize, seed: u64) -> Result<Vec<f64>> {
    gen_covariates_with(spec, n, &mut stream(seed))
}

/// One Poisson(`mean`) draw.
///
/// Means up to 30 use the multiplication method (products of uniforms until
/// they fall below `e^{-mean}`); larger means fall back to `rand_distr`.
pub fn sample_poisson<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> Result<u64> {
    if !mean.is_finite() || mean < 0.0 {
        return invalid(format!("Poisson mean must be finite and >= 0, got {mean}"));
    }
    if mean == 0.0 {
        return Ok(0);
    }
    if mean <= MULTIPLICATION_MAX_MEAN {
        let limit = (-mean).exp();
        let mut k = 0u64;
        let mut p = rng.random::<f64>();
        while p > limit {
            k += 1;
            p *= rng.random::<f64>();
        }
        return Ok(k);
    }
    let dist = Poisson::new(mean).map_err(|e| crate::Error::InvalidArgument(e.to_string()))?;
    Ok(dist.sample(rng) as u64)
}

/// Simulates `n` pairs with covariates from `spec` and `Y_i | X_i ~ Poisson(λ(X_i))`.
pub fn simulate_dataset(
    intensity: &Intensity,
    spec: &CovariateProcess,
    n: usize,
    seed: u64,
) -> Result<Sample> {
    let mut rng = stream(seed);
    let xs = gen_covariates_with(spec, n, &mut rng)?;
    let ys = xs
        .iter()
        .map(|&x| sample_poisson(intensity.eval(x), &mut rng))
        .collect::<Result<Vec<_>>>()?;
    Sample::new(xs, ys)
}
