//! Monte Carlo harness: replicated simulate → select → measure runs, pointwise
//! quantile bands, the ellipsoid rate calculus and empirical rate studies.
//!
//! Replicate `r` of a run draws from the stream seeded by
//! [`replicate_seed`](crate::sampler::replicate_seed)`(master_seed, r)` and
//! aggregation happens in replicate order, so reports are bit-identical for
//! any number of worker threads.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basis::{BasisFamily, Model, ModelCollection};
use crate::error::{invalid, Result};
use crate::estimator::{
    fit_projection, intensity_l1, intensity_l2_sq, l2_error_sq, project, project_position,
    ProjectionEstimate, Quadrature,
};
use crate::sampler::{replicate_seed, simulate_dataset, CovariateProcess, Intensity};
use crate::selection::{select_model, LogBase, PenaltySpec};

/// Serializable name of an intensity function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum IntensityId {
    /// The piecewise cosine/linear test function with a jump at 1/2.
    Piecewise,
    Constant { value: f64 },
    /// `level + amplitude·cos(2πx)`.
    Cosine { level: f64, amplitude: f64 },
}

impl IntensityId {
    pub fn build(&self) -> Result<Intensity> {
        match *self {
            IntensityId::Piecewise => Ok(Intensity::piecewise_test()),
            IntensityId::Constant { value } => Intensity::constant(value),
            IntensityId::Cosine { level, amplitude } => Intensity::cosine(level, amplitude),
        }
    }
}

/// How each replicate picks its model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum Selection {
    /// Penalized contrast over the default collection of the family.
    Penalized { penalty: PenaltySpec },
    /// The model minimizing the risk bound `‖λ − λ_m‖² + D_m(‖λ‖² + ‖λ‖₁)/n`,
    /// computed from the known intensity.
    Oracle,
    /// Always the given model index.
    Fixed { index: u32 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkConfig {
    pub n: usize,
    pub replicates: usize,
    pub design: CovariateProcess,
    pub intensity: IntensityId,
    pub family: BasisFamily,
    pub selection: Selection,
    pub master_seed: u64,
    pub quadrature: Quadrature,
}

impl BenchmarkConfig {
    /// Histogram collection with `κ·D·ξ²·log₂(n)/n`, `ξ² = 100`, on the test intensity.
    pub fn simulation_study(n: usize, kappa: f64, design: CovariateProcess) -> Self {
        Self {
            n,
            replicates: 500,
            design,
            intensity: IntensityId::Piecewise,
            family: BasisFamily::DyadicHistogram,
            selection: Selection::Penalized {
                penalty: PenaltySpec::Practical {
                    xi: 10.0,
                    kappa,
                    log_base: LogBase::Binary,
                },
            },
            master_seed: 20190101,
            quadrature: Quadrature::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return invalid(format!("n must be >= 2, got {}", self.n));
        }
        if self.replicates == 0 {
            return invalid("replicates must be >= 1");
        }
        self.design.validate()?;
        self.intensity.build()?;
        match self.selection {
            Selection::Penalized { penalty } => penalty.validate()?,
            Selection::Fixed { index } => {
                ModelCollection::new(self.family, vec![index], self.n)?;
            }
            Selection::Oracle => {}
        }
        Ok(())
    }
}

/// Outcome of one replicate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateRecord {
    pub r: u64,
    pub seed: u64,
    pub error: f64,
    pub chosen_m: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimensionCount {
    pub m: u32,
    pub dim: usize,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub config: BenchmarkConfig,
    pub mean_error: f64,
    pub sd_error: f64,
    pub chosen_histogram: Vec<DimensionCount>,
    pub records: Vec<ReplicateRecord>,
}

impl BenchmarkReport {
    /// Aggregates records taken in replicate order.
    pub fn from_records(config: BenchmarkConfig, records: Vec<ReplicateRecord>) -> Self {
        let errors: Vec<f64> = records.iter().map(|r| r.error).collect();
        let (mean_error, sd_error) = mean_sd(&errors);
        let mut counts: BTreeMap<u32, usize> = BTreeMap::new();
        for rec in &records {
            *counts.entry(rec.chosen_m).or_default() += 1;
        }
        let chosen_histogram = counts
            .into_iter()
            .map(|(m, count)| DimensionCount {
                m,
                dim: Model::new(config.family, m).map(|x| x.dim()).unwrap_or(0),
                count,
            })
            .collect();
        Self {
            config,
            mean_error,
            sd_error,
            chosen_histogram,
            records,
        }
    }

    /// Standard error of the mean error.
    pub fn standard_error(&self) -> f64 {
        self.sd_error / (self.records.len() as f64).sqrt()
    }

    /// Pretty JSON with a trailing newline.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

/// Mean and sample standard deviation; the deviation of a single value is 0.
pub fn mean_sd(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() == 1 {
        return (mean, 0.0);
    }
    let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
    (mean, (ss / (n - 1.0)).sqrt())
}

/// Everything a replicate needs that does not depend on `r`.
struct Plan<'a> {
    config: &'a BenchmarkConfig,
    intensity: Intensity,
    kind: PlanKind,
}

enum PlanKind {
    Penalized(ModelCollection, PenaltySpec),
    Single(Model),
}

impl<'a> Plan<'a> {
    fn new(config: &'a BenchmarkConfig) -> Result<Self> {
        config.validate()?;
        let intensity = config.intensity.build()?;
        let kind = match config.selection {
            Selection::Penalized { penalty } => PlanKind::Penalized(
                ModelCollection::default_for(config.family, config.n)?,
                penalty,
            ),
            Selection::Fixed { index } => PlanKind::Single(Model::new(config.family, index)?),
            Selection::Oracle => PlanKind::Single(Model::new(
                config.family,
                oracle_index(&intensity, config.family, config.n, &config.quadrature)?,
            )?),
        };
        Ok(Self {
            config,
            intensity,
            kind,
        })
    }

    fn run(&self, r: u64) -> Result<(ReplicateRecord, ProjectionEstimate)> {
        let seed = replicate_seed(self.config.master_seed, r);
        let sample = simulate_dataset(&self.intensity, &self.config.design, self.config.n, seed)?;
        let estimate = match &self.kind {
            PlanKind::Penalized(collection, penalty) => {
                select_model(&sample, collection, penalty)?.estimate
            }
            PlanKind::Single(model) => fit_projection(&sample, model)?,
        };
        let error = l2_error_sq(&estimate, &self.intensity, &self.config.quadrature);
        let record = ReplicateRecord {
            r,
            seed,
            error,
            chosen_m: estimate.model().index(),
        };
        Ok((record, estimate))
    }
}

/// Index minimizing `‖λ − λ_m‖² + D_m(‖λ‖² + ‖λ‖₁)/n` over the default collection.
///
/// The scan stops once the variance term alone exceeds the best risk found.
pub fn oracle_index(
    truth: &Intensity,
    family: BasisFamily,
    n: usize,
    quad: &Quadrature,
) -> Result<u32> {
    let collection = ModelCollection::default_for(family, n)?;
    let norm_sq = intensity_l2_sq(truth, quad);
    let per_dim = (norm_sq + intensity_l1(truth, quad)) / n as f64;
    let mut best: Option<(f64, u32)> = None;
    let mut captured = 0.0;
    let mut done = 0usize;
    for model in collection.models() {
        let variance = model.dim() as f64 * per_dim;
        if let Some((risk, _)) = best {
            if variance > risk {
                break;
            }
        }
        captured = match family {
            BasisFamily::DyadicHistogram => project(truth, &model, quad).iter().map(|t| t * t).sum(),
            BasisFamily::Trigonometric => {
                let extra: f64 = (done..model.dim())
                    .map(|p| project_position(truth, &model, p, quad).powi(2))
                    .sum();
                done = model.dim();
                captured + extra
            }
        };
        let risk = (norm_sq - captured).max(0.0) + variance;
        if best.is_none_or(|(b, _)| risk < b) {
            best = Some((risk, model.index()));
        }
    }
    Ok(best.expect("default collection is non-empty").1)
}

/// Runs replicate `r` of `config`.
pub fn run_replicate(config: &BenchmarkConfig, r: u64) -> Result<ReplicateRecord> {
    Ok(Plan::new(config)?.run(r)?.0)
}

/// Worker count from the machine.
pub fn default_threads() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn with_pool<T: Send>(threads: usize, job: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| crate::Error::InvalidArgument(format!("thread pool: {e}")))?;
    Ok(pool.install(job))
}

pub fn run_benchmark(config: &BenchmarkConfig) -> Result<BenchmarkReport> {
    run_benchmark_with_threads(config, default_threads())
}

pub fn run_benchmark_with_threads(config: &BenchmarkConfig, threads: usize) -> Result<BenchmarkReport> {
    let plan = Plan::new(config)?;
    let records = with_pool(threads, || {
        (0..config.replicates as u64)
            .into_par_iter()
            .map(|r| plan.run(r).map(|(rec, _)| rec))
            .collect::<Result<Vec<_>>>()
    })??;
    Ok(BenchmarkReport::from_records(config.clone(), records))
}

/// Probability levels of [`QuantileBand`] rows.
pub const BAND_LEVELS: [f64; 5] = [0.01, 0.25, 0.50, 0.75, 0.99];

/// Pointwise empirical quantiles of the selected estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantileBand {
    pub xs: Vec<f64>,
    /// `rows[i][k]` is the `BAND_LEVELS[k]` quantile at `xs[i]`.
    pub rows: Vec<[f64; 5]>,
}

impl QuantileBand {
    /// CSV with header `x,q01,q25,q50,q75,q99`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,q01,q25,q50,q75,q99\n");
        for (x, row) in self.xs.iter().zip(&self.rows) {
            out.push_str(&format!(
                "{x},{},{},{},{},{}\n",
                row[0], row[1], row[2], row[3], row[4]
            ));
        }
        out
    }
}

/// Linear-interpolation quantile of sorted data (Hyndman–Fan type 7).
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn quantile_bands(config: &BenchmarkConfig, grid: usize) -> Result<QuantileBand> {
    quantile_bands_with_threads(config, grid, default_threads())
}

pub fn quantile_bands_with_threads(
    config: &BenchmarkConfig,
    grid: usize,
    threads: usize,
) -> Result<QuantileBand> {
    if config.replicates < 2 {
        return invalid("quantile bands need at least 2 replicates");
    }
    if grid < 2 {
        return invalid("grid resolution must be >= 2");
    }
    let plan = Plan::new(config)?;
    let xs: Vec<f64> = (0..grid).map(|i| i as f64 / (grid - 1) as f64).collect();
    let curves = with_pool(threads, || {
        (0..config.replicates as u64)
            .into_par_iter()
            .map(|r| {
                let (_, est) = plan.run(r)?;
                xs.iter().map(|&x| est.evaluate(x)).collect::<Result<Vec<f64>>>()
            })
            .collect::<Result<Vec<_>>>()
    })??;
    let rows = (0..grid)
        .map(|i| {
            let mut column: Vec<f64> = curves.iter().map(|c| c[i]).collect();
            column.sort_by(f64::total_cmp);
            BAND_LEVELS.map(|p| quantile_sorted(&column, p))
        })
        .collect();
    Ok(QuantileBand { xs, rows })
}

/// Ellipsoid weights `γ_k` (with `γ_0 = 1`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EllipsoidWeights {
    /// `γ_k = k^p`.
    Polynomial { p: f64 },
    /// `γ_k = e^{pk}`.
    Exponential { p: f64 },
}

/// Ellipsoid `{Σ θ_j² γ_j² ≤ radius}` of the trigonometric basis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SobolevSpec {
    pub weights: EllipsoidWeights,
    pub radius: f64,
}

impl SobolevSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return invalid("ellipsoid radius must be > 0");
        }
        match self.weights {
            // Σ γ_j⁻² < ∞ needs 2p > 1
            EllipsoidWeights::Polynomial { p } if !(p > 0.5 && p.is_finite()) => {
                invalid(format!("polynomial weights need p > 1/2, got {p}"))
            }
            EllipsoidWeights::Exponential { p } if !(p > 0.0 && p.is_finite()) => {
                invalid(format!("exponential weights need p > 0, got {p}"))
            }
            _ => Ok(()),
        }
    }

    /// `γ_k⁻²`.
    pub fn inverse_weight_sq(&self, k: u64) -> f64 {
        if k == 0 {
            return 1.0;
        }
        match self.weights {
            EllipsoidWeights::Polynomial { p } => (k as f64).powf(-2.0 * p),
            EllipsoidWeights::Exponential { p } => (-2.0 * p * k as f64).exp(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MinimaxRate {
    pub m_opt: u64,
    pub psi: f64,
}

/// `m⋆ = argmin_k max{γ_k⁻², (2k+1)/n}` and `Ψ_n` at `m⋆` (smallest `k` on ties).
pub fn minimax_rate(spec: &SobolevSpec, n: u64) -> Result<MinimaxRate> {
    spec.validate()?;
    if n == 0 {
        return invalid("n must be >= 1");
    }
    let n = n as f64;
    let mut best = MinimaxRate { m_opt: 0, psi: f64::INFINITY };
    for k in 0u64.. {
        let bias = spec.inverse_weight_sq(k);
        let variance = (2 * k + 1) as f64 / n;
        let value = bias.max(variance);
        if value < best.psi {
            best = MinimaxRate { m_opt: k, psi: value };
        }
        // from here on the increasing branch dominates
        if variance >= bias {
            break;
        }
    }
    Ok(best)
}

/// Ordinary least-squares slope of `ys` on `xs`.
pub fn ols_slope(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return invalid("slope needs two equally long series of length >= 2");
    }
    let (mx, _) = mean_sd(xs);
    // centering ys on ys[0] leaves the slope unchanged and keeps a flat series exactly flat
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - ys[0])).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return invalid("abscissae are all equal");
    }
    Ok(sxy / sxx)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateStudy {
    pub config: BenchmarkConfig,
    pub ns: Vec<usize>,
    pub mean_errors: Vec<f64>,
    /// Slope of `ln(mean error)` against `ln(n)`.
    pub slope: f64,
}

impl RateStudy {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("study serializes");
        s.push('\n');
        s
    }
}

/// Runs `base` at each sample size in `ns` and fits the log–log slope.
pub fn rate_study(base: &BenchmarkConfig, ns: &[usize], threads: usize) -> Result<RateStudy> {
    if ns.len() < 3 {
        return invalid("rate study needs at least 3 sample sizes");
    }
    if ns.windows(2).any(|w| w[0] >= w[1]) {
        return invalid("sample sizes must be strictly increasing");
    }
    let mut mean_errors = Vec::with_capacity(ns.len());
    for &n in ns {
        let config = BenchmarkConfig { n, ..base.clone() };
        let report = run_benchmark_with_threads(&config, threads)?;
        if !(report.mean_error > 0.0) {
            return invalid(format!("mean error at n = {n} is not positive"));
        }
        mean_errors.push(report.mean_error);
    }
    let lx: Vec<f64> = ns.iter().map(|&n| (n as f64).ln()).collect();
    let ly: Vec<f64> = mean_errors.iter().map(|e| e.ln()).collect();
    Ok(RateStudy {
        config: base.clone(),
        ns: ns.to_vec(),
        slope: ols_slope(&lx, &ly)?,
        mean_errors,
    })
}
