//! Projection estimators `λ̂_m = Σ θ̂_η φ_η` and the quantities built on them.

use serde::{Deserialize, Serialize};

use crate::basis::{BasisFamily, Model, ModelCollection};
use crate::error::{invalid, Result};
use crate::sampler::{Intensity, Sample};

/// Empirical coefficients `θ̂_η = n⁻¹ Σ_i Y_i φ_η(X_i)` over a model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectionEstimate {
    model: Model,
    coefficients: Vec<f64>,
    n: usize,
}

impl ProjectionEstimate {
    /// Builds an estimate from explicit coefficients in storage order.
    pub fn from_coefficients(model: Model, coefficients: Vec<f64>, n: usize) -> Result<Self> {
        if coefficients.len() != model.dim() {
            return invalid(format!(
                "expected {} coefficients, got {}",
                model.dim(),
                coefficients.len()
            ));
        }
        Ok(Self {
            model,
            coefficients,
            n,
        })
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// `‖λ̂_m‖² = Σ θ̂_η²`.
    pub fn norm_sq(&self) -> f64 {
        self.coefficients.iter().map(|c| c * c).sum()
    }

    pub fn evaluate(&self, x: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&x) {
            return invalid(format!("x = {x} outside [0, 1]"));
        }
        Ok(self.eval_unchecked(x))
    }

    #[inline]
    pub(crate) fn eval_unchecked(&self, x: f64) -> f64 {
        match self.model.family() {
            BasisFamily::DyadicHistogram => {
                let d = self.model.dim();
                self.coefficients[self.model.cell(x)] * (d as f64).sqrt()
            }
            BasisFamily::Trigonometric => self
                .coefficients
                .iter()
                .enumerate()
                .map(|(p, c)| c * self.model.eval_position(p, x))
                .sum(),
        }
    }
}

/// Fits the projection estimator of `model` to `sample`.
pub fn fit_projection(sample: &Sample, model: &Model) -> Result<ProjectionEstimate> {
    if sample.is_empty() {
        return invalid("cannot fit an empty sample");
    }
    let n = sample.len();
    let d = model.dim();
    let mut sums = vec![0.0; d];
    match model.family() {
        BasisFamily::DyadicHistogram => {
            for (x, y) in sample.iter() {
                sums[model.cell(x)] += y as f64;
            }
            let height = (d as f64).sqrt();
            sums.iter_mut().for_each(|s| *s *= height);
        }
        BasisFamily::Trigonometric => {
            let mut phi = vec![0.0; d];
            for (x, y) in sample.iter().filter(|&(_, y)| y > 0) {
                model.eval_all(x, &mut phi);
                let y = y as f64;
                sums.iter_mut().zip(&phi).for_each(|(s, p)| *s += y * p);
            }
        }
    }
    let coefficients = sums.into_iter().map(|s| s / n as f64).collect();
    ProjectionEstimate::from_coefficients(*model, coefficients, n)
}

/// Fits every model of a collection, in collection order.
///
/// Trigonometric coefficients do not depend on the model, so the maximal
/// model is fitted once and smaller models take prefixes of it.
pub fn fit_collection(
    sample: &Sample,
    collection: &ModelCollection,
) -> Result<Vec<ProjectionEstimate>> {
    let Some(max) = collection.maximal() else {
        return invalid("model collection is empty");
    };
    match collection.family() {
        BasisFamily::Trigonometric => {
            let full = fit_projection(sample, &max)?;
            collection
                .models()
                .map(|m| {
                    ProjectionEstimate::from_coefficients(
                        m,
                        full.coefficients[..m.dim()].to_vec(),
                        full.n,
                    )
                })
                .collect()
        }
        BasisFamily::DyadicHistogram => collection
            .models()
            .map(|m| fit_projection(sample, &m))
            .collect(),
    }
}

/// `Υ_n(λ̂_m) = ‖λ̂_m‖² − 2⟨λ̂_n, λ̂_m⟩`, where `λ̂_n` is the estimate on the
/// maximal model.
pub fn contrast(estimate: &ProjectionEstimate, max_estimate: &ProjectionEstimate) -> Result<f64> {
    if !estimate.model.is_nested_in(&max_estimate.model) {
        return invalid(format!(
            "model {:?} is not nested in {:?}",
            estimate.model, max_estimate.model
        ));
    }
    if estimate.n != max_estimate.n {
        return invalid("estimates were fitted on samples of different size");
    }
    let embedded = estimate
        .model
        .embed(&estimate.coefficients, &max_estimate.model)?;
    let cross: f64 = embedded
        .iter()
        .zip(&max_estimate.coefficients)
        .map(|(a, b)| a * b)
        .sum();
    Ok(estimate.norm_sq() - 2.0 * cross)
}

/// Composite Simpson rule on `[0, 1]`, split at breakpoints.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Quadrature {
    panels: usize,
}

impl Default for Quadrature {
    fn default() -> Self {
        Self { panels: 4096 }
    }
}

impl Quadrature {
    pub fn simpson(panels: usize) -> Result<Self> {
        if panels < 2 || panels % 2 != 0 {
            return invalid(format!("panel count must be even and >= 2, got {panels}"));
        }
        Ok(Self { panels })
    }

    pub fn panels(&self) -> usize {
        self.panels
    }

    /// `∫_a^b f` with `panels` subintervals. Endpoints are sampled one ulp
    /// inside the interval so one-sided limits are used at jumps.
    pub fn integrate_interval(&self, f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
        let h = (b - a) / panels as f64;
        let mut acc = f(a.next_up()) + f(b.next_down());
        for i in 1..panels {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            acc += w * f(a + i as f64 * h);
        }
        acc * h / 3.0
    }

    /// `∫₀¹ f`, integrating separately between consecutive `breakpoints`.
    pub fn integrate(&self, f: impl Fn(f64) -> f64, breakpoints: &[f64]) -> f64 {
        self.integrate_on(f, 0.0, 1.0, breakpoints)
    }

    /// `∫_a^b f` over `[a, b] ⊆ [0, 1]`, split at the breakpoints inside it.
    ///
    /// Each segment gets a share of the panel budget proportional to its
    /// length, rounded up to an even count of at least 2.
    pub fn integrate_on(&self, f: impl Fn(f64) -> f64, a: f64, b: f64, breakpoints: &[f64]) -> f64 {
        let mut edges: Vec<f64> = breakpoints
            .iter()
            .copied()
            .filter(|p| *p > a && *p < b)
            .collect();
        edges.push(a);
        edges.push(b);
        edges.sort_by(f64::total_cmp);
        edges.dedup();
        edges
            .windows(2)
            .map(|w| {
                let share = (self.panels as f64 * (w[1] - w[0])).ceil() as usize;
                let panels = (share + share % 2).max(2);
                self.integrate_interval(&f, w[0], w[1], panels)
            })
            .sum()
    }
}

fn merged_breakpoints(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut v: Vec<f64> = a.iter().chain(b).copied().collect();
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

/// `∫₀¹ (λ̂(x) − λ(x))² dx`.
pub fn l2_error_sq(estimate: &ProjectionEstimate, truth: &Intensity, quad: &Quadrature) -> f64 {
    let breaks = merged_breakpoints(truth.breakpoints(), &estimate.model.breakpoints());
    let err = quad.integrate(
        |x| {
            let d = estimate.eval_unchecked(x) - truth.eval(x);
            d * d
        },
        &breaks,
    );
    err.max(0.0)
}

/// `‖λ̂‖_∞`: exact for histograms, a uniform grid of `grid` points otherwise.
pub fn sup_norm(estimate: &ProjectionEstimate, grid: usize) -> Result<f64> {
    if grid < 2 {
        return invalid("grid resolution must be >= 2");
    }
    let value = match estimate.model.family() {
        BasisFamily::DyadicHistogram => {
            let height = (estimate.model.dim() as f64).sqrt();
            estimate
                .coefficients
                .iter()
                .fold(0.0f64, |m, c| m.max(c.abs() * height))
        }
        BasisFamily::Trigonometric => (0..grid)
            .map(|i| estimate.eval_unchecked(i as f64 / (grid - 1) as f64).abs())
            .fold(0.0, f64::max),
    };
    Ok(value)
}

/// True coefficients `θ_η = ∫ λ φ_η` of `truth` on `model`, by quadrature.
pub fn project(truth: &Intensity, model: &Model, quad: &Quadrature) -> Vec<f64> {
    match model.family() {
        BasisFamily::DyadicHistogram => {
            let d = model.dim();
            let height = (d as f64).sqrt();
            (0..d)
                .map(|j| {
                    let (a, b) = (j as f64 / d as f64, (j + 1) as f64 / d as f64);
                    height * quad.integrate_on(|x| truth.eval(x), a, b, truth.breakpoints())
                })
                .collect()
        }
        BasisFamily::Trigonometric => (0..model.dim())
            .map(|p| project_position(truth, model, p, quad))
            .collect(),
    }
}

/// `∫ λ φ` for the basis function stored at `position` of `model`.
pub fn project_position(truth: &Intensity, model: &Model, position: usize, quad: &Quadrature) -> f64 {
    let breaks = merged_breakpoints(truth.breakpoints(), &model.breakpoints());
    quad.integrate(|x| truth.eval(x) * model.eval_position(position, x), &breaks)
}

/// `‖λ‖²`, from the declared closed form or by quadrature.
pub fn intensity_l2_sq(truth: &Intensity, quad: &Quadrature) -> f64 {
    truth.l2_norm_sq().unwrap_or_else(|| {
        quad.integrate(|x| truth.eval(x).powi(2), truth.breakpoints())
    })
}

/// `‖λ‖₁`, from the declared closed form or by quadrature.
pub fn intensity_l1(truth: &Intensity, quad: &Quadrature) -> f64 {
    truth
        .l1_norm()
        .unwrap_or_else(|| quad.integrate(|x| truth.eval(x).abs(), truth.breakpoints()))
}
