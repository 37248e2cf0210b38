//! Orthonormal bases of `L²([0, 1], dx)` and nested model collections.
//!
//! Coefficients are stored in a fixed *position* order chosen so that the
//! coefficients of a smaller trigonometric model are a prefix of those of a
//! larger one: `[φ_0, φ_1, φ_{−1}, φ_2, φ_{−2}, …]`. Histogram models are
//! stored cell by cell, `[φ_1, …, φ_{2^m}]`.

use std::f64::consts::{PI, SQRT_2};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BasisFamily {
    /// `φ_0 ≡ 1`, `φ_j = √2 cos(2πjx)`, `φ_{−j} = √2 sin(2πjx)`; model `m` has `D = 2m + 1`.
    Trigonometric,
    /// `φ_j = √(2^m)·1[(j−1)/2^m, j/2^m)`, last cell closed at 1; model `m` has `D = 2^m`.
    DyadicHistogram,
}

impl BasisFamily {
    /// Largest model index whose dimension can be represented.
    fn max_index(self) -> u32 {
        match self {
            BasisFamily::Trigonometric => u32::MAX / 2,
            BasisFamily::DyadicHistogram => 62,
        }
    }
}

/// The model space `S_m` of a basis family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Model {
    family: BasisFamily,
    index: u32,
}

impl Model {
    pub fn new(family: BasisFamily, index: u32) -> Result<Self> {
        if index > family.max_index() {
            return invalid(format!("model index {index} too large for {family:?}"));
        }
        Ok(Self { family, index })
    }

    pub fn trigonometric(index: u32) -> Self {
        Self::new(BasisFamily::Trigonometric, index).expect("index in range")
    }

    pub fn histogram(index: u32) -> Self {
        Self::new(BasisFamily::DyadicHistogram, index).expect("index in range")
    }

    pub fn family(&self) -> BasisFamily {
        self.family
    }

    pub fn index(&self) -> u32 {
        self.index
    }

    /// `D_m`.
    pub fn dim(&self) -> usize {
        match self.family {
            BasisFamily::Trigonometric => 2 * self.index as usize + 1,
            BasisFamily::DyadicHistogram => 1usize << self.index,
        }
    }

    /// `Φ` of Assumption `‖Σ φ_η²‖_∞ ≤ Φ² D_m`; both families attain it with equality at 1.
    pub fn phi(&self) -> f64 {
        1.0
    }

    /// Basis labels `η ∈ I_m` in storage order.
    pub fn labels(&self) -> Vec<i64> {
        (0..self.dim()).map(|p| self.label_at(p)).collect()
    }

    /// Basis label stored at `position`.
    pub fn label_at(&self, position: usize) -> i64 {
        match self.family {
            BasisFamily::Trigonometric => {
                if position == 0 {
                    0
                } else {
                    let j = position.div_ceil(2) as i64;
                    if position % 2 == 1 {
                        j
                    } else {
                        -j
                    }
                }
            }
            BasisFamily::DyadicHistogram => position as i64 + 1,
        }
    }

    /// Storage position of label `eta`, if it belongs to `I_m`.
    pub fn position(&self, eta: i64) -> Option<usize> {
        match self.family {
            BasisFamily::Trigonometric => {
                let j = eta.unsigned_abs();
                if j > self.index as u64 {
                    None
                } else if eta == 0 {
                    Some(0)
                } else if eta > 0 {
                    Some(2 * j as usize - 1)
                } else {
                    Some(2 * j as usize)
                }
            }
            BasisFamily::DyadicHistogram => {
                if eta >= 1 && (eta as u64) <= self.dim() as u64 {
                    Some(eta as usize - 1)
                } else {
                    None
                }
            }
        }
    }

    /// `true` when `S_self ⊆ S_other`.
    pub fn is_nested_in(&self, other: &Model) -> bool {
        self.family == other.family && self.index <= other.index
    }

    /// Cell of `x` in the dyadic partition of level `m`.
    #[inline]
    pub(crate) fn cell(&self, x: f64) -> usize {
        let d = self.dim();
        ((x * d as f64) as usize).min(d - 1)
    }

    /// `φ_η(x)` with validated arguments.
    pub fn eval(&self, eta: i64, x: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&x) {
            return invalid(format!("x = {x} outside [0, 1]"));
        }
        let Some(pos) = self.position(eta) else {
            return invalid(format!("basis label {eta} not in model {self:?}"));
        };
        Ok(self.eval_position(pos, x))
    }

    /// Basis function at storage `position`, evaluated at `x ∈ [0, 1]`.
    #[inline]
    pub fn eval_position(&self, position: usize, x: f64) -> f64 {
        match self.family {
            BasisFamily::Trigonometric => {
                if position == 0 {
                    return 1.0;
                }
                let j = position.div_ceil(2) as f64;
                let arg = 2.0 * PI * j * x;
                if position % 2 == 1 {
                    SQRT_2 * arg.cos()
                } else {
                    SQRT_2 * arg.sin()
                }
            }
            BasisFamily::DyadicHistogram => {
                if self.cell(x) == position {
                    (self.dim() as f64).sqrt()
                } else {
                    0.0
                }
            }
        }
    }

    /// Writes every basis value at `x` into `out` (length `D_m`).
    pub fn eval_all(&self, x: f64, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.dim());
        match self.family {
            BasisFamily::Trigonometric => {
                out[0] = 1.0;
                for j in 1..=self.index as usize {
                    let arg = 2.0 * PI * j as f64 * x;
                    out[2 * j - 1] = SQRT_2 * arg.cos();
                    out[2 * j] = SQRT_2 * arg.sin();
                }
            }
            BasisFamily::DyadicHistogram => {
                out.fill(0.0);
                out[self.cell(x)] = (self.dim() as f64).sqrt();
            }
        }
    }

    /// Re-expresses coefficients of `self` in the basis of the finer model `target`.
    pub fn embed(&self, coefficients: &[f64], target: &Model) -> Result<Vec<f64>> {
        if !self.is_nested_in(target) {
            return invalid(format!("model {self:?} is not nested in {target:?}"));
        }
        if coefficients.len() != self.dim() {
            return invalid("coefficient count does not match model dimension");
        }
        let mut out = vec![0.0; target.dim()];
        match self.family {
            BasisFamily::Trigonometric => out[..coefficients.len()].copy_from_slice(coefficients),
            BasisFamily::DyadicHistogram => {
                // a coarse cell covers 2^k fine cells; ⟨φ_coarse, φ_fine⟩ = 2^{−k/2}
                let k = target.index - self.index;
                let per = 1usize << k;
                let scale = (per as f64).sqrt().recip();
                for (j, &c) in coefficients.iter().enumerate() {
                    out[j * per..(j + 1) * per].fill(c * scale);
                }
            }
        }
        Ok(out)
    }

    /// Interior discontinuities of functions in `S_m` (histogram cell edges).
    pub fn breakpoints(&self) -> Vec<f64> {
        match self.family {
            BasisFamily::Trigonometric => Vec::new(),
            BasisFamily::DyadicHistogram => {
                let d = self.dim();
                (1..d).map(|j| j as f64 / d as f64).collect()
            }
        }
    }
}

/// An ordered collection `M_n` of nested models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelCollection {
    family: BasisFamily,
    indices: Vec<u32>,
    n: usize,
}

impl ModelCollection {
    /// Checks `D_m ≤ n`, `|M_n| ≤ n` and strictly increasing indices.
    pub fn new(family: BasisFamily, indices: Vec<u32>, n: usize) -> Result<Self> {
        if n == 0 {
            return invalid("sample size must be >= 1");
        }
        if indices.windows(2).any(|w| w[0] >= w[1]) {
            return invalid("model indices must be strictly increasing");
        }
        if indices.len() > n {
            return invalid(format!("{} models exceed n = {n}", indices.len()));
        }
        for &m in &indices {
            let model = Model::new(family, m)?;
            if model.dim() > n {
                return invalid(format!("model {m} has dimension {} > n = {n}", model.dim()));
            }
        }
        Ok(Self { family, indices, n })
    }

    /// Histogram: `{0, …, ⌊log₂ n⌋}`. Trigonometric: `{0, …, ⌊(n−1)/2⌋}`.
    pub fn default_for(family: BasisFamily, n: usize) -> Result<Self> {
        if n == 0 {
            return invalid("sample size must be >= 1");
        }
        let top = match family {
            BasisFamily::DyadicHistogram => n.ilog2(),
            BasisFamily::Trigonometric => ((n - 1) / 2) as u32,
        };
        Self::new(family, (0..=top).collect(), n)
    }

    pub fn family(&self) -> BasisFamily {
        self.family
    }

    pub fn indices(&self) -> &[u32] {
        &self.indices
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn models(&self) -> impl Iterator<Item = Model> + '_ {
        self.indices.iter().map(|&m| Model {
            family: self.family,
            index: m,
        })
    }

    /// The largest model of the collection.
    pub fn maximal(&self) -> Option<Model> {
        self.models().last()
    }
}

/// Grid diagnostic for `‖Σ_η φ_η²‖_∞ ≤ Φ² D_m`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SquareSumCheck {
    pub max_square_sum: f64,
    /// `max_square_sum / (Φ² D_m)`.
    pub ratio: f64,
}

pub fn check_square_sum(model: &Model, grid: usize) -> Result<SquareSumCheck> {
    if grid < 2 {
        return invalid("grid resolution must be >= 2");
    }
    let mut buf = vec![0.0; model.dim()];
    let mut max = 0.0f64;
    for i in 0..grid {
        let x = i as f64 / (grid - 1) as f64;
        model.eval_all(x, &mut buf);
        max = max.max(buf.iter().map(|v| v * v).sum());
    }
    let bound = model.phi().powi(2) * model.dim() as f64;
    Ok(SquareSumCheck {
        max_square_sum: max,
        ratio: max / bound,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn dimensions() {
        assert_eq!(Model::trigonometric(0).dim(), 1);
        assert_eq!(Model::trigonometric(3).dim(), 7);
        assert_eq!(Model::histogram(0).dim(), 1);
        assert_eq!(Model::histogram(4).dim(), 16);
    }

    #[test]
    fn basis_values() {
        let t1 = Model::trigonometric(1);
        assert_eq!(Model::trigonometric(0).eval(0, 0.37).unwrap(), 1.0);
        assert!((t1.eval(1, 0.5).unwrap() + SQRT_2).abs() < 1e-12);
        assert!((t1.eval(-1, 0.25).unwrap() - SQRT_2).abs() < 1e-12);
        let h2 = Model::histogram(2);
        assert_eq!(h2.eval(1, 0.1).unwrap(), 2.0);
        assert_eq!(h2.eval(2, 0.1).unwrap(), 0.0);
        assert_eq!(h2.eval(4, 1.0).unwrap(), 2.0);
        assert_eq!(h2.eval(2, 0.25).unwrap(), 2.0);
    }

    #[test]
    fn eval_rejects_bad_arguments() {
        let t1 = Model::trigonometric(1);
        assert!(t1.eval(2, 0.5).is_err());
        assert!(t1.eval(-2, 0.5).is_err());
        assert!(t1.eval(0, 1.5).is_err());
        assert!(t1.eval(0, -0.1).is_err());
        let h2 = Model::histogram(2);
        assert!(h2.eval(0, 0.5).is_err());
        assert!(h2.eval(5, 0.5).is_err());
    }

    #[test]
    fn labels_and_positions_agree() {
        for model in [Model::trigonometric(4), Model::histogram(3)] {
            for (p, eta) in model.labels().into_iter().enumerate() {
                assert_eq!(model.position(eta), Some(p));
            }
        }
        assert_eq!(Model::trigonometric(2).labels(), vec![0, 1, -1, 2, -2]);
    }

    #[test]
    fn default_collections() {
        let h = ModelCollection::default_for(BasisFamily::DyadicHistogram, 1024).unwrap();
        assert_eq!(h.indices(), (0..=10).collect::<Vec<_>>().as_slice());
        let h = ModelCollection::default_for(BasisFamily::DyadicHistogram, 1).unwrap();
        assert_eq!(h.indices(), &[0]);
        let t = ModelCollection::default_for(BasisFamily::Trigonometric, 1).unwrap();
        assert_eq!(t.indices(), &[0]);
        let t = ModelCollection::default_for(BasisFamily::Trigonometric, 10).unwrap();
        assert_eq!(t.indices(), &[0, 1, 2, 3, 4]);
    }

    #[test]
    fn collection_validation() {
        assert!(ModelCollection::new(BasisFamily::DyadicHistogram, vec![0, 2, 1], 64).is_err());
        assert!(ModelCollection::new(BasisFamily::DyadicHistogram, vec![0, 7], 64).is_err());
        assert!(ModelCollection::new(BasisFamily::Trigonometric, vec![0, 1, 2], 2).is_err());
        assert!(ModelCollection::new(BasisFamily::Trigonometric, vec![], 2).unwrap().is_empty());
    }

    #[test]
    fn square_sum_examples() {
        let c = check_square_sum(&Model::trigonometric(3), 4096).unwrap();
        assert!((c.max_square_sum - 7.0).abs() < 1e-10);
        assert!(c.ratio <= 1.0 + 1e-10);
        let c = check_square_sum(&Model::histogram(4), 333).unwrap();
        assert!((c.max_square_sum - 16.0).abs() < 1e-12);
        let c = check_square_sum(&Model::trigonometric(0), 10).unwrap();
        assert_eq!(c.max_square_sum, 1.0);
        assert!(check_square_sum(&Model::trigonometric(0), 1).is_err());
    }

    /// ∫₀¹ φ_a φ_b for trigonometric labels, from the product-to-sum identities.
    fn trig_inner(a: i64, b: i64) -> f64 {
        // ∫ cos(2πpx) over [0,1] is 1 if p = 0 else 0, and ∫ sin(2πpx) = 0
        let c = |p: i64| if p == 0 { 1.0 } else { 0.0 };
        match (a.signum(), b.signum()) {
            (0, 0) => 1.0,
            (0, s) | (s, 0) => {
                let j = if a == 0 { b } else { a };
                if s > 0 {
                    SQRT_2 * c(j)
                } else {
                    0.0
                }
            }
            (1, 1) => c(a - b) + c(a + b),
            (-1, -1) => c(a.abs() - b.abs()) - c(a.abs() + b.abs()),
            _ => 0.0,
        }
    }

    #[test]
    fn trigonometric_orthonormality() {
        let labels = Model::trigonometric(6).labels();
        for &a in &labels {
            for &b in &labels {
                let expected = if a == b { 1.0 } else { 0.0 };
                assert!((trig_inner(a, b) - expected).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn histogram_orthonormality_from_cell_geometry() {
        let m = Model::histogram(5);
        let d = m.dim();
        for a in 0..d {
            for b in 0..d {
                // √D·√D·|cell_a ∩ cell_b|
                let overlap = if a == b { 1.0 / d as f64 } else { 0.0 };
                let ip = (d as f64).sqrt().powi(2) * overlap;
                let expected = if a == b { 1.0 } else { 0.0 };
                assert!((ip - expected).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn histogram_refinement_identity() {
        for m in 0..6u32 {
            let coarse = Model::histogram(m);
            let fine = Model::histogram(m + 1);
            for i in 0..=997 {
                let x = i as f64 / 997.0;
                for j in 1..=coarse.dim() as i64 {
                    let lhs = coarse.eval(j, x).unwrap();
                    let rhs = (fine.eval(2 * j - 1, x).unwrap() + fine.eval(2 * j, x).unwrap())
                        / SQRT_2;
                    assert!((lhs - rhs).abs() <= 1e-12);
                }
            }
        }
    }

    #[test]
    fn embed_preserves_function_values() {
        let coarse = Model::histogram(2);
        let fine = Model::histogram(4);
        let c = [1.0, -2.0, 0.5, 3.0];
        let e = coarse.embed(&c, &fine).unwrap();
        for i in 0..=100 {
            let x = i as f64 / 100.0;
            let a: f64 = (0..4).map(|p| c[p] * coarse.eval_position(p, x)).sum();
            let b: f64 = (0..16).map(|p| e[p] * fine.eval_position(p, x)).sum();
            assert!((a - b).abs() < 1e-12);
        }
        assert!(fine.embed(&e, &coarse).is_err());
        assert!(coarse.embed(&c, &Model::trigonometric(5)).is_err());
    }

    proptest! {
        #[test]
        fn square_sum_is_dimension(x in 0.0f64..=1.0, m in 0u32..40, h in 0u32..12) {
            for model in [Model::trigonometric(m), Model::histogram(h)] {
                let mut buf = vec![0.0; model.dim()];
                model.eval_all(x, &mut buf);
                let s: f64 = buf.iter().map(|v| v * v).sum();
                prop_assert!((s - model.dim() as f64).abs() <= 1e-9 * model.dim() as f64);
            }
        }

        #[test]
        fn eval_all_matches_eval(x in 0.0f64..=1.0, m in 0u32..10) {
            for model in [Model::trigonometric(m), Model::histogram(m)] {
                let mut buf = vec![0.0; model.dim()];
                model.eval_all(x, &mut buf);
                for (p, eta) in model.labels().into_iter().enumerate() {
                    prop_assert_eq!(buf[p], model.eval(eta, x).unwrap());
                }
            }
        }

        #[test]
        fn default_collections_respect_bounds(n in 1usize..5000) {
            for family in [BasisFamily::Trigonometric, BasisFamily::DyadicHistogram] {
                let c = ModelCollection::default_for(family, n).unwrap();
                prop_assert!(c.len() <= n);
                prop_assert!(c.models().all(|m| m.dim() <= n));
            }
        }
    }
}
