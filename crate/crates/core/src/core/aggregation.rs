use std::fmt;
use std::sync::Arc;

use crate::bounds::lipschitz_bound;
use crate::error::{Error, Result};

/// Non-linear block `g̃: ℝᵐ → ℝ`, called with the sub-vector `x⁽¹⁾`.
pub type NonlinearFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// Hölder conjugate `b` of `a` (`1/a + 1/b = 1`, `b = ∞` for `a = 1`).
pub fn conjugate_exponent(a: f64) -> f64 {
    if a == 1.0 {
        f64::INFINITY
    } else if a.is_infinite() {
        1.0
    } else {
        a / (a - 1.0)
    }
}

/// `‖v‖_p` for `p ∈ [1, ∞]`.
pub fn p_norm(v: &[f64], p: f64) -> f64 {
    if p.is_infinite() {
        v.iter().fold(0.0, |m, x| m.max(x.abs()))
    } else if p == 1.0 {
        v.iter().map(|x| x.abs()).sum()
    } else if p == 2.0 {
        v.iter().map(|x| x * x).sum::<f64>().sqrt()
    } else {
        v.iter().map(|x| x.abs().powf(p)).sum::<f64>().powf(1.0 / p)
    }
}

/// Aggregation `g(x) = g̃(x⁽¹⁾) + βᵀx⁽²⁾`, where `x⁽¹⁾` and `x⁽²⁾` are
/// disjoint index sets of the `n` risk factors.
#[derive(Clone)]
pub struct AggregationSpec {
    n: usize,
    nonlinear_idx: Vec<usize>,
    nonlinear: Option<NonlinearFn>,
    linear_idx: Vec<usize>,
    beta: Vec<f64>,
    a: f64,
    lipschitz: f64,
    nonlinear_lipschitz: f64,
}

impl fmt::Debug for AggregationSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AggregationSpec")
            .field("n", &self.n)
            .field("nonlinear_idx", &self.nonlinear_idx)
            .field("linear_idx", &self.linear_idx)
            .field("beta", &self.beta)
            .field("a", &self.a)
            .field("lipschitz", &self.lipschitz)
            .field("nonlinear_lipschitz", &self.nonlinear_lipschitz)
            .finish()
    }
}

impl AggregationSpec {
    /// Fully linear `g(x) = βᵀx` with `K = ‖β‖_b`.
    pub fn linear(beta: Vec<f64>, a: f64) -> Result<Self> {
        let n = beta.len();
        AggregationBuilder::new(n)
            .linear((0..n).collect(), beta)
            .norm_exponent(a)
            .build()
    }

    pub fn builder(n: usize) -> AggregationBuilder {
        AggregationBuilder::new(n)
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.n);
        let lin: f64 = self
            .linear_idx
            .iter()
            .zip(&self.beta)
            .map(|(&i, b)| b * x[i])
            .sum();
        match &self.nonlinear {
            Some(g) => {
                let sub: Vec<f64> = self.nonlinear_idx.iter().map(|&i| x[i]).collect();
                g(&sub) + lin
            }
            None => lin,
        }
    }

    /// Value of the non-linear block alone (`0` when `m = 0`).
    pub fn eval_nonlinear(&self, x: &[f64]) -> f64 {
        match &self.nonlinear {
            Some(g) => {
                let sub: Vec<f64> = self.nonlinear_idx.iter().map(|&i| x[i]).collect();
                g(&sub)
            }
            None => 0.0,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.nonlinear_idx.len()
    }

    pub fn nonlinear_idx(&self) -> &[usize] {
        &self.nonlinear_idx
    }

    pub fn linear_idx(&self) -> &[usize] {
        &self.linear_idx
    }

    pub fn beta(&self) -> &[f64] {
        &self.beta
    }

    pub fn norm_exponent(&self) -> f64 {
        self.a
    }

    pub fn dual_exponent(&self) -> f64 {
        conjugate_exponent(self.a)
    }

    /// `‖β‖_b`.
    pub fn beta_norm(&self) -> f64 {
        p_norm(&self.beta, self.dual_exponent())
    }

    /// Global Lipschitz constant `K` wrt the `a`-norm.
    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    /// Lipschitz constant `L` of the non-linear block.
    pub fn nonlinear_lipschitz(&self) -> f64 {
        self.nonlinear_lipschitz
    }

    pub fn is_linear(&self) -> bool {
        self.nonlinear.is_none()
    }

    /// Same aggregation with `K` replaced, e.g. by a constant `K_C` that only
    /// holds on a compact support of the non-linear factors.
    pub fn with_lipschitz(&self, k: f64) -> Result<Self> {
        check_k(k, self.beta_norm())?;
        Ok(Self {
            lipschitz: k,
            ..self.clone()
        })
    }
}

fn check_k(k: f64, beta_norm: f64) -> Result<()> {
    if !(k.is_finite() && k >= 0.0) {
        return Err(Error::invalid(format!("Lipschitz constant must be finite and ≥ 0, got {k}")));
    }
    if k < beta_norm * (1.0 - 1e-12) {
        return Err(Error::invalid(format!(
            "Lipschitz constant {k} is below the linear-part norm {beta_norm}"
        )));
    }
    Ok(())
}

pub struct AggregationBuilder {
    n: usize,
    nonlinear_idx: Vec<usize>,
    nonlinear: Option<NonlinearFn>,
    nonlinear_lipschitz: f64,
    linear_idx: Vec<usize>,
    beta: Vec<f64>,
    a: f64,
    lipschitz: Option<f64>,
}

impl AggregationBuilder {
    fn new(n: usize) -> Self {
        Self {
            n,
            nonlinear_idx: Vec::new(),
            nonlinear: None,
            nonlinear_lipschitz: 0.0,
            linear_idx: Vec::new(),
            beta: Vec::new(),
            a: 2.0,
            lipschitz: None,
        }
    }

    /// Non-linear block on `idx` with Lipschitz constant `l`.
    pub fn nonlinear(
        mut self,
        idx: Vec<usize>,
        g: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
        l: f64,
    ) -> Self {
        self.nonlinear_idx = idx;
        self.nonlinear = Some(Arc::new(g));
        self.nonlinear_lipschitz = l;
        self
    }

    pub fn linear(mut self, idx: Vec<usize>, beta: Vec<f64>) -> Self {
        self.linear_idx = idx;
        self.beta = beta;
        self
    }

    pub fn norm_exponent(mut self, a: f64) -> Self {
        self.a = a;
        self
    }

    /// Overrides `K`; without it `K` defaults to the bound `min{L + ‖β‖_b, n^{1/b}·max{L, ‖β‖_b}}`.
    pub fn lipschitz(mut self, k: f64) -> Self {
        self.lipschitz = Some(k);
        self
    }

    pub fn build(self) -> Result<AggregationSpec> {
        if self.n == 0 {
            return Err(Error::invalid("aggregation needs at least one risk factor"));
        }
        if !(self.a >= 1.0) {
            return Err(Error::invalid(format!("norm exponent must be ≥ 1, got {}", self.a)));
        }
        if self.linear_idx.len() != self.beta.len() {
            return Err(Error::invalid("linear index set and beta differ in length"));
        }
        if self.beta.iter().any(|b| !b.is_finite()) {
            return Err(Error::invalid("beta must be finite"));
        }
        if !(self.nonlinear_lipschitz.is_finite() && self.nonlinear_lipschitz >= 0.0) {
            return Err(Error::invalid("non-linear Lipschitz constant must be finite and ≥ 0"));
        }
        let mut seen = vec![false; self.n];
        for &i in self.nonlinear_idx.iter().chain(&self.linear_idx) {
            if i >= self.n || seen[i] {
                return Err(Error::invalid(format!("index {i} out of range or used twice")));
            }
            seen[i] = true;
        }
        if self.nonlinear.is_some() && self.nonlinear_idx.is_empty() {
            return Err(Error::invalid("non-linear block has no coordinates"));
        }
        let b = conjugate_exponent(self.a);
        let beta_norm = p_norm(&self.beta, b);
        let lipschitz = match self.lipschitz {
            Some(k) => k,
            None => lipschitz_bound(self.nonlinear_lipschitz, &self.beta, self.a, self.n),
        };
        check_k(lipschitz, beta_norm)?;
        Ok(AggregationSpec {
            n: self.n,
            nonlinear_idx: self.nonlinear_idx,
            nonlinear: self.nonlinear,
            linear_idx: self.linear_idx,
            beta: self.beta,
            a: self.a,
            lipschitz,
            nonlinear_lipschitz: self.nonlinear_lipschitz,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decomposition_evaluates() {
        let agg = AggregationSpec::builder(3)
            .nonlinear(vec![1], |x| x[0].abs(), 1.0)
            .linear(vec![0, 2], vec![2.0, -1.0])
            .build()
            .unwrap();
        assert_eq!(agg.eval(&[1.0, -3.0, 4.0]), 3.0 + 2.0 - 4.0);
        assert_eq!(agg.m(), 1);
        // K defaults to min{1 + √5, √3·√5}
        let expected = (1.0 + 5f64.sqrt()).min(3f64.sqrt() * 5f64.sqrt());
        assert!((agg.lipschitz() - expected).abs() < 1e-12);
    }

    #[test]
    fn linear_lipschitz_is_beta_norm() {
        let agg = AggregationSpec::linear(vec![3.0, 4.0], 2.0).unwrap();
        assert_eq!(agg.lipschitz(), 5.0);
        assert!(agg.is_linear());
        let l1 = AggregationSpec::linear(vec![3.0, -4.0], 1.0).unwrap();
        assert_eq!(l1.lipschitz(), 4.0);
    }

    #[test]
    fn rejects_k_below_beta_norm() {
        let r = AggregationSpec::builder(2)
            .linear(vec![0, 1], vec![3.0, 4.0])
            .lipschitz(4.0)
            .build();
        assert!(r.is_err());
        let agg = AggregationSpec::linear(vec![3.0, 4.0], 2.0).unwrap();
        assert!(agg.with_lipschitz(4.9).is_err());
        assert!(agg.with_lipschitz(6.0).is_ok());
    }

    #[test]
    fn rejects_overlapping_indices() {
        let r = AggregationSpec::builder(2)
            .nonlinear(vec![0], |x| x[0], 1.0)
            .linear(vec![0], vec![1.0])
            .build();
        assert!(r.is_err());
    }

    #[test]
    fn norms() {
        let v = [3.0, -4.0];
        assert_eq!(p_norm(&v, 1.0), 7.0);
        assert_eq!(p_norm(&v, 2.0), 5.0);
        assert_eq!(p_norm(&v, f64::INFINITY), 4.0);
        assert!((p_norm(&v, 3.0) - 91f64.powf(1.0 / 3.0)).abs() < 1e-12);
        assert_eq!(conjugate_exponent(2.0), 2.0);
        assert!(conjugate_exponent(1.0).is_infinite());
        assert_eq!(conjugate_exponent(3.0), 1.5);
    }
}
