//! Error exponent functionals and the bounds assembled from them.
//!
//! The three functionals are
//!
//! * `E_mD(S, g, g~)`: a competing codeword vector with code index `g~`
//!   out-scores the transmitted one;
//! * `E_iD(S, g, g')`: the transmitted codeword misses its typicality
//!   threshold, or a codeword sent under `g' ∉ R_D` passes it;
//! * `E_c(g, g~)`: code index detection confuses `g` with `g~`.
//!
//! All are in nats per symbol and may be negative. Every sum runs in the log
//! domain with `0^a = 0` for `a >= 0`.

mod bound;

pub use bound::{
    detection_bound, gep_bound_d, gep_bound_margin, gep_bound_partitioned, BoundReport, BoundTerm,
    ExponentCache, ExponentKind,
};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::channel::{marginal_over, output_marginal, SystemModel};
use crate::ensemble::LetterLayout;
use crate::error::{Error, Result};
use crate::logmath::{ln0, scaled, LogSumExp};
use crate::optimize::{maximize, GridSpec, EPS};
use crate::space::{CodeIndexVector, UserSet};

/// `g -> alpha(g)`, nonnegative, in nats per symbol.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct WeightFunction {
    default: f64,
    values: BTreeMap<CodeIndexVector, f64>,
}

impl WeightFunction {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: f64) -> Result<Self> {
        Self::new(c, BTreeMap::new())
    }

    pub fn new(default: f64, values: BTreeMap<CodeIndexVector, f64>) -> Result<Self> {
        for &v in values.values().chain(std::iter::once(&default)) {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::DomainError(v));
            }
        }
        Ok(WeightFunction { default, values })
    }

    pub fn get(&self, g: &CodeIndexVector) -> f64 {
        self.values.get(g).copied().unwrap_or(self.default)
    }

    pub fn default_value(&self) -> f64 {
        self.default
    }

    pub fn overrides(&self) -> &BTreeMap<CodeIndexVector, f64> {
        &self.values
    }

    /// `alpha + c` pointwise.
    pub fn shifted(&self, c: f64) -> Result<Self> {
        Self::new(
            self.default + c,
            self.values
                .iter()
                .map(|(g, v)| (g.clone(), v + c))
                .collect(),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExponentResult {
    pub value: f64,
    /// `None` for `E_c`, which has no `rho`.
    pub rho: Option<f64>,
    pub s: f64,
    pub grid_intervals: usize,
}

/// Per-letter data of one branch `h` of a functional: for each `(x_U, y)`,
/// the pairs `(log prod_{k in T} P_{X|h_k}(x_k), log P(y | x_D, h) - alpha(h))`
/// over `x_T` with positive weight.
#[derive(Debug, Clone)]
struct Branch {
    entries: Vec<Vec<(f64, f64)>>,
}

impl Branch {
    fn new(
        model: &SystemModel,
        layout: &LetterLayout,
        d: UserSet,
        h: &CodeIndexVector,
        alpha: f64,
    ) -> Self {
        let marginal = marginal_over(model, d, h);
        let ny = marginal.output_size();
        let mut entries = Vec::with_capacity(layout.n_fixed * ny);
        for fu in 0..layout.n_fixed {
            for y in 0..ny {
                let row = (0..layout.n_free)
                    .filter_map(|ft| {
                        let lw = layout.free_log_weight(model, h, ft);
                        (lw > f64::NEG_INFINITY).then(|| {
                            let x_d = &layout.xd[fu * layout.n_free + ft];
                            (lw, ln0(marginal.prob(x_d, y)) - alpha)
                        })
                    })
                    .collect();
                entries.push(row);
            }
        }
        Branch { entries }
    }

    /// `log sum_{x_T} w(x_T) (P e^{-alpha})^a` at letter `idx`.
    #[inline]
    fn power_sum(&self, idx: usize, a: f64) -> f64 {
        let mut acc = LogSumExp::new();
        for &(lw, lp) in &self.entries[idx] {
            acc.add(lw + scaled(a, lp));
        }
        acc.value()
    }
}

/// The shared skeleton of `E_mD` and `E_iD`:
/// `-log sum_{y, x_U} P_{X_U|g}(x_U) B1(a1)^{c1} B2(a2)^{c2}`.
#[derive(Debug, Clone)]
struct TwoBranch {
    fixed_w: Vec<f64>,
    output_size: usize,
    b1: Branch,
    b2: Branch,
    /// `sum_{k in T}` rate of the branch whose messages count.
    rate: f64,
}

impl TwoBranch {
    fn new(
        model: &SystemModel,
        d: UserSet,
        s: UserSet,
        h1: &CodeIndexVector,
        h2: &CodeIndexVector,
        alpha: &WeightFunction,
        rate_of: &CodeIndexVector,
    ) -> Self {
        let layout = LetterLayout::new(model, d, s);
        let fixed_w = (0..layout.n_fixed)
            .map(|fu| layout.fixed_log_weight(model, h1, fu))
            .collect();
        TwoBranch {
            fixed_w,
            output_size: model.dmc().output_size(),
            b1: Branch::new(model, &layout, d, h1, alpha.get(h1)),
            b2: Branch::new(model, &layout, d, h2, alpha.get(h2)),
            rate: model.sum_rate(d.minus(s), rate_of),
        }
    }

    fn log_sum(&self, a1: f64, c1: f64, a2: f64, c2: f64) -> f64 {
        let mut acc = LogSumExp::new();
        for (fu, &wu) in self.fixed_w.iter().enumerate() {
            if wu == f64::NEG_INFINITY {
                continue;
            }
            for y in 0..self.output_size {
                let idx = fu * self.output_size + y;
                let l1 = self.b1.power_sum(idx, a1);
                if l1 == f64::NEG_INFINITY {
                    continue;
                }
                let l2 = self.b2.power_sum(idx, a2);
                if l2 == f64::NEG_INFINITY {
                    continue;
                }
                acc.add(wu + c1 * l1 + c2 * l2);
            }
        }
        acc.value()
    }
}

fn check_args(model: &SystemModel, d: UserSet, s: UserSet, vs: &[&CodeIndexVector]) -> Result<()> {
    if d.is_empty() || !d.is_subset_of(model.regular_users()) {
        return Err(Error::SubsetOutOfRange(d.0));
    }
    if !s.is_subset_of(model.all_users()) {
        return Err(Error::SubsetOutOfRange(s.0));
    }
    vs.iter().try_for_each(|g| model.check_vector(g))
}

/// `E_mD(S, g, g~)`: maximized over `rho, s in (0, 1]`.
#[derive(Debug, Clone)]
pub struct EmdProblem {
    inner: TwoBranch,
}

impl EmdProblem {
    pub fn new(
        model: &SystemModel,
        d: UserSet,
        s: UserSet,
        g: &CodeIndexVector,
        g_tilde: &CodeIndexVector,
        alpha: &WeightFunction,
    ) -> Result<Self> {
        check_args(model, d, s, &[g, g_tilde])?;
        if d.minus(s).is_empty() {
            return Err(Error::EmptyDifferenceSet);
        }
        Ok(EmdProblem {
            inner: TwoBranch::new(model, d, s, g, g_tilde, alpha, g_tilde),
        })
    }

    pub fn objective(&self, rho: f64, s: f64) -> f64 {
        -rho * self.inner.rate - self.inner.log_sum(1.0 - s, 1.0, s / rho, rho)
    }

    pub fn maximize(&self, grid: GridSpec) -> ExponentResult {
        let m = maximize(|[r, s]| self.objective(r, s), [EPS, EPS], [1.0, 1.0], grid);
        ExponentResult {
            value: m.value,
            rho: Some(m.at[0]),
            s: m.at[1],
            grid_intervals: grid.intervals,
        }
    }
}

/// `E_iD(S, g, g')`: maximized over `rho in (0, 1)`, `s in (0, 1 - rho]`.
///
/// Internally `s = EPS + u (1 - rho - EPS)` with `u in [0, 1]`, so the
/// search box is rectangular.
#[derive(Debug, Clone)]
pub struct EidProblem {
    inner: TwoBranch,
}

impl EidProblem {
    pub fn new(
        model: &SystemModel,
        d: UserSet,
        s: UserSet,
        g: &CodeIndexVector,
        g_prime: &CodeIndexVector,
        alpha: &WeightFunction,
    ) -> Result<Self> {
        if d.minus(s).is_empty() {
            return Err(Error::EmptyDifferenceSet);
        }
        Self::new_allow_empty(model, d, s, g, g_prime, alpha)
    }

    /// As [`EidProblem::new`] but `D \ S` may be empty; then nothing is
    /// averaged and the rate term vanishes. Used for the `S ⊇ D` terms of the
    /// operation-margin bound.
    pub fn new_allow_empty(
        model: &SystemModel,
        d: UserSet,
        s: UserSet,
        g: &CodeIndexVector,
        g_prime: &CodeIndexVector,
        alpha: &WeightFunction,
    ) -> Result<Self> {
        check_args(model, d, s, &[g, g_prime])?;
        Ok(EidProblem {
            inner: TwoBranch::new(model, d, s, g, g_prime, alpha, g),
        })
    }

    pub fn objective(&self, rho: f64, s: f64) -> f64 {
        -rho * self.inner.rate - self.inner.log_sum(s / (s + rho), s + rho, 1.0, 1.0 - s)
    }

    pub fn maximize(&self, grid: GridSpec) -> ExponentResult {
        let s_of = |r: f64, u: f64| EPS + u * (1.0 - r - EPS);
        let m = maximize(
            |[r, u]| self.objective(r, s_of(r, u)),
            [EPS, 0.0],
            [1.0 - EPS, 1.0],
            grid,
        );
        ExponentResult {
            value: m.value,
            rho: Some(m.at[0]),
            s: s_of(m.at[0], m.at[1]),
            grid_intervals: grid.intervals,
        }
    }
}

/// `E_c(g, g~)`: maximized over `s in (0, 1]`.
#[derive(Debug, Clone)]
pub struct EcProblem {
    lp: Vec<f64>,
    lq: Vec<f64>,
}

impl EcProblem {
    pub fn new(
        model: &SystemModel,
        g: &CodeIndexVector,
        g_tilde: &CodeIndexVector,
        alpha: &WeightFunction,
    ) -> Result<Self> {
        let p = output_marginal(model, g)?;
        let q = output_marginal(model, g_tilde)?;
        let (ag, at) = (alpha.get(g), alpha.get(g_tilde));
        Ok(EcProblem {
            lp: p.iter().map(|&v| ln0(v) - ag).collect(),
            lq: q.iter().map(|&v| ln0(v) - at).collect(),
        })
    }

    pub fn objective(&self, s: f64) -> f64 {
        let mut acc = LogSumExp::new();
        for (&a, &b) in self.lp.iter().zip(&self.lq) {
            acc.add(scaled(s, a) + scaled(1.0 - s, b));
        }
        -acc.value()
    }

    pub fn maximize(&self, grid: GridSpec) -> ExponentResult {
        let m = maximize(|[s]| self.objective(s), [EPS], [1.0], grid);
        ExponentResult {
            value: m.value,
            rho: None,
            s: m.at[0],
            grid_intervals: grid.intervals,
        }
    }
}

pub fn exponent_emd(
    model: &SystemModel,
    d: UserSet,
    s: UserSet,
    g: &CodeIndexVector,
    g_tilde: &CodeIndexVector,
    alpha: &WeightFunction,
) -> Result<ExponentResult> {
    Ok(EmdProblem::new(model, d, s, g, g_tilde, alpha)?.maximize(GridSpec::default()))
}

pub fn exponent_eid(
    model: &SystemModel,
    d: UserSet,
    s: UserSet,
    g: &CodeIndexVector,
    g_prime: &CodeIndexVector,
    alpha: &WeightFunction,
) -> Result<ExponentResult> {
    Ok(EidProblem::new(model, d, s, g, g_prime, alpha)?.maximize(GridSpec::default()))
}

pub fn exponent_ec(
    model: &SystemModel,
    g: &CodeIndexVector,
    g_tilde: &CodeIndexVector,
    alpha: &WeightFunction,
) -> Result<ExponentResult> {
    Ok(EcProblem::new(model, g, g_tilde, alpha)?.maximize(GridSpec::default()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{make_compound_bsc, make_dmc, CodeSpec};

    fn v(x: &[usize]) -> CodeIndexVector {
        CodeIndexVector(x.to_vec())
    }

    fn noiseless() -> SystemModel {
        let dmc = make_dmc(&[2], 2, &[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        SystemModel::new(dmc, 1, vec![vec![CodeSpec::new(0.0, vec![0.5, 0.5])]]).unwrap()
    }

    #[test]
    fn noiseless_channel_zero_rate() {
        let m = noiseless();
        let e = exponent_emd(
            &m,
            UserSet::singleton(0),
            UserSet::EMPTY,
            &v(&[0]),
            &v(&[0]),
            &WeightFunction::zero(),
        )
        .unwrap();
        assert!((e.value - 2f64.ln()).abs() < 1e-9, "{}", e.value);
        assert!((e.rho.unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn empty_difference_set() {
        let m = noiseless();
        let d = UserSet::singleton(0);
        let a = WeightFunction::zero();
        assert_eq!(
            exponent_emd(&m, d, d, &v(&[0]), &v(&[0]), &a).unwrap_err(),
            Error::EmptyDifferenceSet
        );
        assert_eq!(
            exponent_eid(&m, d, d, &v(&[0]), &v(&[0]), &a).unwrap_err(),
            Error::EmptyDifferenceSet
        );
        assert!(EidProblem::new_allow_empty(&m, d, d, &v(&[0]), &v(&[0]), &a).is_ok());
    }

    #[test]
    fn weights_must_be_nonnegative() {
        assert_eq!(
            WeightFunction::constant(-0.1).unwrap_err(),
            Error::DomainError(-0.1)
        );
        assert!(WeightFunction::constant(f64::NAN).is_err());
    }

    #[test]
    fn reevaluation_reproduces_value() {
        let m = make_compound_bsc(&[0.1, 0.3], &[0.6, 0.4], 0.05).unwrap();
        let a = WeightFunction::zero();
        let d = UserSet::singleton(0);
        let g = v(&[0, 0]);
        let h = v(&[0, 1]);
        let p = EmdProblem::new(&m, d, UserSet::EMPTY, &g, &g, &a).unwrap();
        let r = p.maximize(GridSpec::default());
        assert!((p.objective(r.rho.unwrap(), r.s) - r.value).abs() <= 1e-12);
        let p = EidProblem::new(&m, d, UserSet::EMPTY, &g, &h, &a).unwrap();
        let r = p.maximize(GridSpec::default());
        assert!((p.objective(r.rho.unwrap(), r.s) - r.value).abs() <= 1e-12);
        assert!(r.s <= 1.0 - r.rho.unwrap() + 1e-15);
        let p = EcProblem::new(&m, &g, &h, &a).unwrap();
        let r = p.maximize(GridSpec::default());
        assert_eq!(p.objective(r.s), r.value);
    }

    #[test]
    fn identical_marginals_give_zero_detection_exponent() {
        let m = make_compound_bsc(&[0.18, 0.185, 0.185, 0.19], &[0.5, 0.5], 0.2).unwrap();
        let e = exponent_ec(&m, &v(&[0, 1]), &v(&[0, 2]), &WeightFunction::zero()).unwrap();
        assert!(e.value.abs() < 1e-12);
    }

    #[test]
    fn shift_law_spot_check() {
        let m = make_compound_bsc(&[0.1, 0.3], &[0.6, 0.4], 0.05).unwrap();
        let a = WeightFunction::zero();
        let b = a.shifted(0.37).unwrap();
        let d = UserSet::singleton(0);
        let (g, h) = (v(&[0, 0]), v(&[0, 1]));
        let e0 = exponent_eid(&m, d, UserSet::EMPTY, &g, &h, &a)
            .unwrap()
            .value;
        let e1 = exponent_eid(&m, d, UserSet::EMPTY, &g, &h, &b)
            .unwrap()
            .value;
        assert!((e1 - e0 - 0.37).abs() < 1e-9);
    }
}
