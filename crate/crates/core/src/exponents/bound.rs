//! Union-bound assembly of the generalized error performance bounds.
//!
//! Sums run in the log domain and are normalized by `sum_g e^{-N alpha(g)}`
//! over the whole code index space. The reported `value` is clamped to 1;
//! `log_raw` keeps the unclamped sum.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::Serialize;

use super::{EcProblem, EidProblem, EmdProblem, ExponentResult, WeightFunction};
use crate::channel::SystemModel;
use crate::error::{Error, Result};
use crate::logmath::LogSumExp;
use crate::optimize::GridSpec;
use crate::space::{validate_cover, CodeIndexVector, Region, RegionPartition, UserSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum ExponentKind {
    Emd,
    Eid,
    Ec,
}

impl ExponentKind {
    pub fn label(self) -> &'static str {
        match self {
            ExponentKind::Emd => "EmD",
            ExponentKind::Eid => "EiD",
            ExponentKind::Ec => "Ec",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ExponentKey {
    pub kind: ExponentKind,
    pub d: UserSet,
    pub s: UserSet,
    pub g: CodeIndexVector,
    pub other: CodeIndexVector,
}

/// Memo of optimized exponents for one `(model, alpha)` pair.
#[derive(Debug, Clone, Default)]
pub struct ExponentCache {
    grid: GridSpec,
    map: BTreeMap<ExponentKey, ExponentResult>,
}

impl ExponentCache {
    pub fn new(grid: GridSpec) -> Self {
        ExponentCache {
            grid,
            map: BTreeMap::new(),
        }
    }

    pub fn get(&self, key: &ExponentKey) -> Option<&ExponentResult> {
        self.map.get(key)
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    /// Evaluates every key not yet present.
    pub fn ensure(
        &mut self,
        model: &SystemModel,
        alpha: &WeightFunction,
        keys: impl IntoIterator<Item = ExponentKey>,
    ) -> Result<()> {
        let missing: Vec<ExponentKey> = keys
            .into_iter()
            .filter(|k| !self.map.contains_key(k))
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let grid = self.grid;
        let eval = |k: &ExponentKey| -> Result<ExponentResult> {
            Ok(match k.kind {
                ExponentKind::Emd => {
                    EmdProblem::new(model, k.d, k.s, &k.g, &k.other, alpha)?.maximize(grid)
                }
                ExponentKind::Eid => {
                    EidProblem::new_allow_empty(model, k.d, k.s, &k.g, &k.other, alpha)?
                        .maximize(grid)
                }
                ExponentKind::Ec => EcProblem::new(model, &k.g, &k.other, alpha)?.maximize(grid),
            })
        };
        #[cfg(feature = "parallel")]
        let results: Vec<Result<ExponentResult>> = {
            use rayon::prelude::*;
            missing.par_iter().map(eval).collect()
        };
        #[cfg(not(feature = "parallel"))]
        let results: Vec<Result<ExponentResult>> = missing.iter().map(eval).collect();
        for (k, r) in missing.into_iter().zip(results) {
            self.map.insert(k, r?);
        }
        Ok(())
    }

    fn value(&self, key: &ExponentKey) -> ExponentResult {
        self.map[key]
    }
}

/// One summand family of a bound.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundTerm {
    pub kind: ExponentKind,
    pub d: UserSet,
    pub s: UserSet,
    pub g: CodeIndexVector,
    pub other: CodeIndexVector,
    pub exponent: ExponentResult,
    /// How many times `e^{-N E}` enters the sum.
    pub multiplicity: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    /// `subset`, `partitioned`, `margin` or `detection`.
    pub bound: String,
    /// `min(1, e^{log_raw})` for error probabilities; see [`detection_bound`].
    pub value: f64,
    pub log_raw: f64,
    pub vacuous: bool,
    /// Set when the partition search was cut short.
    pub heuristic: bool,
    pub n: usize,
    pub terms: Vec<BoundTerm>,
}

impl BoundReport {
    fn from_log(bound: &str, log_raw: f64, n: usize, terms: Vec<BoundTerm>) -> Self {
        BoundReport {
            bound: bound.into(),
            value: log_raw.exp().min(1.0),
            log_raw,
            vacuous: log_raw >= 0.0,
            heuristic: false,
            n,
            terms,
        }
    }

    pub fn raw(&self) -> f64 {
        self.log_raw.exp()
    }

    /// Sum of per-decoder bounds at a common `N`, relabelled `label`.
    pub fn sum(label: &str, parts: Vec<BoundReport>) -> Result<Self> {
        let n = parts.first().map_or(0, |p| p.n);
        if let Some(p) = parts.iter().find(|p| p.n != n) {
            return Err(Error::MismatchedParameters(format!(
                "bounds at N={n} and N={}",
                p.n
            )));
        }
        let mut acc = LogSumExp::new();
        let mut heuristic = false;
        let mut terms = Vec::new();
        for p in parts {
            acc.add(p.log_raw);
            heuristic |= p.heuristic;
            terms.extend(p.terms);
        }
        let mut report = BoundReport::from_log(label, acc.value(), n, terms);
        report.heuristic = heuristic;
        Ok(report)
    }

    pub const CSV_HEADER: &'static str = "bound,kind,D,S,g,other,exponent,rho,s,multiplicity";

    /// One CSV row per term, without header.
    pub fn csv_rows(&self) -> String {
        let mut out = String::new();
        for t in &self.terms {
            let _ = writeln!(
                out,
                "{},{},\"{}\",\"{}\",\"{}\",\"{}\",{},{},{},{}",
                self.bound,
                t.kind.label(),
                t.d,
                t.s,
                t.g,
                t.other,
                crate::format::g12(t.exponent.value),
                t.exponent.rho.map(crate::format::g12).unwrap_or_default(),
                crate::format::g12(t.exponent.s),
                t.multiplicity
            );
        }
        out
    }
}

fn log_norm(model: &SystemModel, alpha: &WeightFunction, n: usize) -> f64 {
    let mut acc = LogSumExp::new();
    for g in model.code_space().iter() {
        acc.add(-(n as f64) * alpha.get(&g));
    }
    acc.value()
}

/// Clause (iv) of the competitor relation applied to code indices alone:
/// `g~_k != g_k` for every user outside `D ∪ S`.
fn differs_outside(
    model: &SystemModel,
    d: UserSet,
    s: UserSet,
    g: &CodeIndexVector,
    h: &CodeIndexVector,
) -> bool {
    g.differs_on_all(h, model.all_users().minus(d.union(s)))
}

/// A bound written as `sum multiplicity * e^{-N E(key)}` before evaluation.
#[derive(Debug, Default)]
struct Plan {
    /// Each entry is a group whose best (largest) term counts `multiplicity` times.
    groups: Vec<(Vec<ExponentKey>, u64)>,
}

impl Plan {
    fn single(&mut self, key: ExponentKey) {
        self.groups.push((vec![key], 1));
    }

    fn max_of(&mut self, keys: Vec<ExponentKey>, multiplicity: u64) {
        if !keys.is_empty() && multiplicity > 0 {
            self.groups.push((keys, multiplicity));
        }
    }

    fn keys(&self) -> impl Iterator<Item = ExponentKey> + '_ {
        self.groups.iter().flat_map(|(ks, _)| ks.iter().cloned())
    }

    fn evaluate(&self, cache: &ExponentCache, n: usize) -> (f64, Vec<BoundTerm>) {
        let nf = n as f64;
        let mut acc = LogSumExp::new();
        let mut terms = Vec::with_capacity(self.groups.len());
        for (keys, mult) in &self.groups {
            // smallest exponent wins; ties keep the first key in lexicographic order
            let best = keys
                .iter()
                .map(|k| (k, cache.value(k)))
                .fold(
                    None::<(&ExponentKey, ExponentResult)>,
                    |acc, (k, e)| match acc {
                        Some((_, b)) if b.value <= e.value => acc,
                        _ => Some((k, e)),
                    },
                )
                .unwrap();
            acc.add(-nf * best.1.value + (*mult as f64).ln());
            terms.push(BoundTerm {
                kind: best.0.kind,
                d: best.0.d,
                s: best.0.s,
                g: best.0.g.clone(),
                other: best.0.other.clone(),
                exponent: best.1,
                multiplicity: *mult,
            });
        }
        (acc.value(), terms)
    }
}

/// `E_iD` candidates `g' ∉ excluded` with `g'_S = g_S`.
fn eid_keys(
    model: &SystemModel,
    d: UserSet,
    s: UserSet,
    g: &CodeIndexVector,
    excluded: &Region,
) -> Vec<ExponentKey> {
    model
        .code_space()
        .iter()
        .filter(|h| !excluded.contains(h) && h.agrees_on(g, s))
        .map(|h| ExponentKey {
            kind: ExponentKind::Eid,
            d,
            s,
            g: g.clone(),
            other: h,
        })
        .collect()
}

fn plan_subset(model: &SystemModel, d: UserSet, r_d: &Region, plan: &mut Plan) {
    let space = model.code_space();
    for s in model
        .all_users()
        .subsets()
        .filter(|s| !d.minus(*s).is_empty())
    {
        for g in r_d.iter() {
            let outside = space
                .iter()
                .filter(|h| !r_d.contains(h) && h.agrees_on(g, s))
                .count() as u64;
            plan.max_of(eid_keys(model, d, s, g, r_d), 1 + outside);
            for h in r_d.iter() {
                if h.agrees_on(g, s) && differs_outside(model, d, s, g, h) {
                    plan.single(ExponentKey {
                        kind: ExponentKind::Emd,
                        d,
                        s,
                        g: g.clone(),
                        other: h.clone(),
                    });
                }
            }
        }
    }
}

fn plan_margin_extra(
    model: &SystemModel,
    d: UserSet,
    r_d: &Region,
    margin: &Region,
    plan: &mut Plan,
) {
    let space = model.code_space();
    let excluded = r_d.union(margin);
    for s in model.all_users().subsets().filter(|s| d.is_subset_of(*s)) {
        for g in r_d.iter() {
            let outside = space
                .iter()
                .filter(|h| !excluded.contains(h) && h.agrees_on(g, s))
                .count() as u64;
            plan.max_of(eid_keys(model, d, s, g, &excluded), 1 + outside);
        }
    }
}

fn check_d(model: &SystemModel, d: UserSet, r_d: &Region) -> Result<()> {
    if !d.contains(0) {
        return Err(Error::UserOneMissing);
    }
    if !d.is_subset_of(model.regular_users()) {
        return Err(Error::SubsetOutOfRange(d.0));
    }
    model.check_region(r_d)
}

/// Bound on `GEP_D(alpha)` for one `(D, R_D)` decoder.
pub fn gep_bound_d(
    model: &SystemModel,
    d: UserSet,
    r_d: &Region,
    alpha: &WeightFunction,
    n: usize,
) -> Result<BoundReport> {
    let mut cache = ExponentCache::new(GridSpec::default());
    gep_bound_d_cached(model, d, r_d, alpha, n, &mut cache)
}

pub fn gep_bound_d_cached(
    model: &SystemModel,
    d: UserSet,
    r_d: &Region,
    alpha: &WeightFunction,
    n: usize,
    cache: &mut ExponentCache,
) -> Result<BoundReport> {
    check_d(model, d, r_d)?;
    let mut plan = Plan::default();
    plan_subset(model, d, r_d, &mut plan);
    cache.ensure(model, alpha, plan.keys())?;
    let (log_sum, terms) = plan.evaluate(cache, n);
    Ok(BoundReport::from_log(
        "subset",
        log_sum - log_norm(model, alpha, n),
        n,
        terms,
    ))
}

/// Minimum over assignments of `R` to decoders `D ∋ 0` of `sum_D GEP_D`.
///
/// All `(2^{K-1})^{|R|}` assignments are tried when that count is at most
/// `partition_cap`; otherwise only the assignment of everything to the full
/// regular set is evaluated and the report is flagged heuristic.
pub fn gep_bound_partitioned(
    model: &SystemModel,
    region: &Region,
    alpha: &WeightFunction,
    n: usize,
    partition_cap: u64,
) -> Result<(BoundReport, RegionPartition)> {
    model.check_region(region)?;
    let full = model.regular_users();
    let choices: Vec<UserSet> = full.subsets().filter(|d| d.contains(0)).collect();
    let members: Vec<&CodeIndexVector> = region.iter().collect();
    let count = (choices.len() as u64).checked_pow(members.len() as u32);
    let exhaustive = count.is_some_and(|c| c <= partition_cap.max(1));

    let assignments: Vec<Vec<usize>> = if exhaustive {
        let c = count.unwrap() as usize;
        (0..c)
            .map(|mut idx| {
                (0..members.len())
                    .map(|_| {
                        let v = idx % choices.len();
                        idx /= choices.len();
                        v
                    })
                    .collect()
            })
            .collect()
    } else {
        let last = choices.iter().position(|&d| d == full).unwrap();
        vec![vec![last; members.len()]]
    };

    let build = |assign: &[usize]| -> RegionPartition {
        let mut cells: BTreeMap<UserSet, Region> = BTreeMap::new();
        for (g, &ci) in members.iter().zip(assign) {
            cells.entry(choices[ci]).or_default().insert((*g).clone());
        }
        RegionPartition::new(cells).expect("cells are disjoint by construction")
    };

    let mut plans = Vec::with_capacity(assignments.len());
    for assign in &assignments {
        let part = build(assign);
        let cell_plans: Vec<(UserSet, Plan)> = part
            .cells()
            .map(|(d, r)| {
                let mut p = Plan::default();
                plan_subset(model, d, r, &mut p);
                (d, p)
            })
            .collect();
        plans.push((part, cell_plans));
    }
    let mut cache = ExponentCache::new(GridSpec::default());
    cache.ensure(
        model,
        alpha,
        plans
            .iter()
            .flat_map(|(_, cps)| cps.iter().flat_map(|(_, p)| p.keys()))
            .collect::<Vec<_>>(),
    )?;

    let norm = log_norm(model, alpha, n);
    let mut best: Option<(f64, Vec<BoundTerm>, RegionPartition)> = None;
    for (part, cell_plans) in plans {
        let mut acc = LogSumExp::new();
        let mut terms = Vec::new();
        for (_, p) in &cell_plans {
            let (l, t) = p.evaluate(&cache, n);
            acc.add(l);
            terms.extend(t);
        }
        let total = acc.value();
        if best.as_ref().is_none_or(|(b, _, _)| total < *b) {
            best = Some((total, terms, part));
        }
    }
    let (log_sum, terms, part) =
        best.unwrap_or_else(|| (f64::NEG_INFINITY, Vec::new(), RegionPartition::default()));
    let mut report = BoundReport::from_log("partitioned", log_sum - norm, n, terms);
    report.heuristic = !exhaustive;
    Ok((report, part))
}

/// Bound on `GEP_D` under the operation-margin error model.
///
/// Terms for `S` with `D \ S` nonempty are those of [`gep_bound_d`]. For
/// `S ⊇ D` the transmitted codeword must also pass its own threshold, whose
/// competing vectors lie outside `R_D ∪ R^_D`; vectors of the margin are
/// charged nothing for these `S`.
pub fn gep_bound_margin(
    model: &SystemModel,
    d: UserSet,
    r_d: &Region,
    margin: &Region,
    alpha: &WeightFunction,
    n: usize,
) -> Result<BoundReport> {
    check_d(model, d, r_d)?;
    model.check_region(margin)?;
    if !r_d.is_disjoint(margin) {
        return Err(Error::OverlappingMargin);
    }
    let mut plan = Plan::default();
    plan_subset(model, d, r_d, &mut plan);
    plan_margin_extra(model, d, r_d, margin, &mut plan);
    let mut cache = ExponentCache::new(GridSpec::default());
    cache.ensure(model, alpha, plan.keys())?;
    let (log_sum, terms) = plan.evaluate(&cache, n);
    Ok(BoundReport::from_log(
        "margin",
        log_sum - log_norm(model, alpha, n),
        n,
        terms,
    ))
}

/// `sum_{g~ ∉ C} e^{-N E_c(g, g~)}` with `C` the cell containing `g`.
///
/// This bounds `Pr{g^ ∉ C | g} e^{-N alpha(g)}`. `value` is clamped to 1
/// only when `alpha(g) = 0`, i.e. when it is a probability bound.
pub fn detection_bound(
    model: &SystemModel,
    g: &CodeIndexVector,
    cells: &[Region],
    alpha: &WeightFunction,
    n: usize,
) -> Result<BoundReport> {
    model.check_vector(g)?;
    let space = model.code_space();
    validate_cover(&space, cells)?;
    let own = cells.iter().find(|c| c.contains(g)).expect("cover checked");
    let mut plan = Plan::default();
    for h in space.iter().filter(|h| !own.contains(h)) {
        plan.single(ExponentKey {
            kind: ExponentKind::Ec,
            d: UserSet::EMPTY,
            s: UserSet::EMPTY,
            g: g.clone(),
            other: h,
        });
    }
    let mut cache = ExponentCache::new(GridSpec::default());
    cache.ensure(model, alpha, plan.keys())?;
    let (log_sum, terms) = plan.evaluate(&cache, n);
    let mut report = BoundReport::from_log("detection", log_sum, n, terms);
    if alpha.get(g) != 0.0 {
        report.value = log_sum.exp();
    }
    Ok(report)
}
