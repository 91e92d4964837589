//! Threshold decoders: the `(D, R_D)` decoder, the receiver that combines
//! several of them, the operation-margin variant and detect-then-decode.
//!
//! A candidate is a tuple `(w_D, g)` with `g ∈ R_D` and one message per user
//! of `D`. Its score is the per-symbol weighted negative log-likelihood
//! `-(1/N) log P(y | x_{(w_D, g_D)}, g_D) + alpha(g)`; lower is better.
//!
//! For every `S` with `D \ S` nonempty the candidate set `R_(S,y)` holds the
//! candidates whose score is below their threshold `tau_(g,S)`. The decoder
//! outputs `(w_D, g)` when, for every such `S`, it lies in `R_(S,y)` and
//! strictly out-scores each member of `R_(S,y)` that is an `S`-competitor of
//! it. Passing tuples that share `(w_D, g_D)` are one decision; any other
//! situation, including distinct decisions passing, is a collision.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::channel::{marginal_over, output_marginal, SystemModel};
use crate::ensemble::{CodebookRealization, EnsembleTable};
use crate::error::{Error, Result};
use crate::exponents::{EidProblem, ExponentResult, WeightFunction};
use crate::logmath::{ln0, scaled};
use crate::optimize::GridSpec;
use crate::space::{validate_cover, CodeIndexVector, Region, RegionPartition, UserSet};

/// Score differences at or below this (nats per symbol) count as ties.
pub const TIE_TOL: f64 = 1e-12;

/// `(w_D, g)`: one message per user of `D` in ascending user order, and the
/// full code index vector.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Tuple {
    pub w: Vec<u64>,
    pub g: CodeIndexVector,
}

/// The relation `(w~_D, g~) =_S (w_D, g)`.
///
/// Holds iff messages and code indices agree on `S ∩ D`, code indices agree
/// on `S \ D`, `(w_k, g_k) != (w~_k, g~_k)` for each `k ∈ D \ S`, and
/// `g_k != g~_k` for each user outside both `D` and `S`.
pub fn competitor_match(s: UserSet, d: UserSet, a: &Tuple, b: &Tuple) -> bool {
    for (i, k) in d.iter().enumerate() {
        let same = a.w[i] == b.w[i] && a.g.get(k) == b.g.get(k);
        if s.contains(k) != same {
            return false;
        }
    }
    (0..a.g.len())
        .filter(|&k| !d.contains(k))
        .all(|k| s.contains(k) == (a.g.get(k) == b.g.get(k)))
}

/// Auxiliary variables fixing one threshold: `rho~`, `s2 < rho~`,
/// `s1 = 1 - s2/rho~`, the competing vector `g*`, and the equivalent `E_iD`
/// point `(rho, s)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThresholdParams {
    pub rho_tilde: f64,
    pub s1: f64,
    pub s2: f64,
    pub gstar: CodeIndexVector,
    pub rho: f64,
    pub s: f64,
    /// `E_iD` objective at `(rho, s)` against `g*`.
    pub exponent: f64,
}

impl ThresholdParams {
    /// `(rho~, s2) -> (rho, s)`.
    pub fn change_of_variables(rho_tilde: f64, s2: f64) -> (f64, f64) {
        let den = rho_tilde - (1.0 - rho_tilde) * s2;
        (
            rho_tilde * (rho_tilde - s2) / den,
            1.0 - (rho_tilde - s2) / den,
        )
    }

    /// Grid choice of `(rho~, s2)`: `rho~ ∈ {0.1, ..., 1.0}`,
    /// `s2 = rho~ j / 9` for `j = 1..8`, maximizing the `E_iD` objective.
    pub fn choose(problem: &EidProblem, gstar: CodeIndexVector) -> Self {
        let mut best: Option<ThresholdParams> = None;
        for i in 1..=10 {
            let rho_tilde = i as f64 / 10.0;
            for j in 1..=8 {
                let s2 = rho_tilde * j as f64 / 9.0;
                let (rho, s) = Self::change_of_variables(rho_tilde, s2);
                let e = problem.objective(rho, s);
                if best.as_ref().is_none_or(|b| e > b.exponent) {
                    best = Some(ThresholdParams {
                        rho_tilde,
                        s1: 1.0 - s2 / rho_tilde,
                        s2,
                        gstar: gstar.clone(),
                        rho,
                        s,
                        exponent: e,
                    });
                }
            }
        }
        best.unwrap()
    }
}

/// The competing vector `g' ∉ excluded`, `g'_S = g_S` with the smallest
/// optimized `E_iD(S, g, g')`; ties go to the lexicographically first.
/// `None` when there is no candidate.
pub fn select_gstar(
    model: &SystemModel,
    d: UserSet,
    s: UserSet,
    g: &CodeIndexVector,
    excluded: &Region,
    alpha: &WeightFunction,
) -> Result<Option<(CodeIndexVector, ExponentResult)>> {
    let mut best: Option<(CodeIndexVector, ExponentResult)> = None;
    for h in model.code_space().iter() {
        if excluded.contains(&h) || !h.agrees_on(g, s) {
            continue;
        }
        let e =
            EidProblem::new_allow_empty(model, d, s, g, &h, alpha)?.maximize(GridSpec::default());
        if best.as_ref().is_none_or(|(_, b)| e.value < b.value) {
            best = Some((h, e));
        }
    }
    Ok(best)
}

/// Per-letter form of one threshold:
/// `tau(x_U, y) = (1/N) sum_j letter(x_{U,j}, y_j) + offset`.
#[derive(Debug, Clone)]
pub struct ThresholdTable {
    pub params: ThresholdParams,
    own: EnsembleTable,
    letters: Vec<f64>,
    offset: f64,
}

impl ThresholdTable {
    pub fn new(
        model: &SystemModel,
        d: UserSet,
        s: UserSet,
        g: &CodeIndexVector,
        params: ThresholdParams,
        alpha: &WeightFunction,
    ) -> Self {
        let ThresholdParams {
            rho_tilde: rt,
            s1,
            s2,
            ..
        } = params;
        let own = EnsembleTable::new(model, d, s, g, s2 / rt);
        let rival = EnsembleTable::new(model, d, s, &params.gstar, 1.0);
        let denom = s1 + s2;
        let mut letters = Vec::with_capacity(own.num_fixed_inputs() * own.output_size());
        for fu in 0..own.num_fixed_inputs() {
            for y in 0..own.output_size() {
                // L1 and L2 share the exponent 1 - s1 = s2 / rho~
                let l1 = own.letter(fu, y);
                let v = (scaled(1.0 - rt, l1) - rival.letter(fu, y)) / denom;
                letters.push(if l1 == f64::NEG_INFINITY || v.is_nan() {
                    f64::NEG_INFINITY
                } else {
                    v
                });
            }
        }
        let ag = alpha.get(g);
        let astar = alpha.get(&params.gstar);
        let rate = model.sum_rate(d.minus(s), g);
        let offset = (-(1.0 - s1) * ag + s2 * ag + astar - rt * rate) / denom;
        ThresholdTable {
            params,
            own,
            letters,
            offset,
        }
    }

    /// `tau*` for the fixed users' sequences `x_fixed` (ascending `S ∩ D`).
    pub fn tau(&self, x_fixed: &[&[u16]], y: &[usize]) -> f64 {
        let ny = self.own.output_size();
        let sum: f64 = (0..y.len())
            .map(|j| {
                let fu = self.own.fixed_index(x_fixed.iter().map(|x| x[j] as usize));
                self.letters[fu * ny + y[j]]
            })
            .sum();
        sum / y.len() as f64 + self.offset
    }
}

/// `tau*_(g,S)(x_{S∩D}, y)`, solving the balance between the
/// missed-threshold and impostor bounds.
#[allow(clippy::too_many_arguments)]
pub fn typicality_threshold(
    model: &SystemModel,
    d: UserSet,
    s: UserSet,
    g: &CodeIndexVector,
    params: &ThresholdParams,
    alpha: &WeightFunction,
    x_fixed: &[&[u16]],
    y: &[usize],
) -> f64 {
    ThresholdTable::new(model, d, s, g, params.clone(), alpha).tau(x_fixed, y)
}

/// Every threshold one receiver needs, keyed by `(D, S, g)`. `None` marks
/// an empty set of competing vectors: no constraint applies.
#[derive(Debug, Clone, Default)]
pub struct DecodeThresholds {
    tables: BTreeMap<(UserSet, UserSet, CodeIndexVector), Option<ThresholdTable>>,
}

impl DecodeThresholds {
    /// Thresholds for the `(D, R_D)` decoder: `S` with `D \ S` nonempty,
    /// competing vectors outside `R_D`. With `margin`, also `S ⊇ D` with
    /// competing vectors outside `R_D ∪ margin`.
    pub fn build(
        model: &SystemModel,
        d: UserSet,
        r_d: &Region,
        margin: Option<&Region>,
        alpha: &WeightFunction,
    ) -> Result<Self> {
        let mut out = DecodeThresholds::default();
        out.extend(model, d, r_d, margin, alpha)?;
        Ok(out)
    }

    pub fn build_receiver(
        model: &SystemModel,
        partition: &RegionPartition,
        margin: Option<&Region>,
        alpha: &WeightFunction,
    ) -> Result<Self> {
        let mut out = DecodeThresholds::default();
        for (d, r_d) in partition.cells() {
            out.extend(model, d, r_d, margin, alpha)?;
        }
        Ok(out)
    }

    fn extend(
        &mut self,
        model: &SystemModel,
        d: UserSet,
        r_d: &Region,
        margin: Option<&Region>,
        alpha: &WeightFunction,
    ) -> Result<()> {
        let mut jobs: Vec<(UserSet, CodeIndexVector, Region)> = Vec::new();
        for s in model.all_users().subsets() {
            let excluded = if !d.minus(s).is_empty() {
                r_d.clone()
            } else if let Some(m) = margin {
                r_d.union(m)
            } else {
                continue;
            };
            for g in r_d.iter() {
                jobs.push((s, g.clone(), excluded.clone()));
            }
        }
        let run = |(s, g, excluded): &(UserSet, CodeIndexVector, Region)| -> Result<Option<ThresholdTable>> {
            Ok(match select_gstar(model, d, *s, g, excluded, alpha)? {
                None => None,
                Some((gstar, _)) => {
                    let problem = EidProblem::new_allow_empty(model, d, *s, g, &gstar, alpha)?;
                    let params = ThresholdParams::choose(&problem, gstar);
                    Some(ThresholdTable::new(model, d, *s, g, params, alpha))
                }
            })
        };
        #[cfg(feature = "parallel")]
        let tables: Vec<Result<Option<ThresholdTable>>> = {
            use rayon::prelude::*;
            jobs.par_iter().map(run).collect()
        };
        #[cfg(not(feature = "parallel"))]
        let tables: Vec<Result<Option<ThresholdTable>>> = jobs.iter().map(run).collect();
        for ((s, g, _), t) in jobs.into_iter().zip(tables) {
            self.tables.insert((d, s, g), t?);
        }
        Ok(())
    }

    pub fn get(
        &self,
        d: UserSet,
        s: UserSet,
        g: &CodeIndexVector,
    ) -> Result<Option<&ThresholdTable>> {
        self.tables
            .get(&(d, s, g.clone()))
            .map(Option::as_ref)
            .ok_or_else(|| Error::MissingThreshold {
                d: d.to_string(),
                s: s.to_string(),
                g: g.to_string(),
            })
    }

    pub fn iter(
        &self,
    ) -> impl Iterator<
        Item = (
            &(UserSet, UserSet, CodeIndexVector),
            &Option<ThresholdTable>,
        ),
    > {
        self.tables.iter()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum OutcomeKind {
    Decoded { w1: u64, g1: usize, tuple: Tuple },
    Collision,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubsetDiagnostic {
    pub d: UserSet,
    pub s: UserSet,
    /// `|R_(S,y)|`.
    pub members: usize,
    /// Best-scoring member of `R_(S,y)`.
    pub winner: Option<Tuple>,
    /// Threshold of the winner.
    pub winner_tau: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecodeOutcome {
    pub kind: OutcomeKind,
    /// Decoders `D` that produced an output.
    pub decoded_by: Vec<UserSet>,
    pub diagnostics: Vec<SubsetDiagnostic>,
    pub candidates_evaluated: usize,
}

impl DecodeOutcome {
    pub fn collision() -> Self {
        DecodeOutcome {
            kind: OutcomeKind::Collision,
            decoded_by: Vec::new(),
            diagnostics: Vec::new(),
            candidates_evaluated: 0,
        }
    }

    pub fn is_collision(&self) -> bool {
        self.kind == OutcomeKind::Collision
    }

    /// `(w1, g1)` when decoded.
    pub fn user_one(&self) -> Option<(u64, usize)> {
        match &self.kind {
            OutcomeKind::Decoded { w1, g1, .. } => Some((*w1, *g1)),
            OutcomeKind::Collision => None,
        }
    }
}

/// Which error events of the analysis fire on one received word, given the
/// truth.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct EventFlags {
    pub s: UserSet,
    /// Transmitted `g ∈ R_D` and its codeword misses the threshold.
    pub missed_threshold: bool,
    /// Transmitted `g ∈ R_D` and an `S`-competitor scores at least as well.
    pub outscored: bool,
    /// Transmitted `g ∉ R_D` and an `S`-related candidate passes its threshold.
    pub impostor: bool,
}

/// Scored candidates of one `(D, R_D)` decoder on one received word.
struct Evaluation {
    cands: Vec<Tuple>,
    scores: Vec<f64>,
    /// `(S, membership per candidate, tau per candidate)`.
    sets: Vec<(UserSet, Vec<bool>, Vec<f64>)>,
    /// Same for `S ⊇ D` (margin decoder only).
    extra: Vec<(UserSet, Vec<bool>, Vec<f64>)>,
}

fn codeword_tuples(d: UserSet, r_d: &Region, books: &CodebookRealization) -> Result<Vec<Tuple>> {
    let users = d.to_vec();
    let mut out = Vec::new();
    for g in r_d.iter() {
        let counts = users
            .iter()
            .map(|&k| books.codebook(k, g.get(k)).map(|b| b.count()))
            .collect::<Result<Vec<u64>>>()?;
        let mut w = vec![0u64; users.len()];
        'next: loop {
            out.push(Tuple {
                w: w.clone(),
                g: g.clone(),
            });
            for i in (0..w.len()).rev() {
                w[i] += 1;
                if w[i] < counts[i] {
                    continue 'next;
                }
                w[i] = 0;
            }
            break;
        }
    }
    Ok(out)
}

fn words<'a>(books: &'a CodebookRealization, d: UserSet, t: &Tuple) -> Vec<&'a [u16]> {
    d.iter()
        .zip(&t.w)
        .map(|(k, &w)| books.codebook(k, t.g.get(k)).unwrap().word(w).unwrap())
        .collect()
}

/// Codewords of the users in `S ∩ D`, ascending.
fn fixed_words<'a>(
    books: &'a CodebookRealization,
    d: UserSet,
    s: UserSet,
    t: &Tuple,
) -> Vec<&'a [u16]> {
    d.iter()
        .zip(&t.w)
        .filter(|(k, _)| s.contains(*k))
        .map(|(k, &w)| books.codebook(k, t.g.get(k)).unwrap().word(w).unwrap())
        .collect()
}

#[allow(clippy::too_many_arguments)]
fn evaluate(
    model: &SystemModel,
    d: UserSet,
    r_d: &Region,
    with_margin: bool,
    alpha: &WeightFunction,
    books: &CodebookRealization,
    y: &[usize],
    thresholds: &DecodeThresholds,
) -> Result<Evaluation> {
    let cands = codeword_tuples(d, r_d, books)?;
    let mut marginals: BTreeMap<&CodeIndexVector, Vec<f64>> = BTreeMap::new();
    for g in r_d.iter() {
        let m = marginal_over(model, d, g);
        let ny = m.output_size();
        let table = (0..m.num_inputs())
            .flat_map(|x| m.row(x).iter().map(|&p| ln0(p)).collect::<Vec<_>>())
            .collect::<Vec<_>>();
        debug_assert_eq!(table.len(), m.num_inputs() * ny);
        marginals.insert(g, table);
    }
    let sizes: Vec<usize> = d.iter().map(|k| model.dmc().input_sizes()[k]).collect();
    let ny = model.dmc().output_size();
    let n = y.len() as f64;
    let scores: Vec<f64> = cands
        .iter()
        .map(|t| {
            let table = &marginals[&t.g];
            let xs = words(books, d, t);
            let ll: f64 = (0..y.len())
                .map(|j| {
                    let xi = xs
                        .iter()
                        .zip(&sizes)
                        .fold(0, |acc, (x, &n)| acc * n + x[j] as usize);
                    table[xi * ny + y[j]]
                })
                .sum();
            -ll / n + alpha.get(&t.g)
        })
        .collect();

    let mut sets = Vec::new();
    let mut extra = Vec::new();
    for s in model.all_users().subsets() {
        let plain = !d.minus(s).is_empty();
        if !plain && !with_margin {
            continue;
        }
        let mut member = Vec::with_capacity(cands.len());
        let mut taus = Vec::with_capacity(cands.len());
        for (t, &score) in cands.iter().zip(&scores) {
            let tau = match thresholds.get(d, s, &t.g)? {
                None => f64::INFINITY,
                Some(table) => table.tau(&fixed_words(books, d, s, t), y),
            };
            member.push(score < tau);
            taus.push(tau);
        }
        if plain {
            sets.push((s, member, taus));
        } else {
            extra.push((s, member, taus));
        }
    }
    Ok(Evaluation {
        cands,
        scores,
        sets,
        extra,
    })
}

impl Evaluation {
    fn passes(&self, d: UserSet, c: usize) -> bool {
        for (s, member, _) in &self.sets {
            if !member[c] {
                return false;
            }
            let beaten = self.cands.iter().enumerate().any(|(o, other)| {
                o != c
                    && member[o]
                    && competitor_match(*s, d, &self.cands[c], other)
                    && self.scores[c] >= self.scores[o] - TIE_TOL
            });
            if beaten {
                return false;
            }
        }
        self.extra.iter().all(|(_, member, _)| member[c])
    }

    fn outcome(&self, d: UserSet) -> DecodeOutcome {
        let passing: Vec<usize> = (0..self.cands.len())
            .filter(|&c| self.passes(d, c))
            .collect();
        let diagnostics = self
            .sets
            .iter()
            .chain(&self.extra)
            .map(|(s, member, taus)| {
                let best = (0..self.cands.len())
                    .filter(|&c| member[c])
                    .min_by(|&a, &b| self.scores[a].total_cmp(&self.scores[b]));
                SubsetDiagnostic {
                    d,
                    s: *s,
                    members: member.iter().filter(|&&m| m).count(),
                    winner: best.map(|c| self.cands[c].clone()),
                    winner_tau: best.map(|c| taus[c]),
                }
            })
            .collect();
        // tuples that differ only in code indices outside D name the same
        // codeword vector, so they count as one decision
        let same_codewords =
            |a: &Tuple, b: &Tuple| a.w == b.w && d.iter().all(|k| a.g.get(k) == b.g.get(k));
        let kind = match passing.split_first() {
            Some((c, rest))
                if rest
                    .iter()
                    .all(|&o| same_codewords(&self.cands[*c], &self.cands[o])) =>
            {
                let t = self.cands[*c].clone();
                OutcomeKind::Decoded {
                    w1: t.w[0],
                    g1: t.g.get(0),
                    tuple: t,
                }
            }
            _ => OutcomeKind::Collision,
        };
        DecodeOutcome {
            decoded_by: if kind == OutcomeKind::Collision {
                vec![]
            } else {
                vec![d]
            },
            kind,
            diagnostics,
            candidates_evaluated: self.cands.len(),
        }
    }

    fn events(&self, d: UserSet, truth: &Tuple, in_region: bool) -> Vec<EventFlags> {
        let me = self.cands.iter().position(|c| c == truth);
        self.sets
            .iter()
            .map(|(s, member, _)| {
                let mut f = EventFlags {
                    s: *s,
                    missed_threshold: false,
                    outscored: false,
                    impostor: false,
                };
                if in_region {
                    if let Some(c) = me {
                        f.missed_threshold = !member[c];
                        f.outscored = self.cands.iter().enumerate().any(|(o, other)| {
                            competitor_match(*s, d, truth, other)
                                && self.scores[o] <= self.scores[c]
                        });
                    }
                } else {
                    f.impostor = self
                        .cands
                        .iter()
                        .enumerate()
                        .any(|(o, other)| member[o] && competitor_match(*s, d, other, truth));
                }
                f
            })
            .collect()
    }
}

fn check_subset(model: &SystemModel, d: UserSet, r_d: &Region) -> Result<()> {
    if !d.contains(0) {
        return Err(Error::UserOneMissing);
    }
    if !d.is_subset_of(model.regular_users()) {
        return Err(Error::SubsetOutOfRange(d.0));
    }
    model.check_region(r_d)
}

/// The `(D, R_D)` decoder.
pub fn decode_subset(
    model: &SystemModel,
    d: UserSet,
    r_d: &Region,
    alpha: &WeightFunction,
    books: &CodebookRealization,
    y: &[usize],
    thresholds: &DecodeThresholds,
) -> Result<DecodeOutcome> {
    check_subset(model, d, r_d)?;
    Ok(evaluate(model, d, r_d, false, alpha, books, y, thresholds)?.outcome(d))
}

/// Error events of the `(D, R_D)` decoder for a known transmitted tuple.
/// `truth.w` holds one message per user of `D`.
#[allow(clippy::too_many_arguments)]
pub fn subset_events(
    model: &SystemModel,
    d: UserSet,
    r_d: &Region,
    alpha: &WeightFunction,
    books: &CodebookRealization,
    y: &[usize],
    thresholds: &DecodeThresholds,
    truth: &Tuple,
) -> Result<Vec<EventFlags>> {
    check_subset(model, d, r_d)?;
    let ev = evaluate(model, d, r_d, false, alpha, books, y, thresholds)?;
    Ok(ev.events(d, truth, r_d.contains(&truth.g)))
}

/// The operation-margin decoder: [`decode_subset`] plus membership of the
/// output in `R_(S,y)` for every `S ⊇ D`. The thresholds must have been
/// built with the same margin.
#[allow(clippy::too_many_arguments)]
pub fn decode_margin(
    model: &SystemModel,
    d: UserSet,
    r_d: &Region,
    margin: &Region,
    alpha: &WeightFunction,
    books: &CodebookRealization,
    y: &[usize],
    thresholds: &DecodeThresholds,
) -> Result<DecodeOutcome> {
    check_subset(model, d, r_d)?;
    if !r_d.is_disjoint(margin) {
        return Err(Error::OverlappingMargin);
    }
    Ok(evaluate(model, d, r_d, true, alpha, books, y, thresholds)?.outcome(d))
}

/// Runs every `(D, R_D)` decoder of the partition and keeps the result when
/// at least one decodes and all decoded outputs agree on `(w1, g1)`.
pub fn decode_receiver(
    model: &SystemModel,
    partition: &RegionPartition,
    alpha: &WeightFunction,
    books: &CodebookRealization,
    y: &[usize],
    thresholds: &DecodeThresholds,
) -> Result<DecodeOutcome> {
    combine(
        partition
            .cells()
            .map(|(d, r_d)| decode_subset(model, d, r_d, alpha, books, y, thresholds)),
    )
}

/// [`decode_receiver`] built from [`decode_margin`] decoders sharing one margin.
pub fn decode_receiver_margin(
    model: &SystemModel,
    partition: &RegionPartition,
    margin: &Region,
    alpha: &WeightFunction,
    books: &CodebookRealization,
    y: &[usize],
    thresholds: &DecodeThresholds,
) -> Result<DecodeOutcome> {
    combine(
        partition
            .cells()
            .map(|(d, r_d)| decode_margin(model, d, r_d, margin, alpha, books, y, thresholds)),
    )
}

fn combine(outcomes: impl Iterator<Item = Result<DecodeOutcome>>) -> Result<DecodeOutcome> {
    let mut merged = DecodeOutcome::collision();
    let mut first: Option<OutcomeKind> = None;
    let mut agree = true;
    for o in outcomes {
        let o = o?;
        merged.candidates_evaluated += o.candidates_evaluated;
        merged.diagnostics.extend(o.diagnostics.iter().cloned());
        if let Some(u) = o.user_one() {
            merged.decoded_by.extend(o.decoded_by.iter().copied());
            match &first {
                None => first = Some(o.kind.clone()),
                Some(f) => {
                    if let OutcomeKind::Decoded { w1, g1, .. } = f {
                        agree &= (*w1, *g1) == u;
                    }
                }
            }
        }
    }
    merged.kind = match first {
        Some(k) if agree => k,
        _ => OutcomeKind::Collision,
    };
    Ok(merged)
}

/// Code index detection: `g^ = argmax P(y | g~) e^{-N alpha(g~)}` with the
/// i.i.d. output marginal, and the index of the cell holding it.
#[derive(Debug, Clone)]
pub struct Detector {
    cells: Vec<Region>,
    vectors: Vec<CodeIndexVector>,
    log_marginals: Vec<Vec<f64>>,
    alphas: Vec<f64>,
}

impl Detector {
    pub fn new(model: &SystemModel, cells: &[Region], alpha: &WeightFunction) -> Result<Self> {
        let space = model.code_space();
        validate_cover(&space, cells)?;
        let vectors: Vec<CodeIndexVector> = space.iter().collect();
        let log_marginals = vectors
            .iter()
            .map(|g| output_marginal(model, g).map(|p| p.iter().map(|&v| ln0(v)).collect()))
            .collect::<Result<_>>()?;
        let alphas = vectors.iter().map(|g| alpha.get(g)).collect();
        Ok(Detector {
            cells: cells.to_vec(),
            vectors,
            log_marginals,
            alphas,
        })
    }

    pub fn cells(&self) -> &[Region] {
        &self.cells
    }

    pub fn detect(&self, y: &[usize]) -> (usize, CodeIndexVector) {
        let ny = self.log_marginals.first().map_or(0, Vec::len);
        let mut counts = vec![0u64; ny];
        for &v in y {
            counts[v] += 1;
        }
        let n = y.len() as f64;
        let mut best = (f64::NEG_INFINITY, 0usize);
        for (i, lm) in self.log_marginals.iter().enumerate() {
            let ll: f64 = counts
                .iter()
                .zip(lm)
                .filter(|(&c, _)| c > 0)
                .map(|(&c, &l)| c as f64 * l)
                .sum();
            let score = ll - n * self.alphas[i];
            if score > best.0 {
                best = (score, i);
            }
        }
        let g = self.vectors[best.1].clone();
        let cell = self.cells.iter().position(|c| c.contains(&g)).unwrap();
        (cell, g)
    }
}

pub fn detect_region(
    model: &SystemModel,
    cells: &[Region],
    alpha: &WeightFunction,
    y: &[usize],
) -> Result<(usize, CodeIndexVector)> {
    Ok(Detector::new(model, cells, alpha)?.detect(y))
}

/// Detects the cell, then runs the receiver on `R ∩ C_i` only. Thresholds
/// are those of the unrestricted receiver.
pub fn decode_with_detection(
    model: &SystemModel,
    detector: &Detector,
    partition: &RegionPartition,
    alpha: &WeightFunction,
    books: &CodebookRealization,
    y: &[usize],
    thresholds: &DecodeThresholds,
) -> Result<DecodeOutcome> {
    let (cell, _) = detector.detect(y);
    let restricted = partition.restricted_to(&detector.cells[cell]);
    decode_receiver(model, &restricted, alpha, books, y, thresholds)
}
