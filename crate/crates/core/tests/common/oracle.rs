//! Independent reference computations used by the property and acceptance
//! tests. Nothing here calls the functionals it checks.

use distcode::decoder::DecodeThresholds;
use distcode::{
    CodeIndexVector, CodebookRealization, Region, SystemModel, UserSet, WeightFunction,
};

/// `P(y | x_D, g)` with every user outside `D` drawn from its input pmf.
/// `x_d` holds one symbol per user of `D`, ascending.
pub fn marginal_prob(
    model: &SystemModel,
    d: UserSet,
    g: &CodeIndexVector,
    x_d: &[usize],
    y: usize,
) -> f64 {
    let users = model.num_users();
    let sizes = model.dmc().input_sizes();
    let total: usize = sizes.iter().product();
    let mut sum = 0.0;
    'joint: for idx in 0..total {
        let x = model.dmc().joint_inputs(idx);
        let mut weight = 1.0;
        let mut slot = 0;
        for k in 0..users {
            if d.contains(k) {
                if x[k] != x_d[slot] {
                    continue 'joint;
                }
                slot += 1;
            } else {
                weight *= model.input_pmf(k, g.get(k))[x[k]];
            }
        }
        sum += weight * model.dmc().prob(&x, y);
    }
    sum
}

/// Sequence likelihood `P(y | x_D, g)`; `words[i]` is the sequence of the
/// `i`-th user of `D`.
pub fn sequence_prob(
    model: &SystemModel,
    d: UserSet,
    g: &CodeIndexVector,
    words: &[Vec<usize>],
    y: &[usize],
) -> f64 {
    (0..y.len())
        .map(|j| {
            let x: Vec<usize> = words.iter().map(|w| w[j]).collect();
            marginal_prob(model, d, g, &x, y[j])
        })
        .product()
}

/// `log E[P(y | x_D, g)^a]` over the whole codebook of every user in
/// `D \ S` (all `message_count` codewords drawn i.i.d.), scoring message 0;
/// users of `S ∩ D` send `x_fixed` (ascending). Brute force over every
/// codebook realization.
pub fn brute_force_log_expectation(
    model: &SystemModel,
    d: UserSet,
    s: UserSet,
    g: &CodeIndexVector,
    y: &[usize],
    x_fixed: &[Vec<usize>],
    a: f64,
) -> f64 {
    let n = y.len();
    let free: Vec<usize> = d.iter().filter(|k| !s.contains(*k)).collect();
    let counts: Vec<usize> = free
        .iter()
        .map(|&k| distcode::message_count(model.rate(k, g.get(k)), n) as usize)
        .collect();
    // one binary symbol per (free user, codeword, position)
    let bits: usize = counts.iter().map(|c| c * n).sum();
    let mut total = 0.0;
    for assignment in 0..1usize << bits {
        let mut prob = 1.0;
        let mut offset = 0;
        let mut first_words = Vec::with_capacity(free.len());
        for (i, &k) in free.iter().enumerate() {
            let pmf = model.input_pmf(k, g.get(k));
            let mut first = Vec::with_capacity(n);
            for w in 0..counts[i] {
                for j in 0..n {
                    let x = (assignment >> (offset + w * n + j)) & 1;
                    prob *= pmf[x];
                    if w == 0 {
                        first.push(x);
                    }
                }
            }
            offset += counts[i] * n;
            first_words.push(first);
        }
        if prob == 0.0 {
            continue;
        }
        let mut fixed_iter = x_fixed.iter();
        let mut free_iter = first_words.iter();
        let words: Vec<Vec<usize>> = d
            .iter()
            .map(|k| {
                if s.contains(k) {
                    fixed_iter.next().unwrap().clone()
                } else {
                    free_iter.next().unwrap().clone()
                }
            })
            .collect();
        let p = sequence_prob(model, d, g, &words, y);
        if p > 0.0 {
            total += prob * p.powf(a);
        }
    }
    total.ln()
}

/// The competitor relation, spelled out user by user.
pub fn related(
    s: UserSet,
    d: UserSet,
    a: &(Vec<u64>, CodeIndexVector),
    b: &(Vec<u64>, CodeIndexVector),
) -> bool {
    let mut slot = 0;
    for k in 0..a.1.len() {
        let matches = if d.contains(k) {
            let same = a.0[slot] == b.0[slot] && a.1.get(k) == b.1.get(k);
            slot += 1;
            same
        } else {
            a.1.get(k) == b.1.get(k)
        };
        if s.contains(k) != matches {
            return false;
        }
    }
    true
}

fn codeword(books: &CodebookRealization, k: usize, code: usize, w: u64) -> Vec<usize> {
    books
        .codebook(k, code)
        .unwrap()
        .word(w)
        .unwrap()
        .iter()
        .map(|&x| x as usize)
        .collect()
}

/// Threshold for candidate `(w_D, g)` solved from the balance between the
/// missed-threshold and impostor expressions, which is linear in `tau`.
#[allow(clippy::too_many_arguments)]
pub fn reference_tau(
    model: &SystemModel,
    d: UserSet,
    s: UserSet,
    cand: &(Vec<u64>, CodeIndexVector),
    alpha: &WeightFunction,
    books: &CodebookRealization,
    y: &[usize],
    thresholds: &DecodeThresholds,
) -> f64 {
    let Some(table) = thresholds.get(d, s, &cand.1).unwrap() else {
        return f64::INFINITY;
    };
    let p = &table.params;
    let fixed: Vec<Vec<usize>> = d
        .iter()
        .zip(&cand.0)
        .filter(|(k, _)| s.contains(*k))
        .map(|(k, &w)| codeword(books, k, cand.1.get(k), w))
        .collect();
    let [lhs0, lhs1, rhs0, rhs1] = balance_terms(model, d, s, &cand.1, p, alpha, &fixed, y);
    // lhs0 + lhs1 tau = rhs0 + rhs1 tau
    (rhs0 - lhs0) / (lhs1 - rhs1)
}

/// Both sides of the balance as affine functions of `tau`, in logs:
/// `[lhs_const, lhs_slope, rhs_const, rhs_slope]`.
#[allow(clippy::too_many_arguments)]
pub fn balance_terms(
    model: &SystemModel,
    d: UserSet,
    s: UserSet,
    g: &CodeIndexVector,
    p: &distcode::decoder::ThresholdParams,
    alpha: &WeightFunction,
    fixed: &[Vec<usize>],
    y: &[usize],
) -> [f64; 4] {
    let n = y.len() as f64;
    let fixed16: Vec<Vec<u16>> = fixed
        .iter()
        .map(|w| w.iter().map(|&x| x as u16).collect())
        .collect();
    let refs: Vec<&[u16]> = fixed16.iter().map(|w| w.as_slice()).collect();
    let ex = |h: &CodeIndexVector, a: f64| {
        distcode::ensemble_log_expectation(model, d, s, h, y, &refs, a).unwrap()
    };
    let rate: f64 = d
        .iter()
        .filter(|k| !s.contains(*k))
        .map(|k| model.rate(k, g.get(k)))
        .sum();
    let (rt, s1, s2) = (p.rho_tilde, p.s1, p.s2);
    let ag = alpha.get(g);
    let astar = alpha.get(&p.gstar);
    let lhs0 = ex(g, 1.0 - s1) - n * (1.0 - s1) * ag;
    let lhs1 = -n * s1;
    let rhs0 =
        ex(&p.gstar, 1.0) - n * astar + rt * (ex(g, s2 / rt) - n * (s2 / rt) * ag) + n * rt * rate;
    let rhs1 = n * s2;
    [lhs0, lhs1, rhs0, rhs1]
}

/// Exhaustive `(D, R_D)` decoder: returns the decided `(w_D, g_D)` or `None`
/// for a collision.
pub fn reference_decode(
    model: &SystemModel,
    d: UserSet,
    r_d: &Region,
    alpha: &WeightFunction,
    books: &CodebookRealization,
    y: &[usize],
    thresholds: &DecodeThresholds,
) -> Option<(Vec<u64>, Vec<usize>)> {
    let users: Vec<usize> = d.iter().collect();
    let mut cands: Vec<(Vec<u64>, CodeIndexVector)> = Vec::new();
    for g in r_d.iter() {
        let counts: Vec<u64> = users
            .iter()
            .map(|&k| books.codebook(k, g.get(k)).unwrap().count())
            .collect();
        let total: u64 = counts.iter().product();
        for mut idx in 0..total {
            let mut w = vec![0; users.len()];
            for i in (0..users.len()).rev() {
                w[i] = idx % counts[i];
                idx /= counts[i];
            }
            cands.push((w, g.clone()));
        }
    }
    let n = y.len() as f64;
    let scores: Vec<f64> = cands
        .iter()
        .map(|(w, g)| {
            let words: Vec<Vec<usize>> = users
                .iter()
                .zip(w)
                .map(|(&k, &wk)| codeword(books, k, g.get(k), wk))
                .collect();
            -sequence_prob(model, d, g, &words, y).ln() / n + alpha.get(g)
        })
        .collect();
    let subsets: Vec<UserSet> = (0..1u32 << model.num_users())
        .map(UserSet)
        .filter(|s| !d.minus(*s).is_empty())
        .collect();
    let member: Vec<Vec<bool>> = subsets
        .iter()
        .map(|&s| {
            cands
                .iter()
                .zip(&scores)
                .map(|(c, &sc)| sc < reference_tau(model, d, s, c, alpha, books, y, thresholds))
                .collect()
        })
        .collect();
    let mut decisions: Vec<(Vec<u64>, Vec<usize>)> = Vec::new();
    for c in 0..cands.len() {
        let passes = subsets.iter().zip(&member).all(|(&s, m)| {
            m[c] && (0..cands.len()).all(|o| {
                o == c
                    || !m[o]
                    || !related(s, d, &cands[c], &cands[o])
                    || scores[c] < scores[o] - 1e-12
            })
        });
        if passes {
            let key = (
                cands[c].0.clone(),
                users.iter().map(|&k| cands[c].1.get(k)).collect(),
            );
            if !decisions.contains(&key) {
                decisions.push(key);
            }
        }
    }
    match decisions.as_slice() {
        [one] => Some(one.clone()),
        _ => None,
    }
}
