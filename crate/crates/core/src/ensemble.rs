//! The random-coding ensemble: message counts, seeded codebook draws and
//! per-symbol ensemble expectations.
//!
//! # Seeding
//!
//! Every random quantity is derived from a `master_seed` through
//! [`mix_seed`], a SplitMix64 chain over a fixed tuple of integers. The
//! codebook of regular user `k`, code `g_k` is generated by a ChaCha8 stream
//! seeded with `mix_seed(&[master_seed, k, g_k])`; within that stream the
//! symbols are drawn message by message, symbol by symbol, each by inverse
//! CDF on one uniform `f64`. The result depends only on the seed and the
//! model, never on scheduling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::channel::{marginal_over, SystemModel};
use crate::error::{Error, Result};
use crate::logmath::{ln0, scaled, LogSumExp};
use crate::space::{CodeIndexVector, UserSet};

/// Codebooks larger than this many symbols in total are refused.
pub const MAX_CODEBOOK_SYMBOLS: u64 = 1 << 28;

/// `max(1, floor(e^{N * rate}))`, saturating at `u64::MAX`.
pub fn message_count(rate: f64, n: usize) -> u64 {
    let x = n as f64 * rate;
    if x >= 44.0 {
        return u64::MAX;
    }
    let v = x.exp();
    // e^{3 ln 2} evaluates to 7.999..., so snap values within rounding of an integer
    let r = v.round();
    let count = if (v - r).abs() <= 1e-9 * r.max(1.0) {
        r
    } else {
        v.floor()
    };
    (count as u64).max(1)
}

/// SplitMix64 folded over `parts`.
pub fn mix_seed(parts: &[u64]) -> u64 {
    let mut state: u64 = 0x243F_6A88_85A3_08D3;
    for &p in parts {
        state ^= p;
        state = splitmix64(state);
    }
    state
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Draws an index from `pmf` given a uniform sample in `[0, 1)`.
#[inline]
pub fn inverse_cdf(pmf: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (i, &p) in pmf.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    // rounding left u above the last partial sum; take the last supported symbol
    pmf.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}

pub fn sample_from<R: Rng + ?Sized>(rng: &mut R, pmf: &[f64]) -> usize {
    inverse_cdf(pmf, rng.gen::<f64>())
}

/// Codewords of one code of one user, stored row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Codebook {
    n: usize,
    count: u64,
    seed: u64,
    symbols: Vec<u16>,
}

impl Codebook {
    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn word(&self, w: u64) -> Option<&[u16]> {
        (w < self.count).then(|| {
            let start = w as usize * self.n;
            &self.symbols[start..start + self.n]
        })
    }

    pub fn words(&self) -> impl Iterator<Item = &[u16]> {
        self.symbols.chunks(self.n)
    }
}

/// One draw of every regular user's codebook (one `theta` per user).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CodebookRealization {
    n: usize,
    master_seed: u64,
    books: Vec<Vec<Codebook>>,
}

impl CodebookRealization {
    pub fn blocklength(&self) -> usize {
        self.n
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn codebook(&self, user: usize, code: usize) -> Result<&Codebook> {
        self.books
            .get(user)
            .and_then(|b| b.get(code))
            .ok_or(Error::MissingCodebook { user, code })
    }

    /// Table inverse of [`encode`]: the first message whose codeword is `word`.
    pub fn locate(&self, user: usize, code: usize, word: &[u16]) -> Option<u64> {
        let book = self.codebook(user, code).ok()?;
        book.words().position(|w| w == word).map(|i| i as u64)
    }
}

/// Samples codebooks for every regular user and every code in its library.
/// Interfering users get none: the receiver only knows their input
/// distributions.
pub fn sample_codebook(
    model: &SystemModel,
    n: usize,
    master_seed: u64,
) -> Result<CodebookRealization> {
    if n == 0 {
        return Err(Error::InvalidModel("blocklength must be at least 1".into()));
    }
    let mut books = Vec::with_capacity(model.num_regular());
    for k in 0..model.num_regular() {
        let mut user_books = Vec::with_capacity(model.library(k).len());
        for (gk, code) in model.library(k).iter().enumerate() {
            let count = message_count(code.rate, n);
            let total = count.saturating_mul(n as u64);
            if total > MAX_CODEBOOK_SYMBOLS {
                return Err(Error::InvalidModel(format!(
                    "user {} code {gk}: {count} codewords of length {n} exceed the sampling limit",
                    k + 1
                )));
            }
            let seed = mix_seed(&[master_seed, k as u64, gk as u64]);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let symbols = (0..total)
                .map(|_| sample_from(&mut rng, &code.input_pmf) as u16)
                .collect();
            user_books.push(Codebook {
                n,
                count,
                seed,
                symbols,
            });
        }
        books.push(user_books);
    }
    Ok(CodebookRealization {
        n,
        master_seed,
        books,
    })
}

impl CodebookRealization {
    /// A fixed codebook given as `words[user][code][message]`, for decoder
    /// debugging and exact enumeration. Every code must hold exactly
    /// `message_count(rate, n)` words of length `n` with in-range symbols.
    pub fn from_words(
        model: &SystemModel,
        n: usize,
        words: Vec<Vec<Vec<Vec<u16>>>>,
    ) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidModel("blocklength must be at least 1".into()));
        }
        if words.len() != model.num_regular() {
            return Err(Error::ShapeMismatch(format!(
                "{} codebook lists for {} regular users",
                words.len(),
                model.num_regular()
            )));
        }
        let mut books = Vec::with_capacity(words.len());
        for (k, user_words) in words.into_iter().enumerate() {
            if user_words.len() != model.library(k).len() {
                return Err(Error::ShapeMismatch(format!(
                    "user {}: wrong number of codes",
                    k + 1
                )));
            }
            let alphabet = model.dmc().input_sizes()[k];
            let mut user_books = Vec::with_capacity(user_words.len());
            for (gk, list) in user_words.into_iter().enumerate() {
                let count = message_count(model.rate(k, gk), n);
                if list.len() as u64 != count {
                    return Err(Error::ShapeMismatch(format!(
                        "user {} code {gk}: {} words, expected {count}",
                        k + 1,
                        list.len()
                    )));
                }
                if list
                    .iter()
                    .any(|w| w.len() != n || w.iter().any(|&x| x as usize >= alphabet))
                {
                    return Err(Error::ShapeMismatch(format!(
                        "user {} code {gk}: malformed word",
                        k + 1
                    )));
                }
                user_books.push(Codebook {
                    n,
                    count,
                    seed: 0,
                    symbols: list.concat(),
                });
            }
            books.push(user_books);
        }
        Ok(CodebookRealization {
            n,
            master_seed: 0,
            books,
        })
    }
}

/// The codeword for message `w` (0-based) of code `code` of `user`.
pub fn encode(books: &CodebookRealization, w: u64, code: usize, user: usize) -> Result<&[u16]> {
    let book = books
        .books
        .get(user)
        .ok_or(Error::MissingCodebook { user, code })?
        .get(code)
        .ok_or(Error::CodeOutOfRange { user, code })?;
    book.word(w).ok_or(Error::MessageOutOfRange {
        user,
        message: w,
        count: book.count,
    })
}

/// Enumeration of `x_D` split into the fixed part `x_{S∩D}` and the free part
/// `x_{D\S}`, with their joint indices.
#[derive(Debug, Clone)]
pub(crate) struct LetterLayout {
    pub fixed_users: Vec<usize>,
    pub free_users: Vec<usize>,
    pub fixed_sizes: Vec<usize>,
    pub n_fixed: usize,
    pub n_free: usize,
    /// `free[ft]`: the free users' symbols for free index `ft`.
    pub free: Vec<Vec<usize>>,
    /// `xd[fu * n_free + ft]`: symbols of `D` in ascending user order.
    pub xd: Vec<Vec<usize>>,
}

impl LetterLayout {
    pub fn new(model: &SystemModel, d: UserSet, s: UserSet) -> Self {
        let sizes = model.dmc().input_sizes();
        let d_users = d.to_vec();
        let fixed_users = s.intersect(d).to_vec();
        let free_users = d.minus(s).to_vec();
        let fixed_sizes: Vec<usize> = fixed_users.iter().map(|&k| sizes[k]).collect();
        let free_sizes: Vec<usize> = free_users.iter().map(|&k| sizes[k]).collect();
        let n_fixed: usize = fixed_sizes.iter().product();
        let n_free: usize = free_sizes.iter().product();
        let free: Vec<Vec<usize>> = (0..n_free).map(|ft| unrank(ft, &free_sizes)).collect();
        let mut xd = Vec::with_capacity(n_fixed * n_free);
        for fu in 0..n_fixed {
            let xu = unrank(fu, &fixed_sizes);
            for xt in &free {
                xd.push(
                    d_users
                        .iter()
                        .map(|k| match fixed_users.binary_search(k) {
                            Ok(i) => xu[i],
                            Err(_) => xt[free_users.binary_search(k).unwrap()],
                        })
                        .collect(),
                );
            }
        }
        LetterLayout {
            fixed_users,
            free_users,
            fixed_sizes,
            n_fixed,
            n_free,
            free,
            xd,
        }
    }

    /// `sum_{k in D\S} log P_{X|h_k}(x_k)` for free index `ft`.
    pub fn free_log_weight(&self, model: &SystemModel, h: &CodeIndexVector, ft: usize) -> f64 {
        self.free_users
            .iter()
            .zip(&self.free[ft])
            .map(|(&k, &x)| ln0(model.input_pmf(k, h.get(k))[x]))
            .sum()
    }

    /// `sum_{k in S∩D} log P_{X|h_k}(x_k)` for fixed index `fu`.
    pub fn fixed_log_weight(&self, model: &SystemModel, h: &CodeIndexVector, fu: usize) -> f64 {
        self.fixed_users
            .iter()
            .zip(unrank(fu, &self.fixed_sizes))
            .map(|(&k, x)| ln0(model.input_pmf(k, h.get(k))[x]))
            .sum()
    }
}

/// Per-letter table of `log sum_{x_T} prod_{k in T} P_{X|g_k}(x_k) P(y | x_U, x_T, g)^a`
/// for `T = D \ S`, `U = S ∩ D`, indexed by `(x_U, y)`.
///
/// Summing table entries along a sequence gives the log ensemble expectation
/// of `P(y | x_D, g)^a` over the codewords of the users in `T`.
#[derive(Debug, Clone)]
pub struct EnsembleTable {
    fixed_users: Vec<usize>,
    fixed_sizes: Vec<usize>,
    output_size: usize,
    table: Vec<f64>,
}

impl EnsembleTable {
    pub fn new(model: &SystemModel, d: UserSet, s: UserSet, g: &CodeIndexVector, a: f64) -> Self {
        let layout = LetterLayout::new(model, d, s);
        let marginal = marginal_over(model, d, g);
        let ny = marginal.output_size();
        let free_w: Vec<f64> = (0..layout.n_free)
            .map(|ft| layout.free_log_weight(model, g, ft))
            .collect();
        let mut table = vec![f64::NEG_INFINITY; layout.n_fixed * ny];
        for fu in 0..layout.n_fixed {
            for y in 0..ny {
                let mut acc = LogSumExp::new();
                for (ft, &lw) in free_w.iter().enumerate() {
                    if lw == f64::NEG_INFINITY {
                        continue;
                    }
                    let x_d = &layout.xd[fu * layout.n_free + ft];
                    acc.add(lw + scaled(a, ln0(marginal.prob(x_d, y))));
                }
                table[fu * ny + y] = acc.value();
            }
        }
        EnsembleTable {
            fixed_users: layout.fixed_users,
            fixed_sizes: layout.fixed_sizes,
            output_size: ny,
            table,
        }
    }

    /// Users whose symbols are held fixed, ascending.
    pub fn fixed_users(&self) -> &[usize] {
        &self.fixed_users
    }

    pub fn output_size(&self) -> usize {
        self.output_size
    }

    pub fn num_fixed_inputs(&self) -> usize {
        self.table.len() / self.output_size
    }

    #[inline]
    pub fn letter(&self, fixed_joint: usize, y: usize) -> f64 {
        self.table[fixed_joint * self.output_size + y]
    }

    /// Mixed-radix index of one symbol per fixed user.
    #[inline]
    pub fn fixed_index(&self, symbols: impl Iterator<Item = usize>) -> usize {
        symbols
            .zip(&self.fixed_sizes)
            .fold(0, |acc, (x, &n)| acc * n + x)
    }

    /// Sum of letters along `y`, with `fixed[i]` the sequence of the `i`-th
    /// fixed user.
    pub fn sequence(&self, fixed: &[&[u16]], y: &[usize]) -> f64 {
        (0..y.len())
            .map(|j| {
                let idx = self.fixed_index(fixed.iter().map(|seq| seq[j] as usize));
                self.letter(idx, y[j])
            })
            .sum()
    }
}

pub(crate) fn unrank(mut idx: usize, sizes: &[usize]) -> Vec<usize> {
    let mut v = vec![0; sizes.len()];
    for (slot, &n) in v.iter_mut().zip(sizes).rev() {
        *slot = idx % n;
        idx /= n;
    }
    v
}

/// `sum_j log E_{theta_{D\S}}[P(y_j | x_{S∩D,j}, X_{D\S}, g)^a]`: the log
/// ensemble expectation of the `a`-th power of the sequence likelihood, with
/// the codewords of users in `S ∩ D` fixed to `x_fixed` (ascending user order).
///
/// Zero-probability outcomes are left out of the inner sums (`0^a = 0`); an
/// expectation with no support is returned as `-inf`.
pub fn ensemble_log_expectation(
    model: &SystemModel,
    d: UserSet,
    s: UserSet,
    g: &CodeIndexVector,
    y: &[usize],
    x_fixed: &[&[u16]],
    a: f64,
) -> Result<f64> {
    if !d.is_subset_of(model.regular_users()) {
        return Err(Error::SubsetOutOfRange(d.0));
    }
    if !s.is_subset_of(model.all_users()) {
        return Err(Error::SubsetOutOfRange(s.0));
    }
    model.check_vector(g)?;
    let fixed = s.intersect(d);
    if x_fixed.len() != fixed.len() || x_fixed.iter().any(|x| x.len() != y.len()) {
        return Err(Error::ShapeMismatch(format!(
            "expected {} fixed sequences of length {}",
            fixed.len(),
            y.len()
        )));
    }
    if y.iter().any(|&v| v >= model.dmc().output_size()) {
        return Err(Error::ShapeMismatch("output symbol out of range".into()));
    }
    Ok(EnsembleTable::new(model, d, s, g, a).sequence(x_fixed, y))
}
