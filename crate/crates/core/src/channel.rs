//! Finite discrete memoryless channels, code libraries and the marginal
//! channels seen by a receiver that only knows some users' codebooks.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::space::{CodeIndexVector, CodeSpace, Region, UserSet};

/// Input rows may be off by this much; they are renormalized afterwards.
pub const STOCHASTIC_TOL: f64 = 1e-9;

/// `P(Y | X_1, ..., X_{K+M})` as a dense table.
///
/// Joint inputs are indexed in mixed radix with user 1 most significant;
/// each joint input owns a contiguous row of `output_size` probabilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dmc {
    input_sizes: Vec<usize>,
    output_size: usize,
    table: Vec<f64>,
}

impl Dmc {
    pub fn input_sizes(&self) -> &[usize] {
        &self.input_sizes
    }

    pub fn output_size(&self) -> usize {
        self.output_size
    }

    pub fn num_users(&self) -> usize {
        self.input_sizes.len()
    }

    pub fn num_joint_inputs(&self) -> usize {
        self.input_sizes.iter().product()
    }

    pub fn joint_index(&self, x: &[usize]) -> usize {
        x.iter()
            .zip(&self.input_sizes)
            .fold(0, |acc, (&xi, &n)| acc * n + xi)
    }

    /// Inverse of [`Dmc::joint_index`].
    pub fn joint_inputs(&self, mut idx: usize) -> Vec<usize> {
        let mut x = vec![0; self.input_sizes.len()];
        for (slot, &n) in x.iter_mut().zip(&self.input_sizes).rev() {
            *slot = idx % n;
            idx /= n;
        }
        x
    }

    pub fn row(&self, joint: usize) -> &[f64] {
        &self.table[joint * self.output_size..(joint + 1) * self.output_size]
    }

    pub fn prob(&self, x: &[usize], y: usize) -> f64 {
        self.row(self.joint_index(x))[y]
    }

    /// Rows in joint-input order, as accepted by [`make_dmc`].
    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.table
            .chunks(self.output_size)
            .map(<[f64]>::to_vec)
            .collect()
    }
}

/// Validates a raw table and builds a [`Dmc`].
///
/// `rows[j]` is the output distribution for joint input `j` (mixed radix,
/// user 1 most significant).
pub fn make_dmc(input_sizes: &[usize], output_size: usize, rows: &[Vec<f64>]) -> Result<Dmc> {
    if input_sizes.is_empty() || input_sizes.contains(&0) || output_size == 0 {
        return Err(Error::ShapeMismatch(
            "alphabet sizes must be positive and at least one user is required".into(),
        ));
    }
    if input_sizes.len() > 32 {
        return Err(Error::ShapeMismatch(
            "at most 32 users are supported".into(),
        ));
    }
    let joint: usize = input_sizes.iter().product();
    if rows.len() != joint {
        return Err(Error::ShapeMismatch(format!(
            "expected {joint} rows (one per joint input), got {}",
            rows.len()
        )));
    }
    let mut table = Vec::with_capacity(joint * output_size);
    for (i, row) in rows.iter().enumerate() {
        if row.len() != output_size {
            return Err(Error::ShapeMismatch(format!(
                "row {i} has {} entries, expected {output_size}",
                row.len()
            )));
        }
        let sum: f64 = row.iter().sum();
        if row.iter().any(|&p| !(0.0..=1.0).contains(&p)) || (sum - 1.0).abs() > STOCHASTIC_TOL {
            return Err(Error::NonStochastic { row: i, sum });
        }
        table.extend(row.iter().map(|p| p / sum));
    }
    Ok(Dmc {
        input_sizes: input_sizes.to_vec(),
        output_size,
        table,
    })
}

/// One entry of a user's code library: rate `r_k(g_k)` in nats per symbol
/// and the i.i.d. input distribution `P_{X|g_k}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodeSpec {
    pub rate: f64,
    pub input_pmf: Vec<f64>,
}

impl CodeSpec {
    pub fn new(rate: f64, input_pmf: Vec<f64>) -> Self {
        CodeSpec { rate, input_pmf }
    }
}

/// Channel plus per-user code libraries. Users `0..K` are regular (their
/// codebooks are known to the receiver), users `K..K+M` are interfering.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemModel {
    dmc: Dmc,
    num_regular: usize,
    libraries: Vec<Vec<CodeSpec>>,
}

impl SystemModel {
    pub fn new(dmc: Dmc, num_regular: usize, libraries: Vec<Vec<CodeSpec>>) -> Result<Self> {
        if num_regular == 0 {
            return Err(Error::InvalidModel(
                "at least one regular user is required".into(),
            ));
        }
        if libraries.len() != dmc.num_users() {
            return Err(Error::InvalidModel(format!(
                "{} libraries for a {}-user channel",
                libraries.len(),
                dmc.num_users()
            )));
        }
        if num_regular > libraries.len() {
            return Err(Error::InvalidModel(
                "more regular users than channel inputs".into(),
            ));
        }
        let mut libraries = libraries;
        for (k, lib) in libraries.iter_mut().enumerate() {
            if lib.is_empty() {
                return Err(Error::InvalidModel(format!(
                    "user {} has an empty library",
                    k + 1
                )));
            }
            for (gi, code) in lib.iter_mut().enumerate() {
                if !code.rate.is_finite() || code.rate < 0.0 {
                    return Err(Error::InvalidModel(format!(
                        "user {} code {gi}: rate must be finite and nonnegative",
                        k + 1
                    )));
                }
                if code.input_pmf.len() != dmc.input_sizes[k] {
                    return Err(Error::ShapeMismatch(format!(
                        "user {} code {gi}: input pmf has {} entries, alphabet has {}",
                        k + 1,
                        code.input_pmf.len(),
                        dmc.input_sizes[k]
                    )));
                }
                let sum: f64 = code.input_pmf.iter().sum();
                if code.input_pmf.iter().any(|&p| !(0.0..=1.0).contains(&p))
                    || (sum - 1.0).abs() > STOCHASTIC_TOL
                {
                    return Err(Error::InvalidModel(format!(
                        "user {} code {gi}: input pmf is not a distribution (sum {sum})",
                        k + 1
                    )));
                }
                code.input_pmf.iter_mut().for_each(|p| *p /= sum);
            }
        }
        Ok(SystemModel {
            dmc,
            num_regular,
            libraries,
        })
    }

    pub fn dmc(&self) -> &Dmc {
        &self.dmc
    }

    pub fn num_users(&self) -> usize {
        self.libraries.len()
    }

    pub fn num_regular(&self) -> usize {
        self.num_regular
    }

    pub fn num_interfering(&self) -> usize {
        self.libraries.len() - self.num_regular
    }

    pub fn regular_users(&self) -> UserSet {
        UserSet::first(self.num_regular)
    }

    pub fn all_users(&self) -> UserSet {
        UserSet::first(self.num_users())
    }

    pub fn library(&self, user: usize) -> &[CodeSpec] {
        &self.libraries[user]
    }

    pub fn libraries(&self) -> &[Vec<CodeSpec>] {
        &self.libraries
    }

    pub fn code(&self, user: usize, code: usize) -> &CodeSpec {
        &self.libraries[user][code]
    }

    pub fn rate(&self, user: usize, code: usize) -> f64 {
        self.libraries[user][code].rate
    }

    pub fn input_pmf(&self, user: usize, code: usize) -> &[f64] {
        &self.libraries[user][code].input_pmf
    }

    /// `sum_{k in set} r_k(g_k)`.
    pub fn sum_rate(&self, set: UserSet, g: &CodeIndexVector) -> f64 {
        set.iter().map(|k| self.rate(k, g.get(k))).sum()
    }

    pub fn code_space(&self) -> CodeSpace {
        CodeSpace::new(self.libraries.iter().map(Vec::len).collect())
    }

    pub fn check_vector(&self, g: &CodeIndexVector) -> Result<()> {
        if self.code_space().contains(g) {
            Ok(())
        } else {
            Err(Error::InvalidCodeIndex(g.0.clone()))
        }
    }

    pub fn check_region(&self, region: &Region) -> Result<()> {
        region.iter().try_for_each(|g| self.check_vector(g))
    }
}

/// `P(Y | X_D, g)`: the channel with every user outside `D` averaged over
/// its input distribution under `g`.
#[derive(Debug, Clone, PartialEq)]
pub struct MarginalChannel {
    conditioned: UserSet,
    sizes: Vec<usize>,
    output_size: usize,
    table: Vec<f64>,
}

impl MarginalChannel {
    pub fn conditioned_users(&self) -> UserSet {
        self.conditioned
    }

    /// Alphabet sizes of the conditioned users, ascending user order.
    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn output_size(&self) -> usize {
        self.output_size
    }

    pub fn num_inputs(&self) -> usize {
        self.sizes.iter().product()
    }

    /// Index of `x_D` given one symbol per conditioned user (ascending).
    pub fn joint_index(&self, x_d: &[usize]) -> usize {
        x_d.iter()
            .zip(&self.sizes)
            .fold(0, |acc, (&x, &n)| acc * n + x)
    }

    pub fn row(&self, joint: usize) -> &[f64] {
        &self.table[joint * self.output_size..(joint + 1) * self.output_size]
    }

    pub fn prob(&self, x_d: &[usize], y: usize) -> f64 {
        self.row(self.joint_index(x_d))[y]
    }
}

/// Averages the channel over the users outside `d`, weighting each by
/// `P_{X|g_k}`. `d` must only contain regular users.
pub fn marginalize_out(
    model: &SystemModel,
    d: UserSet,
    g: &CodeIndexVector,
) -> Result<MarginalChannel> {
    if !d.is_subset_of(model.regular_users()) {
        return Err(Error::SubsetOutOfRange(d.0));
    }
    model.check_vector(g)?;
    Ok(marginal_over(model, d, g))
}

/// As [`marginalize_out`] but any user subset may be conditioned on.
pub(crate) fn marginal_over(
    model: &SystemModel,
    d: UserSet,
    g: &CodeIndexVector,
) -> MarginalChannel {
    let dmc = model.dmc();
    let users = d.to_vec();
    let sizes: Vec<usize> = users.iter().map(|&k| dmc.input_sizes[k]).collect();
    let ny = dmc.output_size;
    let n_in: usize = sizes.iter().product();
    let mut table = vec![0.0; n_in * ny];
    for joint in 0..dmc.num_joint_inputs() {
        let x = dmc.joint_inputs(joint);
        let weight: f64 = (0..model.num_users())
            .filter(|&k| !d.contains(k))
            .map(|k| model.input_pmf(k, g.get(k))[x[k]])
            .product();
        if weight == 0.0 {
            continue;
        }
        let xd = users
            .iter()
            .zip(&sizes)
            .fold(0, |acc, (&k, &n)| acc * n + x[k]);
        let row = dmc.row(joint);
        for (y, p) in row.iter().enumerate() {
            table[xd * ny + y] += weight * p;
        }
    }
    MarginalChannel {
        conditioned: d,
        sizes,
        output_size: ny,
        table,
    }
}

/// `P(Y | g)`: the output distribution when every user sends i.i.d. symbols
/// from its code's input distribution.
pub fn output_marginal(model: &SystemModel, g: &CodeIndexVector) -> Result<Vec<f64>> {
    let m = marginalize_out(model, UserSet::EMPTY, g)?;
    Ok(m.row(0).to_vec())
}

/// Compound BSC as a two-user model: user 1 is the real transmitter with a
/// single code; user 2 is a virtual interfering user whose "code" `i` puts
/// the channel in state `crossovers[i]`.
pub fn make_compound_bsc(crossovers: &[f64], input_pmf: &[f64], rate: f64) -> Result<SystemModel> {
    if crossovers.is_empty() {
        return Err(Error::EmptyCrossoverList);
    }
    if let Some(&p) = crossovers.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(Error::DomainError(p));
    }
    let states = crossovers.len();
    let mut rows = Vec::with_capacity(2 * states);
    for x1 in 0..2 {
        for &p in crossovers {
            rows.push(if x1 == 0 {
                vec![1.0 - p, p]
            } else {
                vec![p, 1.0 - p]
            });
        }
    }
    let dmc = make_dmc(&[2, states], 2, &rows)?;
    let virtual_codes = (0..states)
        .map(|i| {
            let mut pmf = vec![0.0; states];
            pmf[i] = 1.0;
            CodeSpec::new(0.0, pmf)
        })
        .collect();
    SystemModel::new(
        dmc,
        1,
        vec![vec![CodeSpec::new(rate, input_pmf.to_vec())], virtual_codes],
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EntropyUnit {
    #[default]
    Nats,
    Bits,
}

impl EntropyUnit {
    /// Multiply a value in this unit by the factor to get nats.
    pub fn to_nats(self) -> f64 {
        match self {
            EntropyUnit::Nats => 1.0,
            EntropyUnit::Bits => std::f64::consts::LN_2,
        }
    }
}

/// `-p log p - (1-p) log(1-p)` with `0 log 0 = 0`.
pub fn binary_entropy(p: f64, unit: EntropyUnit) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::DomainError(p));
    }
    let h = |q: f64| if q > 0.0 { -q * q.ln() } else { 0.0 };
    Ok((h(p) + h(1.0 - p)) / unit.to_nats())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn identity2() -> Dmc {
        make_dmc(&[2], 2, &[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap()
    }

    fn xor_model() -> SystemModel {
        // Y = X1 xor X2, user 2 uniform and interfering
        let rows = vec![
            vec![1.0, 0.0],
            vec![0.0, 1.0],
            vec![0.0, 1.0],
            vec![1.0, 0.0],
        ];
        let dmc = make_dmc(&[2, 2], 2, &rows).unwrap();
        SystemModel::new(
            dmc,
            1,
            vec![
                vec![CodeSpec::new(0.1, vec![0.3, 0.7])],
                vec![CodeSpec::new(0.0, vec![0.5, 0.5])],
            ],
        )
        .unwrap()
    }

    #[test]
    fn identity_table_is_valid() {
        let d = identity2();
        assert_eq!(d.prob(&[1], 1), 1.0);
        assert_eq!(d.prob(&[0], 1), 0.0);
    }

    #[test]
    fn rejects_non_stochastic_row() {
        let err = make_dmc(&[2], 2, &[vec![0.5, 0.4], vec![0.0, 1.0]]).unwrap_err();
        assert!(matches!(err, Error::NonStochastic { row: 0, .. }));
        assert!(matches!(
            make_dmc(&[2], 2, &[vec![1.0, 0.0]]),
            Err(Error::ShapeMismatch(_))
        ));
        assert!(matches!(
            make_dmc(&[2], 2, &[vec![1.0], vec![1.0]]),
            Err(Error::ShapeMismatch(_))
        ));
    }

    #[test]
    fn small_rounding_is_renormalized() {
        let d = make_dmc(&[1], 2, &[vec![0.3, 0.7 + 5e-10]]).unwrap();
        let s: f64 = d.row(0).iter().sum();
        assert!((s - 1.0).abs() < 1e-15);
    }

    #[test]
    fn bsc_table() {
        let m = make_compound_bsc(&[0.18], &[0.5, 0.5], 0.1).unwrap();
        assert!((m.dmc().prob(&[0, 0], 1) - 0.18).abs() < 1e-15);
        assert!((m.dmc().prob(&[1, 0], 0) - 0.18).abs() < 1e-15);
    }

    #[test]
    fn compound_bsc_shape() {
        let m = make_compound_bsc(&[0.18, 0.185, 0.185, 0.19], &[0.5, 0.5], 0.2).unwrap();
        assert_eq!(m.num_regular(), 1);
        assert_eq!(m.num_interfering(), 1);
        assert_eq!(m.library(1).len(), 4);
        assert_eq!(m.code_space().cardinality(), 4);
        assert_eq!(
            make_compound_bsc(&[], &[0.5, 0.5], 0.2),
            Err(Error::EmptyCrossoverList)
        );
        assert_eq!(
            make_compound_bsc(&[1.2], &[0.5, 0.5], 0.2),
            Err(Error::DomainError(1.2))
        );
    }

    #[test]
    fn noiseless_compound_state_is_identity() {
        let m = make_compound_bsc(&[0.0], &[0.5, 0.5], 0.0).unwrap();
        let g = CodeIndexVector(vec![0, 0]);
        let mc = marginalize_out(&m, UserSet::singleton(0), &g).unwrap();
        assert_eq!(mc.prob(&[0], 0), 1.0);
        assert_eq!(mc.prob(&[1], 1), 1.0);
        assert_eq!(mc.prob(&[1], 0), 0.0);
    }

    #[test]
    fn compound_state_selects_its_bsc() {
        let m = make_compound_bsc(&[0.18, 0.185, 0.185, 0.19], &[0.5, 0.5], 0.2).unwrap();
        let g = CodeIndexVector(vec![0, 0]);
        let mc = marginalize_out(&m, UserSet::singleton(0), &g).unwrap();
        assert!((mc.prob(&[0], 1) - 0.18).abs() < 1e-15);
        assert!((mc.prob(&[1], 1) - 0.82).abs() < 1e-15);
    }

    #[test]
    fn compound_output_marginal() {
        let m = make_compound_bsc(&[0.1, 0.4], &[0.9, 0.1], 0.2).unwrap();
        let py = output_marginal(&m, &CodeIndexVector(vec![0, 0])).unwrap();
        assert!((py[1] - 0.18).abs() < 1e-15);
        let py = output_marginal(&m, &CodeIndexVector(vec![0, 1])).unwrap();
        assert!((py[1] - 0.42).abs() < 1e-15);
    }

    #[test]
    fn xor_with_uniform_interferer_is_useless() {
        let m = xor_model();
        let g = CodeIndexVector(vec![0, 0]);
        let mc = marginalize_out(&m, UserSet::singleton(0), &g).unwrap();
        for x in 0..2 {
            for y in 0..2 {
                assert!((mc.prob(&[x], y) - 0.5).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn full_conditioning_is_identity() {
        let rows = vec![
            vec![0.2, 0.3, 0.5],
            vec![0.1, 0.1, 0.8],
            vec![0.6, 0.2, 0.2],
            vec![0.3, 0.3, 0.4],
        ];
        let dmc = make_dmc(&[2, 2], 3, &rows).unwrap();
        let lib = vec![CodeSpec::new(0.1, vec![0.4, 0.6])];
        let m = SystemModel::new(dmc.clone(), 2, vec![lib.clone(), lib]).unwrap();
        let mc = marginalize_out(&m, UserSet::first(2), &CodeIndexVector(vec![0, 0])).unwrap();
        for j in 0..4 {
            assert_eq!(mc.row(j), dmc.row(j));
        }
    }

    #[test]
    fn marginalizing_interferer_is_rejected() {
        let m = xor_model();
        let g = CodeIndexVector(vec![0, 0]);
        assert_eq!(
            marginalize_out(&m, UserSet::singleton(1), &g).unwrap_err(),
            Error::SubsetOutOfRange(0b10)
        );
    }

    #[test]
    fn uniform_input_on_bsc_gives_uniform_output() {
        let m = make_compound_bsc(&[0.27], &[0.5, 0.5], 0.0).unwrap();
        let py = output_marginal(&m, &CodeIndexVector(vec![0, 0])).unwrap();
        assert!((py[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn point_mass_through_identity() {
        let m = SystemModel::new(
            identity2(),
            1,
            vec![vec![CodeSpec::new(0.0, vec![0.0, 1.0])]],
        )
        .unwrap();
        assert_eq!(
            output_marginal(&m, &CodeIndexVector(vec![0])).unwrap(),
            vec![0.0, 1.0]
        );
    }

    #[test]
    fn entropy_values() {
        assert!((binary_entropy(0.5, EntropyUnit::Bits).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(binary_entropy(0.0, EntropyUnit::Nats).unwrap(), 0.0);
        assert_eq!(binary_entropy(1.0, EntropyUnit::Bits).unwrap(), 0.0);
        assert!((binary_entropy(0.5, EntropyUnit::Nats).unwrap() - 2f64.ln()).abs() < 1e-15);
        assert_eq!(
            binary_entropy(-0.1, EntropyUnit::Bits),
            Err(Error::DomainError(-0.1))
        );
        // reference values from an independent evaluation of the formula
        let h185 = binary_entropy(0.185, EntropyUnit::Bits).unwrap();
        let h19 = binary_entropy(0.19, EntropyUnit::Bits).unwrap();
        assert!((1.0 - h185 - 0.309_106_128_564_959).abs() < 1e-12);
        assert!((1.0 - h19 - 0.298_528_540_116_103).abs() < 1e-12);
    }

    #[test]
    fn model_validation_errors() {
        let dmc = identity2();
        assert!(matches!(
            SystemModel::new(
                dmc.clone(),
                0,
                vec![vec![CodeSpec::new(0.0, vec![0.5, 0.5])]]
            ),
            Err(Error::InvalidModel(_))
        ));
        assert!(matches!(
            SystemModel::new(dmc.clone(), 1, vec![vec![]]),
            Err(Error::InvalidModel(_))
        ));
        assert!(matches!(
            SystemModel::new(
                dmc.clone(),
                1,
                vec![vec![CodeSpec::new(-1.0, vec![0.5, 0.5])]]
            ),
            Err(Error::InvalidModel(_))
        ));
        assert!(matches!(
            SystemModel::new(dmc, 1, vec![vec![CodeSpec::new(0.0, vec![0.5, 0.4])]]),
            Err(Error::InvalidModel(_))
        ));
    }
}
