//! Trial runner and empirical estimates of the generalized error performance.
//!
//! Every trial draws a fresh codebook, a code index vector, messages and
//! channel noise from streams seeded by `mix_seed(&[master_seed, trial])`,
//! so records are reproducible and independent of thread scheduling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::channel::SystemModel;
use crate::decoder::{
    decode_receiver, decode_receiver_margin, decode_with_detection, DecodeOutcome,
    DecodeThresholds, Detector,
};
use crate::ensemble::{mix_seed, sample_codebook, sample_from, CodebookRealization};
use crate::error::{Error, Result};
use crate::exponents::{detection_bound, BoundReport, WeightFunction};
use crate::space::{CodeIndexVector, Region, RegionPartition};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ErrorModel {
    /// Inside `R`: anything but the correct output is an error. Outside:
    /// only a wrong output is.
    Relaxed,
    /// Outside `R` anything but a collision is an error.
    Strict,
    /// As strict, except that inside the margin a collision and a correct
    /// output are both accepted.
    Margin,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DecoderKind {
    Plain,
    Margin,
    Detect,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", content = "set", rename_all = "lowercase")]
pub enum GSampling {
    /// Uniform over the listed vectors.
    Uniform(Vec<CodeIndexVector>),
    /// `g` with probability proportional to `e^{-N alpha(g)}` over the space.
    Prior,
    /// Trial `t` uses entry `t mod len`.
    Cycle(Vec<CodeIndexVector>),
}

/// Error verdict of one outcome.
pub fn classify_error(
    model: ErrorModel,
    region: &Region,
    margin: &Region,
    g: &CodeIndexVector,
    w1: u64,
    outcome: &DecodeOutcome,
) -> bool {
    let correct = outcome.user_one() == Some((w1, g.get(0)));
    let decoded_wrong = !outcome.is_collision() && !correct;
    if region.contains(g) {
        return !correct;
    }
    match model {
        ErrorModel::Relaxed => decoded_wrong,
        ErrorModel::Strict => !outcome.is_collision(),
        ErrorModel::Margin if margin.contains(g) => decoded_wrong,
        ErrorModel::Margin => !outcome.is_collision(),
    }
}

/// Everything a trial needs besides its seed.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub model: SystemModel,
    pub n: usize,
    pub alpha: WeightFunction,
    pub region: Region,
    pub margin: Region,
    pub partition: RegionPartition,
    pub detection: Option<Vec<Region>>,
    pub error_model: ErrorModel,
    pub decoder: DecoderKind,
    pub g_sampling: GSampling,
}

/// Prepared decoder state: thresholds and detector built once.
#[derive(Debug, Clone)]
pub struct Receiver {
    kind: DecoderKind,
    partition: RegionPartition,
    margin: Region,
    thresholds: DecodeThresholds,
    detector: Option<Detector>,
}

impl Receiver {
    pub fn new(exp: &Experiment) -> Result<Self> {
        let margin = match exp.decoder {
            DecoderKind::Margin => Some(&exp.margin),
            _ => None,
        };
        if margin.is_some_and(|m| !m.is_disjoint(&exp.region)) {
            return Err(Error::OverlappingMargin);
        }
        let thresholds =
            DecodeThresholds::build_receiver(&exp.model, &exp.partition, margin, &exp.alpha)?;
        let detector = match (exp.decoder, &exp.detection) {
            (DecoderKind::Detect, Some(cells)) => {
                Some(Detector::new(&exp.model, cells, &exp.alpha)?)
            }
            (DecoderKind::Detect, None) => {
                return Err(Error::InvalidModel(
                    "detect decoder needs a detection partition".into(),
                ))
            }
            _ => None,
        };
        Ok(Receiver {
            kind: exp.decoder,
            partition: exp.partition.clone(),
            margin: exp.margin.clone(),
            thresholds,
            detector,
        })
    }

    pub fn thresholds(&self) -> &DecodeThresholds {
        &self.thresholds
    }

    pub fn decode(
        &self,
        model: &SystemModel,
        alpha: &WeightFunction,
        books: &CodebookRealization,
        y: &[usize],
    ) -> Result<DecodeOutcome> {
        match self.kind {
            DecoderKind::Plain => {
                decode_receiver(model, &self.partition, alpha, books, y, &self.thresholds)
            }
            DecoderKind::Margin => decode_receiver_margin(
                model,
                &self.partition,
                &self.margin,
                alpha,
                books,
                y,
                &self.thresholds,
            ),
            DecoderKind::Detect => decode_with_detection(
                model,
                self.detector.as_ref().unwrap(),
                &self.partition,
                alpha,
                books,
                y,
                &self.thresholds,
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialRecord {
    pub trial: u64,
    pub g: CodeIndexVector,
    /// One message per regular user.
    pub w: Vec<u64>,
    pub outcome: DecodeOutcome,
    pub error: bool,
}

/// One channel use of length `n`: codewords of the regular users, i.i.d.
/// symbols for the interfering users, then channel noise.
pub fn transmit<R: Rng + ?Sized>(
    model: &SystemModel,
    books: &CodebookRealization,
    g: &CodeIndexVector,
    w: &[u64],
    rng: &mut R,
) -> Result<Vec<usize>> {
    let n = books.blocklength();
    let dmc = model.dmc();
    let words = (0..model.num_regular())
        .map(|k| crate::ensemble::encode(books, w[k], g.get(k), k))
        .collect::<Result<Vec<_>>>()?;
    let mut x = vec![0usize; model.num_users()];
    let mut y = Vec::with_capacity(n);
    for j in 0..n {
        for (k, slot) in x.iter_mut().enumerate() {
            *slot = if k < model.num_regular() {
                words[k][j] as usize
            } else {
                sample_from(rng, model.input_pmf(k, g.get(k)))
            };
        }
        y.push(sample_from(rng, dmc.row(dmc.joint_index(&x))));
    }
    Ok(y)
}

fn sample_g<R: Rng + ?Sized>(exp: &Experiment, trial: u64, rng: &mut R) -> Result<CodeIndexVector> {
    match &exp.g_sampling {
        GSampling::Uniform(set) | GSampling::Cycle(set) if set.is_empty() => {
            Err(Error::InvalidModel("empty g-sampling set".into()))
        }
        GSampling::Uniform(set) => Ok(set[rng.gen_range(0..set.len())].clone()),
        GSampling::Cycle(set) => Ok(set[(trial % set.len() as u64) as usize].clone()),
        GSampling::Prior => {
            let space: Vec<_> = exp.model.code_space().iter().collect();
            let nf = exp.n as f64;
            let amin = space
                .iter()
                .map(|g| exp.alpha.get(g))
                .fold(f64::INFINITY, f64::min);
            let weights: Vec<f64> = space
                .iter()
                .map(|g| (-nf * (exp.alpha.get(g) - amin)).exp())
                .collect();
            let total: f64 = weights.iter().sum();
            let pmf: Vec<f64> = weights.iter().map(|w| w / total).collect();
            Ok(space[sample_from(rng, &pmf)].clone())
        }
    }
}

/// Draws `(codebook, g, w, y)` for one trial.
pub fn draw_trial(
    exp: &Experiment,
    trial: u64,
    master_seed: u64,
) -> Result<(CodebookRealization, CodeIndexVector, Vec<u64>, Vec<usize>)> {
    let seed = mix_seed(&[master_seed, trial]);
    let books = sample_codebook(&exp.model, exp.n, mix_seed(&[seed, 1]))?;
    let mut pick = ChaCha8Rng::seed_from_u64(mix_seed(&[seed, 2]));
    let g = sample_g(exp, trial, &mut pick)?;
    exp.model.check_vector(&g)?;
    let w: Vec<u64> = (0..exp.model.num_regular())
        .map(|k| pick.gen_range(0..books.codebook(k, g.get(k)).map(|b| b.count()).unwrap_or(1)))
        .collect();
    let mut noise = ChaCha8Rng::seed_from_u64(mix_seed(&[seed, 3]));
    let y = transmit(&exp.model, &books, &g, &w, &mut noise)?;
    Ok((books, g, w, y))
}

fn run_one(exp: &Experiment, rx: &Receiver, trial: u64, master_seed: u64) -> Result<TrialRecord> {
    let (books, g, w, y) = draw_trial(exp, trial, master_seed)?;
    let outcome = rx.decode(&exp.model, &exp.alpha, &books, &y)?;
    let error = classify_error(
        exp.error_model,
        &exp.region,
        &exp.margin,
        &g,
        w[0],
        &outcome,
    );
    Ok(TrialRecord {
        trial,
        g,
        w,
        outcome,
        error,
    })
}

/// Runs `trials` independent trials.
pub fn run_trials(exp: &Experiment, trials: u64, master_seed: u64) -> Result<Vec<TrialRecord>> {
    if trials == 0 {
        return Err(Error::InvalidModel("trials must be at least 1".into()));
    }
    let rx = Receiver::new(exp)?;
    run_trials_with(exp, &rx, trials, master_seed)
}

pub fn run_trials_with(
    exp: &Experiment,
    rx: &Receiver,
    trials: u64,
    master_seed: u64,
) -> Result<Vec<TrialRecord>> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..trials)
            .into_par_iter()
            .map(|t| run_one(exp, rx, t, master_seed))
            .collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..trials)
            .map(|t| run_one(exp, rx, t, master_seed))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Stratum {
    pub g: CodeIndexVector,
    pub trials: u64,
    pub errors: u64,
    pub p_hat: f64,
    /// `e^{-N alpha(g)} / sum_g' e^{-N alpha(g')}`.
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GepEstimate {
    pub point: f64,
    pub std_error: f64,
    pub strata: Vec<Stratum>,
    /// Vectors with positive weight but no trials; their error rate is
    /// counted as 0 in `point`.
    pub unestimated: Vec<CodeIndexVector>,
    pub n: usize,
    pub alpha: WeightFunction,
}

/// Stratified estimate `sum_g weight(g) p^_e(g)` with standard error
/// `sqrt(sum_g weight(g)^2 p^(1 - p^) / n_g)`.
pub fn empirical_gep(
    records: &[TrialRecord],
    model: &SystemModel,
    alpha: &WeightFunction,
    n: usize,
) -> GepEstimate {
    let space: Vec<CodeIndexVector> = model.code_space().iter().collect();
    let nf = n as f64;
    let amin = space
        .iter()
        .map(|g| alpha.get(g))
        .fold(f64::INFINITY, f64::min);
    let raw: Vec<f64> = space
        .iter()
        .map(|g| (-nf * (alpha.get(g) - amin)).exp())
        .collect();
    let total: f64 = raw.iter().sum();
    let mut strata = Vec::new();
    let mut unestimated = Vec::new();
    let (mut point, mut var) = (0.0, 0.0);
    for (g, w) in space.iter().zip(raw.iter().map(|r| r / total)) {
        let (trials, errors) = records
            .iter()
            .filter(|r| &r.g == g)
            .fold((0u64, 0u64), |(t, e), r| (t + 1, e + r.error as u64));
        if trials == 0 {
            if w > 0.0 {
                unestimated.push(g.clone());
            }
            continue;
        }
        let p = errors as f64 / trials as f64;
        point += w * p;
        var += w * w * p * (1.0 - p) / trials as f64;
        strata.push(Stratum {
            g: g.clone(),
            trials,
            errors,
            p_hat: p,
            weight: w,
        });
    }
    GepEstimate {
        point,
        std_error: var.sqrt(),
        strata,
        unestimated,
        n,
        alpha: alpha.clone(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verdict {
    pub estimate: f64,
    pub std_error: f64,
    pub bound: f64,
    pub complete: bool,
    pub pass: bool,
}

/// PASS iff every stratum was sampled and `estimate <= bound + 3 sigma`.
pub fn compare_bound(estimate: &GepEstimate, bound: &BoundReport) -> Result<Verdict> {
    if estimate.n != bound.n {
        return Err(Error::MismatchedParameters(format!(
            "estimate at N={} but bound at N={}",
            estimate.n, bound.n
        )));
    }
    let complete = estimate.unestimated.is_empty();
    Ok(Verdict {
        estimate: estimate.point,
        std_error: estimate.std_error,
        bound: bound.value,
        complete,
        pass: complete && estimate.point <= bound.value + 3.0 * estimate.std_error,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DetectionRecord {
    pub trial: u64,
    pub g: CodeIndexVector,
    pub detected: CodeIndexVector,
    pub cell: usize,
    pub error: bool,
}

/// Region detection trials: `error` when the detected cell does not hold `g`.
pub fn run_detection_trials(
    exp: &Experiment,
    trials: u64,
    master_seed: u64,
) -> Result<Vec<DetectionRecord>> {
    if trials == 0 {
        return Err(Error::InvalidModel("trials must be at least 1".into()));
    }
    let cells = exp
        .detection
        .as_ref()
        .ok_or_else(|| Error::InvalidModel("no detection partition".into()))?;
    let detector = Detector::new(&exp.model, cells, &exp.alpha)?;
    let one = |t: u64| -> Result<DetectionRecord> {
        let (_, g, _, y) = draw_trial(exp, t, master_seed)?;
        let (cell, detected) = detector.detect(&y);
        Ok(DetectionRecord {
            trial: t,
            error: !cells[cell].contains(&g),
            g,
            detected,
            cell,
        })
    };
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..trials).into_par_iter().map(one).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..trials).map(one).collect()
    }
}

/// Per-vector comparison of detection errors with the detection bound.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DetectionVerdict {
    pub g: CodeIndexVector,
    pub trials: u64,
    pub errors: u64,
    pub p_hat: f64,
    pub std_error: f64,
    /// Bound on `Pr{miss | g}`, i.e. the detection bound times `e^{N alpha(g)}`.
    pub bound: f64,
    pub pass: bool,
}

/// PASS for `g` iff `p^ <= bound + 3 sigma` with `sigma = sqrt(p^(1 - p^)/n_g)`.
/// Vectors that were never transmitted are skipped.
pub fn compare_detection(
    records: &[DetectionRecord],
    exp: &Experiment,
) -> Result<Vec<DetectionVerdict>> {
    let cells = exp
        .detection
        .as_ref()
        .ok_or_else(|| Error::InvalidModel("no detection partition".into()))?;
    let mut out = Vec::new();
    for g in exp.model.code_space().iter() {
        let (trials, errors) = records
            .iter()
            .filter(|r| r.g == g)
            .fold((0u64, 0u64), |(t, e), r| (t + 1, e + r.error as u64));
        if trials == 0 {
            continue;
        }
        let report = detection_bound(&exp.model, &g, cells, &exp.alpha, exp.n)?;
        let bound = (report.log_raw + exp.n as f64 * exp.alpha.get(&g))
            .exp()
            .min(1.0);
        let p = errors as f64 / trials as f64;
        let std_error = (p * (1.0 - p) / trials as f64).sqrt();
        out.push(DetectionVerdict {
            pass: p <= bound + 3.0 * std_error,
            g,
            trials,
            errors,
            p_hat: p,
            std_error,
            bound,
        });
    }
    Ok(out)
}
