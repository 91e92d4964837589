//! Browser bindings for the static demo page in `www/`.
//!
//! Each export has a plain Rust twin returning `Result<_, String>` so the
//! numbers can be tested natively.

use distcode::{
    detection_bound, gep_bound_d, gep_bound_partitioned, make_compound_bsc, CodeIndexVector,
    EntropyUnit, Region, UserSet, WeightFunction,
};
use wasm_bindgen::prelude::*;

fn err(e: distcode::Error) -> String {
    e.to_string()
}

fn state_region(states: impl IntoIterator<Item = usize>) -> Result<Region, String> {
    Region::new(states.into_iter().map(|i| CodeIndexVector(vec![0, i]))).map_err(err)
}

/// `[rate, exponent, ...]` for a single BSC with uniform inputs, rates in
/// nats over `(0, ln 2)`.
pub fn exponent_curve(crossover: f64, points: usize) -> Result<Vec<f64>, String> {
    let points = points.clamp(2, 400);
    let region = state_region([0])?;
    let mut out = Vec::with_capacity(2 * points);
    for i in 1..=points {
        let rate = std::f64::consts::LN_2 * i as f64 / (points + 1) as f64;
        let model = make_compound_bsc(&[crossover], &[0.5, 0.5], rate).map_err(err)?;
        let report = gep_bound_d(
            &model,
            UserSet::singleton(0),
            &region,
            &WeightFunction::zero(),
            1,
        )
        .map_err(err)?;
        let e = report
            .terms
            .iter()
            .map(|t| t.exponent.value)
            .fold(f64::INFINITY, f64::min);
        out.extend([rate, e.max(0.0)]);
    }
    Ok(out)
}

/// Bound on the generalized error performance for `N = 1..=n_max` of a
/// compound BSC whose first `decodable` states form the region. Rate in
/// bits.
pub fn compound_curve(
    crossovers: &[f64],
    rate_bits: f64,
    decodable: usize,
    n_max: usize,
) -> Result<Vec<f64>, String> {
    if decodable == 0 || decodable > crossovers.len() {
        return Err(format!(
            "decodable must be between 1 and {}",
            crossovers.len()
        ));
    }
    let model = make_compound_bsc(
        crossovers,
        &[0.5, 0.5],
        rate_bits * EntropyUnit::Bits.to_nats(),
    )
    .map_err(err)?;
    let region = state_region(0..decodable)?;
    (1..=n_max.clamp(1, 200))
        .map(|n| {
            gep_bound_partitioned(&model, &region, &WeightFunction::zero(), n, 64)
                .map(|(r, _)| r.value)
                .map_err(err)
        })
        .collect()
}

/// Probability of detecting the wrong state for `N = 1..=n_max`, two-state
/// compound BSC, true state first. `q0` is the probability of input 0.
pub fn detection_curve(p0: f64, p1: f64, q0: f64, n_max: usize) -> Result<Vec<f64>, String> {
    let model = make_compound_bsc(&[p0, p1], &[q0, 1.0 - q0], 0.0).map_err(err)?;
    let cells = [state_region([0])?, state_region([1])?];
    let g = CodeIndexVector(vec![0, 0]);
    (1..=n_max.clamp(1, 500))
        .map(|n| {
            detection_bound(&model, &g, &cells, &WeightFunction::zero(), n)
                .map(|r| r.value)
                .map_err(err)
        })
        .collect()
}

#[wasm_bindgen(js_name = exponentCurve)]
pub fn exponent_curve_js(crossover: f64, points: usize) -> Result<Vec<f64>, JsError> {
    exponent_curve(crossover, points).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = compoundCurve)]
pub fn compound_curve_js(
    crossovers: Vec<f64>,
    rate_bits: f64,
    decodable: usize,
    n_max: usize,
) -> Result<Vec<f64>, JsError> {
    compound_curve(&crossovers, rate_bits, decodable, n_max).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = detectionCurve)]
pub fn detection_curve_js(p0: f64, p1: f64, q0: f64, n_max: usize) -> Result<Vec<f64>, JsError> {
    detection_curve(p0, p1, q0, n_max).map_err(|e| JsError::new(&e))
}
