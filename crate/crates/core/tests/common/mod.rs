#![allow(dead_code)]

pub mod oracle;

use distcode::{make_dmc, CodeIndexVector, CodeSpec, SystemModel, UserSet, WeightFunction};
use rand::Rng;

pub fn v(x: &[usize]) -> CodeIndexVector {
    CodeIndexVector(x.to_vec())
}

pub fn random_pmf<R: Rng>(rng: &mut R, n: usize, floor: f64) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| rng.gen_range(floor..1.0)).collect();
    let total: f64 = raw.iter().sum();
    raw.iter().map(|x| x / total).collect()
}

/// Binary inputs, 2 or 3 outputs, `regular` regular users followed by
/// `interfering` interfering users, up to `max_codes` codes each.
pub fn random_model<R: Rng>(
    rng: &mut R,
    regular: usize,
    interfering: usize,
    max_codes: usize,
) -> SystemModel {
    let users = regular + interfering;
    let ny = rng.gen_range(2..=3);
    let rows: Vec<Vec<f64>> = (0..1usize << users)
        .map(|_| random_pmf(rng, ny, 0.02))
        .collect();
    let dmc = make_dmc(&vec![2; users], ny, &rows).unwrap();
    let libraries = (0..users)
        .map(|k| {
            (0..rng.gen_range(1..=max_codes))
                .map(|_| {
                    let rate = if k < regular {
                        rng.gen_range(0.02..0.5)
                    } else {
                        0.0
                    };
                    let p = rng.gen_range(0.1..0.9);
                    CodeSpec::new(rate, vec![p, 1.0 - p])
                })
                .collect()
        })
        .collect();
    SystemModel::new(dmc, regular, libraries).unwrap()
}

pub fn small_model<R: Rng>(rng: &mut R) -> SystemModel {
    let regular = rng.gen_range(1..=2);
    let interfering = rng.gen_range(0..=1);
    random_model(rng, regular, interfering, 2)
}

pub fn random_vector<R: Rng>(rng: &mut R, model: &SystemModel) -> CodeIndexVector {
    CodeIndexVector(
        model
            .code_space()
            .sizes()
            .iter()
            .map(|&n| rng.gen_range(0..n))
            .collect(),
    )
}

/// A random `D` containing user 1.
pub fn random_d<R: Rng>(rng: &mut R, model: &SystemModel) -> UserSet {
    let mut d = UserSet::singleton(0);
    for k in 1..model.num_regular() {
        if rng.gen_bool(0.5) {
            d = d.with(k);
        }
    }
    d
}

/// A random `S` with `D \ S` nonempty.
pub fn random_s<R: Rng>(rng: &mut R, model: &SystemModel, d: UserSet) -> UserSet {
    loop {
        let s = UserSet::from_users((0..model.num_users()).filter(|_| rng.gen_bool(0.5)));
        if !d.minus(s).is_empty() {
            return s;
        }
    }
}

pub fn random_alpha<R: Rng>(rng: &mut R, model: &SystemModel) -> WeightFunction {
    let values = model
        .code_space()
        .iter()
        .map(|g| (g, rng.gen_range(0.0..0.3)))
        .collect();
    WeightFunction::new(0.0, values).unwrap()
}

/// Copies `src` onto `dst` for the users of `set`.
pub fn overwrite(dst: &CodeIndexVector, src: &CodeIndexVector, set: UserSet) -> CodeIndexVector {
    CodeIndexVector(
        (0..dst.len())
            .map(|k| {
                if set.contains(k) {
                    src.get(k)
                } else {
                    dst.get(k)
                }
            })
            .collect(),
    )
}

pub fn binary_entropy_nats(p: f64) -> f64 {
    let h = |x: f64| if x > 0.0 { -x * x.ln() } else { 0.0 };
    h(p) + h(1.0 - p)
}

/// Golden-section maximum of a unimodal `f` on `[lo, hi]`.
pub fn golden_max(f: impl Fn(f64) -> f64, lo: f64, hi: f64) -> (f64, f64) {
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - phi * (b - a);
    let mut d = a + phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > 1e-13 {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + phi * (b - a);
            fd = f(d);
        }
    }
    let best = [(f(lo), lo), (f(hi), hi), (f((a + b) / 2.0), (a + b) / 2.0)];
    best.into_iter().fold(
        (f64::NEG_INFINITY, lo),
        |acc, x| if x.0 > acc.0 { x } else { acc },
    )
}
