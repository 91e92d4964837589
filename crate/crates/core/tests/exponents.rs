mod common;

use distcode::exponents::{EcProblem, EidProblem, EmdProblem};
use distcode::optimize::{GridSpec, EPS};
use distcode::{
    exponent_ec, exponent_eid, gep_bound_d, gep_bound_margin, make_compound_bsc, CodeIndexVector,
    Region, UserSet, WeightFunction,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{overwrite, random_alpha, random_d, random_s, random_vector, small_model, v};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn shift_law(seed in any::<u64>(), c in 0.0f64..2.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = small_model(&mut rng);
        let a = random_alpha(&mut rng, &m);
        let b = a.shifted(c).unwrap();
        let d = random_d(&mut rng, &m);
        let s = random_s(&mut rng, &m, d);
        let g = random_vector(&mut rng, &m);
        let other = overwrite(&random_vector(&mut rng, &m), &g, s);
        let grid = GridSpec::default();
        let emd = |w: &WeightFunction| EmdProblem::new(&m, d, s, &g, &other, w).unwrap().maximize(grid).value;
        let eid = |w: &WeightFunction| EidProblem::new(&m, d, s, &g, &other, w).unwrap().maximize(grid).value;
        let ec = |w: &WeightFunction| EcProblem::new(&m, &g, &other, w).unwrap().maximize(grid).value;
        prop_assert!((emd(&b) - emd(&a) - c).abs() <= 1e-9);
        prop_assert!((eid(&b) - eid(&a) - c).abs() <= 1e-9);
        prop_assert!((ec(&b) - ec(&a) - c).abs() <= 1e-9);
    }

    #[test]
    fn detection_exponent_is_symmetric_and_nonnegative(seed in any::<u64>(), level in 0.0f64..0.5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = small_model(&mut rng);
        let g = random_vector(&mut rng, &m);
        let h = random_vector(&mut rng, &m);
        let flat = WeightFunction::constant(level).unwrap();
        let forward = exponent_ec(&m, &g, &h, &flat).unwrap().value;
        let backward = exponent_ec(&m, &h, &g, &flat).unwrap().value;
        prop_assert!((forward - backward).abs() <= 1e-9);
        let a = random_alpha(&mut rng, &m);
        prop_assert!(exponent_ec(&m, &g, &h, &a).unwrap().value >= 0.0);
    }

    #[test]
    fn finer_nested_grid_never_loses(seed in any::<u64>(), k in 2usize..24) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = small_model(&mut rng);
        let a = random_alpha(&mut rng, &m);
        let d = random_d(&mut rng, &m);
        let s = random_s(&mut rng, &m, d);
        let g = random_vector(&mut rng, &m);
        let other = overwrite(&random_vector(&mut rng, &m), &g, s);
        let emd = EmdProblem::new(&m, d, s, &g, &other, &a).unwrap();
        let eid = EidProblem::new(&m, d, s, &g, &other, &a).unwrap();
        let ec = EcProblem::new(&m, &g, &other, &a).unwrap();
        let (coarse, fine) = (GridSpec::coarse(k), GridSpec::coarse(2 * k));
        prop_assert!(emd.maximize(fine).value >= emd.maximize(coarse).value);
        prop_assert!(eid.maximize(fine).value >= eid.maximize(coarse).value);
        prop_assert!(ec.maximize(fine).value >= ec.maximize(coarse).value);
        // refinement starts from the coarse optimum
        prop_assert!(emd.maximize(GridSpec::default()).value >= emd.maximize(GridSpec::coarse(63)).value);
    }

    #[test]
    fn bound_decreases_with_blocklength(seed in any::<u64>(), n in 1usize..20) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = small_model(&mut rng);
        let d = random_d(&mut rng, &m);
        let region: Region = m.code_space().iter().filter(|_| rng.gen_bool(0.5)).collect();
        let zero = WeightFunction::zero();
        let a = gep_bound_d(&m, d, &region, &zero, n).unwrap();
        let b = gep_bound_d(&m, d, &region, &zero, n + 1).unwrap();
        prop_assert!(b.log_raw <= a.log_raw + 1e-6, "{} then {}", a.log_raw, b.log_raw);
    }

    #[test]
    fn margin_never_hurts(seed in any::<u64>(), n in 4usize..30) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = small_model(&mut rng);
        let d = random_d(&mut rng, &m);
        let a = random_alpha(&mut rng, &m);
        let mut region = Region::empty();
        let mut margin = Region::empty();
        for g in m.code_space().iter() {
            match rng.gen_range(0..3) {
                0 => { region.insert(g); }
                1 => { margin.insert(g); }
                _ => {}
            }
        }
        let with = gep_bound_margin(&m, d, &region, &margin, &a, n).unwrap();
        let without = gep_bound_margin(&m, d, &region, &Region::empty(), &a, n).unwrap();
        prop_assert!(with.log_raw <= without.log_raw + 1e-12);
    }
}

fn bsc_output(pmf: &[f64], p: f64) -> [f64; 2] {
    let one = pmf[0] * p + pmf[1] * (1.0 - p);
    [1.0 - one, one]
}

#[test]
fn detection_exponent_matches_dense_grid() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..10 {
        let p: [f64; 2] = [rng.gen_range(0.01..0.49), rng.gen_range(0.01..0.49)];
        let q0: f64 = rng.gen_range(0.1..0.9);
        let pmf = [q0, 1.0 - q0];
        let m = make_compound_bsc(&p, &pmf, 0.1).unwrap();
        let values = [
            (v(&[0, 0]), rng.gen_range(0.0..0.2)),
            (v(&[0, 1]), rng.gen_range(0.0..0.2)),
        ];
        let a = WeightFunction::new(0.0, values.iter().cloned().collect()).unwrap();
        let lp = bsc_output(&pmf, p[0]).map(|x| x.ln() - values[0].1);
        let lq = bsc_output(&pmf, p[1]).map(|x| x.ln() - values[1].1);
        let f = |s: f64| {
            -(0..2)
                .map(|y| (s * lp[y] + (1.0 - s) * lq[y]).exp())
                .sum::<f64>()
                .ln()
        };
        let points = 100_000;
        let dense = (0..=points)
            .map(|i| f(EPS + (1.0 - EPS) * i as f64 / points as f64))
            .fold(f64::NEG_INFINITY, f64::max);
        let ours = exponent_ec(&m, &v(&[0, 0]), &v(&[0, 1]), &a).unwrap().value;
        assert!(ours >= dense - 1e-12, "{ours} < dense {dense}");
        assert!(ours - dense <= 1e-8, "{ours} vs dense {dense}");
    }
}

/// `E_iD` of a compound BSC with `D = {1}`, `S = {}`, written out directly.
#[allow(clippy::too_many_arguments)]
fn eid_direct(pmf: &[f64], rate: f64, pg: f64, pp: f64, ag: f64, ap: f64, rho: f64, s: f64) -> f64 {
    let w = |p: f64, x: usize, y: usize| if x == y { 1.0 - p } else { p };
    let b = |p: f64, alpha: f64, y: usize, a: f64| -> f64 {
        (0..2)
            .map(|x| pmf[x] * (w(p, x, y) * (-alpha).exp()).powf(a))
            .sum()
    };
    let sum: f64 = (0..2)
        .map(|y| b(pg, ag, y, s / (s + rho)).powf(s + rho) * b(pp, ap, y, 1.0).powf(1.0 - s))
        .sum();
    -rho * rate - sum.ln()
}

#[test]
fn confusion_exponent_matches_dense_grid() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..4 {
        let p: [f64; 2] = [rng.gen_range(0.01..0.2), rng.gen_range(0.2..0.49)];
        let q0: f64 = rng.gen_range(0.2..0.8);
        let pmf = [q0, 1.0 - q0];
        let rate = rng.gen_range(0.05..0.4);
        let m = make_compound_bsc(&p, &pmf, rate).unwrap();
        let (ag, ap) = (rng.gen_range(0.0..0.1), rng.gen_range(0.0..0.1));
        let a = WeightFunction::new(
            0.0,
            [(v(&[0, 0]), ag), (v(&[0, 1]), ap)].into_iter().collect(),
        )
        .unwrap();
        let points = 512;
        let mut dense = f64::NEG_INFINITY;
        for i in 0..=points {
            let rho = EPS + (1.0 - 2.0 * EPS) * i as f64 / points as f64;
            for j in 0..=points {
                let u = j as f64 / points as f64;
                let s = EPS + u * (1.0 - rho - EPS);
                dense = dense.max(eid_direct(&pmf, rate, p[0], p[1], ag, ap, rho, s));
            }
        }
        let ours = exponent_eid(
            &m,
            UserSet::singleton(0),
            UserSet::EMPTY,
            &v(&[0, 0]),
            &v(&[0, 1]),
            &a,
        )
        .unwrap()
        .value;
        assert!(ours >= dense - 1e-12, "{ours} < dense {dense}");
        assert!(ours - dense <= 1e-5, "{ours} vs dense {dense}");
    }
}

#[test]
fn empty_difference_set_is_rejected() {
    let m = make_compound_bsc(&[0.1, 0.2], &[0.5, 0.5], 0.1).unwrap();
    let g = CodeIndexVector(vec![0, 0]);
    let a = WeightFunction::zero();
    assert!(EmdProblem::new(&m, UserSet::singleton(0), UserSet::singleton(0), &g, &g, &a).is_err());
    assert!(EidProblem::new(&m, UserSet::singleton(0), UserSet::singleton(0), &g, &g, &a).is_err());
}
