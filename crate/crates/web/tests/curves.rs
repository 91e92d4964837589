use distcode_web::{compound_curve, detection_curve, exponent_curve};

#[test]
fn exponent_vanishes_near_capacity() {
    let p: f64 = 0.11;
    let capacity = std::f64::consts::LN_2 + p * p.ln() + (1.0 - p) * (1.0 - p).ln();
    let curve = exponent_curve(p, 50).unwrap();
    let pairs: Vec<(f64, f64)> = curve.chunks(2).map(|c| (c[0], c[1])).collect();
    assert_eq!(pairs.len(), 50);
    assert!(pairs[0].1 > 0.0);
    for w in pairs.windows(2) {
        assert!(w[1].1 <= w[0].1 + 1e-9, "not decreasing at rate {}", w[1].0);
    }
    for (r, e) in pairs {
        if r > capacity + 1e-3 {
            assert!(e < 1e-6, "exponent {e} above capacity at {r}");
        }
    }
}

#[test]
fn compound_bound_shrinks_with_blocklength() {
    let curve = compound_curve(&[0.05, 0.3], 0.2, 1, 30).unwrap();
    assert_eq!(curve.len(), 30);
    assert!(curve[29] < curve[9]);
    assert!(curve.iter().all(|&b| (0.0..=1.0).contains(&b)));
    assert!(compound_curve(&[0.05, 0.3], 0.2, 3, 5).is_err());
}

#[test]
fn detection_bound_shrinks_with_blocklength() {
    let curve = detection_curve(0.1, 0.4, 0.9, 60).unwrap();
    assert!(curve[59] < curve[19] && curve[19] < curve[4]);
    assert!(detection_curve(0.1, 1.4, 0.5, 5).is_err());
}
