//! Number formatting for CSV and JSON outputs.

/// `x` with 12 significant digits, trailing zeros dropped (like C's `%.12g`).
pub fn g12(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return if x.is_nan() {
            "nan".into()
        } else if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    let sci = format!("{:.11e}", x);
    let (mant, exp) = sci.split_once('e').unwrap();
    let exp: i32 = exp.parse().unwrap();
    if (-4..12).contains(&exp) {
        let decimals = (11 - exp).max(0) as usize;
        trim(&format!("{:.*}", decimals, x)).to_string()
    } else {
        format!(
            "{}e{}{:02}",
            trim(mant),
            if exp < 0 { '-' } else { '+' },
            exp.abs()
        )
    }
}

fn trim(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Rounds `x` to 12 significant digits, for JSON numbers.
pub fn round12(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    g12(x).parse().unwrap_or(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_printf_g() {
        assert_eq!(g12(0.0), "0");
        assert_eq!(g12(1.0), "1");
        assert_eq!(g12(0.309106128564959), "0.309106128565");
        assert_eq!(g12(-2.5e-7), "-2.5e-07");
        assert_eq!(g12(123456789012345.0), "1.23456789012e+14");
        assert_eq!(g12(1e-5), "1e-05");
        assert_eq!(g12(99999999999.99), "100000000000");
        assert_eq!(g12(99999999999.9), "99999999999.9");
        assert_eq!(g12(f64::NEG_INFINITY), "-inf");
    }
}
