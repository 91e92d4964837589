//! Log-domain accumulation helpers.
//!
//! Zero probabilities are carried as `f64::NEG_INFINITY`; every helper here
//! treats them as an absent term rather than producing NaN.

/// `log(sum(exp(xs)))` with max-shift. Empty input or all `-inf` gives `-inf`.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    let s: f64 = xs.iter().map(|&x| (x - m).exp()).sum();
    m + s.ln()
}

/// Streaming form of [`log_sum_exp`], used in hot loops to avoid allocation.
#[derive(Debug, Clone, Copy)]
pub struct LogSumExp {
    max: f64,
    sum: f64,
}

impl Default for LogSumExp {
    fn default() -> Self {
        Self::new()
    }
}

impl LogSumExp {
    pub fn new() -> Self {
        Self {
            max: f64::NEG_INFINITY,
            sum: 0.0,
        }
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        if x == f64::NEG_INFINITY {
            return;
        }
        if x <= self.max {
            self.sum += (x - self.max).exp();
        } else {
            self.sum = self.sum * (self.max - x).exp() + 1.0;
            self.max = x;
        }
    }

    #[inline]
    pub fn value(&self) -> f64 {
        if self.max == f64::NEG_INFINITY {
            f64::NEG_INFINITY
        } else {
            self.max + self.sum.ln()
        }
    }
}

/// Natural log that maps exact zeros to `-inf`.
#[inline]
pub fn ln0(p: f64) -> f64 {
    if p > 0.0 {
        p.ln()
    } else {
        f64::NEG_INFINITY
    }
}

/// `a * lp` under the convention `0^a = 0` for every `a >= 0`.
///
/// This is the limit from the open parameter interval, so the exponent
/// objectives stay continuous at the closed endpoints.
#[inline]
pub fn scaled(a: f64, lp: f64) -> f64 {
    if lp == f64::NEG_INFINITY {
        f64::NEG_INFINITY
    } else {
        a * lp
    }
}
