//! Box-constrained maximization by coarse grid search followed by local
//! pattern refinement.
//!
//! The coarse stage evaluates a uniform lattice with `intervals + 1` points
//! per axis. The refinement stage repeatedly evaluates a 9-point-per-axis
//! pattern of half-width `h` around the incumbent; the incumbent moves when a
//! pattern point is strictly better, and `h` shrinks by 4 unless the move
//! landed on the pattern edge. It stops once `h` falls below
//! [`REFINE_TOL`] of the box width.

/// Lower end of every open parameter interval `(0, 1]`.
pub const EPS: f64 = 1e-6;
/// Coarse lattice intervals per axis (64 points).
pub const COARSE_INTERVALS: usize = 63;
pub const REFINE_TOL: f64 = 1e-10;
pub const MAX_REFINE_ITERS: usize = 400;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub intervals: usize,
    pub refine: bool,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            intervals: COARSE_INTERVALS,
            refine: true,
        }
    }
}

impl GridSpec {
    pub fn coarse(intervals: usize) -> Self {
        GridSpec {
            intervals,
            refine: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Maximum<const D: usize> {
    pub value: f64,
    pub at: [f64; D],
}

#[inline]
fn clean(v: f64) -> f64 {
    if v.is_nan() {
        f64::NEG_INFINITY
    } else {
        v
    }
}

/// Maximizes `f` over the box `[lo, hi]`. NaN evaluations count as `-inf`.
/// The returned value is always `f(at)` exactly.
pub fn maximize<const D: usize, F>(f: F, lo: [f64; D], hi: [f64; D], grid: GridSpec) -> Maximum<D>
where
    F: Fn([f64; D]) -> f64,
{
    let n = grid.intervals.max(1);
    let lattice = |i: usize, k: usize| {
        if k == n {
            hi[i]
        } else {
            lo[i] + (hi[i] - lo[i]) * k as f64 / n as f64
        }
    };

    let mut best = Maximum {
        value: f64::NEG_INFINITY,
        at: lo,
    };
    let total = (n + 1).pow(D as u32);
    for flat in 0..total {
        let mut p = [0.0; D];
        let mut rem = flat;
        for i in (0..D).rev() {
            p[i] = lattice(i, rem % (n + 1));
            rem /= n + 1;
        }
        let v = clean(f(p));
        if v > best.value {
            best = Maximum { value: v, at: p };
        }
    }
    if best.value == f64::NEG_INFINITY {
        best.value = clean(f(best.at));
    }
    if !grid.refine {
        return best;
    }

    let mut h = [0.0; D];
    for i in 0..D {
        h[i] = (hi[i] - lo[i]) / n as f64;
    }
    for _ in 0..MAX_REFINE_ITERS {
        if (0..D).all(|i| h[i] <= REFINE_TOL * (hi[i] - lo[i]).max(f64::MIN_POSITIVE)) {
            break;
        }
        let centre = best.at;
        let mut moved_to_edge = false;
        let mut moved = false;
        for flat in 0..9usize.pow(D as u32) {
            let mut p = [0.0; D];
            let mut rem = flat;
            let mut edge = false;
            for i in (0..D).rev() {
                let k = (rem % 9) as i32 - 4;
                rem /= 9;
                edge |= k.abs() == 4;
                p[i] = (centre[i] + h[i] * k as f64 / 4.0).clamp(lo[i], hi[i]);
            }
            let v = clean(f(p));
            if v > best.value {
                best = Maximum { value: v, at: p };
                moved = true;
                moved_to_edge = edge;
            }
        }
        if !(moved && moved_to_edge) {
            for hi_ in h.iter_mut() {
                *hi_ /= 4.0;
            }
        }
    }
    best
}
