//! Small numerical helpers: guarded Newton on increasing functions and
//! compensated summation.

/// Solves `f(x) = target` on `[lo, hi]` for an increasing `f` with
/// derivative `df`, using Newton steps guarded by a shrinking bracket.
///
/// The caller guarantees `f(lo) <= target <= f(hi)`.
pub(crate) fn solve_increasing<F, D>(f: F, df: D, target: f64, mut lo: f64, mut hi: f64) -> f64
where
    F: Fn(f64) -> f64,
    D: Fn(f64) -> f64,
{
    let mut x = 0.5 * (lo + hi);
    for _ in 0..200 {
        let r = f(x) - target;
        if r == 0.0 {
            return x;
        }
        if r < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        if hi - lo <= f64::EPSILON * hi.abs().max(lo.abs()).max(f64::MIN_POSITIVE) {
            break;
        }
        let d = df(x);
        let step = x - r / d;
        x = if d > 0.0 && step > lo && step < hi {
            step
        } else {
            0.5 * (lo + hi)
        };
        if x <= lo || x >= hi {
            break;
        }
    }
    // pick whichever bracket end (or the iterate) is closest
    let mut best = x;
    let mut best_r = (f(x) - target).abs();
    for c in [lo, hi] {
        let r = (f(c) - target).abs();
        if r < best_r {
            best = c;
            best_r = r;
        }
    }
    best
}

/// Neumaier's compensated sum.
#[derive(Debug, Default, Clone, Copy)]
pub(crate) struct NeumaierSum {
    sum: f64,
    carry: f64,
}

impl NeumaierSum {
    pub(crate) fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub(crate) fn total(&self) -> f64 {
        self.sum + self.carry
    }
}

impl FromIterator<f64> for NeumaierSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = NeumaierSum::default();
        iter.into_iter().for_each(|x| s.add(x));
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cubic_root() {
        let x = solve_increasing(|x| x * x * x + x, |x| 3.0 * x * x + 1.0, 10.0, 0.0, 5.0);
        assert!((x - 2.0).abs() < 1e-14);
    }

    #[test]
    fn compensated_sum() {
        let s: NeumaierSum = [1.0, 1e100, 1.0, -1e100].into_iter().collect();
        assert_eq!(s.total(), 2.0);
    }

    #[test]
    fn bracket_endpoint() {
        let x = solve_increasing(|x| 2.0 * x, |_| 2.0, 0.0, 0.0, 1.0);
        assert_eq!(x, 0.0);
    }
}
