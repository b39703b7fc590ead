//! The interface shared by piecewise-linear and smoothed circle maps.
//!
//! A circle map is described on `[0, 1)` by a sequence of monotone pieces.
//! Each piece knows its lift (a continuous increasing real function whose
//! reduction mod 1 is the map), its derivative, its inverse and the integral
//! of `log f'`. Everything else (evaluation mod 1, preimages, the fixed point,
//! the extension of the lift to the whole line) is derived from those.

use crate::error::{Error, Result};
use crate::numeric::solve_increasing;

pub trait CircleMap: Sync {
    /// Left endpoints of the pieces: strictly increasing, first entry 0.
    fn piece_starts(&self) -> &[f64];

    /// Lift value at the left endpoint of each piece.
    fn piece_lift_starts(&self) -> &[f64];

    /// Total increase of the lift over `[0, 1)`; equals the degree.
    fn rise(&self) -> f64;

    fn piece_lift(&self, piece: usize, x: f64) -> f64;

    fn piece_derivative(&self, piece: usize, x: f64) -> f64;

    /// Point of `piece` whose lift equals `t`; `t` lies in the piece's lift range.
    fn piece_inverse(&self, piece: usize, t: f64) -> f64;

    /// `∫ log f'(x) dx` over `[a, b]`, a sub-interval of `piece`.
    fn piece_log_derivative_integral(&self, piece: usize, a: f64, b: f64) -> f64;

    /// True when the piece is affine.
    fn piece_is_linear(&self, piece: usize) -> bool;

    fn piece_count(&self) -> usize {
        self.piece_starts().len()
    }

    fn piece_end(&self, piece: usize) -> f64 {
        self.piece_starts().get(piece + 1).copied().unwrap_or(1.0)
    }

    fn piece_lift_end(&self, piece: usize) -> f64 {
        self.piece_lift_starts()
            .get(piece + 1)
            .copied()
            .unwrap_or_else(|| self.piece_lift_starts()[0] + self.rise())
    }

    /// Index of the piece containing `x`, right-continuous at piece boundaries.
    fn locate(&self, x: f64) -> usize {
        self.piece_starts()
            .partition_point(|&s| s <= x)
            .saturating_sub(1)
    }

    /// Lift at `x ∈ [0, 1)`.
    fn lift(&self, x: f64) -> f64 {
        self.piece_lift(self.locate(x), x)
    }

    /// `f(x) mod 1`.
    fn eval(&self, x: f64) -> Result<f64> {
        check_domain(x)?;
        Ok(reduce(self.lift(x)))
    }

    /// Derivative at `x`; the right-hand slope at piece boundaries.
    fn derivative(&self, x: f64) -> Result<f64> {
        check_domain(x)?;
        Ok(self.piece_derivative(self.locate(x), x))
    }

    /// Rounded degree, rejecting a total rise that is not an integer to 1e-9.
    fn degree(&self) -> Result<i64> {
        let rise = self.rise();
        let d = rise.round();
        let residual = (rise - d).abs();
        if residual > 1e-9 {
            return Err(Error::NonIntegerDegree { rise, residual });
        }
        Ok(d as i64)
    }

    /// Lift extended to the real line by `F(x + 1) = F(x) + degree`.
    fn lift_ext(&self, x: f64) -> f64 {
        let j = x.floor();
        let mut frac = x - j;
        if frac >= 1.0 {
            frac = 0.0;
        }
        self.lift(frac) + j * self.rise().round()
    }

    /// Inverse of [`CircleMap::lift_ext`].
    fn inverse_lift_ext(&self, t: f64) -> f64 {
        let d = self.rise().round();
        let l0 = self.piece_lift_starts()[0];
        let mut j = ((t - l0) / d).floor();
        let mut t0 = t - j * d;
        if t0 >= l0 + d {
            t0 -= d;
            j += 1.0;
        } else if t0 < l0 {
            t0 += d;
            j -= 1.0;
        }
        self.inverse_lift_unit(t0) + j
    }

    /// The `x ∈ [0, 1]` whose lift is `t`, for `t` in the lift range of `[0, 1)`.
    fn inverse_lift_unit(&self, t: f64) -> f64 {
        let piece = self
            .piece_lift_starts()
            .partition_point(|&s| s <= t)
            .saturating_sub(1);
        self.piece_inverse(piece, t)
    }

    /// All preimages of `y`, sorted ascending.
    fn preimages(&self, y: f64) -> Result<Vec<f64>> {
        check_domain(y)?;
        let l0 = self.piece_lift_starts()[0];
        let top = l0 + self.rise();
        let mut out = Vec::new();
        let mut t = y + (l0 - y).ceil();
        while t < top {
            let mut x = self.inverse_lift_unit(t);
            if x >= 1.0 {
                x = 0.0;
            }
            out.push(x);
            t += 1.0;
        }
        out.sort_by(f64::total_cmp);
        Ok(out)
    }

    /// The fixed point as a lifted coordinate in `(-1/2, 1/2]`.
    ///
    /// For a degree-`d > 1` map `F(x) - x` increases by `d - 1` over the unit
    /// interval; the fixed point reported is the root of `F(x) - x = m` with
    /// `m = ceil(F(0))`, the one closest to 0 from the right.
    fn fixed_point(&self) -> Result<f64> {
        let l0 = self.piece_lift_starts()[0];
        let m = l0.ceil();
        if l0 == m {
            return Ok(0.0);
        }
        let h = |x: f64| self.lift(x.min(1.0 - f64::EPSILON)) - x;
        let dh = |x: f64| self.piece_derivative(self.locate(x), x) - 1.0;
        if h(1.0 - f64::EPSILON).partial_cmp(&m) != Some(std::cmp::Ordering::Greater) {
            return Err(Error::FixedPointNotFound(format!(
                "no sign change of F(x) - x - {m} on [0, 1)"
            )));
        }
        let x = solve_increasing(h, dh, m, 0.0, 1.0 - f64::EPSILON);
        if (h(x) - m).abs() > 1e-13 {
            return Err(Error::FixedPointNotFound(format!(
                "residual {:e} at {x}",
                h(x) - m
            )));
        }
        Ok(if x > 0.5 { x - 1.0 } else { x })
    }

    /// `∫_a^b log f'(x) dx` for `0 <= a <= b <= 1`.
    fn log_derivative_integral(&self, a: f64, b: f64) -> f64 {
        let mut total = 0.0;
        let mut piece = self.locate(a);
        let mut lo = a;
        while lo < b && piece < self.piece_count() {
            let hi = self.piece_end(piece).min(b);
            if hi > lo {
                total += self.piece_log_derivative_integral(piece, lo, hi);
            }
            lo = hi;
            piece += 1;
        }
        total
    }
}

pub(crate) fn check_domain(x: f64) -> Result<()> {
    if (0.0..1.0).contains(&x) {
        Ok(())
    } else {
        Err(Error::Domain(x))
    }
}

/// Reduction mod 1 into `[0, 1)`.
pub(crate) fn reduce(t: f64) -> f64 {
    let r = t.rem_euclid(1.0);
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}
