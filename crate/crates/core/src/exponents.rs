//! Closed-form Lyapunov exponents of the family and their inversion.
//!
//! `lambda_max` is an integral against the measure of maximal entropy, which
//! gives every level-`m` cylinder mass `2^-m`; `lambda_abs` is an integral
//! against the three-plateau invariant density. Both are written in terms of
//! [`Fraction`]s so that `log(1 - u)` never goes through a cancelling
//! subtraction.

use crate::error::{Error, Result};
use crate::map::{pow2, FamilyParams, Fraction};
use crate::LN_2;

/// Slack allowed on the inequality chain `lambda_abs <= log 2 <= lambda_max`.
pub const INEQUALITY_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExponentPair {
    pub lambda_abs: f64,
    pub lambda_max: f64,
}

/// `-(log x + log(1 - x)) / 2^(level + 1)`: the contribution of the two
/// branches of slopes `1/x` and `1/(1-x)` to `lambda_max`.
pub fn branch_pair_term(level: u32, x: Fraction) -> f64 {
    -(x.ln_value() + x.ln_complement()) * pow2(-(level as i32) - 1)
}

/// `lambda_max` of the member `(n, u, k, v)`.
pub fn lambda_max_closed(p: &FamilyParams) -> f64 {
    branch_pair_term(p.n(), p.u())
        + branch_pair_term(p.k(), p.v())
        + (1.0 - pow2(-(p.n() as i32)) - pow2(-(p.k() as i32))) * LN_2
}

/// `lambda_abs` of the member `(n, u, k, v)`.
pub fn lambda_abs_closed(p: &FamilyParams) -> f64 {
    let (u, v) = (p.u(), p.v());
    let two_n = pow2(p.n() as i32);
    let ratio = pow2(p.n() as i32 - p.k() as i32);
    let cu = u.complement();
    let denom = 1.0 + 2.0 * cu * (two_n - ratio - 1.0 + 2.0 * ratio * v.value());
    let numer = 2.0 * cu * (two_n - 2.0 * ratio - 1.0 + 2.0 * ratio * v.value()) * LN_2
        + u.entropy()
        + 2.0 * ratio * cu * v.entropy();
    numer / denom
}

/// `lambda_abs` on the slice `u = 1/2`, which does not depend on `n`.
pub fn lambda_abs_vslice(k: u32, v: Fraction) -> f64 {
    let p = pow2(-(k as i32));
    let vv = v.value();
    ((1.0 - 2.0 * p + 2.0 * p * vv) * LN_2 + p * v.entropy()) / (1.0 - p + 2.0 * p * vv)
}

/// `lambda_max` on the slice `u = 1/2`.
pub fn lambda_max_vslice(k: u32, v: Fraction) -> f64 {
    (1.0 - pow2(-(k as i32))) * LN_2 + branch_pair_term(k, v)
}

/// `lambda_abs` on the slice `v = 1/2`, which does not depend on `k`.
pub fn lambda_abs_ubar(n: u32, u: Fraction) -> f64 {
    let denom = 1.0 + 2.0 * u.complement() * (pow2(n as i32) - 1.0);
    LN_2 + (u.entropy() - LN_2) / denom
}

/// `lambda_max` on the slice `v = 1/2`.
pub fn lambda_max_ubar(n: u32, u: Fraction) -> f64 {
    (1.0 - pow2(-(n as i32))) * LN_2 + branch_pair_term(n, u)
}

/// Numerator of `d lambda_abs_ubar / du`:
/// `y(u) = -2(2^n - 1) log 2 + log(1 - u) - (2^(n+1) - 1) log u`.
///
/// Evaluated as `log(2(1-u)) - (2^(n+1) - 1) log(2u)`, which is the same
/// expression regrouped so that `y(1/2)` is exactly zero.
pub fn y_numerator(n: u32, u: Fraction) -> f64 {
    let ln_2c = u.ln_complement() + LN_2;
    let ln_2u = u.ln_value() + LN_2;
    ln_2c - (pow2(n as i32 + 1) - 1.0) * ln_2u
}

/// `d/du lambda_abs_ubar(n, u) = y(u) / (1 + 2(1-u)(2^n - 1))^2`.
pub fn dlambda_abs_du(n: u32, u: Fraction) -> f64 {
    let denom = 1.0 + 2.0 * u.complement() * (pow2(n as i32) - 1.0);
    y_numerator(n, u) / (denom * denom)
}

/// Solves `branch_pair_term(level, x) = log 4 / 2^(level+1) + excess` for
/// `x ∈ [1/2, 1)`.
///
/// With `w = exp(-2^(level+1) excess)` the root of `x^2 - x + w/4 = 0` is
/// `x = (1 + sqrt(1 - w)) / 2`; the complement is evaluated as
/// `w / (2 (1 + sqrt(1 - w)))`, never as `1 - x`.
pub fn invert_branch_pair(level: u32, excess: f64) -> Result<Fraction> {
    if !excess.is_finite() || excess < -1e-13 {
        return Err(Error::Infeasible(format!(
            "branch excess {excess:e} is below the minimum 0"
        )));
    }
    let z = pow2(level as i32 + 1) * excess.max(0.0);
    let root = (-(-z).exp_m1()).sqrt();
    let complement = (-z - (2.0 * (1.0 + root)).ln()).exp();
    if complement == 0.0 {
        return Err(Error::ResourceLimit(format!(
            "complement exp(-{z}) underflows double precision"
        )));
    }
    Fraction::checked(0.5 * (1.0 + root), complement)
}

/// The `u` for which `lambda_max_ubar(n, u) = target`.
pub fn u_from_lambda_max(n: u32, target: f64) -> Result<Fraction> {
    if target < LN_2 - 1e-13 {
        return Err(Error::Infeasible(format!(
            "lambda_max target {target} is below log 2"
        )));
    }
    invert_branch_pair(n, target - LN_2)
}

/// Both closed forms, checked against `0 < lambda_abs <= log 2 <= lambda_max`.
pub fn exponent_pair(p: &FamilyParams) -> Result<ExponentPair> {
    let pair = ExponentPair {
        lambda_abs: lambda_abs_closed(p),
        lambda_max: lambda_max_closed(p),
    };
    if !(pair.lambda_abs > 0.0
        && pair.lambda_abs <= LN_2 + INEQUALITY_SLACK
        && pair.lambda_max >= LN_2 - INEQUALITY_SLACK)
    {
        return Err(Error::InvariantViolation {
            lambda_abs: pair.lambda_abs,
            lambda_max: pair.lambda_max,
        });
    }
    Ok(pair)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fr(x: f64) -> Fraction {
        Fraction::from_value(x).unwrap()
    }

    fn params(n: u32, u: f64, k: u32, v: f64) -> FamilyParams {
        FamilyParams::new(n, u, k, v).unwrap()
    }

    /// Mass-weighted slopes, written out by hand for (2, 3/4, 2, 3/4).
    fn example_lambda_max_by_hand() -> f64 {
        0.25 * ((4.0f64 / 3.0).ln() + 4f64.ln()) + 0.5 * LN_2
    }

    /// Piecewise integration of q log f' with plateaus (16, 8, 12)/11.
    fn example_lambda_abs_by_hand() -> f64 {
        let (a1, a3, a7) = (16.0 / 11.0, 8.0 / 11.0, 12.0 / 11.0);
        let l43 = (4.0f64 / 3.0).ln();
        let l4 = 4f64.ln();
        a1 * (0.1875 * l43 + 0.0625 * l4)
            + a3 * (0.0625 * l4 + 0.1875 * l43 + 0.25 * LN_2)
            + a7 * 0.25 * LN_2
    }

    #[test]
    fn doubling_values() {
        for n in 2..=10 {
            for k in 2..=10 {
                let p = params(n, 0.5, k, 0.5);
                assert!((lambda_max_closed(&p) - LN_2).abs() < 1e-15);
                assert!((lambda_abs_closed(&p) - LN_2).abs() < 1e-15);
            }
        }
        assert!((lambda_abs_vslice(4, Fraction::HALF) - LN_2).abs() < 1e-15);
        assert!((lambda_max_vslice(4, Fraction::HALF) - LN_2).abs() < 1e-15);
        assert!((lambda_abs_ubar(4, Fraction::HALF) - LN_2).abs() < 1e-15);
        assert!((lambda_max_ubar(4, Fraction::HALF) - LN_2).abs() < 1e-15);
    }

    #[test]
    fn example_values() {
        let p = params(2, 0.75, 2, 0.75);
        let lm = lambda_max_closed(&p);
        let la = lambda_abs_closed(&p);
        assert!((lm - example_lambda_max_by_hand()).abs() < 1e-15);
        assert!((la - example_lambda_abs_by_hand()).abs() < 1e-15);
        assert!((lm - 0.765068).abs() < 1e-6, "{lm}");
        assert!((la - 0.621795).abs() < 1e-6, "{la}");
    }

    #[test]
    fn slices_agree_with_full_formulas() {
        for &k in &[2, 3, 5, 8] {
            for i in 0..10 {
                let v = 0.5 + 0.499 * i as f64 / 9.0;
                for &n in &[2, 5, 9] {
                    let full = params(n, 0.5, k, v);
                    assert!((lambda_abs_closed(&full) - lambda_abs_vslice(k, fr(v))).abs() < 1e-12);
                    assert!((lambda_max_closed(&full) - lambda_max_vslice(k, fr(v))).abs() < 1e-12);
                    let full = params(k, v, n, 0.5);
                    assert!((lambda_abs_closed(&full) - lambda_abs_ubar(k, fr(v))).abs() < 1e-12);
                    assert!((lambda_max_closed(&full) - lambda_max_ubar(k, fr(v))).abs() < 1e-12);
                }
            }
        }
        let p = params(2, 0.75, 2, 0.5);
        assert!((lambda_max_closed(&p) - lambda_max_ubar(2, fr(0.75))).abs() < 1e-15);
        let p = params(3, 0.9, 7, 0.5);
        assert!((lambda_max_closed(&p) - lambda_max_ubar(3, fr(0.9))).abs() < 1e-15);
    }

    #[test]
    fn vslice_lower_bound() {
        for &k in &[2, 3, 5, 8] {
            let bound = (1.0 - pow2(-(k as i32))) * LN_2;
            for i in 0..1000 {
                let v = fr(0.5 + 0.5 * i as f64 / 1000.0);
                let val = lambda_abs_vslice(k, v);
                assert!(val >= bound && val <= LN_2 + 1e-15);
            }
            let v = Fraction::from_complement(1e-300).unwrap();
            assert!(lambda_abs_vslice(k, v) >= bound);
        }
    }

    #[test]
    fn max_vslice_grows_without_bound() {
        let mut prev = lambda_max_vslice(3, Fraction::HALF);
        for j in 1..=300 {
            let v = Fraction::from_complement(0.5 * 10f64.powf(-(j as f64) / 10.0)).unwrap();
            let val = lambda_max_vslice(3, v);
            assert!(val > prev);
            prev = val;
        }
        assert!(prev > 1.0);
    }

    #[test]
    fn ubar_decreasing_to_zero() {
        let mut prev = lambda_abs_ubar(3, Fraction::HALF);
        for i in 1..=1000 {
            let u = fr(0.5 + (0.5 - 1e-6) * i as f64 / 1000.0);
            let val = lambda_abs_ubar(3, u);
            assert!(val < prev);
            prev = val;
        }
        let u = Fraction::from_complement(1e-200).unwrap();
        assert!(lambda_abs_ubar(3, u) < 1e-190);
        let p = FamilyParams::from_complements(2, 1e-15, 2, 0.5).unwrap();
        assert!(lambda_abs_closed(&p) < 1e-12);
    }

    #[test]
    fn y_vanishes_at_half_and_is_negative_after() {
        for &n in &[2, 5, 9, 20] {
            assert_eq!(y_numerator(n, Fraction::HALF), 0.0);
            for i in 1..1000 {
                let u = fr(0.5 + 0.5 * i as f64 / 1000.0);
                assert!(y_numerator(n, u) < 0.0);
                assert!(dlambda_abs_du(n, u) < 0.0);
            }
        }
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let h = 1e-6;
        for &n in &[2, 5, 9] {
            for i in 1..100 {
                let u = 0.5 + 0.49 * i as f64 / 100.0;
                let fd =
                    (lambda_abs_ubar(n, fr(u + h)) - lambda_abs_ubar(n, fr(u - h))) / (2.0 * h);
                let an = dlambda_abs_du(n, fr(u));
                assert!(((fd - an) / an).abs() < 1e-4, "n={n} u={u} fd={fd} an={an}");
            }
        }
    }

    #[test]
    fn inversion_round_trip() {
        for &n in &[2, 3, 6, 10] {
            for i in 0..200 {
                let u = 0.5 + (0.5 - 1e-8) * i as f64 / 199.0;
                let target = lambda_max_ubar(n, fr(u));
                let back = u_from_lambda_max(n, target).unwrap();
                assert!(
                    (back.value() - u).abs() < 1e-10,
                    "n={n} u={u} back={}",
                    back.value()
                );
            }
        }
        assert_eq!(u_from_lambda_max(4, LN_2).unwrap(), Fraction::HALF);
        assert!(u_from_lambda_max(4, LN_2 - 0.01).is_err());
    }

    #[test]
    fn inversion_keeps_tiny_complements() {
        let c = 1e-30;
        let u = Fraction::from_complement(c).unwrap();
        let back = u_from_lambda_max(5, lambda_max_ubar(5, u)).unwrap();
        assert!((back.complement() / c - 1.0).abs() < 1e-12);
    }

    #[test]
    fn two_inversion_forms_agree() {
        for &n in &[2, 3, 5] {
            for i in 0..50 {
                let lambda = LN_2 + 0.02 * i as f64;
                let scale = pow2(n as i32 + 1);
                let first = 1.0 - (-scale * (lambda - LN_2)).exp();
                let second = 1.0 - 4.0 * ((scale - 2.0) * LN_2 - scale * lambda).exp();
                assert!((first - second).abs() < 1e-12);
                // sqrt amplifies rounding only at the double root lambda = log 2
                if i > 0 {
                    assert!((first.sqrt() - second.sqrt()).abs() < 1e-12);
                }
                let u = u_from_lambda_max(n, lambda).unwrap();
                // root of the quadratic u^2 - u + exp(2(2^n - 1) log 2 - 2^(n+1) lambda)
                let c0 = ((scale - 2.0) * LN_2 - scale * lambda).exp();
                let q = u.value() * u.value() - u.value() + c0;
                assert!(q.abs() < 1e-14);
            }
        }
    }

    #[test]
    fn pair_checks_inequality() {
        let pair = exponent_pair(&params(2, 0.75, 2, 0.75)).unwrap();
        assert!(pair.lambda_abs < LN_2 && pair.lambda_max > LN_2);
        let pair = exponent_pair(&params(5, 0.5, 5, 0.5)).unwrap();
        assert!((pair.lambda_abs - LN_2).abs() < 1e-15);
        assert!((pair.lambda_max - LN_2).abs() < 1e-15);
    }

    #[test]
    fn deficit_is_quadratic_near_half() {
        // log 2 - lambda_abs vanishes to second order in u - 1/2
        for n in [2u32, 5, 8] {
            let d = |h: f64| LN_2 - lambda_abs_ubar(n, fr(0.5 + h));
            let ratio = d(1e-3) / d(2e-3);
            assert!((ratio - 0.25).abs() < 1e-2, "n = {n}, ratio {ratio}");
        }
        assert!(LN_2 - lambda_abs_ubar(2, fr(0.5 + 1e-6)) < 1e-10);
    }

    #[test]
    fn near_equality_forces_half() {
        let grid: Vec<f64> = (0..400)
            .map(|i| 0.5 + 0.5 * (i as f64 / 400.0).powi(3))
            .collect();
        for n in 2..=8 {
            for k in 2..=8 {
                for &u in &grid {
                    for &v in grid.iter().step_by(7) {
                        let la = lambda_abs_closed(&params(n, u, k, v));
                        if (la - LN_2).abs() <= 1e-10 {
                            assert!((u - 0.5).abs() <= 1e-3 && (v - 0.5).abs() <= 1e-3);
                        }
                    }
                }
            }
        }
    }
}
