//! Constructing a family member with prescribed exponents.
//!
//! Writing `lambda_max - log 2` as the sum of a `u`-excess and a `v`-excess
//! turns the constraint `lambda_max = b` into a one-parameter curve: choose
//! the `v`-excess `e ∈ [0, b - log 2]` and invert both branch terms exactly.
//! Along that curve `lambda_abs` runs from below `a` (at `v = 1/2`, by the
//! choice of `N`) to above `a` (at `u = 1/2`, by the choice of `K`), and
//! bisection finds the crossing.

use crate::error::{Error, Result};
use crate::exponents::{
    branch_pair_term, exponent_pair, invert_branch_pair, lambda_abs_closed, lambda_abs_ubar,
    u_from_lambda_max, ExponentPair,
};
use crate::map::{pow2, FamilyParams, Fraction, MAX_LEVEL_PARAM};
use crate::LN_2;

pub const DEFAULT_MAX_N: u32 = 40;
pub const MIN_TOLERANCE: f64 = 1e-12;
pub const GRID_POINTS: usize = 64;
pub const GRID_REFINEMENT: usize = 16;
pub const MAX_RETRIES: u32 = 8;
pub const MAX_BISECTIONS: usize = 200;

/// Largest `2^(level+1) * excess` whose complement `exp(-z)/4` is still a
/// normal double.
const MAX_EXPONENT_ARG: f64 = 700.0;

/// One bracket `[lower, upper]` in `v`-excess with the signs of `F` at its
/// ends; the history of a realization is the initial bracket followed by
/// every bisection step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BracketRecord {
    pub n: u32,
    pub k: u32,
    pub lower: f64,
    pub upper: f64,
    pub f_lower: f64,
    pub f_upper: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RealizationResult {
    pub params: FamilyParams,
    pub achieved: ExponentPair,
    /// `(|lambda_abs - a|, |lambda_max - b|)`.
    pub residuals: (f64, f64),
    pub iterations: usize,
    pub bracket_history: Vec<BracketRecord>,
}

fn check_targets(a: f64, b: f64) -> Result<()> {
    if !(a.is_finite() && b.is_finite() && a > 0.0 && a < LN_2 && b > LN_2) {
        return Err(Error::InvalidTargets(format!(
            "need 0 < a < log 2 < b, got a = {a}, b = {b}"
        )));
    }
    Ok(())
}

/// Smallest `K >= 2` with `(1 - 2^-K) log 2 > a`.
pub fn choose_k(a: f64) -> u32 {
    (2..MAX_LEVEL_PARAM)
        .find(|&k| (1.0 - pow2(-(k as i32))) * LN_2 > a)
        .unwrap_or(MAX_LEVEL_PARAM)
}

/// Smallest `N >= 2` for which the `v = 1/2` member with `lambda_max =
/// log 2 + (b - log 2)/2` has `lambda_abs < a/2`, searched up to `max_n`.
pub fn choose_n(a: f64, b: f64, max_n: u32) -> Result<(u32, Fraction)> {
    check_targets(a, b)?;
    let alpha = 0.5 * (b - LN_2);
    for n in 2..=max_n.min(MAX_LEVEL_PARAM) {
        let u = u_from_lambda_max(n, LN_2 + alpha)?;
        if lambda_abs_ubar(n, u) < 0.5 * a {
            return Ok((n, u));
        }
    }
    Err(Error::ResourceLimit(format!(
        "no N <= {max_n} brings lambda_abs below {}",
        0.5 * a
    )))
}

/// `branch_pair_term(level, x) - 2^-level log 2`, the excess of a branch
/// pair over its `x = 1/2` value.
fn branch_excess(level: u32, x: Fraction) -> f64 {
    branch_pair_term(level, x) - pow2(-(level as i32)) * LN_2
}

/// The `u` with `lambda_max_closed(n, u, k, v) = b`.
pub fn solve_u_given_v(n: u32, k: u32, v: Fraction, b: f64) -> Result<Fraction> {
    let excess = b - LN_2 - branch_excess(k, v);
    if excess < -1e-13 {
        return Err(Error::Infeasible(format!(
            "v-term leaves u-excess {excess:e} below zero"
        )));
    }
    invert_branch_pair(n, excess)
}

/// Parameters on the `lambda_max = b` curve at `v`-excess `e`.
fn curve_point(n: u32, k: u32, b: f64, e: f64) -> Result<FamilyParams> {
    let v = invert_branch_pair(k, e)?;
    let u = invert_branch_pair(n, (b - LN_2 - e).max(0.0))?;
    FamilyParams::from_fractions(n, u, k, v)
}

fn residual_at(n: u32, k: u32, a: f64, b: f64, e: f64) -> Option<f64> {
    curve_point(n, k, b, e)
        .ok()
        .map(|p| lambda_abs_closed(&p) - a)
        .filter(|f| f.is_finite())
}

/// First sign change of `F` on a uniform grid of `points` intervals.
fn scan(n: u32, k: u32, a: f64, b: f64, lo: f64, hi: f64, points: usize) -> Option<BracketRecord> {
    let mut prev: Option<(f64, f64)> = None;
    for i in 0..=points {
        let e = if i == points {
            hi
        } else {
            lo + (hi - lo) * i as f64 / points as f64
        };
        let Some(f) = residual_at(n, k, a, b, e) else {
            continue;
        };
        if let Some((pe, pf)) = prev {
            if pf < 0.0 && f >= 0.0 || pf > 0.0 && f <= 0.0 {
                return Some(BracketRecord {
                    n,
                    k,
                    lower: pe,
                    upper: e,
                    f_lower: pf,
                    f_upper: f,
                });
            }
        }
        prev = Some((e, f));
    }
    None
}

fn find_bracket(n: u32, k: u32, a: f64, b: f64) -> Option<BracketRecord> {
    let total = b - LN_2;
    let lo = (total - MAX_EXPONENT_ARG * pow2(-(n as i32) - 1)).max(0.0);
    let hi = total.min(MAX_EXPONENT_ARG * pow2(-(k as i32) - 1));
    if lo >= hi {
        return None;
    }
    scan(n, k, a, b, lo, hi, GRID_POINTS)
        .or_else(|| scan(n, k, a, b, lo, hi, GRID_POINTS * GRID_REFINEMENT))
}

/// Finds `(n, u, k, v)` with `lambda_abs = a` and `lambda_max = b` to within
/// `tol`.
pub fn realize(a: f64, b: f64, tol: f64) -> Result<RealizationResult> {
    check_targets(a, b)?;
    if tol.is_nan() || tol < MIN_TOLERANCE {
        return Err(Error::InvalidParameter(format!(
            "tolerance {tol:e} is below {MIN_TOLERANCE:e}"
        )));
    }
    let k = choose_k(a);
    let (n0, _) = choose_n(a, b, DEFAULT_MAX_N)?;

    let mut last_n = n0;
    for n in n0..=(n0 + MAX_RETRIES).min(MAX_LEVEL_PARAM) {
        last_n = n;
        let Some(initial) = find_bracket(n, k, a, b) else {
            continue;
        };
        return bisect(initial, a, b, tol);
    }
    Err(Error::NoBracket(format!(
        "no sign change of lambda_abs - a for N in {n0}..={last_n}, K = {k} (a = {a}, b = {b})"
    )))
}

fn bisect(initial: BracketRecord, a: f64, b: f64, tol: f64) -> Result<RealizationResult> {
    let (n, k) = (initial.n, initial.k);
    let mut br = initial;
    let mut history = vec![br];
    let mut iterations = 0;

    let (mut e, mut f) = if br.f_lower.abs() <= br.f_upper.abs() {
        (br.lower, br.f_lower)
    } else {
        (br.upper, br.f_upper)
    };
    while f.abs() > tol && iterations < MAX_BISECTIONS {
        let mid = 0.5 * (br.lower + br.upper);
        if mid <= br.lower || mid >= br.upper {
            break;
        }
        iterations += 1;
        let fm = residual_at(n, k, a, b, mid).ok_or_else(|| {
            Error::Infeasible(format!(
                "curve point at v-excess {mid} is not representable"
            ))
        })?;
        if fm.signum() == br.f_lower.signum() {
            br.lower = mid;
            br.f_lower = fm;
        } else {
            br.upper = mid;
            br.f_upper = fm;
        }
        history.push(br);
        e = mid;
        f = fm;
    }

    let params = curve_point(n, k, b, e)?;
    let achieved = exponent_pair(&params)?;
    let residuals = (
        (achieved.lambda_abs - a).abs(),
        (achieved.lambda_max - b).abs(),
    );
    if residuals.0 > tol || residuals.1 > tol {
        return Err(Error::NoConvergence {
            iterations,
            residual: residuals.0.max(residuals.1),
        });
    }
    Ok(RealizationResult {
        params,
        achieved,
        residuals,
        iterations,
        bracket_history: history,
    })
}
