//! The parametric family of piecewise-linear expanding maps and generic
//! continuous piecewise-linear circle maps.

use crate::circle::CircleMap;
use crate::error::{Error, Result};

/// A number in `[1/2, 1)` stored together with its complement `1 - x`.
///
/// Family parameters are routinely pushed exponentially close to 1, where
/// `1 - x` recovered by subtraction has no significant digits left. Every
/// formula that needs `log(1 - x)` reads the stored complement instead.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fraction {
    value: f64,
    complement: f64,
}

impl Fraction {
    pub const HALF: Fraction = Fraction {
        value: 0.5,
        complement: 0.5,
    };

    pub fn from_value(value: f64) -> Result<Self> {
        Self::checked(value, 1.0 - value)
    }

    pub fn from_complement(complement: f64) -> Result<Self> {
        Self::checked(1.0 - complement, complement)
    }

    pub(crate) fn checked(value: f64, complement: f64) -> Result<Self> {
        if !(value.is_finite() && complement.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "non-finite fraction ({value}, {complement})"
            )));
        }
        // the value itself may round to 1 when the complement is tiny
        if !(0.5..=1.0).contains(&value) || !(complement > 0.0 && complement <= 0.5) {
            return Err(Error::InvalidParameter(format!(
                "fraction {value} (complement {complement:e}) outside [1/2, 1)"
            )));
        }
        Ok(Fraction { value, complement })
    }

    pub fn value(self) -> f64 {
        self.value
    }

    pub fn complement(self) -> f64 {
        self.complement
    }

    pub fn ln_value(self) -> f64 {
        // ln(1 - c) keeps precision when c is tiny
        if self.complement < 0.25 {
            (-self.complement).ln_1p()
        } else {
            self.value.ln()
        }
    }

    pub fn ln_complement(self) -> f64 {
        self.complement.ln()
    }

    /// Binary entropy `-(x log x + (1-x) log(1-x))`.
    pub fn entropy(self) -> f64 {
        -(xlogx_with_ln(self.value, self.ln_value())
            + xlogx_with_ln(self.complement, self.ln_complement()))
    }
}

fn xlogx_with_ln(x: f64, ln_x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * ln_x
    }
}

/// Largest admissible `n` or `k`; keeps `2^n` and `2^-n` exact and finite.
pub const MAX_LEVEL_PARAM: u32 = 62;

/// The four parameters `(n, u, k, v)` selecting a member of the family.
///
/// `u` controls the two branches on `[0, 2^-n)` (breakpoint `δ = 2^-n u`),
/// `v` the two branches on `[1/2 - 2^-k, 1/2)` (breakpoint `1/2 - ε`,
/// `ε = 2^-k v`). `u = v = 1/2` gives the doubling map for every `n, k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FamilyParams {
    n: u32,
    u: Fraction,
    k: u32,
    v: Fraction,
}

impl FamilyParams {
    pub fn new(n: u32, u: f64, k: u32, v: f64) -> Result<Self> {
        Self::from_fractions(n, Fraction::from_value(u)?, k, Fraction::from_value(v)?)
    }

    /// Builds parameters from `1 - u` and `1 - v`.
    pub fn from_complements(n: u32, one_minus_u: f64, k: u32, one_minus_v: f64) -> Result<Self> {
        Self::from_fractions(
            n,
            Fraction::from_complement(one_minus_u)?,
            k,
            Fraction::from_complement(one_minus_v)?,
        )
    }

    pub fn from_fractions(n: u32, u: Fraction, k: u32, v: Fraction) -> Result<Self> {
        for (name, val) in [("n", n), ("k", k)] {
            if !(2..=MAX_LEVEL_PARAM).contains(&val) {
                return Err(Error::InvalidParameter(format!(
                    "{name} = {val} must lie in [2, {MAX_LEVEL_PARAM}]"
                )));
            }
        }
        Ok(FamilyParams { n, u, k, v })
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn u(&self) -> Fraction {
        self.u
    }

    pub fn v(&self) -> Fraction {
        self.v
    }

    /// `δ = 2^-n u`.
    pub fn delta(&self) -> f64 {
        pow2(-(self.n as i32)) * self.u.value
    }

    /// `ε = 2^-k v`.
    pub fn epsilon(&self) -> f64 {
        pow2(-(self.k as i32)) * self.v.value
    }

    pub fn is_doubling(&self) -> bool {
        self.u == Fraction::HALF && self.v == Fraction::HALF
    }

    /// Breakpoints `δ, 1/2 - ε` as placed in double precision, with the
    /// lengths of the two steep pieces and of `[1/2 - ε, 1/2)`.
    fn geometry(&self) -> Result<Geometry> {
        let p_n = pow2(-(self.n as i32));
        let p_k = pow2(-(self.k as i32));
        let delta = self.delta();
        let b4 = 0.5 - self.epsilon();
        let g = Geometry {
            delta,
            b4,
            steep_u: p_n - delta,
            steep_v: b4 - (0.5 - p_k),
            tail_v: 0.5 - b4,
        };
        if !(g.steep_u > 0.0 && g.steep_v > 0.0 && g.tail_v > 0.0) {
            return Err(Error::InvalidParameter(
                "u or v too close to 1 for the map to be representable in double precision".into(),
            ));
        }
        Ok(g)
    }

    /// The member whose `u` and `v` are exactly the ones encoded by the
    /// double-precision breakpoints of [`PiecewiseLinearCircleMap::family`].
    ///
    /// The differences involved are exact, so the map of the result has the
    /// same breakpoints and its slopes are `1/u, 1/(1-u), 1/(1-v), 1/v` up to
    /// one rounding each.
    pub fn representable(&self) -> Result<Self> {
        let g = self.geometry()?;
        let scale_n = pow2(self.n as i32);
        let scale_k = pow2(self.k as i32);
        Ok(FamilyParams {
            n: self.n,
            u: Fraction::checked(g.delta * scale_n, g.steep_u * scale_n)?,
            k: self.k,
            v: Fraction::checked(g.tail_v * scale_k, g.steep_v * scale_k)?,
        })
    }
}

struct Geometry {
    delta: f64,
    b4: f64,
    steep_u: f64,
    steep_v: f64,
    tail_v: f64,
}

pub(crate) fn pow2(e: i32) -> f64 {
    2f64.powi(e)
}

/// One affine piece of a [`PiecewiseLinearCircleMap`].
///
/// On `[left, right)` the map is `slope * x + intercept (mod 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub left: f64,
    pub right: f64,
    pub slope: f64,
    pub intercept: f64,
}

/// A continuous piecewise-linear expanding circle map.
///
/// Each piece is stored as (left endpoint, lift value at the left endpoint,
/// slope); evaluation is anchored at the left endpoint so that very steep
/// branches stay accurate.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseLinearCircleMap {
    breakpoints: Vec<f64>,
    lift_starts: Vec<f64>,
    slopes: Vec<f64>,
    rise: f64,
}

impl PiecewiseLinearCircleMap {
    /// Builds a map from breakpoints (first one 0), per-piece slopes and the
    /// value `f(0)`; the lift is obtained by accumulating `slope * length`.
    pub fn new(breakpoints: Vec<f64>, slopes: Vec<f64>, value_at_zero: f64) -> Result<Self> {
        validate_pieces(&breakpoints, &slopes)?;
        let mut lift_starts = Vec::with_capacity(slopes.len());
        let mut acc = value_at_zero;
        for (i, &s) in slopes.iter().enumerate() {
            lift_starts.push(acc);
            let right = breakpoints.get(i + 1).copied().unwrap_or(1.0);
            acc += s * (right - breakpoints[i]);
        }
        let rise = acc - value_at_zero;
        let map = PiecewiseLinearCircleMap {
            breakpoints,
            lift_starts,
            slopes,
            rise,
        };
        map.degree()?;
        Ok(map)
    }

    /// The doubling map `x ↦ 2x mod 1`.
    pub fn doubling() -> Self {
        PiecewiseLinearCircleMap {
            breakpoints: vec![0.0],
            lift_starts: vec![0.0],
            slopes: vec![2.0],
            rise: 2.0,
        }
    }

    /// Member `(n, u, k, v)` of the family.
    ///
    /// Breakpoints `0, δ, 2^-n, 1/2 - 2^-k, 1/2 - ε, 1/2` with slopes
    /// `1/u, 1/(1-u), 2, 1/(1-v), 1/v, 2`. The middle slope-2 piece is dropped
    /// when `2^-n = 1/2 - 2^-k` (`n = k = 2`). The lift passes through the
    /// dyadic values `0, 2^-n, 2^(1-n), 1 - 2^(1-k), 1 - 2^-k, 1` exactly; the
    /// two steep slopes are taken from the stored breakpoints so that the map
    /// is continuous to the last bit.
    pub fn family(params: &FamilyParams) -> Result<Self> {
        let p_n = pow2(-(params.n as i32));
        let p_k = pow2(-(params.k as i32));
        let Geometry {
            delta,
            b4,
            steep_u,
            steep_v,
            tail_v,
        } = params.geometry()?;
        let b3 = 0.5 - p_k;
        let mut breakpoints = vec![0.0, delta, p_n];
        let mut lift_starts = vec![0.0, p_n, 2.0 * p_n];
        let mut slopes = vec![1.0 / params.u.value, p_n / steep_u];
        if b3 > p_n {
            slopes.push(2.0);
            breakpoints.push(b3);
            lift_starts.push(1.0 - 2.0 * p_k);
        }
        slopes.push(p_k / steep_v);
        breakpoints.push(b4);
        lift_starts.push(1.0 - p_k);
        slopes.push(p_k / tail_v);
        breakpoints.push(0.5);
        lift_starts.push(1.0);
        slopes.push(2.0);
        Ok(PiecewiseLinearCircleMap {
            breakpoints,
            lift_starts,
            slopes,
            rise: 2.0,
        })
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn slopes(&self) -> &[f64] {
        &self.slopes
    }

    pub fn segments(&self) -> impl Iterator<Item = Segment> + '_ {
        (0..self.slopes.len()).map(move |i| {
            let left = self.breakpoints[i];
            Segment {
                left,
                right: self.piece_end(i),
                slope: self.slopes[i],
                intercept: self.lift_starts[i] - self.slopes[i] * left,
            }
        })
    }

    /// `Σ slope_i * length_i`, the degree before rounding.
    pub fn slope_length_sum(&self) -> f64 {
        self.segments().map(|s| s.slope * (s.right - s.left)).sum()
    }

    /// Largest `|left limit - value| mod 1` over all breakpoints, wrap-around included.
    pub fn continuity_defect(&self) -> f64 {
        let count = self.slopes.len();
        (0..count)
            .map(|i| {
                let next = (i + 1) % count;
                let end = self.lift_starts[i]
                    + self.slopes[i] * (self.piece_end(i) - self.breakpoints[i]);
                let d = (end - self.lift_starts[next]).rem_euclid(1.0);
                d.min(1.0 - d)
            })
            .fold(0.0, f64::max)
    }

    pub fn min_slope(&self) -> f64 {
        self.slopes.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

fn validate_pieces(breakpoints: &[f64], slopes: &[f64]) -> Result<()> {
    if breakpoints.is_empty() || breakpoints.len() != slopes.len() {
        return Err(Error::InvalidParameter(
            "need one slope per breakpoint and at least one piece".into(),
        ));
    }
    if breakpoints[0] != 0.0 {
        return Err(Error::InvalidParameter("first breakpoint must be 0".into()));
    }
    if breakpoints
        .windows(2)
        .any(|w| w[0].partial_cmp(&w[1]) != Some(std::cmp::Ordering::Less))
        || *breakpoints.last().unwrap() >= 1.0
    {
        return Err(Error::InvalidParameter(
            "breakpoints must increase strictly inside [0, 1)".into(),
        ));
    }
    if let Some(s) = slopes.iter().find(|s| !(s.is_finite() && **s > 1.0)) {
        return Err(Error::InvalidParameter(format!(
            "slope {s} is not expanding"
        )));
    }
    Ok(())
}

impl CircleMap for PiecewiseLinearCircleMap {
    fn piece_starts(&self) -> &[f64] {
        &self.breakpoints
    }

    fn piece_lift_starts(&self) -> &[f64] {
        &self.lift_starts
    }

    fn rise(&self) -> f64 {
        self.rise
    }

    fn piece_lift(&self, piece: usize, x: f64) -> f64 {
        self.lift_starts[piece] + self.slopes[piece] * (x - self.breakpoints[piece])
    }

    fn piece_derivative(&self, piece: usize, _x: f64) -> f64 {
        self.slopes[piece]
    }

    fn piece_inverse(&self, piece: usize, t: f64) -> f64 {
        let left = self.breakpoints[piece];
        let x = left + (t - self.lift_starts[piece]) / self.slopes[piece];
        x.clamp(left, self.piece_end(piece))
    }

    fn piece_log_derivative_integral(&self, piece: usize, a: f64, b: f64) -> f64 {
        (b - a) * self.slopes[piece].ln()
    }

    fn piece_is_linear(&self, _piece: usize) -> bool {
        true
    }

    fn degree(&self) -> Result<i64> {
        let rise = self.slope_length_sum();
        let d = rise.round();
        let residual = (rise - d).abs();
        if residual > 1e-9 {
            return Err(Error::NonIntegerDegree { rise, residual });
        }
        Ok(d as i64)
    }
}
