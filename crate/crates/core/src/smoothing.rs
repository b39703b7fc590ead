//! Smoothing a piecewise-linear map at its corners.
//!
//! At a corner `c` where the slope jumps from `sL` to `sR`, the map is
//! replaced on `(c - α, c + α)` by the integral of the derivative profile
//! `sL + (sR - sL) σ(τ)`, `τ = (x - c + α) / 2α`, with `σ` a smoothstep. The
//! profile is symmetric, so the blend rises by exactly `α (sL + sR)` and the
//! smoothed map meets the original one again at `c + α`. Linear stretches
//! keep the anchors of the source map and evaluate bit-for-bit like it.

use rayon::prelude::*;

use crate::acip::{lambda_from_density, ulam_stationary};
use crate::circle::CircleMap;
use crate::error::{Error, Result};
use crate::exponents::exponent_pair;
use crate::map::{FamilyParams, PiecewiseLinearCircleMap};
use crate::mme::lambda_max_by_cylinders;
use crate::numeric::solve_increasing;

/// Derivative profile used inside a blend.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Profile {
    /// `σ(τ) = τ²(3 - 2τ)`; the smoothed map is C¹.
    #[default]
    Cubic,
    /// `σ(τ) = τ³(10 - 15τ + 6τ²)`; the smoothed map is C².
    Quintic,
}

impl Profile {
    pub fn sigma(self, t: f64) -> f64 {
        match self {
            Profile::Cubic => t * t * (3.0 - 2.0 * t),
            Profile::Quintic => t * t * t * (10.0 + t * (-15.0 + 6.0 * t)),
        }
    }

    /// `∫_0^τ σ`.
    pub fn sigma_integral(self, t: f64) -> f64 {
        let t2 = t * t;
        match self {
            Profile::Cubic => t2 * t * (1.0 - 0.5 * t),
            Profile::Quintic => t2 * t2 * (2.5 + t * (-3.0 + t)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SmoothPiece {
    /// `F(x) = lift_at_anchor + slope (x - anchor)`, anchored like the source.
    Linear {
        anchor: f64,
        lift_at_anchor: f64,
        slope: f64,
    },
    /// Blend around `center`; `base` is the source lift at `center - alpha`.
    Blend {
        center: f64,
        left_slope: f64,
        right_slope: f64,
        base: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SmoothCircleMap {
    source: PiecewiseLinearCircleMap,
    alpha: f64,
    profile: Profile,
    starts: Vec<f64>,
    lift_starts: Vec<f64>,
    pieces: Vec<SmoothPiece>,
}

/// Breakpoints of `map` where the slope changes, as `(position, sL, sR)`.
/// A corner at 0 is reported once, with the slope of the last piece as `sL`.
pub fn corners(map: &PiecewiseLinearCircleMap) -> Vec<(f64, f64, f64)> {
    let s = map.slopes();
    let b = map.breakpoints();
    (0..s.len())
        .filter_map(|j| {
            let left = if j == 0 { s[s.len() - 1] } else { s[j - 1] };
            (left != s[j]).then_some((b[j], left, s[j]))
        })
        .collect()
}

/// Largest admissible blend radius (exclusive): half the shortest distance
/// between consecutive corners around the circle.
pub fn alpha_limit(map: &PiecewiseLinearCircleMap) -> f64 {
    let c = corners(map);
    if c.is_empty() {
        return f64::INFINITY;
    }
    let mut gap = c[0].0 + 1.0 - c[c.len() - 1].0;
    for w in c.windows(2) {
        gap = gap.min(w[1].0 - w[0].0);
    }
    0.5 * gap
}

/// Cubic smoothing of `map` with blend radius `alpha`.
pub fn smooth_map(map: &PiecewiseLinearCircleMap, alpha: f64) -> Result<SmoothCircleMap> {
    smooth_map_with(map, alpha, Profile::Cubic)
}

pub fn smooth_map_with(
    map: &PiecewiseLinearCircleMap,
    alpha: f64,
    profile: Profile,
) -> Result<SmoothCircleMap> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "blend radius must be positive, got {alpha}"
        )));
    }
    let limit = alpha_limit(map);
    if alpha >= limit {
        return Err(Error::AlphaTooLarge { alpha, limit });
    }

    let lifts = map.piece_lift_starts();
    let top = lifts[0] + map.rise();
    let mut blends: Vec<(f64, f64, SmoothPiece)> = Vec::new();
    for (c, sl, sr) in corners(map) {
        let lift_c = if c == 0.0 {
            lifts[0]
        } else {
            map.piece_lift_starts()[map.locate(c)]
        };
        let blend = |center: f64, lift: f64| SmoothPiece::Blend {
            center,
            left_slope: sl,
            right_slope: sr,
            base: lift - alpha * sl,
        };
        if c == 0.0 {
            blends.push((0.0, alpha, blend(0.0, lift_c)));
            blends.push((1.0 - alpha, 1.0, blend(1.0, top)));
        } else {
            blends.push((c - alpha, c + alpha, blend(c, lift_c)));
        }
    }

    let mut pieces: Vec<(f64, f64, SmoothPiece)> = blends.clone();
    for (j, seg) in map.segments().enumerate() {
        let (mut lo, mut hi) = (seg.left, seg.right);
        for &(bl, br, _) in &blends {
            if bl <= lo && lo < br {
                lo = br;
            }
            if bl < hi && hi <= br {
                hi = bl;
            }
        }
        if lo < hi {
            pieces.push((
                lo,
                hi,
                SmoothPiece::Linear {
                    anchor: seg.left,
                    lift_at_anchor: lifts[j],
                    slope: seg.slope,
                },
            ));
        }
    }
    pieces.sort_by(|a, b| a.0.total_cmp(&b.0));
    debug_assert!(pieces.windows(2).all(|w| w[0].1 == w[1].0));

    let mut smooth = SmoothCircleMap {
        source: map.clone(),
        alpha,
        profile,
        starts: pieces.iter().map(|p| p.0).collect(),
        lift_starts: Vec::new(),
        pieces: pieces.iter().map(|p| p.2).collect(),
    };
    smooth.lift_starts = (0..smooth.pieces.len())
        .map(|i| smooth.piece_lift(i, smooth.starts[i]))
        .collect();
    Ok(smooth)
}

/// Eight-point Gauss–Legendre nodes and weights on `[-1, 1]`.
const GAUSS_8: [(f64, f64); 4] = [
    (0.183_434_642_495_649_8, 0.362_683_783_378_362),
    (0.525_532_409_916_329, 0.313_706_645_877_887_3),
    (0.796_666_477_413_626_7, 0.222_381_034_453_374_5),
    (0.960_289_856_497_536_3, 0.101_228_536_290_376_3),
];

fn gauss8<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> f64 {
    let (m, h) = (0.5 * (a + b), 0.5 * (b - a));
    h * GAUSS_8
        .iter()
        .map(|&(x, w)| w * (f(m - h * x) + f(m + h * x)))
        .sum::<f64>()
}

fn adaptive_gauss<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, whole: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let (l, r) = (gauss8(f, a, m), gauss8(f, m, b));
    if depth == 0 || (l + r - whole).abs() <= 1e-16 * (b - a).max(1e-300) + 1e-17 {
        return l + r;
    }
    adaptive_gauss(f, a, m, l, depth - 1) + adaptive_gauss(f, m, b, r, depth - 1)
}

impl SmoothCircleMap {
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn profile(&self) -> Profile {
        self.profile
    }

    pub fn source(&self) -> &PiecewiseLinearCircleMap {
        &self.source
    }

    pub fn pieces(&self) -> &[SmoothPiece] {
        &self.pieces
    }

    fn tau(&self, center: f64, x: f64) -> f64 {
        ((x - center + self.alpha) / (2.0 * self.alpha)).clamp(0.0, 1.0)
    }

    /// Largest jump of `f'` across piece boundaries, including the wrap.
    pub fn max_derivative_jump(&self) -> f64 {
        let m = self.pieces.len();
        (0..m)
            .map(|i| {
                let next = (i + 1) % m;
                let end = self.piece_end(i);
                let start = self.starts[next];
                (self.piece_derivative(i, end) - self.piece_derivative(next, start)).abs()
            })
            .fold(0.0, f64::max)
    }

    /// Largest jump of the lift across piece boundaries, including the wrap.
    pub fn max_lift_jump(&self) -> f64 {
        let m = self.pieces.len();
        (0..m)
            .map(|i| {
                let end = self.piece_end(i);
                let next_lift = if i + 1 < m {
                    self.piece_lift(i + 1, end)
                } else {
                    self.piece_lift(0, 0.0) + self.rise()
                };
                (self.piece_lift(i, end) - next_lift).abs()
            })
            .fold(0.0, f64::max)
    }

    /// `max |F^α - F|` over `samples` equally spaced points of `[0, 1)`.
    pub fn sup_distance(&self, samples: usize) -> f64 {
        (0..samples)
            .into_par_iter()
            .map(|i| {
                let x = i as f64 / samples as f64;
                (self.lift(x) - self.source.lift(x)).abs()
            })
            .reduce(|| 0.0, f64::max)
    }

    /// `(min f', max f')` over `samples` equally spaced points.
    pub fn derivative_range(&self, samples: usize) -> (f64, f64) {
        (0..samples)
            .into_par_iter()
            .map(|i| {
                let d = self.piece_derivative(
                    self.locate(i as f64 / samples as f64),
                    i as f64 / samples as f64,
                );
                (d, d)
            })
            .reduce(
                || (f64::INFINITY, f64::NEG_INFINITY),
                |a, b| (a.0.min(b.0), a.1.max(b.1)),
            )
    }
}

impl CircleMap for SmoothCircleMap {
    fn piece_starts(&self) -> &[f64] {
        &self.starts
    }

    fn piece_lift_starts(&self) -> &[f64] {
        &self.lift_starts
    }

    fn rise(&self) -> f64 {
        self.source.rise()
    }

    fn piece_lift(&self, piece: usize, x: f64) -> f64 {
        match self.pieces[piece] {
            SmoothPiece::Linear {
                anchor,
                lift_at_anchor,
                slope,
            } => lift_at_anchor + slope * (x - anchor),
            SmoothPiece::Blend {
                center,
                left_slope,
                right_slope,
                base,
            } => {
                let t = self.tau(center, x);
                let w = 2.0 * self.alpha;
                base + w
                    * (left_slope * t + (right_slope - left_slope) * self.profile.sigma_integral(t))
            }
        }
    }

    fn piece_derivative(&self, piece: usize, x: f64) -> f64 {
        match self.pieces[piece] {
            SmoothPiece::Linear { slope, .. } => slope,
            SmoothPiece::Blend {
                center,
                left_slope,
                right_slope,
                ..
            } => left_slope + (right_slope - left_slope) * self.profile.sigma(self.tau(center, x)),
        }
    }

    fn piece_inverse(&self, piece: usize, t: f64) -> f64 {
        let (lo, hi) = (self.starts[piece], self.piece_end(piece));
        match self.pieces[piece] {
            SmoothPiece::Linear {
                anchor,
                lift_at_anchor,
                slope,
            } => (anchor + (t - lift_at_anchor) / slope).clamp(lo, hi),
            SmoothPiece::Blend { .. } => solve_increasing(
                |x| self.piece_lift(piece, x),
                |x| self.piece_derivative(piece, x),
                t,
                lo,
                hi,
            ),
        }
    }

    fn piece_log_derivative_integral(&self, piece: usize, a: f64, b: f64) -> f64 {
        match self.pieces[piece] {
            SmoothPiece::Linear { slope, .. } => (b - a) * slope.ln(),
            SmoothPiece::Blend { .. } => {
                let f = |x: f64| self.piece_derivative(piece, x).ln();
                adaptive_gauss(&f, a, b, gauss8(&f, a, b), 40)
            }
        }
    }

    fn piece_is_linear(&self, piece: usize) -> bool {
        matches!(self.pieces[piece], SmoothPiece::Linear { .. })
    }
}

/// The fixed point of a smoothed map, required to lie within `2α` of 0.
pub fn fixed_point(map: &SmoothCircleMap) -> Result<f64> {
    let x = map.fixed_point()?;
    if x.abs() > 2.0 * map.alpha() {
        return Err(Error::FixedPointNotFound(format!(
            "fixed point {x} is farther than 2α = {} from 0",
            2.0 * map.alpha()
        )));
    }
    Ok(x)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepConfig {
    pub bins: usize,
    pub level: u32,
    pub profile: Profile,
    pub ulam_tolerance: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            bins: 1 << 14,
            level: 20,
            profile: Profile::Cubic,
            ulam_tolerance: 1e-12,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub alpha: f64,
    pub lambda_abs: f64,
    pub lambda_max: f64,
}

/// Exponents of the smoothed family member for each `alpha`, preceded by the
/// closed-form row at `alpha = 0`.
pub fn alpha_sweep(
    params: &FamilyParams,
    alphas: &[f64],
    config: &SweepConfig,
) -> Result<Vec<SweepRow>> {
    let map = PiecewiseLinearCircleMap::family(params)?;
    let exact = exponent_pair(params)?;
    let mut rows = vec![SweepRow {
        alpha: 0.0,
        lambda_abs: exact.lambda_abs,
        lambda_max: exact.lambda_max,
    }];
    for &alpha in alphas {
        let smooth = smooth_map_with(&map, alpha, config.profile)?;
        let q = ulam_stationary(&smooth, config.bins, config.ulam_tolerance)?;
        rows.push(SweepRow {
            alpha,
            lambda_abs: lambda_from_density(&smooth, &q),
            lambda_max: lambda_max_by_cylinders(&smooth, config.level)?,
        });
    }
    Ok(rows)
}
