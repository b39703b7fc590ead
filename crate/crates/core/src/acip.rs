//! The absolutely continuous invariant measure.
//!
//! For members of the family the invariant density is a step function with
//! three plateaus, known in closed form. Two independent routes check it:
//! the Perron-Frobenius operator applied exactly to step densities, and an
//! Ulam discretization whose stationary vector is found by power iteration.
//! Birkhoff averages along random orbits give a third, statistical estimate
//! of `lambda_abs`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::circle::{reduce, CircleMap};
use crate::error::{Error, Result};
use crate::map::{pow2, FamilyParams, PiecewiseLinearCircleMap};
use crate::numeric::NeumaierSum;

/// Image endpoints closer than this are treated as the same point.
const SNAP: f64 = 1e-13;

/// A piecewise-constant probability density on `[0, 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct StepDensity {
    boundaries: Vec<f64>,
    values: Vec<f64>,
}

impl StepDensity {
    /// `boundaries` are plateau left ends (first one 0); plateau `i` covers
    /// `[boundaries[i], boundaries[i + 1])`, the last one ends at 1.
    pub fn new(boundaries: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if boundaries.is_empty() || boundaries.len() != values.len() || boundaries[0] != 0.0 {
            return Err(Error::InvalidParameter(
                "density needs matching boundaries/values starting at 0".into(),
            ));
        }
        if boundaries
            .windows(2)
            .any(|w| w[0].partial_cmp(&w[1]) != Some(std::cmp::Ordering::Less))
            || *boundaries.last().unwrap() >= 1.0
        {
            return Err(Error::InvalidParameter(
                "plateau boundaries must increase strictly inside [0, 1)".into(),
            ));
        }
        if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::InvalidParameter(
                "density values must be finite and non-negative".into(),
            ));
        }
        Ok(StepDensity { boundaries, values })
    }

    pub fn lebesgue() -> Self {
        StepDensity {
            boundaries: vec![0.0],
            values: vec![1.0],
        }
    }

    /// Density with `bins` equal plateaus.
    pub fn uniform_bins(values: Vec<f64>) -> Result<Self> {
        let bins = values.len();
        let boundaries = (0..bins).map(|i| i as f64 / bins as f64).collect();
        Self::new(boundaries, values)
    }

    pub fn boundaries(&self) -> &[f64] {
        &self.boundaries
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `(left, right, value)` for every plateau.
    pub fn plateaus(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        (0..self.values.len()).map(move |i| {
            let right = self.boundaries.get(i + 1).copied().unwrap_or(1.0);
            (self.boundaries[i], right, self.values[i])
        })
    }

    pub fn value_at(&self, x: f64) -> f64 {
        let i = self
            .boundaries
            .partition_point(|&b| b <= x)
            .saturating_sub(1);
        self.values[i]
    }

    pub fn integral(&self) -> f64 {
        self.plateaus().map(|(l, r, v)| (r - l) * v).sum()
    }

    /// Common refinement of two densities as `(left, right, self, other)`.
    fn overlay<'a>(&'a self, other: &'a StepDensity) -> Vec<(f64, f64, f64, f64)> {
        let mut cuts: Vec<f64> = self
            .boundaries
            .iter()
            .chain(other.boundaries.iter())
            .copied()
            .collect();
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();
        let mut out = Vec::with_capacity(cuts.len());
        let (mut i, mut j) = (0, 0);
        for (c, &left) in cuts.iter().enumerate() {
            let right = cuts.get(c + 1).copied().unwrap_or(1.0);
            while i + 1 < self.boundaries.len() && self.boundaries[i + 1] <= left {
                i += 1;
            }
            while j + 1 < other.boundaries.len() && other.boundaries[j + 1] <= left {
                j += 1;
            }
            out.push((left, right, self.values[i], other.values[j]));
        }
        out
    }

    pub fn l1_distance(&self, other: &StepDensity) -> f64 {
        self.overlay(other)
            .into_iter()
            .map(|(l, r, a, b)| (r - l) * (a - b).abs())
            .sum()
    }

    /// Sup-norm distance, ignoring refinement cells narrower than `1e-13`
    /// (slivers created by boundaries that differ only by rounding).
    pub fn sup_distance(&self, other: &StepDensity) -> f64 {
        self.overlay(other)
            .into_iter()
            .filter(|(l, r, _, _)| r - l > SNAP)
            .map(|(_, _, a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Merges neighbouring plateaus whose values differ by at most `tol`.
    pub fn simplified(&self, tol: f64) -> StepDensity {
        let mut boundaries = vec![0.0];
        let mut values = vec![self.values[0]];
        for (b, &v) in self.boundaries.iter().zip(&self.values).skip(1) {
            if (v - values.last().unwrap()).abs() > tol {
                boundaries.push(*b);
                values.push(v);
            }
        }
        StepDensity { boundaries, values }
    }
}

/// The plateau constants `a_1 .. a_7` of the invariant density on the seven
/// intervals `[0, δ), [δ, 2^-n), [2^-n, 1/2 - 2^-k), [1/2 - 2^-k, 1/2 - ε),
/// [1/2 - ε, 1/2), [1/2, 1 - 2^-k), [1 - 2^-k, 1)`.
pub fn plateau_constants(p: &FamilyParams) -> [f64; 7] {
    let two_n = pow2(p.n() as i32);
    let ratio = pow2(p.n() as i32 - p.k() as i32);
    let cu = p.u().complement();
    let v = p.v().value();
    let a1 = two_n / (1.0 + 2.0 * cu * (two_n - ratio - 1.0 + 2.0 * ratio * v));
    let a3 = 2.0 * a1 * cu;
    let a7 = 2.0 * a3 * v;
    [a1, a1, a3, a3, a3, a3, a7]
}

/// The exact invariant density: `a_1` on `[0, 2^-n)`, `2 a_1 (1-u)` on
/// `[2^-n, 1 - 2^-k)` and `4 a_1 (1-u) v` on `[1 - 2^-k, 1)`.
pub fn exact_invariant_density(p: &FamilyParams) -> StepDensity {
    let a = plateau_constants(p);
    StepDensity {
        boundaries: vec![0.0, pow2(-(p.n() as i32)), 1.0 - pow2(-(p.k() as i32))],
        values: vec![a[0], a[2], a[6]],
    }
}

/// Exact Perron-Frobenius operator `(Pq)(x) = Σ_{f(y)=x} q(y) / f'(y)` on a
/// step density.
///
/// The domain is cut at map breakpoints and plateau boundaries; every cut
/// piece carries the constant `q / slope` onto its image. Image endpoints
/// that agree to `1e-13` are merged before the contributions are summed.
pub fn transfer_apply(map: &PiecewiseLinearCircleMap, q: &StepDensity) -> StepDensity {
    let mut cuts: Vec<f64> = map
        .breakpoints()
        .iter()
        .chain(q.boundaries.iter())
        .copied()
        .collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();

    // (image interval within [0, 1], value) pieces
    let mut pushes: Vec<(f64, f64, f64)> = Vec::new();
    for (c, &left) in cuts.iter().enumerate() {
        let right = cuts.get(c + 1).copied().unwrap_or(1.0);
        let piece = map.locate(left);
        let value = q.value_at(left) / map.piece_derivative(piece, left);
        let (a, b) = (map.piece_lift(piece, left), map.piece_lift(piece, right));
        let mut lo = a;
        while lo < b {
            let floor = lo.floor();
            let hi = b.min(floor + 1.0);
            pushes.push((lo - floor, hi - floor, value));
            lo = hi;
        }
    }

    let mut points: Vec<f64> = pushes
        .iter()
        .flat_map(|&(a, b, _)| [a, b])
        .chain([0.0, 1.0])
        .collect();
    points.sort_by(f64::total_cmp);
    let mut reps: Vec<f64> = Vec::with_capacity(points.len());
    for p in points {
        match reps.last() {
            Some(&last) if p - last <= SNAP => {}
            _ => reps.push(p),
        }
    }
    if 1.0 - reps[reps.len() - 1] <= SNAP {
        let last = reps.len() - 1;
        reps[last] = 1.0;
    }
    let nearest = |x: f64| -> usize {
        let i = reps.partition_point(|&r| r < x);
        if i == 0 {
            0
        } else if i == reps.len() || x - reps[i - 1] <= reps[i] - x {
            i - 1
        } else {
            i
        }
    };

    let cells = reps.len() - 1;
    let mut diff = vec![0.0; cells + 1];
    for (a, b, v) in pushes {
        let (ia, ib) = (nearest(a), nearest(b));
        if ib > ia {
            diff[ia] += v;
            diff[ib] -= v;
        }
    }
    let mut values = Vec::with_capacity(cells);
    let mut acc = 0.0;
    for d in &diff[..cells] {
        acc += d;
        values.push(acc.max(0.0));
    }
    StepDensity {
        boundaries: reps[..cells].to_vec(),
        values,
    }
}

/// `∫ q log f'`: the Lyapunov exponent of the measure with density `q`.
pub fn lambda_from_density<M: CircleMap + ?Sized>(map: &M, q: &StepDensity) -> f64 {
    q.plateaus()
        .map(|(l, r, v)| {
            if v == 0.0 {
                0.0
            } else {
                v * map.log_derivative_integral(l, r)
            }
        })
        .sum()
}

/// Row-stochastic Ulam matrix: entry `(i, j)` is the fraction of bin `i`
/// that the map sends into bin `j`.
#[derive(Debug, Clone)]
pub struct UlamOperator {
    bins: usize,
    rows: Vec<Vec<(usize, f64)>>,
}

impl UlamOperator {
    /// Assembles the matrix with exact image/bin intersections: every bin
    /// boundary inside the image of a monotone piece is pulled back through
    /// the piece inverse.
    pub fn assemble<M: CircleMap + ?Sized>(map: &M, bins: usize) -> Result<Self> {
        if bins < 64 {
            return Err(Error::InvalidParameter(format!(
                "Ulam needs at least 64 bins, got {bins}"
            )));
        }
        let scale = bins as f64;
        let rows = (0..bins)
            .into_par_iter()
            .map(|i| {
                let lo = i as f64 / scale;
                let hi = (i + 1) as f64 / scale;
                let mut entries: Vec<(usize, f64)> = Vec::new();
                let mut piece = map.locate(lo);
                let mut left = lo;
                while left < hi && piece < map.piece_count() {
                    let right = map.piece_end(piece).min(hi);
                    if right > left {
                        pull_back(map, piece, left, right, scale, bins, &mut entries);
                    }
                    left = right;
                    piece += 1;
                }
                entries.sort_by_key(|e| e.0);
                let mut merged: Vec<(usize, f64)> = Vec::with_capacity(entries.len());
                for (j, w) in entries {
                    match merged.last_mut() {
                        Some(last) if last.0 == j => last.1 += w,
                        _ => merged.push((j, w)),
                    }
                }
                merged
            })
            .collect();
        Ok(UlamOperator { bins, rows })
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn row(&self, i: usize) -> &[(usize, f64)] {
        &self.rows[i]
    }

    pub fn row_sums(&self) -> Vec<f64> {
        self.rows
            .iter()
            .map(|r| r.iter().map(|e| e.1).sum())
            .collect()
    }

    /// Stationary row vector by power iteration, stopping when successive
    /// iterates differ by at most `tol` in L1. Returns the vector and the
    /// iteration count.
    pub fn stationary(&self, tol: f64, max_iterations: usize) -> Result<(Vec<f64>, usize)> {
        let mut columns: Vec<Vec<(usize, f64)>> = vec![Vec::new(); self.bins];
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, w) in row {
                columns[j].push((i, w));
            }
        }
        let mut pi = vec![1.0 / self.bins as f64; self.bins];
        let mut residual = f64::INFINITY;
        for it in 1..=max_iterations {
            let mut next: Vec<f64> = columns
                .par_iter()
                .map(|col| col.iter().map(|&(i, w)| pi[i] * w).sum())
                .collect();
            let total: f64 = next.iter().sum();
            next.iter_mut().for_each(|x| *x /= total);
            residual = next.iter().zip(&pi).map(|(a, b)| (a - b).abs()).sum();
            pi = next;
            if residual <= tol {
                return Ok((pi, it));
            }
        }
        Err(Error::NoConvergence {
            iterations: max_iterations,
            residual,
        })
    }
}

fn pull_back<M: CircleMap + ?Sized>(
    map: &M,
    piece: usize,
    left: f64,
    right: f64,
    scale: f64,
    bins: usize,
    out: &mut Vec<(usize, f64)>,
) {
    let a = map.piece_lift(piece, left) * scale;
    let b = map.piece_lift(piece, right) * scale;
    let first = a.floor() as i64;
    let mut x_prev = left;
    let mut bin = first;
    let mut m = first + 1;
    while (m as f64) < b {
        let x = map
            .piece_inverse(piece, m as f64 / scale)
            .clamp(x_prev, right);
        out.push((bin.rem_euclid(bins as i64) as usize, (x - x_prev) * scale));
        x_prev = x;
        bin = m;
        m += 1;
    }
    out.push((
        bin.rem_euclid(bins as i64) as usize,
        (right - x_prev) * scale,
    ));
}

/// Iteration cap for the Ulam power iteration.
pub const ULAM_MAX_ITERATIONS: usize = 1_000_000;

/// Stationary density of the Ulam discretization on `bins` equal bins.
pub fn ulam_stationary<M: CircleMap + ?Sized>(
    map: &M,
    bins: usize,
    tol: f64,
) -> Result<StepDensity> {
    let op = UlamOperator::assemble(map, bins)?;
    let (pi, _) = op.stationary(tol, ULAM_MAX_ITERATIONS)?;
    StepDensity::uniform_bins(pi.into_iter().map(|p| p * bins as f64).collect())
}

/// Birkhoff average of `log f'` with its standard error across orbits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BirkhoffEstimate {
    pub estimate: f64,
    pub standard_error: f64,
}

pub const DEFAULT_BURN_IN: usize = 1_000;

/// Width of the uniform kick added to every iterate. Without it, orbits of
/// maps whose slopes are mostly 2 lose one mantissa bit per step and end on
/// the fixed point at 0.
pub const ORBIT_DITHER: f64 = 1.0 / (1u64 << 50) as f64;

/// Averages `log f'` along `samples` orbits of length `iterations` started
/// at uniform random points, after discarding `burn_in` iterates.
///
/// Every iterate is kicked by a uniform amount of width [`ORBIT_DITHER`].
/// Orbit `s` draws from the ChaCha8 stream `s` of `seed`, so the result does
/// not depend on how the orbits are scheduled across threads.
pub fn birkhoff_lambda_abs<M: CircleMap + ?Sized>(
    map: &M,
    samples: usize,
    iterations: usize,
    burn_in: usize,
    seed: u64,
) -> Result<BirkhoffEstimate> {
    if samples < 100 || iterations < 1000 {
        return Err(Error::InvalidParameter(format!(
            "Birkhoff needs at least 100 samples and 1000 iterations, got {samples} x {iterations}"
        )));
    }
    let means: Vec<f64> = (0..samples)
        .into_par_iter()
        .map(|s| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(s as u64);
            let mut x: f64 = rng.gen();
            let mut kick = move || (rng.gen::<f64>() - 0.5) * ORBIT_DITHER;
            for _ in 0..burn_in {
                x = reduce(map.lift(x) + kick());
            }
            let mut sum = NeumaierSum::default();
            for _ in 0..iterations {
                let piece = map.locate(x);
                sum.add(map.piece_derivative(piece, x).ln());
                x = reduce(map.piece_lift(piece, x) + kick());
            }
            sum.total() / iterations as f64
        })
        .collect();
    let n = samples as f64;
    let mean = means.iter().copied().collect::<NeumaierSum>().total() / n;
    let var = means.iter().map(|m| (m - mean) * (m - mean)).sum::<f64>() / (n - 1.0);
    Ok(BirkhoffEstimate {
        estimate: mean,
        standard_error: (var / n).sqrt(),
    })
}
