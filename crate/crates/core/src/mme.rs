//! The measure of maximal entropy.
//!
//! For a degree-2 map with two full increasing branches the iterated
//! preimages of the fixed point cut the circle into `2^m` cylinders at level
//! `m`, one per binary itinerary, and the measure of maximal entropy gives
//! each of them mass `2^-m`. This holds for piecewise-linear and smoothed
//! maps alike, so everything here is generic over [`CircleMap`].

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::circle::{reduce, CircleMap};
use crate::error::{Error, Result};
use crate::numeric::NeumaierSum;

/// Deepest cylinder level accepted (`2^26` cells).
pub const MAX_LEVEL: u32 = 26;

/// Deepest itinerary accepted by the samplers.
pub const MAX_SAMPLE_DEPTH: usize = 40;

/// Tolerance for matching cell images against cell endpoints.
pub const MARKOV_TOLERANCE: f64 = 1e-10;

pub const POWER_TOLERANCE: f64 = 1e-12;
pub const POWER_MAX_ITERATIONS: usize = 100_000;

/// Level-`m` cylinders in lifted coordinates.
///
/// `endpoints` has `2^m + 1` entries running from the fixed point `p` to
/// `p + 1`; cell `j` is `[endpoints[j], endpoints[j + 1])` and its itinerary
/// is the binary expansion of `j` (most significant bit first).
#[derive(Debug, Clone, PartialEq)]
pub struct CylinderPartition {
    level: u32,
    fixed_point: f64,
    endpoints: Vec<f64>,
}

impl CylinderPartition {
    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn fixed_point(&self) -> f64 {
        self.fixed_point
    }

    pub fn endpoints(&self) -> &[f64] {
        &self.endpoints
    }

    pub fn cell_count(&self) -> usize {
        self.endpoints.len() - 1
    }

    pub fn cell(&self, j: usize) -> (f64, f64) {
        (self.endpoints[j], self.endpoints[j + 1])
    }

    /// Itinerary of cell `j`: `true` for the second branch.
    pub fn code(&self, j: usize) -> Vec<bool> {
        (0..self.level)
            .rev()
            .map(|bit| (j >> bit) & 1 == 1)
            .collect()
    }

    /// Cell endpoints reduced mod 1 and sorted in `[0, 1)`.
    pub fn endpoints_mod1(&self) -> Vec<f64> {
        let mut pts: Vec<f64> = self.endpoints[..self.cell_count()]
            .iter()
            .map(|&e| reduce(e))
            .collect();
        pts.sort_by(f64::total_cmp);
        pts
    }

    /// Midpoint of cell `j` reduced into `[0, 1)`.
    pub fn midpoint(&self, j: usize) -> f64 {
        let (l, r) = self.cell(j);
        reduce(0.5 * (l + r))
    }
}

/// Fixed point `p` and the integer `s` with `F(p) = p + s`.
fn anchor<M: CircleMap + ?Sized>(map: &M) -> Result<(f64, f64)> {
    let degree = map.degree()?;
    if degree != 2 {
        return Err(Error::InvalidParameter(format!(
            "cylinders need a degree-2 map, got degree {degree}"
        )));
    }
    let p = map.fixed_point()?;
    let shift = (map.lift_ext(p) - p).round();
    Ok((p, shift))
}

/// Iterated preimages of the fixed point up to `level`.
pub fn cylinder_partition<M: CircleMap + ?Sized>(map: &M, level: u32) -> Result<CylinderPartition> {
    if level == 0 {
        return Err(Error::InvalidParameter(
            "cylinder level must be at least 1".into(),
        ));
    }
    if level > MAX_LEVEL {
        return Err(Error::ResourceLimit(format!(
            "cylinder level {level} exceeds {MAX_LEVEL}"
        )));
    }
    let (p, shift) = anchor(map)?;
    let mut endpoints = vec![p, p + 1.0];
    for m in 1..=level {
        let half = 1usize << (m - 1);
        let prev = &endpoints;
        let mut next: Vec<f64> = (0..2 * half)
            .into_par_iter()
            .map(|j| {
                if j == 0 {
                    return p;
                }
                let branch = (j / half) as f64;
                let target = prev[j % half] + shift + branch;
                map.inverse_lift_ext(target).clamp(p, p + 1.0)
            })
            .collect();
        next.push(p + 1.0);
        endpoints = next;
    }
    Ok(CylinderPartition {
        level,
        fixed_point: p,
        endpoints,
    })
}

/// Per-cell masses of the measure of maximal entropy.
#[derive(Debug, Clone, PartialEq)]
pub struct MmeWeights {
    pub masses: Vec<f64>,
}

impl MmeWeights {
    /// Total mass of the cells whose midpoints fall in `[a, b)`.
    pub fn mass_in(&self, partition: &CylinderPartition, a: f64, b: f64) -> f64 {
        (0..partition.cell_count())
            .filter(|&j| {
                let mid = partition.midpoint(j);
                mid >= a && mid < b
            })
            .map(|j| self.masses[j])
            .sum()
    }
}

/// Every level-`m` cylinder of a full-branch degree-2 map has mass `2^-m`.
pub fn mme_cell_masses(partition: &CylinderPartition) -> MmeWeights {
    let mass = 0.5f64.powi(partition.level as i32);
    MmeWeights {
        masses: vec![mass; partition.cell_count()],
    }
}

/// Perron eigenvalue of the cell transition matrix and the Parry masses
/// `l_i r_i / Σ l_j r_j` built from its left and right eigenvectors.
#[derive(Debug, Clone, PartialEq)]
pub struct ParryReport {
    pub eigenvalue: f64,
    pub masses: Vec<f64>,
    pub iterations: usize,
}

/// Builds the 0/1 transition matrix of the level-`level` cylinders from
/// forward images of their endpoints and runs power iteration on it and on
/// its transpose.
pub fn parry_check<M: CircleMap + ?Sized>(map: &M, level: u32) -> Result<ParryReport> {
    let partition = cylinder_partition(map, level)?;
    let (p, _) = anchor(map)?;
    let cells = partition.cell_count();
    let ends = partition.endpoints();

    let locate = |t: f64| -> Result<usize> {
        let x = p + (t - p).rem_euclid(1.0);
        let i = ends.partition_point(|&e| e < x);
        let cand = [i.saturating_sub(1), i.min(cells)];
        let best = cand
            .into_iter()
            .min_by(|&a, &b| (ends[a] - x).abs().total_cmp(&(ends[b] - x).abs()))
            .unwrap();
        let gap = (ends[best] - x).abs().min((ends[best] - x - 1.0).abs());
        if gap > MARKOV_TOLERANCE {
            return Err(Error::NotMarkov(format!(
                "image point {t} is {gap:e} away from the nearest cell endpoint"
            )));
        }
        Ok(best % cells)
    };

    let mut rows: Vec<Vec<usize>> = Vec::with_capacity(cells);
    for j in 0..cells {
        let (l, r) = partition.cell(j);
        let (a, b) = (map.lift_ext(l), map.lift_ext(r));
        let first = locate(a)?;
        let last = locate(b)?;
        let mut covered = Vec::new();
        let mut idx = first;
        loop {
            covered.push(idx);
            idx = (idx + 1) % cells;
            if idx == last {
                break;
            }
        }
        rows.push(covered);
    }

    let mut cols: Vec<Vec<usize>> = vec![Vec::new(); cells];
    for (i, row) in rows.iter().enumerate() {
        for &j in row {
            cols[j].push(i);
        }
    }
    let (right, lambda_r, it_r) = power_iterate(&rows, cells)?;
    let (left, lambda_l, it_l) = power_iterate(&cols, cells)?;
    let products: Vec<f64> = left.iter().zip(&right).map(|(a, b)| a * b).collect();
    let norm: f64 = products.iter().sum();
    Ok(ParryReport {
        eigenvalue: 0.5 * (lambda_r + lambda_l),
        masses: products.into_iter().map(|x| x / norm).collect(),
        iterations: it_r.max(it_l),
    })
}

/// Power iteration `x <- A x / |A x|_1` for a 0/1 matrix given by rows.
fn power_iterate(rows: &[Vec<usize>], size: usize) -> Result<(Vec<f64>, f64, usize)> {
    let mut x = vec![1.0 / size as f64; size];
    let mut residual = f64::INFINITY;
    for it in 1..=POWER_MAX_ITERATIONS {
        let y: Vec<f64> = rows.iter().map(|r| r.iter().map(|&j| x[j]).sum()).collect();
        let lambda: f64 = y.iter().sum();
        let y: Vec<f64> = y.into_iter().map(|v| v / lambda).collect();
        residual = y.iter().zip(&x).map(|(a, b)| (a - b).abs()).sum();
        x = y;
        if residual <= POWER_TOLERANCE {
            return Ok((x, lambda, it));
        }
    }
    Err(Error::NoConvergence {
        iterations: POWER_MAX_ITERATIONS,
        residual,
    })
}

/// `Σ 2^-m log f'(midpoint)` over the level-`m` cylinders.
pub fn lambda_max_by_cylinders<M: CircleMap + ?Sized>(map: &M, level: u32) -> Result<f64> {
    let partition = cylinder_partition(map, level)?;
    Ok(lambda_max_on_partition(map, &partition))
}

pub fn lambda_max_on_partition<M: CircleMap + ?Sized>(
    map: &M,
    partition: &CylinderPartition,
) -> f64 {
    let mass = 0.5f64.powi(partition.level() as i32);
    let logs: Vec<f64> = (0..partition.cell_count())
        .into_par_iter()
        .map(|j| {
            let x = partition.midpoint(j);
            map.piece_derivative(map.locate(x), x).ln()
        })
        .collect();
    mass * logs.into_iter().collect::<NeumaierSum>().total()
}

/// Draws points distributed according to the measure of maximal entropy up
/// to the diameter of depth-`depth` cylinders.
#[derive(Debug, Clone)]
pub struct MmeSampler<'a, M: CircleMap + ?Sized> {
    map: &'a M,
    fixed_point: f64,
    shift: f64,
}

impl<'a, M: CircleMap + ?Sized> MmeSampler<'a, M> {
    pub fn new(map: &'a M) -> Result<Self> {
        let (fixed_point, shift) = anchor(map)?;
        Ok(MmeSampler {
            map,
            fixed_point,
            shift,
        })
    }

    /// A point of the cylinder with itinerary `bits`; `t ∈ [0, 1)` selects
    /// which point (it is pulled back through the inverse branches).
    pub fn point_for_itinerary(&self, bits: &[bool], t: f64) -> f64 {
        let p = self.fixed_point;
        let mut x = p + t;
        for &b in bits.iter().rev() {
            let target = x + self.shift + if b { 1.0 } else { 0.0 };
            x = self.map.inverse_lift_ext(target).clamp(p, p + 1.0);
        }
        reduce(x)
    }

    pub fn sample<R: Rng>(&self, depth: usize, rng: &mut R) -> f64 {
        let bits: Vec<bool> = (0..depth).map(|_| rng.gen()).collect();
        let t: f64 = rng.gen();
        self.point_for_itinerary(&bits, t)
    }
}

fn check_depth(depth: usize) -> Result<()> {
    if depth > MAX_SAMPLE_DEPTH {
        return Err(Error::InvalidParameter(format!(
            "sample depth {depth} exceeds {MAX_SAMPLE_DEPTH}"
        )));
    }
    Ok(())
}

/// One point sampled from the measure of maximal entropy.
pub fn sample_mme_point<M: CircleMap + ?Sized>(map: &M, depth: usize, seed: u64) -> Result<f64> {
    check_depth(depth)?;
    let sampler = MmeSampler::new(map)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(sampler.sample(depth, &mut rng))
}

/// `count` points; point `i` uses ChaCha8 stream `i` of `seed`.
pub fn sample_mme_points<M: CircleMap + ?Sized>(
    map: &M,
    depth: usize,
    count: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    check_depth(depth)?;
    let sampler = MmeSampler::new(map)?;
    Ok((0..count)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            sampler.sample(depth, &mut rng)
        })
        .collect())
}
