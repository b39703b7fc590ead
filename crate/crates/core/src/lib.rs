//! Degree-2 expanding circle maps with prescribed Lyapunov exponents.
//!
//! The crate builds a four-parameter family of continuous piecewise-linear
//! expanding maps of the circle `R/Z`, evaluates the Lyapunov exponents of
//! each member with respect to its absolutely continuous invariant measure
//! (`lambda_abs`) and its measure of maximal entropy (`lambda_max`) in
//! closed form, and inverts those formulas so that any pair
//! `0 < a < log 2 < b` is hit exactly.
//!
//! Every closed form is paired with an independent numerical route:
//!
//! - [`mme`] sums `log f'` over binary cylinders generated by preimages of
//!   the fixed point and cross-checks the cylinder masses with a Parry
//!   eigenvector computation.
//! - [`acip`] applies the Perron-Frobenius operator exactly on step
//!   densities, builds an Ulam discretization and estimates Birkhoff
//!   averages along random orbits.
//! - [`smoothing`] mollifies the corners of a piecewise-linear map and
//!   tracks both exponents as the blend radius shrinks.

pub mod acip;
pub mod circle;
pub mod error;
pub mod exponents;
pub mod map;
pub mod mme;
pub mod realize;
pub mod smoothing;

mod numeric;

pub use circle::CircleMap;
pub use error::{Error, Result};
pub use map::{FamilyParams, Fraction, PiecewiseLinearCircleMap};

/// `log 2`, the common value of both exponents for the doubling map.
pub const LN_2: f64 = std::f64::consts::LN_2;
