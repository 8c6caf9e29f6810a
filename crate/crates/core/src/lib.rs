//! Levin's construction of absolutely normal numbers, evaluated exactly.
//!
//! The crate is organized bottom-up:
//!
//! - [`arithmetic`]: exact dyadic numbers and orbits `{β λ^x}` modulo one
//! - [`schedule`]: the index bookkeeping (`ℓ_k`, `ω`, `n_r`, `q_r`, `τ`, `A`)
//!   and validity checks for alternative schedules
//! - [`expsums`]: the exponential sums `S`, the functional `D` and the
//!   mean-square statistic `T`, with the bounds they are compared to
//! - [`construction`]: the candidate search and the main loop, certified
//!   digits and checkpoints
//! - [`discrepancy`]: star discrepancy, two-dimensional discrepancy and the
//!   computable bounds
//! - [`baseline`]: Champernowne digits for comparison

pub mod arithmetic;
pub mod baseline;
pub mod construction;
pub mod discrepancy;
pub mod error;
pub mod expsums;
pub mod schedule;

pub use arithmetic::{frac, orbit_mod1, unit_exp, BaseSpec, Dyadic, UnitFixed};
pub use error::{LevinError, Result};
