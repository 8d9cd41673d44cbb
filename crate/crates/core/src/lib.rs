//! Risk-perception-aware safe control.
//!
//! The crate turns an uncertain spatial cost (a truncated-Gaussian cost with
//! spatially varying mean and spread) into a deterministic perceived-risk
//! field under one of three risk perception models:
//!
//! * expected risk (ER), the plain expectation,
//! * conditional value at risk (CVaR) at level `q`,
//! * cumulative prospect theory (CPT) with utility `λ c^γ` and probability
//!   weighting `w(p) = exp(-β (-ln p)^α)`.
//!
//! On top of the perceived-risk fields it builds barrier functions
//! `h = ρ - R(ξ)`, the affine safety constraint `ḣ ≥ -η₁(h)`, a closed-form
//! single-constraint QP filter and a fixed-step 2D simulator with moving
//! obstacles.
//!
//! The crate is `no_std` and only needs `alloc`.

#![no_std]
#![deny(missing_debug_implementations)]

extern crate alloc;

pub mod barrier;
pub mod distributions;
mod error;
pub mod field;
mod geometry;
pub mod risk;
pub mod sim;

pub use self::error::{Error, Result};
pub use self::geometry::{Mat2, Vec2};
