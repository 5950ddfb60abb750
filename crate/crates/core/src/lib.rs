//! Pathwise mild solutions of parabolic equations with random, time-dependent
//! generators and additive noise, together with numerical diagnostics for
//! their random attractors.
//!
//! The concrete instance is `du = (Δ + a(θ_t ω)) u dt + F(u) dt + σ dω` on
//! (0, π) with Dirichlet boundary conditions, discretised in the sine basis.
// `!(x > 0.0)` rejects NaN along with the out-of-range values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod attractor;
pub mod config;
pub mod error;
pub mod io;
pub mod noise;
pub mod operator;
pub mod quadrature;
pub mod solver;
pub mod spectral;
pub mod verify;

pub use error::{Error, Result};
pub use spectral::SpectralState;
