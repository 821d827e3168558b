//! Classical, statevector-level simulation of a quantum PDE option-pricing
//! pipeline.
//!
//! The crate assembles finite-difference pricing systems for the Black–Scholes
//! and Heston models ([`pde_models`]), embeds them into a unitary evolution via
//! Schrödingerisation and evolves the resulting statevector
//! ([`schrodingerizer`]), models the measurement stage ([`readout_model`]),
//! checks everything against classical solvers ([`classical_baselines`]),
//! fits arbitrage-free SSVI smiles ([`smile_toolkit`]) and evaluates
//! unit-constant resource formulas ([`resource_estimator`]). The [`cli`]
//! module drives batch experiments from JSON configuration files.

// `!(x > 0.0)` guards are deliberate: they also reject NaN. Index loops are
// kept where several arrays share an index, as in the numerical kernels.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop, clippy::too_many_arguments)]

pub mod classical_baselines;
pub mod cli;
pub mod error;
pub mod fdgrid;
pub mod linalg;
pub mod numerics;
pub mod payoffs;
pub mod pde_models;
pub mod pipeline;
pub mod readout_model;
pub mod resource_estimator;
pub mod schrodingerizer;
pub mod smile_toolkit;
pub mod sparse;
pub mod stats;

pub use error::{Error, Result};
