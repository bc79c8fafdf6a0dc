//! Best-subset (ℓ0-penalized) linear regression solved through a QUBO.
//!
//! The regression objective is compiled into a quartic pseudo-Boolean
//! polynomial over the feature-selection vector, reduced to a quadratic
//! binary model with auxiliary variables, and minimized either exactly or
//! with simulated annealing. Every candidate selection is finally refit with
//! exact least squares and scored on the true objective.
//!
//! Module map:
//! - [`dataset`]: CSV ingestion, column normalization, synthetic instances.
//! - [`linalg`]: Gram summaries, least squares, Neumann inverse, eigenvalues.
//! - [`pbf`]: multilinear polynomials and the regression compiler.
//! - [`qubo`]: quadratization, QUBO/Ising models and the QUBO text format.
//! - [`samplers`]: exhaustive subset search, QUBO enumeration, annealing.
//! - [`regress`]: scoring selections, MSE, fit reports.
//! - [`pipeline`]: end-to-end fits and experiment sweeps.
//! - [`cli`]: the `subset-qubo` command line.

pub mod cli;
pub mod dataset;
pub mod error;
pub mod linalg;
pub mod pbf;
pub mod pipeline;
pub mod qubo;
pub mod regress;
pub mod samplers;

pub use error::{Error, Result};
