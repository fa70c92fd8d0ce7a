//! Finite-sample error bounds for PCA eigenvectors.
//!
//! The numerical core is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below fix the scalar for the common cases. Indices throughout the
//! Rust API are zero-based.

// Negated comparisons below deliberately treat NaN as invalid input.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod error;
pub mod experiment;
pub mod linalg;
pub mod perturbation;
pub mod sampling;
pub mod scalar;
pub mod spectrum;

pub use bounds::{BoundInputs, BoundReport};
pub use error::{Error, Result};
pub use experiment::{Experiment, ExperimentConfig, ExperimentReport, TrialRecord};
pub use linalg::{EigenDecomposition, Matrix, SymMatrix};
pub use perturbation::{ChainCheck, PerturbationOperators, TargetContext};
pub use sampling::{DataMatrix, RngStream};
pub use scalar::Scalar;
pub use spectrum::{BetaModelParams, Spectrum};

pub type Spectrum64 = Spectrum<f64>;
pub type Spectrum32 = Spectrum<f32>;
pub type Matrix64 = Matrix<f64>;
pub type Matrix32 = Matrix<f32>;
pub type SymMatrix64 = SymMatrix<f64>;
pub type SymMatrix32 = SymMatrix<f32>;
pub type BoundInputs64 = BoundInputs<f64>;
pub type BoundInputs32 = BoundInputs<f32>;
pub type Experiment64 = Experiment<f64>;
pub type Experiment32 = Experiment<f32>;
