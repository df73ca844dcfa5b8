//! Steady states of logistic population models with fractional diffusion
//! and nonlocal resource reach, discretized on one-dimensional grids.
//!
//! The crate is organized bottom-up:
//!
//! - [`domain`]: grids, fields, kernels and problem data;
//! - [`operators`]: dense matrices for the fractional, classical, periodic and
//!   transmission operators, plus the convolution;
//! - [`spectral`]: first eigenpairs and eigenvalue comparisons;
//! - [`logistic`]: energies, the minimizer and the threshold experiments;
//! - [`transmission`]: the mixed local/nonlocal model;
//! - [`strategic`]: resource design through s-harmonic approximation.

// negated comparisons are deliberate: they also reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod domain;
pub mod error;
pub mod logistic;
pub mod operators;
pub mod quadrature;
pub mod spectral;
pub mod strategic;
pub mod transmission;

pub use domain::{
    build_grid, build_kernel, l2_inner, l2_norm, sample_function, Coefficient, Field, Grid, Kernel,
    KernelShape, Mesh, PeriodicGrid, ProblemSpec, Tolerances,
};
pub use error::{Error, Result};
pub use operators::{NonlocalMatrix, Variant};
