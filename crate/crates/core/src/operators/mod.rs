//! Discrete nonlocal operators.
//!
//! All variants share one convention: the unknowns are nodal values, the
//! mass matrix is lumped to `h I`, and the stored matrix is `A = S / h` where
//! `S` is the Galerkin stiffness of the relevant quadratic form. Hence
//! `h uᵀ A u` is the form evaluated on the piecewise-linear interpolant and
//! `A u` approximates the operator applied to `u` nodewise.

mod assemble;
mod convolution;
pub mod stencil;
mod transmission;

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::domain::{ensure_same_mesh, Field, Mesh};
use crate::error::Result;

pub use assemble::{assemble_classical, assemble_dirichlet, assemble_periodic, tail_coefficients};
pub use convolution::{convolve, Convolution};
pub use transmission::{assemble_transmission, Component, TransmissionSpec};

/// Constant `c` in `2s(1-s) PV∫ (u(x)-u(y)) |x-y|^(-1-2s) dy → -c u''` as
/// `s → 1` in one dimension.
///
/// Near `y = 0` the difference quotient is `-½u''(x) y²`, and
/// `2s(1-s) ∫_{-1}^{1} ½y² |y|^(-1-2s) dy = 2s(1-s)/(2-2s) = s → 1`.
pub const CLASSICAL_NORMALIZATION: f64 = 1.0;

/// Which operator a matrix discretizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    DirichletFractional,
    Classical,
    Periodic,
    Transmission,
}

/// Symmetric dense discretization of a nonlocal (or local) operator.
#[derive(Debug, Clone)]
pub struct NonlocalMatrix {
    mesh: Arc<Mesh>,
    matrix: DMatrix<f64>,
    s: f64,
    variant: Variant,
}

impl NonlocalMatrix {
    pub(crate) fn from_parts(mesh: Arc<Mesh>, matrix: DMatrix<f64>, s: f64, variant: Variant) -> Self {
        debug_assert_eq!(matrix.nrows(), mesh.len());
        Self {
            mesh,
            matrix,
            s,
            variant,
        }
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn len(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.matrix.nrows() == 0
    }

    pub fn h(&self) -> f64 {
        self.mesh.h()
    }

    /// `A u`.
    pub fn apply(&self, u: &Field) -> Result<Field> {
        ensure_same_mesh(&self.mesh, u.mesh())?;
        Field::new(self.mesh.clone(), self.apply_slice(u.values()))
    }

    pub(crate) fn apply_slice(&self, u: &[f64]) -> Vec<f64> {
        let v = &self.matrix * DVector::from_column_slice(u);
        v.as_slice().to_vec()
    }

    /// Largest absolute row sum.
    pub fn inf_norm(&self) -> f64 {
        self.matrix
            .row_iter()
            .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Principal submatrix on the node indices `idx`.
    pub(crate) fn principal_submatrix(&self, idx: &[usize]) -> DMatrix<f64> {
        DMatrix::from_fn(idx.len(), idx.len(), |i, j| self.matrix[(idx[i], idx[j])])
    }
}

/// Fractional Dirichlet matrix for `s < 1`, classical matrix for `s = 1`.
pub fn assemble_operator(mesh: &Arc<Mesh>, s: f64) -> Result<NonlocalMatrix> {
    if s == 1.0 {
        assemble_classical(mesh)
    } else {
        assemble_dirichlet(mesh, s)
    }
}

/// `h uᵀ A u`.
pub fn quadratic_form(a: &NonlocalMatrix, u: &Field) -> Result<f64> {
    ensure_same_mesh(a.mesh(), u.mesh())?;
    Ok(form_slice(a.matrix(), u.values(), a.h()))
}

pub(crate) fn form_slice(a: &DMatrix<f64>, u: &[f64], h: f64) -> f64 {
    let v = DVector::from_column_slice(u);
    h * v.dot(&(a * &v))
}
