//! First Dirichlet eigenpairs and the eigenvalue comparisons built on them.

use std::sync::Arc;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::domain::{build_grid, l2_norm, Field, Mesh};
use crate::error::{Error, Result};
use crate::operators::{assemble_operator, quadratic_form, NonlocalMatrix};

/// Smallest eigenvalue with its positive, unit-norm eigenvector.
#[derive(Debug, Clone)]
pub struct EigenPair {
    pub lambda: f64,
    pub e: Field,
    /// `‖A e − λ e‖` in the discrete L² norm.
    pub residual: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct EigenOptions {
    /// Residual target relative to `max(1, λ)`.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for EigenOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 500,
        }
    }
}

pub fn first_eigenpair(a: &NonlocalMatrix) -> Result<EigenPair> {
    first_eigenpair_with(a, EigenOptions::default())
}

/// Shifted inverse power iteration from the all-ones vector.
///
/// The shift starts just below zero and is moved once towards the
/// eigenvalue after the Rayleigh quotient settles. Convergence is declared
/// when the residual meets `tol · max(1, λ)` or the rounding floor of the
/// matrix, whichever is larger.
pub fn first_eigenpair_with(a: &NonlocalMatrix, opts: EigenOptions) -> Result<EigenPair> {
    let n = a.len();
    if n == 0 {
        return Err(Error::InvalidGrid("empty grid".into()));
    }
    let h = a.h();
    let m = a.matrix();
    let norm_h = |v: &DVector<f64>| (h * v.dot(v)).sqrt();
    let floor = 1e3 * f64::EPSILON * a.inf_norm();

    let max_diag = m.diagonal().iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    let mut shift = -1e-9 * max_diag.max(f64::MIN_POSITIVE);
    let mut chol = None;
    for _ in 0..40 {
        chol = factor(m, shift);
        if chol.is_some() {
            break;
        }
        shift = 10.0 * shift - max_diag;
    }
    let mut chol = chol.ok_or_else(|| Error::LinearAlgebra("matrix is not bounded below".into()))?;

    let mut x = DVector::from_element(n, 1.0);
    x /= norm_h(&x);
    let mut lambda_prev = f64::INFINITY;
    let mut shifted = false;
    let mut residual = f64::INFINITY;
    for it in 1..=opts.max_iter {
        let y = chol.solve(&x);
        x = &y / norm_h(&y);
        let ax = m * &x;
        let lambda = h * x.dot(&ax);
        residual = norm_h(&(&ax - lambda * &x));
        if residual <= (opts.tol * lambda.abs().max(1.0)).max(floor) {
            return Ok(finish(a, x, lambda, residual, it));
        }
        if !shifted && it >= 3 && (lambda - lambda_prev).abs() <= 1e-3 * lambda.abs() {
            shifted = true;
            // λ is an upper bound for the smallest eigenvalue; back off until
            // the shifted matrix stays positive definite
            let mut target = lambda - 0.1 * (lambda - shift);
            for _ in 0..20 {
                if let Some(c) = factor(m, target) {
                    chol = c;
                    shift = target;
                    break;
                }
                target = 0.5 * (target + shift);
            }
        }
        lambda_prev = lambda;
    }
    Err(Error::NonConvergence {
        what: "inverse iteration",
        iterations: opts.max_iter,
        residual,
    })
}

fn factor(m: &DMatrix<f64>, shift: f64) -> Option<Cholesky<f64, Dyn>> {
    let mut shifted = m.clone();
    for i in 0..shifted.nrows() {
        shifted[(i, i)] -= shift;
    }
    Cholesky::new(shifted)
}

fn finish(a: &NonlocalMatrix, mut x: DVector<f64>, lambda: f64, residual: f64, it: usize) -> EigenPair {
    if x.sum() < 0.0 {
        x.neg_mut();
    }
    let e = Field::new(a.mesh().clone(), x.as_slice().to_vec()).expect("length matches mesh");
    EigenPair {
        lambda,
        e,
        residual,
        iterations: it,
    }
}

/// `quadratic_form(A, u) / ‖u‖²`.
pub fn rayleigh(a: &NonlocalMatrix, u: &Field) -> Result<f64> {
    let norm = l2_norm(u);
    if norm == 0.0 {
        return Err(Error::param("u", "Rayleigh quotient of the zero field"));
    }
    Ok(quadratic_form(a, u)? / (norm * norm))
}

/// Eigenvalue of a domain and of its dilation by `r` at the same spacing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalingReport {
    pub lambda_base: f64,
    pub lambda_scaled: f64,
    pub ratio: f64,
    /// `r^(-2s)`.
    pub target: f64,
}

/// `λ(rΩ) / λ(Ω)` at a common spacing `h`; `s = 1` uses the classical operator.
pub fn eigen_scaling(intervals: &[(f64, f64)], r: f64, s: f64, h: f64) -> Result<ScalingReport> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::param("r", format!("must be positive, got {r}")));
    }
    let scaled: Vec<(f64, f64)> = intervals.iter().map(|&(a, b)| (r * a, r * b)).collect();
    let base = eigenvalue_on(intervals, s, h)?;
    let lambda_scaled = if r == 1.0 {
        base
    } else {
        eigenvalue_on(&scaled, s, h).map_err(|e| match e {
            Error::InvalidGrid(msg) => Error::GridMismatch(format!("incommensurate dilation: {msg}")),
            other => other,
        })?
    };
    Ok(ScalingReport {
        lambda_base: base,
        lambda_scaled,
        ratio: lambda_scaled / base,
        target: r.powf(-2.0 * s),
    })
}

/// First eigenvalue of the operator of order `s` on a union of intervals.
pub fn eigenvalue_on(intervals: &[(f64, f64)], s: f64, h: f64) -> Result<f64> {
    let mesh: Arc<Mesh> = Arc::new(build_grid(intervals, h)?.into());
    Ok(first_eigenpair(&assemble_operator(&mesh, s)?)?.lambda)
}

/// Eigenvalue of one interval versus the union with a congruent copy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnionStudy {
    pub lambda_union: f64,
    pub lambda_single: f64,
    /// `lambda_single − lambda_union`.
    pub gap: f64,
}

pub fn union_eigen_study(
    omega1: (f64, f64),
    omega2: (f64, f64),
    s: f64,
    h: f64,
) -> Result<UnionStudy> {
    let (l1, l2) = (omega1.1 - omega1.0, omega2.1 - omega2.0);
    if (l1 - l2).abs() > 1e-12 * l1.abs().max(l2.abs()) {
        return Err(Error::InvalidGrid("intervals are not congruent".into()));
    }
    let lambda_union = eigenvalue_on(&[omega1, omega2], s, h)?;
    let lambda_single = eigenvalue_on(&[omega1], s, h)?;
    Ok(UnionStudy {
        lambda_union,
        lambda_single,
        gap: lambda_single - lambda_union,
    })
}
