//! Mixed local/nonlocal transmission model: classical diffusion on `Ω₁`,
//! fractional diffusion on `Ω₂`, coupled through the complements.
//!
//! The assembled matrix `A` satisfies `h uᵀAu = T₀(u)`, the undoubled form,
//! so `λ⋆` is its first eigenvalue and the energy is
//! `T(u) = ½ h uᵀAu + h Σ (μ|u|³/3 − σu²/2)`.

use crate::domain::{default_triviality_tol, Field, Tolerances};
use crate::error::{Error, Result};
use crate::logistic::{run_with_abs, two_start, Classification, Functional};
use crate::operators::{assemble_transmission, Component, NonlocalMatrix, TransmissionSpec};
use crate::spectral::{first_eigenpair, EigenPair};

#[derive(Debug, Clone)]
pub struct TransmissionReport {
    pub u: Field,
    pub energy: f64,
    pub el_residual: f64,
    pub lambda_star: f64,
    pub classification: Classification,
    /// `u > triviality_tol` at every node of `Ω₁`.
    pub positive_local: bool,
    /// `u > triviality_tol` at every node of `Ω₂`.
    pub positive_nonlocal: bool,
    pub iterations: usize,
    pub history: Vec<f64>,
    pub triviality_tol: f64,
}

/// First eigenpair of the transmission operator.
pub fn lambda_star(spec: &TransmissionSpec) -> Result<EigenPair> {
    first_eigenpair(&assemble_transmission(spec)?)
}

fn check_mu(spec: &TransmissionSpec) -> Result<()> {
    if spec.mu.values().iter().all(|&m| m > 0.0) {
        Ok(())
    } else {
        Err(Error::param("mu", "must be bounded away from zero"))
    }
}

fn functional<'a>(spec: &'a TransmissionSpec, a: &'a NonlocalMatrix) -> Functional<'a> {
    Functional {
        a: a.matrix(),
        h: a.h(),
        mu: spec.mu.values(),
        sigma: spec.sigma.values(),
        source: None,
        tau: 0.0,
        conv: None,
    }
}

/// Two-start minimization of the transmission energy.
pub fn minimize_t(spec: &TransmissionSpec, tol: Tolerances) -> Result<TransmissionReport> {
    check_mu(spec)?;
    let a = assemble_transmission(spec)?;
    let pair = first_eigenpair(&a)?;
    let trivial_tol = tol
        .triviality_tol
        .unwrap_or_else(|| default_triviality_tol(spec.sigma.max(), 0.0));
    let func = functional(spec, &a);
    let out = two_start(&func, pair.e.values(), tol.solver_tol, trivial_tol)?;
    let u = pair.e.with_values(out.u)?;
    let positive_on = |c: Component| spec.nodes_of(c).iter().all(|&i| u.values()[i] > trivial_tol);
    Ok(TransmissionReport {
        classification: Classification::of(u.values(), trivial_tol),
        positive_local: positive_on(Component::Local),
        positive_nonlocal: positive_on(Component::Nonlocal),
        u,
        energy: out.energy,
        el_residual: out.residual,
        lambda_star: pair.lambda,
        iterations: out.iterations,
        history: out.history,
        triviality_tol: trivial_tol,
    })
}

/// Single-start minimization from `init` (absolute value applied at the end).
pub fn minimize_t_from(spec: &TransmissionSpec, init: &Field, tol: Tolerances) -> Result<(Field, f64)> {
    check_mu(spec)?;
    let a = assemble_transmission(spec)?;
    crate::domain::ensure_same_mesh(init.mesh(), a.mesh())?;
    let out = run_with_abs(&functional(spec, &a), init.values(), tol.solver_tol)?;
    Ok((init.with_values(out.u)?, out.energy))
}

/// Transmission energy of `u`.
pub fn energy_t(u: &Field, spec: &TransmissionSpec) -> Result<f64> {
    let a = assemble_transmission(spec)?;
    crate::domain::ensure_same_mesh(u.mesh(), a.mesh())?;
    Ok(functional(spec, &a).energy(u.values()))
}

/// Energy gradient divided by `h`: `A u + μ|u|u − σu`.
pub fn energy_gradient_t(u: &Field, spec: &TransmissionSpec) -> Result<Field> {
    let a = assemble_transmission(spec)?;
    crate::domain::ensure_same_mesh(u.mesh(), a.mesh())?;
    u.with_values(functional(spec, &a).gradient(u.values()))
}

/// Relative sup-norm residual of the coupled nodewise equations.
pub fn transmission_el_residual(u: &Field, spec: &TransmissionSpec) -> Result<f64> {
    let a = assemble_transmission(spec)?;
    crate::domain::ensure_same_mesh(u.mesh(), a.mesh())?;
    Ok(functional(spec, &a).residual(u.values()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MpVerdict {
    PositiveEverywhere,
    IdenticallyZero,
    /// Zero somewhere and positive elsewhere.
    Violation,
}

/// Positivity dichotomy of a nonnegative field at tolerance `tol`.
pub fn mp_check(u: &Field, tol: f64) -> MpVerdict {
    let v = u.values();
    if v.iter().all(|&x| x > tol) {
        MpVerdict::PositiveEverywhere
    } else if v.iter().all(|&x| x.abs() <= tol) {
        MpVerdict::IdenticallyZero
    } else {
        MpVerdict::Violation
    }
}
