//! The logistic energy, its minimizer and the threshold experiments.
//!
//! On a bounded grid the energy is
//! `E(u) = ½ h uᵀAu + h Σ [μ|u|³/3 − σu²/2 − τ u (J*u)/2]`; on a periodic
//! grid the same expression is integrated over the unit cell with the
//! periodized operator.

mod experiments;
pub(crate) mod minimize;

use std::sync::Arc;

use crate::domain::{dot, ensure_same_mesh, Field, Mesh, ProblemSpec};
use crate::error::{Error, Result};
use crate::operators::{assemble_operator, assemble_periodic, Convolution, NonlocalMatrix};
use crate::spectral::first_eigenpair;

pub use experiments::{
    abundance_sweep, beat_experiment, congruence_experiment, ext_crossing, threshold_radius,
    AbundanceReport, AbundanceRow, BeatReport, BeatRow, CongruenceReport, ExtCase, ExtReport,
    ExtRow, ThresholdReport,
};
pub(crate) use minimize::{descend, Descent, Functional};

/// Iteration cap of every minimization.
pub const MAX_ITERATIONS: usize = 500;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Classification {
    Trivial,
    Nontrivial,
}

impl Classification {
    pub fn as_str(self) -> &'static str {
        match self {
            Classification::Trivial => "trivial",
            Classification::Nontrivial => "nontrivial",
        }
    }

    pub(crate) fn of(u: &[f64], tol: f64) -> Self {
        if u.iter().all(|v| v.abs() <= tol) {
            Classification::Trivial
        } else {
            Classification::Nontrivial
        }
    }
}

/// Outcome of a minimization.
#[derive(Debug, Clone)]
pub struct SolveReport {
    pub u: Field,
    pub energy: f64,
    /// Sup-norm Euler–Lagrange residual relative to the largest term.
    pub el_residual: f64,
    pub iterations: usize,
    pub classification: Classification,
    /// Energy after every accepted step, starting from the initial field.
    pub history: Vec<f64>,
}

impl SolveReport {
    pub fn is_nontrivial(&self) -> bool {
        self.classification == Classification::Nontrivial
    }

    /// Either every node exceeds `tol` or every node is at most `tol`.
    pub fn dichotomy_holds(&self, tol: f64) -> bool {
        let v = self.u.values();
        v.iter().all(|&x| x > tol) || v.iter().all(|&x| x.abs() <= tol)
    }
}

/// Operator matching the spec's mesh: periodic, classical (`s = 1`) or fractional.
pub fn assemble_for(spec: &ProblemSpec) -> Result<NonlocalMatrix> {
    match &**spec.mesh() {
        Mesh::Periodic(_) => assemble_periodic(spec.mesh(), spec.s),
        Mesh::Bounded(_) => assemble_operator(spec.mesh(), spec.s),
    }
}

fn convolution_for(spec: &ProblemSpec) -> Result<Option<Convolution>> {
    match (&spec.kernel, spec.tau > 0.0) {
        (Some(k), true) => Ok(Some(Convolution::new(k, spec.mesh())?)),
        _ => Ok(None),
    }
}

fn check_inputs(u: &Field, spec: &ProblemSpec, a: &NonlocalMatrix) -> Result<()> {
    ensure_same_mesh(u.mesh(), spec.mesh())?;
    ensure_same_mesh(a.mesh(), spec.mesh())
}

fn functional<'a>(spec: &'a ProblemSpec, a: &'a NonlocalMatrix, conv: Option<&'a Convolution>) -> Functional<'a> {
    Functional {
        a: a.matrix(),
        h: a.h(),
        mu: spec.mu.values(),
        sigma: spec.sigma.values(),
        source: None,
        tau: spec.tau,
        conv,
    }
}

pub fn energy(u: &Field, spec: &ProblemSpec, a: &NonlocalMatrix) -> Result<f64> {
    check_inputs(u, spec, a)?;
    let conv = convolution_for(spec)?;
    Ok(functional(spec, a, conv.as_ref()).energy(u.values()))
}

/// `A u + μ|u|u − σu − τ J*u`, the energy gradient divided by `h`.
pub fn energy_gradient(u: &Field, spec: &ProblemSpec, a: &NonlocalMatrix) -> Result<Field> {
    check_inputs(u, spec, a)?;
    let conv = convolution_for(spec)?;
    u.with_values(functional(spec, a, conv.as_ref()).gradient(u.values()))
}

/// Relative sup-norm residual of the nodewise Euler–Lagrange equation.
pub fn el_residual(u: &Field, spec: &ProblemSpec, a: &NonlocalMatrix) -> Result<f64> {
    check_inputs(u, spec, a)?;
    let conv = convolution_for(spec)?;
    Ok(functional(spec, a, conv.as_ref()).residual(u.values()))
}

/// Minimizes the energy from `init`, then takes the absolute value.
pub fn minimize(spec: &ProblemSpec, a: &NonlocalMatrix, init: &Field) -> Result<SolveReport> {
    check_inputs(init, spec, a)?;
    let conv = convolution_for(spec)?;
    let func = functional(spec, a, conv.as_ref());
    let out = run_with_abs(&func, init.values(), spec.solver_tol)?;
    Ok(SolveReport {
        classification: Classification::of(&out.u, spec.triviality_tol),
        u: init.with_values(out.u)?,
        energy: out.energy,
        el_residual: out.residual,
        iterations: out.iterations,
        history: out.history,
    })
}

/// Descent followed by `u ↦ |u|`; repolishes when the sign flip moved anything.
pub(crate) fn run_with_abs(func: &Functional, init: &[f64], tol: f64) -> Result<Descent> {
    let mut out = descend(func, init, tol, MAX_ITERATIONS)?;
    for _ in 0..3 {
        if out.u.iter().all(|&v| v >= 0.0) {
            break;
        }
        let abs: Vec<f64> = out.u.iter().map(|v| v.abs()).collect();
        let e_abs = func.energy(&abs);
        if e_abs > out.energy {
            break;
        }
        let next = descend(func, &abs, tol, MAX_ITERATIONS)?;
        let mut history = std::mem::take(&mut out.history);
        history.push(e_abs);
        history.extend(next.history.into_iter().skip(1));
        out = Descent {
            iterations: out.iterations + next.iterations,
            history,
            ..next
        };
    }
    Ok(out)
}

/// Two-start minimization on a bounded or periodic mesh.
///
/// The starts are a tiny constant (the trivial basin) and `ε e` with `e`
/// the first eigenvector and `ε = 2c₁/(3c₂)` minimizing `−c₁ε² + c₂ε³`.
/// The lower energy wins; ties go to the trivial start.
pub fn solve(spec: &ProblemSpec) -> Result<SolveReport> {
    spec.require_positive_mu()?;
    let a = assemble_for(spec)?;
    solve_with(spec, &a)
}

pub fn solve_dirichlet(spec: &ProblemSpec) -> Result<SolveReport> {
    if spec.mesh().is_periodic() {
        return Err(Error::InvalidGrid("a bounded grid is required".into()));
    }
    solve(spec)
}

pub fn solve_periodic(spec: &ProblemSpec) -> Result<SolveReport> {
    if !spec.mesh().is_periodic() {
        return Err(Error::InvalidGrid("a periodic grid is required".into()));
    }
    solve(spec)
}

/// [`solve`] with a pre-assembled operator.
pub fn solve_with(spec: &ProblemSpec, a: &NonlocalMatrix) -> Result<SolveReport> {
    spec.require_positive_mu()?;
    check_inputs(&spec.sigma, spec, a)?;
    let conv = convolution_for(spec)?;
    let func = functional(spec, a, conv.as_ref());
    let e = first_eigenpair(a)?.e;
    let out = two_start(&func, e.values(), spec.solver_tol, spec.triviality_tol)?;
    Ok(SolveReport {
        classification: Classification::of(&out.u, spec.triviality_tol),
        u: e.with_values(out.u)?,
        energy: out.energy,
        el_residual: out.residual,
        iterations: out.iterations,
        history: out.history,
    })
}

/// Runs the trivial-basin start and the `ε e` start; the lower energy wins
/// and ties go to the trivial start.
pub(crate) fn two_start(func: &Functional, e: &[f64], solver_tol: f64, triviality_tol: f64) -> Result<Descent> {
    let small = vec![1e-3 * triviality_tol; e.len()];
    let low = run_with_abs(func, &small, solver_tol)?;
    let high = run_with_abs(func, &eigen_start(func, e), solver_tol)?;
    let tie = 1e-12 * low.energy.abs().max(high.energy.abs()).max(f64::MIN_POSITIVE);
    Ok(if high.energy < low.energy - tie { high } else { low })
}

/// `ε e` with `ε = 2c₁/(3c₂)` minimizing `−c₁ε² + c₂ε³`, the quadratic and
/// cubic parts of `E(εe)`.
fn eigen_start(func: &Functional, e: &[f64]) -> Vec<f64> {
    let h = func.h;
    let c2 = h * (0..e.len()).map(|i| func.mu[i] * e[i].abs().powi(3)).sum::<f64>() / 3.0;
    // h g(e)·e = (quadratic part) + 3c₂ − h f·e
    let source = func.source.map_or(0.0, |f| h * dot(f, e));
    let c1 = -0.5 * (h * dot(&func.gradient(e), e) - 3.0 * c2 + source);
    let bound = func.sigma.iter().fold(0.0f64, |m, v| m.max(*v)) + func.tau;
    let sup = e.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let eps = if c1 > 0.0 && c2 > 0.0 {
        2.0 * c1 / (3.0 * c2)
    } else if bound > 0.0 && sup > 0.0 {
        bound / sup
    } else {
        1.0
    };
    e.iter().map(|v| eps * v).collect()
}

/// Maximum-principle and abundance diagnostics of a report.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FittingDiagnostics {
    pub max_u: f64,
    /// `max σ + τ`.
    pub bound_easy: f64,
    pub easy_holds: bool,
    /// `min u` over nodes inside the sub-interval, if one was given.
    pub inf_on_ball: f64,
    /// `inf_on_ball / level`, if a level was given.
    pub ratio: f64,
}

/// `ball` is a sub-interval for the abundance bound and `level` the
/// resource level `M` it is compared with.
pub fn check_fitting_bounds(
    report: &SolveReport,
    spec: &ProblemSpec,
    ball: Option<(f64, f64)>,
    level: Option<f64>,
) -> Result<FittingDiagnostics> {
    ensure_same_mesh(report.u.mesh(), spec.mesh())?;
    let bound_easy = spec.sigma.max() + spec.tau;
    let idx = match ball {
        Some(b) => ball_nodes(spec.mesh(), b)?,
        None => Vec::new(),
    };
    if !report.is_nontrivial() {
        return Ok(FittingDiagnostics {
            max_u: 0.0,
            bound_easy: 0.0,
            easy_holds: true,
            inf_on_ball: 0.0,
            ratio: 0.0,
        });
    }
    let u = report.u.values();
    let max_u = report.u.max();
    let inf_on_ball = idx.iter().map(|&i| u[i]).fold(f64::INFINITY, f64::min);
    let inf_on_ball = if idx.is_empty() { 0.0 } else { inf_on_ball };
    Ok(FittingDiagnostics {
        max_u,
        bound_easy,
        easy_holds: max_u <= bound_easy + 10.0 * spec.solver_tol,
        inf_on_ball,
        ratio: level.map_or(0.0, |m| inf_on_ball / m),
    })
}

/// Node indices inside `(lo, hi)`, which must sit in one interval.
pub(crate) fn ball_nodes(mesh: &Arc<Mesh>, (lo, hi): (f64, f64)) -> Result<Vec<usize>> {
    let inside = match &**mesh {
        Mesh::Bounded(g) => g
            .intervals()
            .iter()
            .any(|&(a, b)| a <= lo && hi <= b),
        Mesh::Periodic(_) => -0.5 <= lo && hi <= 0.5,
    };
    if !(lo < hi) || !inside {
        return Err(Error::param(
            "ball",
            format!("({lo}, {hi}) is not contained in one domain interval"),
        ));
    }
    let idx: Vec<usize> = (0..mesh.len())
        .filter(|&i| {
            let x = mesh.node(i);
            x > lo && x < hi
        })
        .collect();
    if idx.is_empty() {
        return Err(Error::param("ball", "sub-interval contains no nodes"));
    }
    Ok(idx)
}

/// Cell averages behind the periodic mean identity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeriodicBalance {
    /// `m = ∫_Q u`.
    pub mean: f64,
    /// `∫_Q (σ − μu)u + τ J*u`, zero for any periodic solution.
    pub source_integral: f64,
    /// `μ∫_Q (u − m)² − m(σ + τ − μm)` for constant `σ`, `μ`; `None` otherwise.
    pub constant_identity_gap: Option<f64>,
}

pub fn periodic_balance(report: &SolveReport, spec: &ProblemSpec) -> Result<PeriodicBalance> {
    ensure_same_mesh(report.u.mesh(), spec.mesh())?;
    if !spec.mesh().is_periodic() {
        return Err(Error::InvalidGrid("a periodic grid is required".into()));
    }
    let h = spec.mesh().h();
    let u = report.u.values();
    let (sigma, mu) = (spec.sigma.values(), spec.mu.values());
    let ju = match convolution_for(spec)? {
        Some(c) => c.apply_slice(u),
        None => vec![0.0; u.len()],
    };
    let mean = h * u.iter().sum::<f64>();
    let source_integral = h * (0..u.len())
        .map(|i| (sigma[i] - mu[i] * u[i]) * u[i] + spec.tau * ju[i])
        .sum::<f64>();
    let constant = |v: &[f64]| v.iter().all(|&x| x == v[0]);
    let constant_identity_gap = (constant(sigma) && constant(mu)).then(|| {
        let var = h * u.iter().map(|x| (x - mean).powi(2)).sum::<f64>();
        mu[0] * var - mean * (sigma[0] + spec.tau - mu[0] * mean)
    });
    Ok(PeriodicBalance {
        mean,
        source_integral,
        constant_identity_gap,
    })
}
