//! Resource design through s-harmonic approximation.
//!
//! A function `w` that is s-harmonic on `(−2, 2)` is fitted to a target on
//! `(−1, 1)` by choosing its exterior values on `(−R, R) ∖ (−2, 2)`. The
//! population `u = |w| + v⋆` then solves a logistic equation on `(−1, 1)`
//! with resource `σ_ε = μ w`, where `v⋆` minimizes an auxiliary energy.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SVD};
use rayon::prelude::*;

use crate::domain::{build_grid, build_kernel, sample_function, Coefficient, Field, KernelShape, Mesh, Tolerances};
use crate::error::{Error, Result};
use crate::logistic::{run_with_abs, Functional};
use crate::operators::{assemble_dirichlet, Convolution, NonlocalMatrix};

/// Half-width of the region where the target is fitted.
pub const FIT_RADIUS: f64 = 1.0;
/// Half-width of the region where `w` is s-harmonic.
pub const HARMONIC_RADIUS: f64 = 2.0;

const MAX_REGULARIZATION_STEPS: usize = 8;
/// Harmonicity accepted relative to `‖w‖_∞`.
const HARMONIC_TOL: f64 = 1e-6;

/// Least-squares fit on one truncation radius.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitRecord {
    pub r: f64,
    /// `sup` error on the fit nodes.
    pub sup_error: f64,
    /// `‖w(g) − f‖² + α‖g‖²`.
    pub objective: f64,
    pub alpha: f64,
    pub harmonic_residual: f64,
}

#[derive(Debug, Clone)]
pub struct HarmonicApprox {
    /// Approximant on the `(−R, R)` grid, exterior data included.
    pub w: Field,
    pub approx_error: f64,
    /// `sup_{|x|<2} |(A w)(x)| / ‖w‖_∞`.
    pub harmonic_residual: f64,
    pub r_used: f64,
    pub alpha: f64,
    /// Whether `approx_error ≤ eps` was reached.
    pub achieved: bool,
    pub records: Vec<FitRecord>,
}

/// Fits an s-harmonic function on `(−2, 2)` to `target` on `(−1, 1)`.
///
/// For each `R` of the schedule the exterior nodal values `g` are chosen by
/// Tikhonov-regularized least squares, `α = α₀` if given, otherwise
/// `1e-8 · σ_max²` raised tenfold while the harmonic solve is unreliable.
/// The first `R` reaching `eps` is returned; otherwise the best fit, flagged.
pub fn approximate_s_harmonic(
    target: &Coefficient,
    s: f64,
    eps: f64,
    r_schedule: &[f64],
    h: f64,
    alpha: Option<f64>,
) -> Result<HarmonicApprox> {
    if !(s > 0.0 && s < 1.0) {
        return Err(Error::param("s", format!("must lie in (0, 1), got {s}")));
    }
    if !(eps > 0.0) {
        return Err(Error::param("eps", "must be positive"));
    }
    if r_schedule.is_empty() || r_schedule.iter().any(|&r| !(r > HARMONIC_RADIUS)) {
        return Err(Error::param("r_schedule", "radii must exceed 2"));
    }
    let fits = r_schedule
        .par_iter()
        .map(|&r| fit_on(target, s, r, h, alpha))
        .collect::<Result<Vec<_>>>()?;
    let records: Vec<FitRecord> = fits.iter().map(|f| f.0).collect();
    let pick = records
        .iter()
        .position(|r| r.sup_error <= eps)
        .unwrap_or_else(|| {
            (0..records.len())
                .min_by(|&a, &b| records[a].sup_error.total_cmp(&records[b].sup_error))
                .expect("schedule is nonempty")
        });
    let rec = records[pick];
    Ok(HarmonicApprox {
        w: fits[pick].1.clone(),
        approx_error: rec.sup_error,
        harmonic_residual: rec.harmonic_residual,
        r_used: rec.r,
        alpha: rec.alpha,
        achieved: rec.sup_error <= eps,
        records,
    })
}

fn fit_on(target: &Coefficient, s: f64, r: f64, h: f64, alpha: Option<f64>) -> Result<(FitRecord, Field)> {
    let mesh: Arc<Mesh> = Arc::new(build_grid(&[(-r, r)], h)?.into());
    let a = assemble_dirichlet(&mesh, s)?;
    let x = mesh.nodes();
    let inner: Vec<usize> = (0..x.len()).filter(|&i| x[i].abs() < HARMONIC_RADIUS).collect();
    let outer: Vec<usize> = (0..x.len()).filter(|&i| x[i].abs() >= HARMONIC_RADIUS).collect();
    let fit: Vec<usize> = (0..inner.len())
        .filter(|&k| x[inner[k]].abs() < FIT_RADIUS)
        .collect();
    if fit.is_empty() || outer.is_empty() {
        return Err(Error::InvalidGrid("spacing too coarse for the fit regions".into()));
    }
    let f_mesh: Arc<Mesh> = Arc::new(build_grid(&[(-FIT_RADIUS, FIT_RADIUS)], h)?.into());
    let f = DVector::from_vec(sample_function(&f_mesh, target)?.into_values());
    if f.len() != fit.len() {
        return Err(Error::InvalidGrid("fit region is not aligned with the grid".into()));
    }

    let m = a.matrix();
    let a_ii = DMatrix::from_fn(inner.len(), inner.len(), |i, j| m[(inner[i], inner[j])]);
    let a_ie = DMatrix::from_fn(inner.len(), outer.len(), |i, j| m[(inner[i], outer[j])]);
    let chol = a_ii
        .cholesky()
        .ok_or_else(|| Error::LinearAlgebra("harmonic block is not positive definite".into()))?;
    // w_I = T g with T = −A_II⁻¹ A_IE
    let t = -chol.solve(&a_ie);
    let k = DMatrix::from_fn(fit.len(), outer.len(), |i, j| t[(fit[i], j)]);
    let svd = SVD::new(k.clone(), true, true);
    let sigma_max = svd.singular_values.max();
    let (u_mat, v_t) = (svd.u.as_ref().expect("u"), svd.v_t.as_ref().expect("v_t"));
    let uf = u_mat.transpose() * &f;

    let mut alpha_k = alpha.unwrap_or(1e-8 * sigma_max * sigma_max);
    let mut last = None;
    for _ in 0..MAX_REGULARIZATION_STEPS {
        let coef = DVector::from_fn(uf.len(), |i, _| {
            let sv = svd.singular_values[i];
            sv / (sv * sv + alpha_k) * uf[i]
        });
        let g = v_t.transpose() * coef;
        let mut w = vec![0.0; x.len()];
        let w_i = &t * &g;
        for (p, &i) in inner.iter().enumerate() {
            w[i] = w_i[p];
        }
        for (p, &i) in outer.iter().enumerate() {
            w[i] = g[p];
        }
        let aw = a.apply_slice(&w);
        let sup_w = w.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        let harmonic_residual = inner.iter().fold(0.0f64, |acc, &i| acc.max(aw[i].abs())) / sup_w.max(f64::MIN_POSITIVE);
        let misfit = &k * &g - &f;
        let rec = FitRecord {
            r,
            sup_error: misfit.amax(),
            objective: misfit.norm_squared() + alpha_k * g.norm_squared(),
            alpha: alpha_k,
            harmonic_residual,
        };
        let ok = w.iter().all(|v| v.is_finite()) && harmonic_residual <= HARMONIC_TOL;
        last = Some((rec, Field::new(mesh.clone(), w)?));
        if ok || alpha.is_some() {
            break;
        }
        alpha_k *= 10.0;
    }
    Ok(last.expect("at least one regularization step"))
}

/// Auxiliary energy on `(−1, 1)`:
/// `½ h vᵀAv + h Σ [μ|v|³/3 + σ_ε v²/2 − f_ε v] − (τ/2) h vᵀJv`.
#[derive(Debug, Clone)]
pub struct AuxiliaryEnergy {
    a: NonlocalMatrix,
    mu: Field,
    /// Stored with the sign flipped so the shared engine sees `−σ_ε`.
    neg_sigma: Vec<f64>,
    source: Field,
    tau: f64,
    conv: Option<Convolution>,
}

impl AuxiliaryEnergy {
    pub fn new(
        a: NonlocalMatrix,
        mu: Field,
        sigma_eps: &Field,
        f_eps: Field,
        tau: f64,
        conv: Option<Convolution>,
    ) -> Result<Self> {
        for fld in [&mu, sigma_eps, &f_eps] {
            crate::domain::ensure_same_mesh(a.mesh(), fld.mesh())?;
        }
        if tau > 0.0 && conv.is_none() {
            return Err(Error::param("kernel", "a kernel is required when tau > 0"));
        }
        Ok(Self {
            neg_sigma: sigma_eps.values().iter().map(|v| -v).collect(),
            a,
            mu,
            source: f_eps,
            tau,
            conv,
        })
    }

    fn functional(&self) -> Functional<'_> {
        Functional {
            a: self.a.matrix(),
            h: self.a.h(),
            mu: self.mu.values(),
            sigma: &self.neg_sigma,
            source: Some(self.source.values()),
            tau: self.tau,
            conv: self.conv.as_ref(),
        }
    }

    pub fn energy(&self, v: &Field) -> Result<f64> {
        crate::domain::ensure_same_mesh(self.a.mesh(), v.mesh())?;
        Ok(self.functional().energy(v.values()))
    }

    /// `A v + μ|v|v + σ_ε v − f_ε − τ J*v`.
    pub fn gradient(&self, v: &Field) -> Result<Field> {
        crate::domain::ensure_same_mesh(self.a.mesh(), v.mesh())?;
        v.with_values(self.functional().gradient(v.values()))
    }
}

#[derive(Debug, Clone)]
pub struct AuxiliaryReport {
    pub v: Field,
    pub energy: f64,
    pub el_residual: f64,
    pub iterations: usize,
    pub history: Vec<f64>,
}

/// Minimizer of the auxiliary energy, started from zero.
pub fn minimize_g(g: &AuxiliaryEnergy, tol: f64) -> Result<AuxiliaryReport> {
    if g.source.values().iter().any(|&f| f < 0.0) {
        return Err(Error::param("f_eps", "source must be nonnegative"));
    }
    let out = run_with_abs(&g.functional(), &vec![0.0; g.source.len()], tol)?;
    Ok(AuxiliaryReport {
        v: g.source.with_values(out.u)?,
        energy: out.energy,
        el_residual: out.residual,
        iterations: out.iterations,
        history: out.history,
    })
}

#[derive(Debug, Clone)]
pub struct StrategicParams {
    pub s: f64,
    pub eps: f64,
    pub h: f64,
    pub r_schedule: Vec<f64>,
    pub tau: f64,
    /// Kernel shape and radius, required when `tau > 0`.
    pub kernel: Option<(KernelShape, f64)>,
    /// Fixed Tikhonov parameter; `None` selects the adaptive rule.
    pub alpha: Option<f64>,
    pub tol: Tolerances,
}

#[derive(Debug, Clone)]
pub struct StrategicResult {
    /// s-harmonic approximant on the `(−R, R)` grid.
    pub w: Field,
    /// `|w| + v⋆` on the `(−R, R)` grid.
    pub u: Field,
    /// `μ w` on `(−1, 1)`.
    pub sigma_eps: Field,
    /// `τ J*|w| − (−Δ)^s |w|` on `(−1, 1)`, before clipping.
    pub f_eps: Field,
    pub v_star: Field,
    pub approx_error: f64,
    pub harmonic_residual: f64,
    pub r_used: f64,
    pub achieved: bool,
    /// `sup_{(−1,1)} |σ_ε − σ|`.
    pub sigma_gap: f64,
    /// Relative residual of the logistic equation for `u` on `(−1, 1)`.
    pub equation_residual: f64,
    /// `min_{(−1,1)} (u − σ_ε/μ)`.
    pub fit_margin: f64,
    /// `u` vanishes at every grid point outside `(−R, R)`.
    pub support_ok: bool,
    pub auxiliary: AuxiliaryReport,
}

impl StrategicResult {
    /// The three conclusions at tolerance `tol`, plus the resource closeness.
    pub fn conclusions_hold(&self, eps: f64, tol: f64) -> bool {
        self.achieved
            && self.sigma_gap <= eps
            && self.equation_residual <= tol
            && self.fit_margin >= -tol
            && self.support_ok
    }
}

/// Builds the population `u = |w| + v⋆` and checks the three conclusions.
pub fn build_strategic(sigma: &Coefficient, mu: &Coefficient, p: &StrategicParams) -> Result<StrategicResult> {
    if matches!(sigma, Coefficient::Table(_)) || matches!(mu, Coefficient::Table(_)) {
        return Err(Error::param("sigma/mu", "tabulated coefficients are not supported here"));
    }
    let h = p.h;
    let b2: Arc<Mesh> = Arc::new(build_grid(&[(-HARMONIC_RADIUS, HARMONIC_RADIUS)], h)?.into());
    let (sig2, mu2) = (sample_function(&b2, sigma)?, sample_function(&b2, mu)?);
    if !(sig2.min() > 0.0 && mu2.min() > 0.0) {
        return Err(Error::param("sigma/mu", "must be positive on the closed inner region"));
    }
    let target = {
        let (s, m) = (sigma.clone(), mu.clone());
        Coefficient::function(move |x| eval(&s, x) / eval(&m, x))
    };
    let mu_max = mu2.max();
    let fit = approximate_s_harmonic(&target, p.s, p.eps / mu_max, &p.r_schedule, h, p.alpha)?;

    let big = fit.w.mesh().clone();
    let a = assemble_dirichlet(&big, p.s)?;
    let x = big.nodes();
    let w = fit.w.values();
    let big_w: Vec<f64> = w.iter().map(|v| v.abs()).collect();
    let kernel = match (p.tau > 0.0, p.kernel.clone()) {
        (true, Some((shape, rho))) => Some(build_kernel(shape, rho, h)?),
        (true, None) => return Err(Error::param("kernel", "a kernel is required when tau > 0")),
        _ => None,
    };
    let conv_big = kernel.as_ref().map(|k| Convolution::new(k, &big)).transpose()?;
    let jw = conv_big.as_ref().map_or(vec![0.0; x.len()], |c| c.apply_slice(&big_w));
    let aw = a.apply_slice(&big_w);

    let b1: Arc<Mesh> = Arc::new(build_grid(&[(-FIT_RADIUS, FIT_RADIUS)], h)?.into());
    let idx: Vec<usize> = (0..x.len()).filter(|&i| x[i].abs() < FIT_RADIUS).collect();
    let mu1 = sample_function(&b1, mu)?;
    let sig1 = sample_function(&b1, sigma)?;
    let sigma_eps = Field::new(b1.clone(), idx.iter().zip(mu1.values()).map(|(&i, m)| m * w[i]).collect())?;
    let f_raw: Vec<f64> = idx.iter().map(|&i| p.tau * jw[i] - aw[i]).collect();
    let f_eps = Field::new(b1.clone(), f_raw.clone())?;
    let sup_w = fit.w.sup_norm();
    let clip_tol = p.tol.solver_tol.max(HARMONIC_TOL * sup_w);
    if let Some(bad) = f_raw.iter().find(|&&v| v < -clip_tol) {
        return Err(Error::Precondition(format!(
            "auxiliary source is negative ({bad:.3e}); |w| differs from w on the inner region"
        )));
    }
    let f_clipped = f_eps.map(|v| v.max(0.0));

    let a1 = NonlocalMatrix::from_parts(
        b1.clone(),
        a.principal_submatrix(&idx),
        p.s,
        crate::operators::Variant::DirichletFractional,
    );
    let conv1 = kernel.as_ref().map(|k| Convolution::new(k, &b1)).transpose()?;
    let aux = AuxiliaryEnergy::new(a1, mu1.clone(), &sigma_eps, f_clipped, p.tau, conv1)?;
    let auxiliary = minimize_g(&aux, p.tol.solver_tol)?;

    let mut u = big_w.clone();
    for (k, &i) in idx.iter().enumerate() {
        u[i] += auxiliary.v.values()[k];
    }
    // logistic equation for u on (−1, 1)
    let au = a.apply_slice(&u);
    let ju = conv_big.as_ref().map_or(vec![0.0; u.len()], |c| c.apply_slice(&u));
    let mut scale = 1.0f64;
    let mut worst = 0.0f64;
    let mut fit_margin = f64::INFINITY;
    let mut sigma_gap = 0.0f64;
    for (k, &i) in idx.iter().enumerate() {
        let (se, m) = (sigma_eps.values()[k], mu1.values()[k]);
        let reaction = (se - m * u[i]) * u[i] + p.tau * ju[i];
        worst = worst.max((au[i] - reaction).abs());
        scale = scale
            .max(au[i].abs())
            .max((se * u[i]).abs())
            .max(m * u[i] * u[i])
            .max(p.tau * ju[i].abs());
        fit_margin = fit_margin.min(u[i] - se / m);
        sigma_gap = sigma_gap.max((se - sig1.values()[k]).abs());
    }
    Ok(StrategicResult {
        sigma_eps,
        f_eps,
        v_star: auxiliary.v.clone(),
        approx_error: fit.approx_error,
        harmonic_residual: fit.harmonic_residual,
        r_used: fit.r_used,
        achieved: fit.achieved,
        sigma_gap,
        equation_residual: worst / scale,
        fit_margin,
        // the grid covers (−R, R) only, so u vanishes outside by construction;
        // the last check guards the boundary nodes' consistency
        support_ok: x.iter().all(|&xi| xi.abs() < fit.r_used),
        u: Field::new(big.clone(), u)?,
        w: fit.w,
        auxiliary,
    })
}

fn eval(c: &Coefficient, x: f64) -> f64 {
    match c {
        Coefficient::Constant(v) => *v,
        Coefficient::Function(f) => f(x),
        Coefficient::Table(_) => f64::NAN,
    }
}
