//! Descent engine shared by every energy of the crate.
//!
//! All energies have the form
//!
//! `E(u) = ½h uᵀAu + h Σ (μ|u|³/3 − σu²/2 − f u) − (τ/2) h uᵀJu`
//!
//! so one implementation serves the Dirichlet, periodic, strategic and
//! transmission problems.

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::domain::dot;
use crate::error::{Error, Result};
use crate::operators::Convolution;

/// Armijo sufficient-decrease constant.
const ARMIJO: f64 = 1e-4;
const MIN_STEP: f64 = 1e-14;

pub(crate) struct Functional<'a> {
    pub a: &'a DMatrix<f64>,
    pub h: f64,
    pub mu: &'a [f64],
    pub sigma: &'a [f64],
    pub source: Option<&'a [f64]>,
    pub tau: f64,
    pub conv: Option<&'a Convolution>,
}

pub(crate) struct Descent {
    pub u: Vec<f64>,
    pub energy: f64,
    pub residual: f64,
    pub iterations: usize,
    pub history: Vec<f64>,
}

impl Functional<'_> {
    fn mat(&self, u: &[f64]) -> Vec<f64> {
        (self.a * DVector::from_column_slice(u)).as_slice().to_vec()
    }

    fn conv(&self, u: &[f64]) -> Vec<f64> {
        match (self.conv, self.tau > 0.0) {
            (Some(c), true) => c.apply_slice(u),
            _ => vec![0.0; u.len()],
        }
    }

    fn f(&self, i: usize) -> f64 {
        self.source.map_or(0.0, |f| f[i])
    }

    pub fn energy(&self, u: &[f64]) -> f64 {
        let au = self.mat(u);
        let ju = self.conv(u);
        let mut e = 0.5 * dot(u, &au) - 0.5 * self.tau * dot(u, &ju);
        for (i, &v) in u.iter().enumerate() {
            e += self.mu[i] * v.abs().powi(3) / 3.0 - 0.5 * self.sigma[i] * v * v - self.f(i) * v;
        }
        self.h * e
    }

    /// Gradient divided by `h`, i.e. the nodewise Euler–Lagrange operator.
    pub fn gradient(&self, u: &[f64]) -> Vec<f64> {
        let au = self.mat(u);
        let ju = self.conv(u);
        self.gradient_from(u, &au, &ju)
    }

    fn gradient_from(&self, u: &[f64], au: &[f64], ju: &[f64]) -> Vec<f64> {
        (0..u.len())
            .map(|i| {
                au[i] + self.mu[i] * u[i].abs() * u[i] - self.sigma[i] * u[i] - self.f(i) - self.tau * ju[i]
            })
            .collect()
    }

    /// `‖g‖_∞` relative to the largest term of the equation (at least 1).
    fn relative_residual(&self, u: &[f64], au: &[f64], ju: &[f64], g: &[f64]) -> f64 {
        let mut scale = 1.0f64;
        for i in 0..u.len() {
            scale = scale
                .max(au[i].abs())
                .max(self.mu[i] * u[i] * u[i])
                .max((self.sigma[i] * u[i]).abs())
                .max(self.f(i).abs())
                .max(self.tau * ju[i].abs());
        }
        g.iter().fold(0.0f64, |m, v| m.max(v.abs())) / scale
    }

    pub fn residual(&self, u: &[f64]) -> f64 {
        let au = self.mat(u);
        let ju = self.conv(u);
        let g = self.gradient_from(u, &au, &ju);
        self.relative_residual(u, &au, &ju, &g)
    }

    fn hessian(&self, u: &[f64]) -> DMatrix<f64> {
        let mut m = self.a.clone();
        for i in 0..u.len() {
            m[(i, i)] += 2.0 * self.mu[i] * u[i].abs() - self.sigma[i];
        }
        if let (Some(c), true) = (self.conv, self.tau > 0.0) {
            c.add_scaled_to(-self.tau, &mut m);
        }
        m
    }

    /// Positive definite surrogate used when the Hessian is indefinite.
    fn preconditioner(&self, u: &[f64]) -> DMatrix<f64> {
        let n = u.len();
        let sigma_max = self.sigma.iter().fold(0.0f64, |m, v| m.max(*v));
        let norm = self
            .a
            .row_iter()
            .fold(0.0f64, |m, r| m.max(r.iter().map(|v| v.abs()).sum()));
        let gamma = sigma_max + self.tau + 1e-8 * norm.max(1.0);
        let mut m = self.a.clone();
        for i in 0..n {
            m[(i, i)] += 2.0 * self.mu[i] * u[i].abs() + gamma;
        }
        m
    }

    /// Exact energy change along `t·d`, given products with `u` and `d`.
    fn increment(&self, line: &Line, u: &[f64], d: &[f64], t: f64) -> f64 {
        let mut cubic = 0.0;
        let mut local = 0.0;
        for i in 0..u.len() {
            let (q_s, dt) = (u[i], t * d[i]);
            let p_s = q_s + dt;
            let (p, q) = (p_s.abs(), q_s.abs());
            // |p| − |q| without cancellation when the sign is kept
            let diff = if p_s * q_s >= 0.0 {
                if q_s > 0.0 || (q_s == 0.0 && p_s >= 0.0) {
                    dt
                } else {
                    -dt
                }
            } else {
                p - q
            };
            cubic += self.mu[i] / 3.0 * diff * (p * p + p * q + q * q);
            local += -self.sigma[i] * dt * (q_s + 0.5 * dt) - self.f(i) * dt;
        }
        let quad = t * line.d_au + 0.5 * t * t * line.d_ad;
        let nonlocal = -self.tau * (t * line.d_ju + 0.5 * t * t * line.d_jd);
        self.h * (quad + nonlocal + cubic + local)
    }
}

struct Line {
    d_au: f64,
    d_ad: f64,
    d_ju: f64,
    d_jd: f64,
}

/// Newton steps when the Hessian is positive definite, preconditioned
/// descent otherwise; Armijo backtracking with step doubling.
///
/// Every accepted step decreases the energy, and the recorded history is
/// accumulated from exact increments so it is monotone.
pub(crate) fn descend(func: &Functional, init: &[f64], tol: f64, max_iter: usize) -> Result<Descent> {
    if init.iter().any(|v| !v.is_finite()) {
        return Err(Error::param("init", "initial field must be finite"));
    }
    let mut u = init.to_vec();
    let mut energy = func.energy(&u);
    let mut history = vec![energy];
    let mut residual = f64::INFINITY;
    for it in 0..=max_iter {
        let au = func.mat(&u);
        let ju = func.conv(&u);
        let g = func.gradient_from(&u, &au, &ju);
        residual = func.relative_residual(&u, &au, &ju, &g);
        if residual <= tol {
            return Ok(Descent {
                u,
                energy,
                residual,
                iterations: it,
                history,
            });
        }
        if it == max_iter {
            break;
        }
        let rhs = -DVector::from_column_slice(&g);
        let (d, newton) = match Cholesky::new(func.hessian(&u)) {
            Some(c) => (c.solve(&rhs), true),
            None => match Cholesky::new(func.preconditioner(&u)) {
                Some(c) => (c.solve(&rhs), false),
                None => (rhs.clone(), false),
            },
        };
        let d = d.as_slice();
        let slope = func.h * dot(&g, d);
        if !(slope < 0.0) {
            break;
        }
        let ad = func.mat(d);
        let jd = func.conv(d);
        let line = Line {
            d_au: dot(d, &au),
            d_ad: dot(d, &ad),
            d_ju: dot(d, &ju),
            d_jd: dot(d, &jd),
        };
        let mut t = 1.0;
        let mut de = func.increment(&line, &u, d, t);
        while !(de <= ARMIJO * t * slope) && t > MIN_STEP {
            t *= 0.5;
            de = func.increment(&line, &u, d, t);
        }
        if !(de <= ARMIJO * t * slope) {
            // rounding floor reached without meeting the tolerance
            break;
        }
        if !newton {
            for _ in 0..60 {
                let de2 = func.increment(&line, &u, d, 2.0 * t);
                if de2 < de {
                    t *= 2.0;
                    de = de2;
                } else {
                    break;
                }
            }
        }
        for (ui, di) in u.iter_mut().zip(d) {
            *ui += t * di;
        }
        energy += de;
        history.push(energy);
    }
    Err(Error::NonConvergence {
        what: "energy descent",
        iterations: history.len() - 1,
        residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quadratic_case(n: usize) -> (DMatrix<f64>, Vec<f64>, Vec<f64>) {
        let mut a = DMatrix::zeros(n, n);
        for i in 0..n {
            a[(i, i)] = 2.0;
            if i + 1 < n {
                a[(i, i + 1)] = -1.0;
                a[(i + 1, i)] = -1.0;
            }
        }
        (a, vec![1.0; n], vec![0.5; n])
    }

    #[test]
    fn increment_matches_energy_difference() {
        let (a, mu, sigma) = quadratic_case(6);
        let f = vec![0.3; 6];
        let func = Functional {
            a: &a,
            h: 0.1,
            mu: &mu,
            sigma: &sigma,
            source: Some(&f),
            tau: 0.0,
            conv: None,
        };
        let u = vec![0.4, -0.2, 1.1, 0.0, -0.7, 0.3];
        let d = vec![-0.5, 0.6, 0.1, 0.2, 0.9, -0.8];
        let au = func.mat(&u);
        let ad = func.mat(&d);
        let line = Line {
            d_au: dot(&d, &au),
            d_ad: dot(&d, &ad),
            d_ju: 0.0,
            d_jd: 0.0,
        };
        for t in [1e-3, 0.5, 1.0, 2.0] {
            let moved: Vec<f64> = u.iter().zip(&d).map(|(a, b)| a + t * b).collect();
            let exact = func.energy(&moved) - func.energy(&u);
            assert!((func.increment(&line, &u, &d, t) - exact).abs() < 1e-14);
        }
    }

    #[test]
    fn descent_history_is_monotone() {
        let (a, mu, _) = quadratic_case(8);
        let sigma = vec![3.0; 8];
        let func = Functional {
            a: &a,
            h: 1.0,
            mu: &mu,
            sigma: &sigma,
            source: None,
            tau: 0.0,
            conv: None,
        };
        let out = descend(&func, &[1e-3; 8], 1e-12, 200).unwrap();
        assert!(out.history.windows(2).all(|w| w[1] <= w[0]));
        assert!(out.u.iter().all(|v| *v > 0.0));
    }
}
