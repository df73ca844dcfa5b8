use std::sync::Arc;

use nalgebra::DMatrix;

use super::stencil::pair_weight;
use super::{assemble_dirichlet, NonlocalMatrix, Variant};
use crate::domain::{build_grid, sample_function, Coefficient, Field, Grid, Mesh};
use crate::error::{Error, Result};
use crate::quadrature::{power_integral, GaussLegendre};

/// Which side of the transmission problem a node belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Component {
    /// Classical diffusion.
    Local,
    /// Fractional diffusion.
    Nonlocal,
}

/// Geometry, exponents, couplings and reaction data of a transmission model.
#[derive(Debug, Clone)]
pub struct TransmissionSpec {
    pub omega1: Vec<(f64, f64)>,
    pub omega2: Vec<(f64, f64)>,
    pub s: f64,
    pub s1: f64,
    pub s2: f64,
    pub nu1: f64,
    pub nu2: f64,
    pub sigma: Field,
    pub mu: Field,
    components: Vec<Component>,
}

impl TransmissionSpec {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        omega1: &[(f64, f64)],
        omega2: &[(f64, f64)],
        h: f64,
        (s, s1, s2): (f64, f64, f64),
        (nu1, nu2): (f64, f64),
        sigma: &Coefficient,
        mu: &Coefficient,
    ) -> Result<Self> {
        for (name, v) in [("s", s), ("s1", s1), ("s2", s2)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::param(name, format!("must lie in (0, 1), got {v}")));
            }
        }
        for (name, v) in [("nu1", nu1), ("nu2", nu2)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::param(name, format!("must be >= 0, got {v}")));
            }
        }
        if omega1.is_empty() || omega2.is_empty() {
            return Err(Error::InvalidGrid("both components need an interval".into()));
        }
        let all: Vec<(f64, f64)> = omega1.iter().chain(omega2).copied().collect();
        // build_grid rejects overlapping or touching intervals
        let grid = build_grid(&all, h)?;
        let components = grid
            .interval_id()
            .iter()
            .map(|&k| {
                let left = grid.intervals()[k].0;
                if omega1.iter().any(|iv| iv.0 == left) {
                    Component::Local
                } else {
                    Component::Nonlocal
                }
            })
            .collect();
        let mesh = Arc::new(Mesh::Bounded(grid));
        Ok(Self {
            omega1: omega1.to_vec(),
            omega2: omega2.to_vec(),
            s,
            s1,
            s2,
            nu1,
            nu2,
            sigma: sample_function(&mesh, sigma)?,
            mu: sample_function(&mesh, mu)?,
            components,
        })
    }

    /// Same geometry and operator with a new resource rate.
    pub fn with_sigma(&self, sigma: &Coefficient) -> Result<Self> {
        let mut out = self.clone();
        out.sigma = sample_function(self.mesh(), sigma)?;
        Ok(out)
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        self.sigma.mesh()
    }

    pub fn grid(&self) -> &Grid {
        self.mesh().as_grid().expect("transmission meshes are bounded")
    }

    pub fn h(&self) -> f64 {
        self.mesh().h()
    }

    /// Component of every node.
    pub fn components(&self) -> &[Component] {
        &self.components
    }

    pub fn nodes_of(&self, c: Component) -> Vec<usize> {
        (0..self.components.len())
            .filter(|&i| self.components[i] == c)
            .collect()
    }
}

/// `|x - c|^(-p)` weights as (point, coefficient) pairs.
type PowerTerms = Vec<(f64, f64)>;

/// `∫_{ℝ∖U} |x-y|^(-1-2s) dy` for `x` in the interval `[a, b]` of `U`.
fn complement_terms(own: (f64, f64), union: &[(f64, f64)], two_s: f64) -> PowerTerms {
    let c = 1.0 / two_s;
    let mut t = vec![(own.0, c), (own.1, c)];
    for &iv in union {
        if iv != own {
            t.extend(interval_terms(iv, own.0, two_s).into_iter().map(|(p, w)| (p, -w)));
        }
    }
    t
}

/// `∫_J |x-y|^(-1-2s) dy` for `x` outside `J`, located on the side of `probe`.
fn interval_terms(j: (f64, f64), probe: f64, two_s: f64) -> PowerTerms {
    let c = 1.0 / two_s;
    if probe < j.0 {
        vec![(j.0, c), (j.1, -c)]
    } else {
        vec![(j.1, c), (j.0, -c)]
    }
}

/// Adds `factor · ∫ φ_k φ_l w / h` for `w = Σ c |x - p|^(-two_s)` over the
/// nodes of interval `k` of `grid`.
fn add_weighted_mass(
    a: &mut DMatrix<f64>,
    grid: &Grid,
    k: usize,
    terms: &PowerTerms,
    two_s: f64,
    factor: f64,
) {
    if factor == 0.0 {
        return;
    }
    let h = grid.h();
    let (left, _) = grid.intervals()[k];
    let range = grid.interval_nodes(k);
    let cells = range.len() + 1;
    for cell in 0..cells {
        let xl = left + cell as f64 * h;
        let xr = xl + h;
        let ln = (cell >= 1).then(|| range.start + cell - 1);
        let rn = (cell + 1 < cells).then(|| range.start + cell);
        // ∫ (1-t)², t(1-t), t² against the weight; t = (x - xl)/h
        let mut m = [0.0; 3];
        for &(p, coef) in terms {
            let left_side = p <= xl + 0.5 * h;
            let mut zlo = if left_side { xl - p } else { p - xr };
            if zlo.abs() < 1e-9 * h {
                zlo = 0.0;
            }
            debug_assert!(zlo >= 0.0);
            let j = tau_moments(zlo, h, two_s);
            // τ measured away from p: t = τ on the left side, 1-τ on the right
            let (ll, lr, rr) = if left_side {
                ([1.0, -2.0, 1.0], [0.0, 1.0, -1.0], [0.0, 0.0, 1.0])
            } else {
                ([0.0, 0.0, 1.0], [0.0, 1.0, -1.0], [1.0, -2.0, 1.0])
            };
            let dot = |q: [f64; 3]| -> f64 {
                q.iter()
                    .zip(&j)
                    .filter(|(c, _)| **c != 0.0)
                    .map(|(c, v)| c * v)
                    .sum()
            };
            if ln.is_some() {
                m[0] += coef * dot(ll);
            }
            if ln.is_some() && rn.is_some() {
                m[1] += coef * dot(lr);
            }
            if rn.is_some() {
                m[2] += coef * dot(rr);
            }
        }
        let f = factor / h;
        if let Some(l) = ln {
            a[(l, l)] += f * m[0];
        }
        if let (Some(l), Some(r)) = (ln, rn) {
            a[(l, r)] += f * m[1];
            a[(r, l)] += f * m[1];
        }
        if let Some(r) = rn {
            a[(r, r)] += f * m[2];
        }
    }
}

/// `∫_0^h (z/h)^m (zlo + z)^(-p) dz` for `m = 0, 1, 2`.
///
/// With `zlo = 0` divergent moments come back as NaN; they are only paired
/// with zero coefficients (hats vanishing at the singular point).
fn tau_moments(zlo: f64, h: f64, p: f64) -> [f64; 3] {
    if zlo > 4.0 * h {
        let rule = GaussLegendre::sixteen();
        let mut out = [0.0; 3];
        for (m, o) in out.iter_mut().enumerate() {
            *o = h * rule.integrate(0.0, 1.0, |t| t.powi(m as i32) * (zlo + h * t).powf(-p));
        }
        return out;
    }
    let zhi = zlo + h;
    let pw = |q: f64| -> f64 {
        if zlo == 0.0 && q <= 0.0 {
            f64::NAN
        } else {
            power_integral(zlo, zhi, q)
        }
    };
    let p1 = pw(1.0 - p);
    let p2 = pw(2.0 - p);
    let p3 = pw(3.0 - p);
    if zlo == 0.0 {
        return [p1, p2 / h, p3 / (h * h)];
    }
    [
        p1,
        (p2 - zlo * p1) / h,
        (p3 - 2.0 * zlo * p2 + zlo * zlo * p1) / (h * h),
    ]
}

/// Symmetric matrix whose form `h uᵀ A u` is the undoubled transmission form.
pub fn assemble_transmission(spec: &TransmissionSpec) -> Result<NonlocalMatrix> {
    let mesh = spec.mesh().clone();
    let grid = spec.grid();
    let h = grid.h();
    let n = grid.len();
    let comp = spec.components();
    let mut a = DMatrix::<f64>::zeros(n, n);

    let idx1 = spec.nodes_of(Component::Local);
    let idx2 = spec.nodes_of(Component::Nonlocal);

    // gradient form on Ω1
    let inv_h2 = 1.0 / (h * h);
    for w in idx1.windows(2) {
        if grid.interval_id()[w[0]] == grid.interval_id()[w[1]] {
            a[(w[0], w[1])] -= inv_h2;
            a[(w[1], w[0])] -= inv_h2;
        }
    }
    for &i in &idx1 {
        a[(i, i)] += 2.0 * inv_h2;
    }

    // full fractional form on Ω2, then remove its exterior part
    let sub: Arc<Mesh> = Arc::new(build_grid(&spec.omega2, h)?.into());
    let d2 = assemble_dirichlet(&sub, spec.s)?;
    for (p, &i) in idx2.iter().enumerate() {
        for (q, &j) in idx2.iter().enumerate() {
            a[(i, j)] += d2.matrix()[(p, q)];
        }
    }

    let intervals_of = |c: Component| -> Vec<usize> {
        (0..grid.intervals().len())
            .filter(|&k| comp[grid.interval_nodes(k).start] == c)
            .collect()
    };
    let iv1 = intervals_of(Component::Local);
    let iv2 = intervals_of(Component::Nonlocal);

    let regional = -2.0 * spec.s * (1.0 - spec.s);
    for &k in &iv2 {
        let own = grid.intervals()[k];
        let terms = complement_terms(own, &spec.omega2, 2.0 * spec.s);
        add_weighted_mass(&mut a, grid, k, &terms, 2.0 * spec.s, regional);
    }

    // coupling of Ω_i with its complement, exponent s_i
    let couplings = [
        (spec.nu1, spec.s1, &spec.omega1, &iv1, &iv2),
        (spec.nu2, spec.s2, &spec.omega2, &iv2, &iv1),
    ];
    for (nu, si, omega_i, inside, outside) in couplings {
        let weight = nu * si * (1.0 - si);
        if weight == 0.0 {
            continue;
        }
        let two_si = 2.0 * si;
        for &k in inside.iter() {
            let terms = complement_terms(grid.intervals()[k], omega_i, two_si);
            add_weighted_mass(&mut a, grid, k, &terms, two_si, weight);
        }
        for &k in outside.iter() {
            let probe = grid.intervals()[k].0;
            let terms: PowerTerms = omega_i
                .iter()
                .flat_map(|&j| interval_terms(j, probe, two_si))
                .collect();
            add_weighted_mass(&mut a, grid, k, &terms, two_si, weight);
        }
        let scale = weight * h.powf(-two_si);
        for &i in &idx1 {
            for &j in &idx2 {
                let d = (grid.nodes()[i] - grid.nodes()[j]).abs() / h;
                let v = scale * pair_weight(d, si);
                a[(i, j)] += v;
                a[(j, i)] += v;
            }
        }
    }

    Ok(NonlocalMatrix::from_parts(mesh, a, spec.s, Variant::Transmission))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(nu: (f64, f64), s: (f64, f64, f64)) -> TransmissionSpec {
        TransmissionSpec::new(
            &[(0.0, 1.0)],
            &[(1.5, 2.5)],
            1.0 / 32.0,
            s,
            nu,
            &1.0.into(),
            &1.0.into(),
        )
        .unwrap()
    }

    #[test]
    fn symmetric_and_decoupled_without_coupling() {
        let t = spec((0.0, 0.0), (0.5, 0.3, 0.6));
        let a = assemble_transmission(&t).unwrap();
        let m = a.matrix();
        assert_eq!(m, &m.transpose());
        for &i in &t.nodes_of(Component::Local) {
            for &j in &t.nodes_of(Component::Nonlocal) {
                assert_eq!(m[(i, j)], 0.0);
            }
        }
    }

    #[test]
    fn reduces_to_dirichlet_form_on_nonlocal_part() {
        let s = 0.4;
        let t = spec((0.0, 2.0), (s, 0.3, s));
        let a = assemble_transmission(&t).unwrap();
        let sub: Arc<Mesh> = Arc::new(build_grid(&[(1.5, 2.5)], t.h()).unwrap().into());
        let d = assemble_dirichlet(&sub, s).unwrap();
        let idx = t.nodes_of(Component::Nonlocal);
        let block = a.principal_submatrix(&idx);
        let diff = (&block - d.matrix()).abs().max();
        assert!(diff <= 1e-10 * d.matrix().abs().max(), "{diff}");
    }

    #[test]
    fn overlapping_components_rejected() {
        let r = TransmissionSpec::new(
            &[(0.0, 1.0)],
            &[(0.5, 1.5)],
            0.25,
            (0.5, 0.5, 0.5),
            (1.0, 1.0),
            &1.0.into(),
            &1.0.into(),
        );
        assert!(r.is_err());
    }
}
