use std::sync::Arc;

use nalgebra::DMatrix;

use super::stencil::{hat_smoothed, pair_weight};
use super::{NonlocalMatrix, Variant, CLASSICAL_NORMALIZATION};
use crate::domain::{Grid, Mesh, PeriodicGrid};
use crate::error::{Error, Result};
use crate::quadrature::hurwitz_zeta;

/// Relative entry change tolerated between image cutoffs `M - 1` and `M`.
const IMAGE_TOL: f64 = 1e-10;

fn check_s(s: f64) -> Result<()> {
    if s > 0.0 && s < 1.0 {
        Ok(())
    } else {
        Err(Error::param("s", format!("must lie in (0, 1), got {s}")))
    }
}

fn bounded(mesh: &Arc<Mesh>) -> Result<&Grid> {
    mesh.as_grid()
        .ok_or_else(|| Error::InvalidGrid("a bounded grid is required".into()))
}

/// Fractional Dirichlet matrix: `A_ij = 2s(1-s) h^(-2s) F(|x_i - x_j| / h)`.
///
/// Exterior nodes are absent, so zero exterior data is built in; the
/// diagonal therefore carries the lost exterior mass.
pub fn assemble_dirichlet(mesh: &Arc<Mesh>, s: f64) -> Result<NonlocalMatrix> {
    check_s(s)?;
    let g = bounded(mesh)?;
    let n = g.len();
    let h = g.h();
    let scale = 2.0 * s * (1.0 - s) * h.powf(-2.0 * s);
    let mut a = DMatrix::<f64>::zeros(n, n);

    let longest = (0..g.intervals().len())
        .map(|k| g.interval_nodes(k).len())
        .max()
        .unwrap_or(0);
    let same: Vec<f64> = (0..longest).map(|k| scale * pair_weight(k as f64, s)).collect();

    let count = g.intervals().len();
    for p in 0..count {
        let rp = g.interval_nodes(p);
        for i in rp.clone() {
            for j in rp.clone() {
                a[(i, j)] = same[i.abs_diff(j)];
            }
        }
        for q in p + 1..count {
            let rq = g.interval_nodes(q);
            // node k (1-based) of an interval sits at left + k h
            let base = (g.intervals()[q].0 - g.intervals()[p].0) / h;
            let lo = 1 - rp.len() as i64;
            let hi = rq.len() as i64 - 1;
            let cross: Vec<f64> = (lo..=hi)
                .map(|m| scale * pair_weight(base + m as f64, s))
                .collect();
            for (ki, i) in rp.clone().enumerate() {
                for (kj, j) in rq.clone().enumerate() {
                    let v = cross[(kj as i64 - ki as i64 - lo) as usize];
                    a[(i, j)] = v;
                    a[(j, i)] = v;
                }
            }
        }
    }
    Ok(NonlocalMatrix::from_parts(mesh.clone(), a, s, Variant::DirichletFractional))
}

/// `c h⁻² (2, -1, -1)` within each interval.
pub fn assemble_classical(mesh: &Arc<Mesh>) -> Result<NonlocalMatrix> {
    let g = bounded(mesh)?;
    let n = g.len();
    let c = CLASSICAL_NORMALIZATION / (g.h() * g.h());
    let mut a = DMatrix::<f64>::zeros(n, n);
    for k in 0..g.intervals().len() {
        let r = g.interval_nodes(k);
        for i in r.clone() {
            a[(i, i)] = 2.0 * c;
            if i + 1 < r.end {
                a[(i, i + 1)] = -c;
                a[(i + 1, i)] = -c;
            }
        }
    }
    Ok(NonlocalMatrix::from_parts(mesh.clone(), a, 1.0, Variant::Classical))
}

/// Hat-averaged exterior coefficient `T_i = (A·1)_i / (2s(1-s))`.
///
/// It is the kernel mass that node `i` sees outside the discrete support,
/// i.e. the exterior plus the ramps of the boundary cells.
pub fn tail_coefficients(a: &NonlocalMatrix) -> Vec<f64> {
    let c = match a.variant() {
        Variant::Classical => CLASSICAL_NORMALIZATION,
        _ => 2.0 * a.s() * (1.0 - a.s()),
    };
    a.matrix()
        .row_iter()
        .map(|r| r.iter().sum::<f64>() / c)
        .collect()
}

/// Periodized fractional matrix on the unit cell (circulant).
///
/// Images `|m| <= image_cutoff` are summed explicitly; the remainder is added
/// in closed form through the Hurwitz zeta function.
pub fn assemble_periodic(mesh: &Arc<Mesh>, s: f64) -> Result<NonlocalMatrix> {
    check_s(s)?;
    let p = mesh
        .as_periodic()
        .ok_or_else(|| Error::InvalidGrid("a periodic grid is required".into()))?;
    let m = p.image_cutoff();
    if m < 2 {
        return Err(Error::param(
            "image_cutoff",
            format!("cutoff {m} too small: at least 2 images are needed"),
        ));
    }
    let row = periodic_row(p, s, m);
    let coarse = periodic_row(p, s, m - 1);
    let peak = row.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    let change = row
        .iter()
        .zip(&coarse)
        .fold(0.0f64, |acc, (a, b)| acc.max((a - b).abs()));
    if change > IMAGE_TOL * peak {
        return Err(Error::param(
            "image_cutoff",
            format!("cutoff {m} too small: entries change by {change:.3e}"),
        ));
    }
    let n = p.n();
    let a = DMatrix::from_fn(n, n, |i, j| row[(j + n - i) % n]);
    Ok(NonlocalMatrix::from_parts(mesh.clone(), a, s, Variant::Periodic))
}

fn periodic_row(p: &PeriodicGrid, s: f64, images: usize) -> Vec<f64> {
    let n = p.n();
    let nf = n as f64;
    let scale = 2.0 * s * (1.0 - s) * p.h().powf(-2.0 * s);
    let expo = 1.0 + 2.0 * s;
    let lead = nf.powf(-expo);
    let mf = images as f64;
    let mut row = vec![0.0; n];
    for r in 0..=n / 2 {
        let rf = r as f64;
        let mut v = 0.0;
        for k in -(images as i64)..=images as i64 {
            v += pair_weight((rf + k as f64 * nf).abs(), s);
        }
        // Σ_{m>M} F(r + mN) + F(mN - r), with F(d) = -∫Λ(t)(d-t)^(-1-2s)dt
        v -= lead
            * hat_smoothed(|t| {
                hurwitz_zeta(expo, mf + 1.0 + (rf - t) / nf)
                    + hurwitz_zeta(expo, mf + 1.0 - (rf + t) / nf)
            });
        row[r] = scale * v;
        row[(n - r) % n] = scale * v;
    }
    row
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::build_grid;

    fn mesh(intervals: &[(f64, f64)], h: f64) -> Arc<Mesh> {
        Arc::new(build_grid(intervals, h).unwrap().into())
    }

    #[test]
    fn classical_quadratic_is_exact() {
        let m = mesh(&[(0.0, 1.0)], 1.0 / 16.0);
        let a = assemble_classical(&m).unwrap();
        let u: Vec<f64> = m.nodes().iter().map(|x| x * (1.0 - x)).collect();
        for v in a.apply_slice(&u) {
            assert!((v - 2.0 * CLASSICAL_NORMALIZATION).abs() < 1e-11);
        }
        let row0 = a.matrix().row(0);
        assert_eq!(row0.iter().filter(|v| **v != 0.0).count(), 2);
    }

    #[test]
    fn dirichlet_is_symmetric_m_matrix() {
        let m = mesh(&[(0.0, 1.0), (1.5, 2.0)], 1.0 / 32.0);
        for &s in &[0.25, 0.5, 0.8] {
            let a = assemble_dirichlet(&m, s).unwrap();
            let mat = a.matrix();
            assert_eq!(mat, &mat.transpose());
            for i in 0..a.len() {
                assert!(mat[(i, i)] > 0.0);
                for j in 0..a.len() {
                    if i != j {
                        assert!(mat[(i, j)] < 0.0);
                    }
                }
            }
            assert!(tail_coefficients(&a).iter().all(|&t| t > 0.0));
        }
    }

    #[test]
    fn subdomain_block_is_subdomain_matrix() {
        let h = 1.0 / 16.0;
        let both = assemble_dirichlet(&mesh(&[(0.0, 1.0), (2.0, 3.0)], h), 0.4).unwrap();
        let one = assemble_dirichlet(&mesh(&[(0.0, 1.0)], h), 0.4).unwrap();
        let idx: Vec<usize> = (0..15).collect();
        assert_eq!(both.principal_submatrix(&idx), *one.matrix());
    }

    #[test]
    fn periodic_rows_vanish_and_cutoff_is_checked() {
        let pg = PeriodicGrid::new(64, 4).unwrap();
        let m: Arc<Mesh> = Arc::new(pg.into());
        for &s in &[0.1, 0.5, 0.9] {
            let a = assemble_periodic(&m, s).unwrap();
            let peak = a.matrix()[(0, 0)];
            for r in a.matrix().row_iter() {
                assert!(r.iter().sum::<f64>().abs() < 1e-10 * peak.max(1.0));
            }
        }
        let small: Arc<Mesh> = Arc::new(PeriodicGrid::new(64, 1).unwrap().into());
        assert!(assemble_periodic(&small, 0.5).is_err());
    }
}
