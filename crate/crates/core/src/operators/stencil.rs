//! Pair weights of the P1 Galerkin discretization of the singular form.
//!
//! For unit hats `φ(t) = (1 - |t|)_+` the stiffness entry between two hats
//! whose centres are `d` cells apart is `2s(1-s) h^(1-2s) F(d)` with
//!
//! `F(d) = ∫_0^∞ ζ^(-1-2s) [2Λ(d) - Λ(d-ζ) - Λ(d+ζ)] dζ`,
//!
//! where `Λ` is the autocorrelation of the unit hat (a cubic B-spline).

use crate::quadrature::{power_integral, GaussLegendre};

/// Offsets at or beyond this use Gauss quadrature on the far-field form.
const GAUSS_FROM: f64 = 3.0;

type Cubic = [f64; 4];

/// `∫ φ(t) φ(t + a) dt` for the unit hat.
pub fn hat_autocorrelation(a: f64) -> f64 {
    let t = a.abs();
    if t >= 2.0 {
        0.0
    } else {
        eval(&lambda_piece(t), t)
    }
}

fn lambda_piece(t: f64) -> Cubic {
    if t <= 1.0 {
        [2.0 / 3.0, 0.0, -1.0, 0.5]
    } else {
        [4.0 / 3.0, -2.0, 1.0, -1.0 / 6.0]
    }
}

fn eval(p: &Cubic, x: f64) -> f64 {
    ((p[3] * x + p[2]) * x + p[1]) * x + p[0]
}

/// Coefficients of `p(α + β ζ)` in powers of `ζ`.
fn compose_affine(p: &Cubic, alpha: f64, beta: f64) -> Cubic {
    let mut out = [0.0; 4];
    // (α + βζ)^k expanded by the binomial theorem
    let binom = [[1.0, 0.0, 0.0, 0.0], [1.0, 1.0, 0.0, 0.0], [1.0, 2.0, 1.0, 0.0], [1.0, 3.0, 3.0, 1.0]];
    for (k, &c) in p.iter().enumerate() {
        if c == 0.0 {
            continue;
        }
        for j in 0..=k {
            out[j] += c * binom[k][j] * alpha.powi((k - j) as i32) * beta.powi(j as i32);
        }
    }
    out
}

/// Polynomial in `ζ` equal to `Λ(y0 + dir·ζ)` on a piece where the argument
/// keeps one sign and stays in one spline segment (`mid` is a sample point).
fn lambda_along(y0: f64, dir: f64, mid: f64) -> Cubic {
    let y = y0 + dir * mid;
    if y.abs() >= 2.0 {
        return [0.0; 4];
    }
    let sign = if y >= 0.0 { 1.0 } else { -1.0 };
    // t = |y| = sign·(y0 + dir·ζ)
    compose_affine(&lambda_piece(y.abs()), sign * y0, sign * dir)
}

/// `F(d)` for a real offset `d >= 0` measured in cells.
pub fn pair_weight(d: f64, s: f64) -> f64 {
    debug_assert!(d >= 0.0 && s > 0.0 && s < 1.0);
    if d >= GAUSS_FROM {
        return far_pair_weight(d, s);
    }
    exact_pair_weight(d, s)
}

/// Piecewise-polynomial integration against exact power integrals.
fn exact_pair_weight(d: f64, s: f64) -> f64 {
    let two_s = 2.0 * s;
    let zeta_max = d + 2.0;

    // breakpoints of the integrand in ζ
    let mut cuts: Vec<f64> = vec![0.0, zeta_max];
    for c in [d - 2.0, d - 1.0, d, d + 1.0, 1.0 - d, 2.0 - d] {
        if c > 0.0 && c < zeta_max {
            cuts.push(c);
        }
    }
    cuts.sort_by(f64::total_cmp);
    cuts.dedup_by(|a, b| (*a - *b).abs() <= 1e-14 * zeta_max);

    let lam_d = hat_autocorrelation(d);
    let mut total = 0.0;
    for (piece, w) in cuts.windows(2).enumerate() {
        let (a, b) = (w[0], w[1]);
        let mid = 0.5 * (a + b);
        let minus = lambda_along(d, -1.0, mid);
        let plus = lambda_along(d, 1.0, mid);
        let mut g = [2.0 * lam_d - minus[0] - plus[0], -minus[1] - plus[1], -minus[2] - plus[2], -minus[3] - plus[3]];
        if piece == 0 {
            // g(0) = g'(0) = 0 analytically; drop rounding residue so the
            // integral against ζ^(-1-2s) converges
            g[0] = 0.0;
            g[1] = 0.0;
        }
        for (j, &c) in g.iter().enumerate() {
            if c != 0.0 {
                total += c * power_integral(a, b, j as f64 - two_s);
            }
        }
    }
    total + 2.0 * lam_d * zeta_max.powf(-two_s) / two_s
}

/// `F(d) = -∫_{-2}^{2} Λ(t) (d - t)^(-1-2s) dt`, valid for `d >= 2`.
fn far_pair_weight(d: f64, s: f64) -> f64 {
    let rule = GaussLegendre::sixteen();
    let p = -1.0 - 2.0 * s;
    let mut total = 0.0;
    for k in -2..2 {
        let (a, b) = (k as f64, k as f64 + 1.0);
        total += rule.integrate(a, b, |t| hat_autocorrelation(t) * (d - t).powf(p));
    }
    -total
}

/// `∫_{-2}^{2} Λ(t) w(t) dt`; used for periodic image tails.
pub(crate) fn hat_smoothed(mut w: impl FnMut(f64) -> f64) -> f64 {
    let rule = GaussLegendre::sixteen();
    let mut total = 0.0;
    for k in -2..2 {
        let (a, b) = (k as f64, k as f64 + 1.0);
        total += rule.integrate(a, b, |t| hat_autocorrelation(t) * w(t));
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn autocorrelation_matches_mass_matrix() {
        assert!((hat_autocorrelation(0.0) - 2.0 / 3.0).abs() < 1e-15);
        assert!((hat_autocorrelation(1.0) - 1.0 / 6.0).abs() < 1e-15);
        assert!((hat_autocorrelation(-1.0) - 1.0 / 6.0).abs() < 1e-15);
        assert_eq!(hat_autocorrelation(2.0), 0.0);
    }

    #[test]
    fn exact_and_far_paths_agree() {
        for &s in &[0.1, 0.25, 0.5, 0.75, 0.95] {
            for &d in &[2.5, 3.0, 3.7, 4.9, 6.2] {
                let exact = exact_pair_weight(d, s);
                let far = far_pair_weight(d, s);
                assert!(
                    (exact - far).abs() <= 1e-11 * far.abs(),
                    "s={s} d={d}: {exact} vs {far}"
                );
            }
        }
    }

    #[test]
    fn neighbours_couple_negatively() {
        // the consistent-mass part makes F(1) positive below s ≈ 0.245
        for &s in &[0.25, 0.5, 0.75, 0.999] {
            assert!(pair_weight(0.0, s) > 0.0);
            for k in 1..12 {
                assert!(pair_weight(k as f64, s) < 0.0, "s={s} k={k}");
            }
        }
    }
}
