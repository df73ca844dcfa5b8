//! Independent quadrature oracles shared by the integration tests.
//!
//! Nothing here calls into the crate's own quadrature, so agreement with the
//! assembled matrices is a genuine cross-check.

#![allow(dead_code)]

use std::sync::Arc;

use nlogis_core::{build_grid, Field, Mesh};

/// Gauss–Legendre nodes and weights on [-1, 1] by Newton iteration on the
/// three-term recurrence.
pub fn gauss(n: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = -(std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut d = 1.0;
        for _ in 0..200 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let p = if n == 1 { x } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            d = n as f64 * (x * p - pm) / (x * x - 1.0);
            let step = p / d;
            x -= step;
            if step.abs() < 1e-15 {
                break;
            }
        }
        out.push((x, 2.0 / ((1.0 - x * x) * d * d)));
    }
    out
}

/// Composite 20-point Gauss over `pieces` equal subintervals of `[a, b]`.
pub fn integrate(a: f64, b: f64, pieces: usize, f: &dyn Fn(f64) -> f64) -> f64 {
    let rule = gauss(20);
    let w = (b - a) / pieces as f64;
    (0..pieces)
        .map(|k| {
            let lo = a + k as f64 * w;
            rule.iter().map(|&(x, wt)| wt * f(lo + 0.5 * w * (x + 1.0))).sum::<f64>() * 0.5 * w
        })
        .sum()
}

/// Integral over `[a, b]` with dyadic refinement toward `a`, for integrands
/// with an integrable power-type singularity at `a`.
pub fn graded_left(a: f64, b: f64, f: &dyn Fn(f64) -> f64) -> f64 {
    let mut total = 0.0;
    let mut hi = b;
    // 45 halvings keep the nodes distinct from `a` in floating point
    for _ in 0..45 {
        let lo = a + 0.5 * (hi - a);
        total += integrate(lo, hi, 1, f);
        hi = lo;
    }
    total
}

/// Mirror image of [`graded_left`], refining toward `b`.
pub fn graded_right(a: f64, b: f64, f: &dyn Fn(f64) -> f64) -> f64 {
    let mut total = 0.0;
    let mut lo = a;
    for _ in 0..45 {
        let hi = b - 0.5 * (b - lo);
        total += integrate(lo, hi, 1, f);
        lo = hi;
    }
    total
}

/// As [`graded_left`], refining toward both endpoints.
pub fn graded_both(a: f64, b: f64, f: &dyn Fn(f64) -> f64) -> f64 {
    let m = 0.5 * (a + b);
    graded_left(a, m, f) + graded_right(m, b, f)
}

/// Piecewise-exact integral of a piecewise polynomial over `[a, b]` given
/// its breakpoints.
pub fn piecewise(a: f64, b: f64, breaks: &[f64], f: &dyn Fn(f64) -> f64) -> f64 {
    let mut pts: Vec<f64> = breaks.iter().copied().filter(|&p| p > a && p < b).collect();
    pts.push(a);
    pts.push(b);
    pts.sort_by(f64::total_cmp);
    pts.windows(2).map(|w| integrate(w[0], w[1], 1, f)).sum()
}

/// Tent of height one on `(c - r, c + r)`.
pub fn tent(c: f64, r: f64) -> impl Fn(f64) -> f64 {
    move |x| (1.0 - (x - c).abs() / r).max(0.0)
}

pub fn mesh(intervals: &[(f64, f64)], h: f64) -> Arc<Mesh> {
    Arc::new(build_grid(intervals, h).unwrap().into())
}

pub fn sample(mesh: &Arc<Mesh>, f: impl Fn(f64) -> f64) -> Field {
    Field::new(mesh.clone(), mesh.nodes().iter().map(|&x| f(x)).collect()).unwrap()
}

/// Central-difference gradient of `energy` at `u`.
pub fn fd_gradient(u: &[f64], step: f64, energy: &dyn Fn(&[f64]) -> f64) -> Vec<f64> {
    let mut v = u.to_vec();
    (0..u.len())
        .map(|i| {
            v[i] = u[i] + step;
            let up = energy(&v);
            v[i] = u[i] - step;
            let down = energy(&v);
            v[i] = u[i];
            (up - down) / (2.0 * step)
        })
        .collect()
}

/// `‖a − b‖_∞ / ‖b‖_∞`.
pub fn rel_sup(a: &[f64], b: &[f64]) -> f64 {
    let num = a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
    let den = b.iter().fold(0.0f64, |m, y| m.max(y.abs()));
    num / den
}
