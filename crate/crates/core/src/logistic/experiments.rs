//! Threshold, crossing, congruence, abundance and beating experiments.

use std::sync::Arc;

use rayon::prelude::*;

use super::{ball_nodes, check_fitting_bounds, solve, Classification, SolveReport};
use crate::domain::{build_grid, build_kernel, Coefficient, Field, KernelShape, Mesh, ProblemSpec, Tolerances};
use crate::error::{Error, Result};
use crate::spectral::eigenvalue_on;

fn scaled(intervals: &[(f64, f64)], r: f64) -> Vec<(f64, f64)> {
    intervals.iter().map(|&(a, b)| (r * a, r * b)).collect()
}

fn bounded_mesh(intervals: &[(f64, f64)], h: f64) -> Result<Arc<Mesh>> {
    Ok(Arc::new(build_grid(intervals, h)?.into()))
}

fn logistic_spec(mesh: Arc<Mesh>, s: f64, sigma: &Coefficient, tau: f64, kernel_radius: f64, tol: Tolerances) -> Result<ProblemSpec> {
    let kernel = if tau > 0.0 {
        Some(build_kernel(KernelShape::Uniform, kernel_radius, mesh.h())?)
    } else {
        None
    };
    ProblemSpec::new(mesh, s, sigma, &1.0.into(), tau, kernel, tol)
}

/// Bisected survival radius for `σ = μ = 1`, `τ = 0` on dilations `rΩ`.
#[derive(Debug, Clone)]
pub struct ThresholdReport {
    pub r_star: f64,
    /// `λ_s(Ω)^(1/(2s))`.
    pub predicted: f64,
    pub rel_gap: f64,
    pub lambda_base: f64,
    pub bracket: (f64, f64),
    pub steps: usize,
    /// Nontrivial solutions met during the bisection.
    pub nontrivial_reports: Vec<SolveReport>,
}

/// Every dilation keeps the node count of the base grid (`h = r·h0`), so the
/// discrete problems at different radii are exact rescalings of each other.
pub fn threshold_radius(
    base: &[(f64, f64)],
    s: f64,
    h0: f64,
    (mut lo, mut hi): (f64, f64),
    rel_tol: f64,
    tol: Tolerances,
) -> Result<ThresholdReport> {
    if !(0.0 < lo && lo < hi) {
        return Err(Error::param("bracket", format!("need 0 < lo < hi, got ({lo}, {hi})")));
    }
    let lambda_base = eigenvalue_on(base, s, h0)?;
    let predicted = lambda_base.powf(1.0 / (2.0 * s));
    let classify = |r: f64| -> Result<SolveReport> {
        let mesh = bounded_mesh(&scaled(base, r), r * h0)?;
        solve(&logistic_spec(mesh, s, &1.0.into(), 0.0, 0.0, tol)?)
    };
    let mut kept = Vec::new();
    if classify(lo)?.is_nontrivial() {
        return Err(Error::Precondition(format!("radius {lo} already supports a population")));
    }
    let top = classify(hi)?;
    if !top.is_nontrivial() {
        return Err(Error::Precondition(format!("radius {hi} does not support a population")));
    }
    kept.push(top);
    let mut steps = 0;
    while (hi - lo) > rel_tol * hi {
        let mid = (lo * hi).sqrt();
        let rep = classify(mid)?;
        if rep.is_nontrivial() {
            hi = mid;
            kept.push(rep);
        } else {
            lo = mid;
        }
        steps += 1;
    }
    let r_star = (lo * hi).sqrt();
    Ok(ThresholdReport {
        r_star,
        predicted,
        rel_gap: (r_star - predicted).abs() / predicted,
        lambda_base,
        bracket: (lo, hi),
        steps,
        nontrivial_reports: kept,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtRow {
    pub r: f64,
    pub lambda_low: f64,
    pub lambda_high: f64,
}

/// One radius where the two exponents are compared through actual solves.
#[derive(Debug, Clone)]
pub struct ExtCase {
    pub r: f64,
    pub sigma: f64,
    pub tau: f64,
    /// Solve with the smaller exponent `s`.
    pub low: SolveReport,
    /// Solve with the larger exponent `S`.
    pub high: SolveReport,
    /// Classification pattern predicted by the eigenvalue ordering.
    pub matches: bool,
}

#[derive(Debug, Clone)]
pub struct ExtReport {
    pub rows: Vec<ExtRow>,
    pub sign_changes: usize,
    /// `(λ_S(Ω)/λ_s(Ω))^(1/(2(S−s)))`.
    pub predicted_crossing: f64,
    pub small: ExtCase,
    pub large: ExtCase,
}

/// Eigenvalue curves of exponents `s < S` over dilations, plus one solve
/// pair on each side of the crossing.
///
/// At the chosen radius `σ_r` is the midpoint between the two eigenvalues
/// and `τ_r` half the remaining distance to the larger one, so
/// `λ_lower < σ_r ≤ σ_r + τ_r < λ_upper`. The kernel is uniform with
/// radius `kernel_fraction · r`.
pub fn ext_crossing(
    base: &[(f64, f64)],
    s: f64,
    big_s: f64,
    r_grid: &[f64],
    h0: f64,
    kernel_fraction: f64,
    tol: Tolerances,
) -> Result<ExtReport> {
    if !(0.0 < s && s < big_s && big_s <= 1.0) {
        return Err(Error::param("s", format!("need 0 < s < S <= 1, got s={s}, S={big_s}")));
    }
    let rows = r_grid
        .par_iter()
        .map(|&r| {
            let iv = scaled(base, r);
            Ok(ExtRow {
                r,
                lambda_low: eigenvalue_on(&iv, s, r * h0)?,
                lambda_high: eigenvalue_on(&iv, big_s, r * h0)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let sign = |row: &ExtRow| (row.lambda_high - row.lambda_low).signum();
    let sign_changes = rows.windows(2).filter(|w| sign(&w[0]) != sign(&w[1])).count();
    let small = rows.iter().find(|r| r.lambda_low < r.lambda_high);
    let large = rows.iter().rev().find(|r| r.lambda_high < r.lambda_low);
    let (small, large) = match (small, large) {
        (Some(a), Some(b)) if a.r < b.r => (*a, *b),
        _ => {
            return Err(Error::Precondition(
                "radius grid does not bracket a sign change".into(),
            ))
        }
    };
    let predicted_crossing = (eigenvalue_on(base, big_s, h0)? / eigenvalue_on(base, s, h0)?)
        .powf(1.0 / (2.0 * (big_s - s)));
    let case = |row: ExtRow, low_survives: bool| -> Result<ExtCase> {
        let (lower, upper) = if low_survives {
            (row.lambda_low, row.lambda_high)
        } else {
            (row.lambda_high, row.lambda_low)
        };
        let sigma = 0.5 * (lower + upper);
        let tau = 0.5 * (upper - sigma);
        let iv = scaled(base, row.r);
        let run = |exp: f64| -> Result<SolveReport> {
            let mesh = bounded_mesh(&iv, row.r * h0)?;
            solve(&logistic_spec(mesh, exp, &sigma.into(), tau, kernel_fraction * row.r, tol)?)
        };
        let low = run(s)?;
        let high = run(big_s)?;
        let matches = low.is_nontrivial() == low_survives && high.is_nontrivial() != low_survives;
        Ok(ExtCase {
            r: row.r,
            sigma,
            tau,
            low,
            high,
            matches,
        })
    };
    Ok(ExtReport {
        rows,
        sign_changes,
        predicted_crossing,
        small: case(small, true)?,
        large: case(large, false)?,
    })
}

/// Single domains versus their union at a resource level between the
/// two eigenvalues.
#[derive(Debug, Clone)]
pub struct CongruenceReport {
    pub lambda_single: (f64, f64),
    pub lambda_union: f64,
    pub sigma: f64,
    /// Reports on `Ω₁`, `Ω₂` and `Ω₁ ∪ Ω₂`.
    pub reports: [SolveReport; 3],
    /// Union solution exceeds `1e-6 · max u` on both intervals.
    pub union_positive_on_both: bool,
}

/// Relative eigenvalue gap under which the admissible σ-interval is empty.
const EMPTY_GAP: f64 = 1e-8;

pub fn congruence_experiment(
    omega1: (f64, f64),
    omega2: (f64, f64),
    s: f64,
    h: f64,
    tol: Tolerances,
) -> Result<CongruenceReport> {
    let (l1, l2) = (omega1.1 - omega1.0, omega2.1 - omega2.0);
    if (l1 - l2).abs() > 1e-12 * l1.abs().max(l2.abs()) {
        return Err(Error::InvalidGrid("intervals are not congruent".into()));
    }
    let lambda_union = eigenvalue_on(&[omega1, omega2], s, h)?;
    let lambda_single = (eigenvalue_on(&[omega1], s, h)?, eigenvalue_on(&[omega2], s, h)?);
    let lower = lambda_single.0.min(lambda_single.1);
    if lower - lambda_union <= EMPTY_GAP * lower {
        return Err(Error::Precondition(format!(
            "no admissible resource level: union eigenvalue {lambda_union:.12e} vs single {lower:.12e}; refine h"
        )));
    }
    let sigma = 0.5 * (lambda_union + lower);
    let run = |iv: &[(f64, f64)]| -> Result<SolveReport> {
        solve(&logistic_spec(bounded_mesh(iv, h)?, s, &sigma.into(), 0.0, 0.0, tol)?)
    };
    let r1 = run(&[omega1])?;
    let r2 = run(&[omega2])?;
    let ru = run(&[omega1, omega2])?;
    let tt = ru
        .u
        .values()
        .iter()
        .zip(ru.u.mesh().as_grid().expect("bounded").interval_id())
        .fold([f64::INFINITY; 2], |mut m, (&v, &k)| {
            m[k.min(1)] = m[k.min(1)].min(v);
            m
        });
    let tol_u = ru.u.max() * 1e-6;
    Ok(CongruenceReport {
        lambda_single,
        lambda_union,
        sigma,
        union_positive_on_both: ru.is_nontrivial() && tt[0] > tol_u && tt[1] > tol_u,
        reports: [r1, r2, ru],
    })
}

/// Relative ratio increase per doubling accepted as linear response.
const LINEAR_STEP: f64 = 0.1;

#[derive(Debug, Clone)]
pub struct AbundanceRow {
    pub level: f64,
    pub inf_on_ball: f64,
    pub ratio: f64,
    pub max_u: f64,
    pub bound_easy: f64,
    pub easy_holds: bool,
    pub report: SolveReport,
}

#[derive(Debug, Clone)]
pub struct AbundanceReport {
    /// First doubling level at which the response is linear (see [`abundance_sweep`]).
    pub m0: f64,
    /// `(M, inf_{B_r} u / M)` along the doubling search.
    pub doubling: Vec<(f64, f64)>,
    /// Levels `M₀, 2M₀, 4M₀, …`.
    pub rows: Vec<AbundanceRow>,
    /// `(max ratio − min ratio) / max ratio` over `rows`.
    pub variation: f64,
}

/// Resource `σ = M` on `(−R, R)` and `0` elsewhere in `Ω`, `μ = 1`, `τ = 0`.
///
/// `M₀` is found by doubling from `m_start`: it is the first nontrivial level
/// `M` for which doubling to `2M` raises `inf_{(−r,r)} u / M` by at most 10%,
/// i.e. where the response has become linear in the resource level.
#[allow(clippy::too_many_arguments)]
pub fn abundance_sweep(
    omega: &[(f64, f64)],
    big_r: f64,
    r: f64,
    s: f64,
    h: f64,
    m_start: f64,
    levels: usize,
    tol: Tolerances,
) -> Result<AbundanceReport> {
    if !(0.0 < r && r < big_r) || !(m_start > 0.0) || levels == 0 {
        return Err(Error::param("abundance", "need 0 < r < R, M > 0 and at least one level"));
    }
    let mesh = bounded_mesh(omega, h)?;
    ball_nodes(&mesh, (-big_r, big_r))?;
    let run = |m: f64| -> Result<AbundanceRow> {
        let sigma = Coefficient::function(move |x| if x.abs() < big_r { m } else { 0.0 });
        let spec = logistic_spec(mesh.clone(), s, &sigma, 0.0, 0.0, tol)?;
        let report = solve(&spec)?;
        let d = check_fitting_bounds(&report, &spec, Some((-r, r)), Some(m))?;
        Ok(AbundanceRow {
            level: m,
            inf_on_ball: d.inf_on_ball,
            ratio: d.ratio,
            max_u: d.max_u,
            bound_easy: d.bound_easy,
            easy_holds: d.easy_holds,
            report,
        })
    };
    let mut doubling = Vec::new();
    let mut m = m_start;
    let mut prev = run(m)?;
    doubling.push((m, prev.ratio));
    let m0 = loop {
        let next = run(2.0 * m)?;
        doubling.push((2.0 * m, next.ratio));
        if prev.report.is_nontrivial() && prev.ratio > 0.0 && next.ratio <= (1.0 + LINEAR_STEP) * prev.ratio {
            break m;
        }
        if doubling.len() >= 40 {
            return Err(Error::Precondition("no resource level reached the linear regime".into()));
        }
        m *= 2.0;
        prev = next;
    };
    let rows = (0..levels)
        .into_par_iter()
        .map(|k| run(m0 * 2f64.powi(k as i32)))
        .collect::<Result<Vec<_>>>()?;
    let max = rows.iter().map(|r| r.ratio).fold(f64::NEG_INFINITY, f64::max);
    let min = rows.iter().map(|r| r.ratio).fold(f64::INFINITY, f64::min);
    Ok(AbundanceReport {
        m0,
        doubling,
        variation: (max - min) / max,
        rows,
    })
}

#[derive(Debug, Clone)]
pub struct BeatRow {
    pub m: f64,
    pub classification: Classification,
    /// Nodes with `u_i > σ_m(x_i)` beyond the comparison tolerance.
    pub beat_nodes: Vec<usize>,
    /// `max_i (u_i − σ_m(x_i))`.
    pub max_excess: f64,
    pub report: SolveReport,
}

#[derive(Debug, Clone)]
pub struct BeatReport {
    pub rows: Vec<BeatRow>,
    /// Smallest `m` in the scan with a nonempty beat set.
    pub first_m: Option<f64>,
}

/// Solves with `σ_m = σ₀ + m` (`μ = 1`, `τ = 0`) for every `m` and records
/// where the population exceeds the resource.
///
/// Excess counts only when `u_i − σ_m(x_i) > 1e-8 · max(1, max σ_m)`.
pub fn beat_experiment(sigma0: &Field, s: f64, m_grid: &[f64], tol: Tolerances) -> Result<BeatReport> {
    let mesh = sigma0.mesh().clone();
    let rows = m_grid
        .par_iter()
        .map(|&m| {
            let sigma = sigma0.map(|v| v + m);
            let spec = ProblemSpec::new(
                mesh.clone(),
                s,
                &Coefficient::Table(sigma.values().to_vec()),
                &1.0.into(),
                0.0,
                None,
                tol,
            )?;
            let report = solve(&spec)?;
            let margin = 1e-8 * sigma.max().max(1.0);
            let excess: Vec<f64> = report
                .u
                .values()
                .iter()
                .zip(sigma.values())
                .map(|(u, s)| u - s)
                .collect();
            let beat_nodes = if report.is_nontrivial() {
                (0..excess.len()).filter(|&i| excess[i] > margin).collect()
            } else {
                Vec::new()
            };
            Ok(BeatRow {
                m,
                classification: report.classification,
                beat_nodes,
                max_excess: excess.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                report,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    if !rows.iter().any(|r| r.classification == Classification::Nontrivial) {
        return Err(Error::Precondition(
            "no resource shift produced a nontrivial solution".into(),
        ));
    }
    let first_m = rows
        .iter()
        .filter(|r| !r.beat_nodes.is_empty())
        .map(|r| r.m)
        .fold(None, |acc: Option<f64>, m| Some(acc.map_or(m, |a| a.min(m))));
    Ok(BeatReport { rows, first_m })
}
