//! Dispatch of a validated configuration to the library experiments.

use std::sync::Arc;

use nlogis_core::logistic::{
    abundance_sweep, beat_experiment, congruence_experiment, ext_crossing, periodic_balance, solve,
    threshold_radius, Classification, SolveReport,
};
use nlogis_core::operators::TransmissionSpec;
use nlogis_core::spectral::{eigen_scaling, eigenvalue_on};
use nlogis_core::strategic::{build_strategic, StrategicParams};
use nlogis_core::transmission::{lambda_star, minimize_t, mp_check, MpVerdict};
use nlogis_core::{
    build_grid, build_kernel, sample_function, Coefficient, Error, Field, Mesh, PeriodicGrid, ProblemSpec,
};
use rayon::prelude::*;

use crate::config::{CoefSpec, Experiment, ExperimentConfig, KernelSpec, Plan, Resource};
use crate::output::{Cell, CheckKey, ResultRow};

/// CSV columns of each experiment, before the trailing `pass` column.
pub fn columns(experiment: Experiment) -> &'static [&'static str] {
    match experiment {
        Experiment::Eigen => &["s", "r", "h", "lambda_base", "lambda_scaled", "ratio", "target", "rel_error"],
        Experiment::Solve => &[
            "s", "factor", "sigma_max", "tau", "lambda", "classification", "predicted", "min_u", "max_u",
            "bound", "energy", "residual", "iterations",
        ],
        Experiment::ThresholdRadius => &[
            "s", "h0", "r_star", "predicted", "rel_gap", "lambda_base", "bracket_lo", "bracket_hi", "steps",
            "max_u",
        ],
        Experiment::ExtCrossing => &[
            "kind", "r", "s", "s_high", "lambda_low", "lambda_high", "difference", "sigma", "tau", "class_low",
            "class_high", "predicted_crossing",
        ],
        Experiment::Congruence => &[
            "domain", "s", "h", "lambda", "sigma", "classification", "expected", "min_u", "max_u", "residual",
        ],
        Experiment::Abundance => &["level", "inf_on_ball", "ratio", "max_u", "bound", "m0", "variation"],
        Experiment::Beat => &["profile", "m", "classification", "beat_nodes", "max_excess", "max_u", "bound"],
        Experiment::Periodic => &[
            "n", "s", "tau", "classification", "expected_constant", "max_deviation", "min_u", "max_u", "mean",
            "source_integral", "residual",
        ],
        Experiment::Transmission => &[
            "factor", "sigma_max", "lambda_star", "classification", "verdict", "positive_local",
            "positive_nonlocal", "max_u", "energy", "residual",
        ],
        Experiment::Strategic => &[
            "s", "eps", "r_used", "approx_error", "harmonic_residual", "sigma_gap", "equation_residual",
            "fit_margin", "support_ok", "achieved",
        ],
    }
}

/// Runs the configured experiment; rows come back in a fixed order.
pub fn run(cfg: &ExperimentConfig) -> Result<Vec<ResultRow>, Error> {
    let ctx = Ctx { cfg };
    let rows = match &cfg.plan {
        Plan::Eigen { intervals, dilations } => ctx.eigen(intervals, dilations)?,
        Plan::Solve { intervals, resource, mu, tau, kernel } => ctx.solve(intervals, resource, mu, *tau, *kernel)?,
        Plan::ThresholdRadius { intervals, bracket, rel_tol } => ctx.threshold(intervals, *bracket, *rel_tol)?,
        Plan::ExtCrossing { intervals, s_high, r_grid, kernel_fraction } => {
            ctx.ext(intervals, *s_high, r_grid, *kernel_fraction)?
        }
        Plan::Congruence { omega1, omega2 } => ctx.congruence(*omega1, *omega2)?,
        Plan::Abundance { intervals, resource_radius, ball_radius, m_start, levels } => {
            ctx.abundance(intervals, *resource_radius, *ball_radius, *m_start, *levels)?
        }
        Plan::Beat { intervals, sigma, m_grid, control } => ctx.beat(intervals, sigma, m_grid, *control)?,
        Plan::Periodic { n, image_cutoff, sigma, mu, tau, kernel } => {
            ctx.periodic(*n, *image_cutoff, sigma, mu, *tau, *kernel)?
        }
        Plan::Transmission { omega1, omega2, s1, s2, nu, resource, mu } => {
            ctx.transmission(omega1, omega2, (*s1, *s2), *nu, resource, mu)?
        }
        Plan::Strategic { eps, r_schedule, tau, kernel, sigma, mu, alpha } => {
            ctx.strategic(*eps, r_schedule, *tau, *kernel, sigma, mu, *alpha)?
        }
    };
    Ok(rows)
}

struct Ctx<'a> {
    cfg: &'a ExperimentConfig,
}

fn class(c: Classification) -> Cell {
    c.as_str().into()
}

fn mesh_of(intervals: &[(f64, f64)], h: f64) -> Result<Arc<Mesh>, Error> {
    Ok(Arc::new(build_grid(intervals, h)?.into()))
}

impl Ctx<'_> {
    fn row(&self, cells: Vec<Cell>, checks: Vec<(CheckKey, bool)>) -> ResultRow {
        ResultRow {
            experiment: self.cfg.experiment,
            cells,
            checks,
        }
    }

    /// `max u ≤ bound` up to the configured slack, for nontrivial states.
    fn bound_check(&self, rep: &SolveReport, bound: f64) -> Vec<(CheckKey, bool)> {
        if rep.is_nontrivial() {
            vec![(CheckKey::PopulationBound, rep.u.max() <= bound + self.cfg.checks.bound_slack)]
        } else {
            Vec::new()
        }
    }

    fn spec(
        &self,
        mesh: Arc<Mesh>,
        sigma: &Coefficient,
        mu: &Coefficient,
        tau: f64,
        kernel: Option<KernelSpec>,
    ) -> Result<ProblemSpec, Error> {
        let kernel = kernel
            .map(|k| build_kernel(k.shape(), k.radius, mesh.h()))
            .transpose()?;
        ProblemSpec::new(mesh, self.cfg.s, sigma, mu, tau, kernel, self.cfg.tolerances)
    }

    fn eigen(&self, intervals: &[(f64, f64)], dilations: &[f64]) -> Result<Vec<ResultRow>, Error> {
        let (s, h) = (self.cfg.s, self.cfg.h);
        dilations
            .par_iter()
            .map(|&r| {
                let rep = eigen_scaling(intervals, r, s, h)?;
                let rel = (rep.ratio / rep.target - 1.0).abs();
                Ok(self.row(
                    vec![
                        s.into(),
                        r.into(),
                        h.into(),
                        rep.lambda_base.into(),
                        rep.lambda_scaled.into(),
                        rep.ratio.into(),
                        rep.target.into(),
                        rel.into(),
                    ],
                    vec![(CheckKey::Scaling, rel <= self.cfg.checks.max_rel_error)],
                ))
            })
            .collect()
    }

    fn solve(
        &self,
        intervals: &[(f64, f64)],
        resource: &Resource,
        mu: &CoefSpec,
        tau: f64,
        kernel: Option<KernelSpec>,
    ) -> Result<Vec<ResultRow>, Error> {
        let mesh = mesh_of(intervals, self.cfg.h)?;
        let lambda = eigenvalue_on(intervals, self.cfg.s, self.cfg.h)?;
        // (factor, sigma): a factor exists when σ is a constant multiple of λ
        let cases: Vec<(Option<f64>, CoefSpec)> = match resource {
            Resource::Factors(f) => f.iter().map(|&k| (Some(k), CoefSpec::Constant(k * lambda))).collect(),
            Resource::Given(c) => vec![(c.as_constant().map(|v| v / lambda), c.clone())],
        };
        let mu_c = mu.to_coefficient();
        cases
            .par_iter()
            .map(|(factor, sigma)| {
                let sp = self.spec(mesh.clone(), &sigma.to_coefficient(), &mu_c, tau, kernel)?;
                let rep = solve(&sp)?;
                let bound = (sp.sigma.max() + tau) / sp.mu.min();
                // constant σ without nonlocal gain: survival iff σ > λ
                let predicted = factor.filter(|&k| tau == 0.0 && k != 1.0).map(|k| k > 1.0);
                let mut checks = self.bound_check(&rep, bound);
                if let Some(survive) = predicted {
                    let ok = if survive {
                        rep.is_nontrivial() && rep.u.min() > sp.triviality_tol
                    } else {
                        !rep.is_nontrivial()
                    };
                    checks.push((CheckKey::ExtinctionThreshold, ok));
                }
                Ok(self.row(
                    vec![
                        self.cfg.s.into(),
                        (*factor).into(),
                        sp.sigma.max().into(),
                        tau.into(),
                        lambda.into(),
                        class(rep.classification),
                        predicted
                            .map(|p| if p { "nontrivial" } else { "trivial" })
                            .into(),
                        rep.u.min().into(),
                        rep.u.max().into(),
                        bound.into(),
                        rep.energy.into(),
                        rep.el_residual.into(),
                        rep.iterations.into(),
                    ],
                    checks,
                ))
            })
            .collect()
    }

    fn threshold(&self, intervals: &[(f64, f64)], bracket: (f64, f64), rel_tol: f64) -> Result<Vec<ResultRow>, Error> {
        let (s, h) = (self.cfg.s, self.cfg.h);
        let rep = threshold_radius(intervals, s, h, bracket, rel_tol, self.cfg.tolerances)?;
        let max_u = rep.nontrivial_reports.iter().map(|r| r.u.max()).fold(0.0, f64::max);
        // σ = μ = 1 and τ = 0, so every state stays below 1
        let bound_ok = max_u <= 1.0 + self.cfg.checks.bound_slack;
        Ok(vec![self.row(
            vec![
                s.into(),
                h.into(),
                rep.r_star.into(),
                rep.predicted.into(),
                rep.rel_gap.into(),
                rep.lambda_base.into(),
                rep.bracket.0.into(),
                rep.bracket.1.into(),
                rep.steps.into(),
                max_u.into(),
            ],
            vec![
                (CheckKey::CriticalRadius, rep.rel_gap <= self.cfg.checks.max_rel_gap),
                (CheckKey::PopulationBound, bound_ok),
            ],
        )])
    }

    fn ext(&self, intervals: &[(f64, f64)], s_high: f64, r_grid: &[f64], fraction: f64) -> Result<Vec<ResultRow>, Error> {
        let s = self.cfg.s;
        let rep = ext_crossing(intervals, s, s_high, r_grid, self.cfg.h, fraction, self.cfg.tolerances)?;
        let mut rows: Vec<ResultRow> = rep
            .rows
            .iter()
            .map(|r| {
                let mut cells: Vec<Cell> = vec![
                    "scan".into(),
                    r.r.into(),
                    s.into(),
                    s_high.into(),
                    r.lambda_low.into(),
                    r.lambda_high.into(),
                    (r.lambda_high - r.lambda_low).into(),
                ];
                cells.extend(std::iter::repeat(Cell::Empty).take(5));
                self.row(cells, Vec::new())
            })
            .collect();
        for case in [&rep.small, &rep.large] {
            let bound = case.sigma + case.tau;
            let mut checks = vec![(CheckKey::OrderCrossing, case.matches && rep.sign_changes == 1)];
            checks.extend(self.bound_check(&case.low, bound));
            checks.extend(self.bound_check(&case.high, bound));
            let scan = rep.rows.iter().find(|r| r.r == case.r).expect("case radius from the scan");
            rows.push(self.row(
                vec![
                    "case".into(),
                    case.r.into(),
                    s.into(),
                    s_high.into(),
                    scan.lambda_low.into(),
                    scan.lambda_high.into(),
                    (scan.lambda_high - scan.lambda_low).into(),
                    case.sigma.into(),
                    case.tau.into(),
                    class(case.low.classification),
                    class(case.high.classification),
                    rep.predicted_crossing.into(),
                ],
                checks,
            ));
        }
        Ok(rows)
    }

    fn congruence(&self, omega1: (f64, f64), omega2: (f64, f64)) -> Result<Vec<ResultRow>, Error> {
        let (s, h) = (self.cfg.s, self.cfg.h);
        let rep = congruence_experiment(omega1, omega2, s, h, self.cfg.tolerances)?;
        let gap_ok = rep.lambda_union < rep.lambda_single.0.min(rep.lambda_single.1);
        let lambdas = [rep.lambda_single.0, rep.lambda_single.1, rep.lambda_union];
        let names = ["omega1", "omega2", "union"];
        Ok((0..3)
            .map(|k| {
                let r = &rep.reports[k];
                let union = k == 2;
                let ok = if union {
                    r.is_nontrivial() && rep.union_positive_on_both && gap_ok
                } else {
                    !r.is_nontrivial()
                };
                let mut checks = vec![(CheckKey::Congruence, ok)];
                checks.extend(self.bound_check(r, rep.sigma));
                self.row(
                    vec![
                        names[k].into(),
                        s.into(),
                        h.into(),
                        lambdas[k].into(),
                        rep.sigma.into(),
                        class(r.classification),
                        (if union { "nontrivial" } else { "trivial" }).into(),
                        r.u.min().into(),
                        r.u.max().into(),
                        r.el_residual.into(),
                    ],
                    checks,
                )
            })
            .collect())
    }

    fn abundance(
        &self,
        intervals: &[(f64, f64)],
        big_r: f64,
        r: f64,
        m_start: f64,
        levels: usize,
    ) -> Result<Vec<ResultRow>, Error> {
        let c = &self.cfg.checks;
        let rep = abundance_sweep(intervals, big_r, r, self.cfg.s, self.cfg.h, m_start, levels, self.cfg.tolerances)?;
        Ok(rep
            .rows
            .iter()
            .map(|row| {
                let mut checks = vec![(CheckKey::Abundance, rep.variation <= c.max_variation && row.ratio > c.min_ratio)];
                checks.extend(self.bound_check(&row.report, row.bound_easy));
                self.row(
                    vec![
                        row.level.into(),
                        row.inf_on_ball.into(),
                        row.ratio.into(),
                        row.max_u.into(),
                        row.bound_easy.into(),
                        rep.m0.into(),
                        rep.variation.into(),
                    ],
                    checks,
                )
            })
            .collect())
    }

    fn beat(&self, intervals: &[(f64, f64)], sigma: &CoefSpec, m_grid: &[f64], control: bool) -> Result<Vec<ResultRow>, Error> {
        let mesh = mesh_of(intervals, self.cfg.h)?;
        let sigma0 = sample_function(&mesh, &sigma.to_coefficient())?;
        let mut profiles = vec![("given", sigma0.clone())];
        if control {
            profiles.push(("control", Field::constant(mesh.clone(), sigma0.max())));
        }
        let mut rows = Vec::new();
        for (name, field) in profiles {
            let rep = beat_experiment(&field, self.cfg.s, m_grid, self.cfg.tolerances)?;
            // a nonconstant resource is beaten somewhere; a constant one never is
            let expect_beat = name == "given";
            let ok = rep.first_m.is_some() == expect_beat;
            for row in &rep.rows {
                let bound = field.max() + row.m;
                let mut checks = vec![(CheckKey::ResourceBeating, ok)];
                checks.extend(self.bound_check(&row.report, bound));
                rows.push(self.row(
                    vec![
                        name.into(),
                        row.m.into(),
                        class(row.classification),
                        row.beat_nodes.len().into(),
                        row.max_excess.into(),
                        row.report.u.max().into(),
                        bound.into(),
                    ],
                    checks,
                ));
            }
        }
        Ok(rows)
    }

    fn periodic(
        &self,
        n: usize,
        image_cutoff: usize,
        sigma: &CoefSpec,
        mu: &CoefSpec,
        tau: f64,
        kernel: Option<KernelSpec>,
    ) -> Result<Vec<ResultRow>, Error> {
        let mesh: Arc<Mesh> = Arc::new(Mesh::Periodic(PeriodicGrid::new(n, image_cutoff)?));
        let sp = self.spec(mesh, &sigma.to_coefficient(), &mu.to_coefficient(), tau, kernel)?;
        let rep = solve(&sp)?;
        let balance = periodic_balance(&rep, &sp)?;
        // constant data admits the constant state (σ + τ)/μ
        let expected = match (sigma.as_constant(), mu.as_constant()) {
            (Some(sg), Some(m)) if sg + tau > 0.0 => Some((sg + tau) / m),
            _ => None,
        };
        let u = rep.u.values();
        let deviation = match expected {
            Some(c) => u.iter().fold(0.0f64, |d, v| d.max((v - c).abs())),
            None => rep.u.max() - rep.u.min(),
        };
        let mut checks = self.bound_check(&rep, (sp.sigma.max() + tau) / sp.mu.min());
        if expected.is_some() {
            checks.push((CheckKey::PeriodicConstant, deviation <= self.cfg.checks.max_deviation));
        }
        Ok(vec![self.row(
            vec![
                n.into(),
                self.cfg.s.into(),
                tau.into(),
                class(rep.classification),
                expected.into(),
                deviation.into(),
                rep.u.min().into(),
                rep.u.max().into(),
                balance.mean.into(),
                balance.source_integral.into(),
                rep.el_residual.into(),
            ],
            checks,
        )])
    }

    fn transmission(
        &self,
        omega1: &[(f64, f64)],
        omega2: &[(f64, f64)],
        (s1, s2): (f64, f64),
        nu: (f64, f64),
        resource: &Resource,
        mu: &CoefSpec,
    ) -> Result<Vec<ResultRow>, Error> {
        let mu_c = mu.to_coefficient();
        let base =
            TransmissionSpec::new(omega1, omega2, self.cfg.h, (self.cfg.s, s1, s2), nu, &1.0.into(), &mu_c)?;
        let lam = lambda_star(&base)?.lambda;
        let cases: Vec<(Option<f64>, CoefSpec)> = match resource {
            Resource::Factors(f) => f.iter().map(|&k| (Some(k), CoefSpec::Constant(k * lam))).collect(),
            Resource::Given(c) => vec![(c.as_constant().map(|v| v / lam), c.clone())],
        };
        cases
            .par_iter()
            .map(|(factor, sigma)| {
                let spec = base.with_sigma(&sigma.to_coefficient())?;
                let rep = minimize_t(&spec, self.cfg.tolerances)?;
                let verdict = mp_check(&rep.u, rep.triviality_tol);
                let bound = (spec.sigma.max()) / spec.mu.min();
                let mut checks = vec![];
                if rep.classification == Classification::Nontrivial {
                    checks.push((CheckKey::PopulationBound, rep.u.max() <= bound + self.cfg.checks.bound_slack));
                }
                let threshold_ok = match factor.filter(|&k| k != 1.0) {
                    Some(k) if k < 1.0 => verdict == MpVerdict::IdenticallyZero,
                    Some(_) => verdict == MpVerdict::PositiveEverywhere && rep.positive_local && rep.positive_nonlocal,
                    None => verdict != MpVerdict::Violation,
                };
                checks.push((CheckKey::TransmissionThreshold, threshold_ok));
                let verdict_name = match verdict {
                    MpVerdict::PositiveEverywhere => "positive",
                    MpVerdict::IdenticallyZero => "zero",
                    MpVerdict::Violation => "violation",
                };
                Ok(self.row(
                    vec![
                        (*factor).into(),
                        spec.sigma.max().into(),
                        lam.into(),
                        class(rep.classification),
                        verdict_name.into(),
                        rep.positive_local.into(),
                        rep.positive_nonlocal.into(),
                        rep.u.max().into(),
                        rep.energy.into(),
                        rep.el_residual.into(),
                    ],
                    checks,
                ))
            })
            .collect()
    }

    #[allow(clippy::too_many_arguments)]
    fn strategic(
        &self,
        eps: f64,
        r_schedule: &[f64],
        tau: f64,
        kernel: Option<KernelSpec>,
        sigma: &CoefSpec,
        mu: &CoefSpec,
        alpha: Option<f64>,
    ) -> Result<Vec<ResultRow>, Error> {
        let p = StrategicParams {
            s: self.cfg.s,
            eps,
            h: self.cfg.h,
            r_schedule: r_schedule.to_vec(),
            tau,
            kernel: kernel.map(|k| (k.shape(), k.radius)),
            alpha,
            tol: self.cfg.tolerances,
        };
        let res = build_strategic(&sigma.to_coefficient(), &mu.to_coefficient(), &p)?;
        let ok = res.conclusions_hold(eps, self.cfg.tolerances.solver_tol);
        Ok(vec![self.row(
            vec![
                p.s.into(),
                eps.into(),
                res.r_used.into(),
                res.approx_error.into(),
                res.harmonic_residual.into(),
                res.sigma_gap.into(),
                res.equation_residual.into(),
                res.fit_margin.into(),
                res.support_ok.into(),
                res.achieved.into(),
            ],
            vec![(CheckKey::StrategicPlan, ok)],
        )])
    }
}
