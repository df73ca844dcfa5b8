//! Strict JSON experiment configuration.
//!
//! Parsing runs in three passes: the raw JSON object is decoded with unknown
//! keys rejected, keys that the selected experiment does not use are
//! rejected, and every parameter is validated and defaulted into a
//! [`Plan`].

use std::fmt;
use std::path::PathBuf;

use nlogis_core::{Coefficient, KernelShape, Tolerances};
use serde::de::{self, Deserializer};
use serde::Deserialize;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Eigen,
    Solve,
    ThresholdRadius,
    ExtCrossing,
    Congruence,
    Abundance,
    Beat,
    Periodic,
    Transmission,
    Strategic,
}

impl Experiment {
    pub const ALL: [Experiment; 10] = [
        Experiment::Eigen,
        Experiment::Solve,
        Experiment::ThresholdRadius,
        Experiment::ExtCrossing,
        Experiment::Congruence,
        Experiment::Abundance,
        Experiment::Beat,
        Experiment::Periodic,
        Experiment::Transmission,
        Experiment::Strategic,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Eigen => "eigen",
            Experiment::Solve => "solve",
            Experiment::ThresholdRadius => "threshold-radius",
            Experiment::ExtCrossing => "ext-crossing",
            Experiment::Congruence => "congruence",
            Experiment::Abundance => "abundance",
            Experiment::Beat => "beat",
            Experiment::Periodic => "periodic",
            Experiment::Transmission => "transmission",
            Experiment::Strategic => "strategic",
        }
    }

    /// Experiment-specific keys accepted besides `experiment`, `out`,
    /// `tolerances` and `checks`.
    fn keys(self) -> &'static [&'static str] {
        match self {
            Experiment::Eigen => &["intervals", "h", "s", "dilations"],
            Experiment::Solve => &["intervals", "h", "s", "sigma", "sigma_factors", "mu", "tau", "kernel"],
            Experiment::ThresholdRadius => &["intervals", "h", "s", "bracket", "rel_tol"],
            Experiment::ExtCrossing => &["intervals", "h", "s", "s_high", "r_grid", "kernel_fraction"],
            Experiment::Congruence => &["omega1", "omega2", "h", "s"],
            Experiment::Abundance => {
                &["intervals", "h", "s", "resource_radius", "ball_radius", "m_start", "levels"]
            }
            Experiment::Beat => &["intervals", "h", "s", "sigma", "m_grid", "control"],
            Experiment::Periodic => &["n", "h", "image_cutoff", "s", "sigma", "mu", "tau", "kernel"],
            Experiment::Transmission => {
                &["omega1", "omega2", "h", "s", "s1", "s2", "nu", "sigma", "sigma_factors", "mu"]
            }
            Experiment::Strategic => &["h", "s", "eps", "r_schedule", "tau", "kernel", "sigma", "mu", "alpha"],
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("invalid JSON: {0}")]
    Syntax(String),
    #[error("{path}: {message}")]
    Key { path: String, message: String },
}

fn key_error(path: impl Into<String>, message: impl Into<String>) -> ConfigError {
    ConfigError::Key {
        path: path.into(),
        message: message.into(),
    }
}

/// Coefficient given as a number or as one of the named profiles.
#[derive(Debug, Clone, PartialEq)]
pub enum CoefSpec {
    Constant(f64),
    Profile(Profile),
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Profile {
    /// `Σ c_k x^k`.
    Polynomial(Vec<f64>),
    /// `mean + amplitude · cos(2π · frequency · x)`.
    Cosine { mean: f64, amplitude: f64, frequency: f64 },
    /// `level` on `(−radius, radius)`, zero elsewhere.
    Step { level: f64, radius: f64 },
    /// `level` with a cosine dip to zero at `center` of half-width `width`.
    Dip { level: f64, center: f64, width: f64 },
    /// Nodal values.
    Table(Vec<f64>),
}

impl<'de> Deserialize<'de> for CoefSpec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = serde_json::Value::deserialize(d)?;
        if let Some(c) = v.as_f64() {
            return Ok(CoefSpec::Constant(c));
        }
        Profile::deserialize(v)
            .map(CoefSpec::Profile)
            .map_err(|e| de::Error::custom(format!("expected a number or a profile object ({e})")))
    }
}

impl CoefSpec {
    pub fn to_coefficient(&self) -> Coefficient {
        match self.clone() {
            CoefSpec::Constant(c) => c.into(),
            CoefSpec::Profile(Profile::Table(t)) => Coefficient::Table(t),
            CoefSpec::Profile(p) => Coefficient::function(move |x| p.eval(x)),
        }
    }

    pub fn as_constant(&self) -> Option<f64> {
        match self {
            CoefSpec::Constant(c) => Some(*c),
            _ => None,
        }
    }

    fn check(&self, path: &str) -> Result<(), ConfigError> {
        let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
        let ok = match self {
            CoefSpec::Constant(c) => c.is_finite(),
            CoefSpec::Profile(Profile::Polynomial(c)) => !c.is_empty() && finite(c),
            CoefSpec::Profile(Profile::Table(t)) => !t.is_empty() && finite(t),
            CoefSpec::Profile(Profile::Cosine { mean, amplitude, frequency }) => {
                finite(&[*mean, *amplitude, *frequency])
            }
            CoefSpec::Profile(Profile::Step { level, radius }) => finite(&[*level]) && *radius > 0.0,
            CoefSpec::Profile(Profile::Dip { level, center, width }) => finite(&[*level, *center]) && *width > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(key_error(path, "coefficient values must be finite (lists nonempty, radii and widths > 0)"))
        }
    }
}

impl Profile {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Profile::Polynomial(c) => c.iter().rev().fold(0.0, |acc, &ck| acc * x + ck),
            Profile::Cosine { mean, amplitude, frequency } => {
                mean + amplitude * (2.0 * std::f64::consts::PI * frequency * x).cos()
            }
            Profile::Step { level, radius } => {
                if x.abs() < *radius {
                    *level
                } else {
                    0.0
                }
            }
            Profile::Dip { level, center, width } => {
                let d = (x - center).abs();
                if d < *width {
                    level * 0.5 * (1.0 - (std::f64::consts::PI * d / width).cos())
                } else {
                    *level
                }
            }
            Profile::Table(_) => f64::NAN,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelKind {
    Uniform,
    Triangular,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSpec {
    pub shape: KernelKind,
    pub radius: f64,
}

impl KernelSpec {
    pub fn shape(&self) -> KernelShape {
        match self.shape {
            KernelKind::Uniform => KernelShape::Uniform,
            KernelKind::Triangular => KernelShape::Triangular,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTolerances {
    solver_tol: Option<f64>,
    triviality_tol: Option<f64>,
}

/// Thresholds of the pass/fail checks.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Checks {
    /// Relative error of the eigenvalue scaling law.
    pub max_rel_error: f64,
    /// Relative gap between the critical radius and its prediction.
    pub max_rel_gap: f64,
    /// Sup distance to the predicted constant periodic state.
    pub max_deviation: f64,
    /// Relative spread of `inf u / M` across resource levels.
    pub max_variation: f64,
    /// Lower bound on `inf u / M`.
    pub min_ratio: f64,
    /// Allowed excess of `max u` over the population bound.
    pub bound_slack: f64,
}

impl Default for Checks {
    fn default() -> Self {
        Self {
            max_rel_error: 1e-2,
            max_rel_gap: 5e-2,
            max_deviation: 1e-8,
            max_variation: 0.25,
            min_ratio: 0.1,
            bound_slack: 1e-9,
        }
    }
}

type Interval = [f64; 2];

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    experiment: Option<Experiment>,
    out: Option<PathBuf>,
    tolerances: Option<RawTolerances>,
    checks: Option<Checks>,
    intervals: Option<Vec<Interval>>,
    h: Option<f64>,
    s: Option<f64>,
    s_high: Option<f64>,
    s1: Option<f64>,
    s2: Option<f64>,
    sigma: Option<CoefSpec>,
    mu: Option<CoefSpec>,
    tau: Option<f64>,
    kernel: Option<KernelSpec>,
    dilations: Option<Vec<f64>>,
    sigma_factors: Option<Vec<f64>>,
    bracket: Option<[f64; 2]>,
    rel_tol: Option<f64>,
    r_grid: Option<Vec<f64>>,
    kernel_fraction: Option<f64>,
    omega1: Option<Vec<Interval>>,
    omega2: Option<Vec<Interval>>,
    resource_radius: Option<f64>,
    ball_radius: Option<f64>,
    m_start: Option<f64>,
    levels: Option<usize>,
    m_grid: Option<Vec<f64>>,
    control: Option<bool>,
    n: Option<usize>,
    image_cutoff: Option<usize>,
    nu: Option<[f64; 2]>,
    eps: Option<f64>,
    r_schedule: Option<Vec<f64>>,
    alpha: Option<f64>,
}

/// Quick overrides from the command line.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Overrides {
    pub h: Option<f64>,
    pub s: Option<f64>,
}

/// How the resource of a threshold experiment is chosen.
#[derive(Debug, Clone, PartialEq)]
pub enum Resource {
    /// Given coefficient, one run.
    Given(CoefSpec),
    /// Constant multiples of the principal eigenvalue, one run each.
    Factors(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Plan {
    Eigen {
        intervals: Vec<(f64, f64)>,
        dilations: Vec<f64>,
    },
    Solve {
        intervals: Vec<(f64, f64)>,
        resource: Resource,
        mu: CoefSpec,
        tau: f64,
        kernel: Option<KernelSpec>,
    },
    ThresholdRadius {
        intervals: Vec<(f64, f64)>,
        bracket: (f64, f64),
        rel_tol: f64,
    },
    ExtCrossing {
        intervals: Vec<(f64, f64)>,
        s_high: f64,
        r_grid: Vec<f64>,
        kernel_fraction: f64,
    },
    Congruence {
        omega1: (f64, f64),
        omega2: (f64, f64),
    },
    Abundance {
        intervals: Vec<(f64, f64)>,
        resource_radius: f64,
        ball_radius: f64,
        m_start: f64,
        levels: usize,
    },
    Beat {
        intervals: Vec<(f64, f64)>,
        sigma: CoefSpec,
        m_grid: Vec<f64>,
        control: bool,
    },
    Periodic {
        n: usize,
        image_cutoff: usize,
        sigma: CoefSpec,
        mu: CoefSpec,
        tau: f64,
        kernel: Option<KernelSpec>,
    },
    Transmission {
        omega1: Vec<(f64, f64)>,
        omega2: Vec<(f64, f64)>,
        s1: f64,
        s2: f64,
        nu: (f64, f64),
        resource: Resource,
        mu: CoefSpec,
    },
    Strategic {
        eps: f64,
        r_schedule: Vec<f64>,
        tau: f64,
        kernel: Option<KernelSpec>,
        sigma: CoefSpec,
        mu: CoefSpec,
        alpha: Option<f64>,
    },
}

/// Validated configuration with every default filled in.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub out: Option<PathBuf>,
    /// Grid spacing (base spacing for dilation sweeps, `1/n` when periodic).
    pub h: f64,
    pub s: f64,
    pub tolerances: Tolerances,
    pub checks: Checks,
    pub plan: Plan,
}

pub const DEFAULT_H: f64 = 1.0 / 512.0;

/// Parses a JSON config. `selected` is the experiment chosen on the command
/// line; it must agree with the `experiment` key when both are present.
pub fn parse_config(text: &str, selected: Option<Experiment>) -> Result<ExperimentConfig, ConfigError> {
    parse_with_overrides(text, selected, Overrides::default())
}

/// [`parse_config`] with command-line overrides applied before validation.
pub fn parse_with_overrides(
    text: &str,
    selected: Option<Experiment>,
    overrides: Overrides,
) -> Result<ExperimentConfig, ConfigError> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| ConfigError::Syntax(e.to_string()))?;
    let keys: Vec<String> = value
        .as_object()
        .ok_or_else(|| key_error("(root)", "a JSON object is required"))?
        .keys()
        .cloned()
        .collect();
    let raw: RawConfig = serde_path_to_error::deserialize(value)
        .map_err(|e| key_error(e.path().to_string(), e.inner().to_string()))?;
    let experiment = match (raw.experiment, selected) {
        (Some(a), Some(b)) if a != b => {
            return Err(key_error("experiment", format!("config is for `{a}` but `{b}` was requested")))
        }
        (Some(a), _) | (None, Some(a)) => a,
        (None, None) => return Err(key_error("experiment", "missing experiment name")),
    };
    for key in &keys {
        let common = ["experiment", "out", "tolerances", "checks"].contains(&key.as_str());
        if !common && !experiment.keys().contains(&key.as_str()) {
            return Err(key_error(key.as_str(), format!("not used by experiment `{experiment}`")));
        }
    }
    resolve(experiment, raw, overrides)
}

/// Configuration of `experiment` with every parameter at its default.
pub fn default_config(experiment: Experiment, overrides: Overrides) -> Result<ExperimentConfig, ConfigError> {
    resolve(experiment, RawConfig::default(), overrides)
}

fn positive(path: &str, v: f64) -> Result<f64, ConfigError> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(key_error(path, format!("must be > 0, got {v}")))
    }
}

fn exponent(path: &str, v: f64, allow_one: bool) -> Result<f64, ConfigError> {
    let ok = v > 0.0 && (v < 1.0 || (allow_one && v == 1.0));
    if ok {
        Ok(v)
    } else {
        let range = if allow_one { "(0, 1]" } else { "(0, 1)" };
        Err(key_error(path, format!("must lie in {range}, got {v}")))
    }
}

fn nonneg_tau(v: f64) -> Result<f64, ConfigError> {
    if v >= 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(key_error("tau", format!("must satisfy tau >= 0 (tau is a nonnegative constant), got {v}")))
    }
}

fn intervals(path: &str, list: Vec<Interval>) -> Result<Vec<(f64, f64)>, ConfigError> {
    if list.is_empty() {
        return Err(key_error(path, "at least one interval is required"));
    }
    let mut out: Vec<(f64, f64)> = list.into_iter().map(|[a, b]| (a, b)).collect();
    for (i, &(a, b)) in out.iter().enumerate() {
        if !(a.is_finite() && b.is_finite() && a < b) {
            return Err(key_error(format!("{path}[{i}]"), format!("need a < b, got [{a}, {b}]")));
        }
    }
    out.sort_by(|x, y| x.0.total_cmp(&y.0));
    if out.windows(2).any(|w| w[0].1 >= w[1].0) {
        return Err(key_error(path, "intervals must be pairwise disjoint and separated"));
    }
    Ok(out)
}

fn single(path: &str, list: Vec<Interval>) -> Result<(f64, f64), ConfigError> {
    let iv = intervals(path, list)?;
    if iv.len() != 1 {
        return Err(key_error(path, "exactly one interval is required"));
    }
    Ok(iv[0])
}

fn positive_list(path: &str, v: Vec<f64>) -> Result<Vec<f64>, ConfigError> {
    if v.is_empty() {
        return Err(key_error(path, "must not be empty"));
    }
    for (i, &x) in v.iter().enumerate() {
        positive(&format!("{path}[{i}]"), x)?;
    }
    Ok(v)
}

fn kernel_for(tau: f64, kernel: Option<KernelSpec>, default_radius: f64) -> Result<Option<KernelSpec>, ConfigError> {
    let k = match kernel {
        Some(k) => {
            positive("kernel.radius", k.radius)?;
            Some(k)
        }
        None if tau > 0.0 => Some(KernelSpec {
            shape: KernelKind::Uniform,
            radius: default_radius,
        }),
        None => None,
    };
    Ok(k)
}

fn resource(sigma: Option<CoefSpec>, factors: Option<Vec<f64>>) -> Result<Resource, ConfigError> {
    match (sigma, factors) {
        (Some(_), Some(_)) => Err(key_error("sigma_factors", "give either `sigma` or `sigma_factors`, not both")),
        (Some(c), None) => {
            c.check("sigma")?;
            Ok(Resource::Given(c))
        }
        (None, f) => Ok(Resource::Factors(positive_list("sigma_factors", f.unwrap_or_else(|| vec![0.8, 1.2]))?)),
    }
}

fn coef(path: &str, c: Option<CoefSpec>, default: f64) -> Result<CoefSpec, ConfigError> {
    let c = c.unwrap_or(CoefSpec::Constant(default));
    c.check(path)?;
    Ok(c)
}

fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| lo * (hi / lo).powf(k as f64 / (n - 1) as f64)).collect()
}

fn resolve(experiment: Experiment, raw: RawConfig, ov: Overrides) -> Result<ExperimentConfig, ConfigError> {
    let tol = raw.tolerances.unwrap_or_default();
    let tolerances = Tolerances {
        solver_tol: positive("tolerances.solver_tol", tol.solver_tol.unwrap_or(1e-10))?,
        triviality_tol: tol
            .triviality_tol
            .map(|t| positive("tolerances.triviality_tol", t))
            .transpose()?,
    };
    let checks = raw.checks.unwrap_or_default();
    for (k, v) in [
        ("checks.max_rel_error", checks.max_rel_error),
        ("checks.max_rel_gap", checks.max_rel_gap),
        ("checks.max_deviation", checks.max_deviation),
        ("checks.max_variation", checks.max_variation),
    ] {
        positive(k, v)?;
    }
    if !(checks.bound_slack >= 0.0 && checks.min_ratio.is_finite()) {
        return Err(key_error("checks", "bound_slack must be >= 0 and min_ratio finite"));
    }
    let default_h = match experiment {
        Experiment::Congruence => 1.0 / 256.0,
        Experiment::Abundance | Experiment::Beat | Experiment::Transmission => 1.0 / 128.0,
        Experiment::Strategic => 1.0 / 32.0,
        Experiment::Periodic => 1.0 / raw.n.unwrap_or(128) as f64,
        _ => DEFAULT_H,
    };
    if experiment == Experiment::Periodic && raw.n.is_some() && (raw.h.is_some() || ov.h.is_some()) {
        return Err(key_error("h", "give either `n` or `h` for a periodic grid, not both"));
    }
    let h = positive("h", ov.h.or(raw.h).unwrap_or(default_h))?;
    let default_s = match experiment {
        Experiment::ExtCrossing => 0.25,
        _ => 0.5,
    };
    let s_raw = ov.s.or(raw.s).unwrap_or(default_s);
    let s = match experiment {
        Experiment::Transmission | Experiment::Strategic => exponent("s", s_raw, false)?,
        _ => exponent("s", s_raw, true)?,
    };
    let iv = |default: &[(f64, f64)]| -> Result<Vec<(f64, f64)>, ConfigError> {
        match raw.intervals.clone() {
            Some(l) => intervals("intervals", l),
            None => Ok(default.to_vec()),
        }
    };
    let plan = match experiment {
        Experiment::Eigen => Plan::Eigen {
            intervals: iv(&[(0.0, 1.0)])?,
            dilations: positive_list("dilations", raw.dilations.unwrap_or_else(|| vec![2.0, 3.0]))?,
        },
        Experiment::Solve => {
            let tau = nonneg_tau(raw.tau.unwrap_or(0.0))?;
            Plan::Solve {
                intervals: iv(&[(0.0, 1.0)])?,
                resource: resource(raw.sigma, raw.sigma_factors)?,
                mu: coef("mu", raw.mu, 1.0)?,
                tau,
                kernel: kernel_for(tau, raw.kernel, 0.1)?,
            }
        }
        Experiment::ThresholdRadius => {
            let [lo, hi] = raw.bracket.unwrap_or([0.5, 20.0]);
            if !(0.0 < lo && lo < hi && hi.is_finite()) {
                return Err(key_error("bracket", format!("need 0 < lo < hi, got [{lo}, {hi}]")));
            }
            Plan::ThresholdRadius {
                intervals: iv(&[(0.0, 1.0)])?,
                bracket: (lo, hi),
                rel_tol: positive("rel_tol", raw.rel_tol.unwrap_or(1e-3))?,
            }
        }
        Experiment::ExtCrossing => {
            let s_high = exponent("s_high", raw.s_high.unwrap_or(1.0), true)?;
            if s_high <= s {
                return Err(key_error("s_high", format!("must exceed s = {s}, got {s_high}")));
            }
            let mut r_grid = positive_list("r_grid", raw.r_grid.unwrap_or_else(|| log_grid(0.05, 20.0, 25)))?;
            r_grid.sort_by(f64::total_cmp);
            Plan::ExtCrossing {
                intervals: iv(&[(0.0, 1.0)])?,
                s_high,
                r_grid,
                kernel_fraction: positive("kernel_fraction", raw.kernel_fraction.unwrap_or(0.1))?,
            }
        }
        Experiment::Congruence => {
            let omega1 = single("omega1", raw.omega1.unwrap_or_else(|| vec![[0.0, 1.0]]))?;
            let omega2 = single("omega2", raw.omega2.unwrap_or_else(|| vec![[2.0, 3.0]]))?;
            let (l1, l2) = (omega1.1 - omega1.0, omega2.1 - omega2.0);
            if (l1 - l2).abs() > 1e-12 * l1.max(l2) {
                return Err(key_error("omega2", "must be congruent to omega1 (same length)"));
            }
            if omega1.1.min(omega2.1) >= omega1.0.max(omega2.0) {
                return Err(key_error("omega2", "must be disjoint from omega1"));
            }
            Plan::Congruence { omega1, omega2 }
        }
        Experiment::Abundance => {
            let intervals = iv(&[(-2.0, 2.0)])?;
            let resource_radius = positive("resource_radius", raw.resource_radius.unwrap_or(1.0))?;
            let ball_radius = positive("ball_radius", raw.ball_radius.unwrap_or(0.5))?;
            if ball_radius >= resource_radius {
                return Err(key_error("ball_radius", "must be smaller than resource_radius"));
            }
            let levels = raw.levels.unwrap_or(3);
            if levels == 0 {
                return Err(key_error("levels", "must be at least 1"));
            }
            Plan::Abundance {
                intervals,
                resource_radius,
                ball_radius,
                m_start: positive("m_start", raw.m_start.unwrap_or(1.0))?,
                levels,
            }
        }
        Experiment::Beat => {
            let sigma = raw.sigma.unwrap_or(CoefSpec::Profile(Profile::Dip {
                level: 20.0,
                center: 1.5,
                width: 0.4,
            }));
            sigma.check("sigma")?;
            let mut m_grid = positive_list("m_grid", raw.m_grid.unwrap_or_else(|| vec![0.01, 0.03, 0.1, 0.3, 1.0]))?;
            m_grid.sort_by(f64::total_cmp);
            Plan::Beat {
                intervals: iv(&[(-2.0, 2.0)])?,
                sigma,
                m_grid,
                control: raw.control.unwrap_or(true),
            }
        }
        Experiment::Periodic => {
            let n = (1.0 / h).round();
            if (n * h - 1.0).abs() > 1e-9 || n < 4.0 {
                return Err(key_error("h", format!("periodic grids need h = 1/n with n >= 4, got {h}")));
            }
            let tau = nonneg_tau(raw.tau.unwrap_or(0.5))?;
            Plan::Periodic {
                n: n as usize,
                image_cutoff: raw.image_cutoff.unwrap_or(8),
                sigma: coef("sigma", raw.sigma, 2.0)?,
                mu: coef("mu", raw.mu, 1.0)?,
                tau,
                kernel: kernel_for(tau, raw.kernel, 0.1)?,
            }
        }
        Experiment::Transmission => {
            let omega1 = intervals("omega1", raw.omega1.unwrap_or_else(|| vec![[0.0, 1.0]]))?;
            let omega2 = intervals("omega2", raw.omega2.unwrap_or_else(|| vec![[1.5, 2.5]]))?;
            let [nu1, nu2] = raw.nu.unwrap_or([1.0, 1.0]);
            for (k, v) in [("nu[0]", nu1), ("nu[1]", nu2)] {
                if !(v >= 0.0 && v.is_finite()) {
                    return Err(key_error(k, format!("must be >= 0, got {v}")));
                }
            }
            Plan::Transmission {
                omega1,
                omega2,
                s1: exponent("s1", raw.s1.unwrap_or(0.4), false)?,
                s2: exponent("s2", raw.s2.unwrap_or(0.6), false)?,
                nu: (nu1, nu2),
                resource: resource(raw.sigma, raw.sigma_factors)?,
                mu: coef("mu", raw.mu, 1.0)?,
            }
        }
        Experiment::Strategic => {
            let tau = nonneg_tau(raw.tau.unwrap_or(0.0))?;
            let sigma = raw
                .sigma
                .unwrap_or(CoefSpec::Profile(Profile::Polynomial(vec![1.0, 0.0, 0.125])));
            sigma.check("sigma")?;
            let mu = coef("mu", raw.mu, 1.0)?;
            for (k, c) in [("sigma", &sigma), ("mu", &mu)] {
                if matches!(c, CoefSpec::Profile(Profile::Table(_))) {
                    return Err(key_error(k, "tabulated coefficients are not supported here"));
                }
            }
            let mut r_schedule = positive_list(
                "r_schedule",
                raw.r_schedule.unwrap_or_else(|| vec![3.0, 4.0, 6.0, 8.0, 12.0, 16.0]),
            )?;
            r_schedule.sort_by(f64::total_cmp);
            if r_schedule[0] <= 2.0 {
                return Err(key_error("r_schedule", "radii must exceed 2"));
            }
            Plan::Strategic {
                eps: positive("eps", raw.eps.unwrap_or(0.1))?,
                r_schedule,
                tau,
                kernel: kernel_for(tau, raw.kernel, 0.5)?,
                sigma,
                mu,
                alpha: raw.alpha.map(|a| positive("alpha", a)).transpose()?,
            }
        }
    };
    Ok(ExperimentConfig {
        experiment,
        out: raw.out,
        h,
        s,
        tolerances,
        checks,
        plan,
    })
}
