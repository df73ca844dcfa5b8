//! Grids, fields, convolution kernels and problem data.
//!
//! Everything here is one-dimensional. A [`Grid`] is a union of disjoint
//! intervals sharing one spacing; unknowns live at the interior nodes and
//! every [`Field`] is implicitly extended by zero outside the intervals.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

const COMMENSURATE_RTOL: f64 = 1e-12;

/// Union of disjoint intervals discretized with a common spacing.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    intervals: Vec<(f64, f64)>,
    h: f64,
    nodes: Vec<f64>,
    interval_id: Vec<usize>,
    // first node index of each interval, plus a trailing sentinel
    offsets: Vec<usize>,
}

impl Grid {
    pub fn dimension(&self) -> usize {
        1
    }

    pub fn intervals(&self) -> &[(f64, f64)] {
        &self.intervals
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn interval_id(&self) -> &[usize] {
        &self.interval_id
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Node index range belonging to interval `k`.
    pub fn interval_nodes(&self, k: usize) -> std::ops::Range<usize> {
        self.offsets[k]..self.offsets[k + 1]
    }

    /// Whether `x` lies in the open interior of some interval.
    pub fn contains(&self, x: f64) -> bool {
        self.locate(x).is_some()
    }

    fn locate(&self, x: f64) -> Option<usize> {
        self.intervals.iter().position(|&(a, b)| x > a && x < b)
    }
}

/// Uniform grid on the periodic cell `(-1/2, 1/2]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicGrid {
    n: usize,
    h: f64,
    image_cutoff: usize,
}

impl PeriodicGrid {
    pub const DEFAULT_IMAGE_CUTOFF: usize = 4;

    pub fn new(n: usize, image_cutoff: usize) -> Result<Self> {
        if n < 4 {
            return Err(Error::InvalidGrid(format!(
                "periodic grid needs at least 4 nodes, got {n}"
            )));
        }
        if image_cutoff == 0 {
            return Err(Error::InvalidGrid("image cutoff must be at least 1".into()));
        }
        Ok(Self {
            n,
            h: 1.0 / n as f64,
            image_cutoff,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn image_cutoff(&self) -> usize {
        self.image_cutoff
    }

    pub fn node(&self, i: usize) -> f64 {
        -0.5 + (i + 1) as f64 * self.h
    }
}

/// Either kind of computational domain.
#[derive(Debug, Clone, PartialEq)]
pub enum Mesh {
    Bounded(Grid),
    Periodic(PeriodicGrid),
}

impl Mesh {
    pub fn h(&self) -> f64 {
        match self {
            Mesh::Bounded(g) => g.h,
            Mesh::Periodic(p) => p.h,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Mesh::Bounded(g) => g.len(),
            Mesh::Periodic(p) => p.n,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn node(&self, i: usize) -> f64 {
        match self {
            Mesh::Bounded(g) => g.nodes[i],
            Mesh::Periodic(p) => p.node(i),
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.node(i)).collect()
    }

    pub fn as_grid(&self) -> Option<&Grid> {
        match self {
            Mesh::Bounded(g) => Some(g),
            Mesh::Periodic(_) => None,
        }
    }

    pub fn as_periodic(&self) -> Option<&PeriodicGrid> {
        match self {
            Mesh::Periodic(p) => Some(p),
            Mesh::Bounded(_) => None,
        }
    }

    pub fn is_periodic(&self) -> bool {
        matches!(self, Mesh::Periodic(_))
    }
}

impl From<Grid> for Mesh {
    fn from(g: Grid) -> Self {
        Mesh::Bounded(g)
    }
}

impl From<PeriodicGrid> for Mesh {
    fn from(p: PeriodicGrid) -> Self {
        Mesh::Periodic(p)
    }
}

pub(crate) fn same_mesh(a: &Arc<Mesh>, b: &Arc<Mesh>) -> bool {
    Arc::ptr_eq(a, b) || **a == **b
}

pub(crate) fn ensure_same_mesh(a: &Arc<Mesh>, b: &Arc<Mesh>) -> Result<()> {
    if same_mesh(a, b) {
        Ok(())
    } else {
        Err(Error::GridMismatch(
            "operands are defined on different grids".into(),
        ))
    }
}

/// Builds a grid from disjoint intervals whose lengths are multiples of `h`.
pub fn build_grid(intervals: &[(f64, f64)], h: f64) -> Result<Grid> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidGrid(format!("spacing must be positive, got {h}")));
    }
    if intervals.is_empty() {
        return Err(Error::InvalidGrid("at least one interval is required".into()));
    }
    let mut sorted = intervals.to_vec();
    for &(a, b) in &sorted {
        if !(a.is_finite() && b.is_finite() && a < b) {
            return Err(Error::InvalidGrid(format!("malformed interval ({a}, {b})")));
        }
    }
    sorted.sort_by(|x, y| x.0.total_cmp(&y.0));
    for w in sorted.windows(2) {
        if w[1].0 <= w[0].1 {
            return Err(Error::InvalidGrid(format!(
                "intervals ({}, {}) and ({}, {}) overlap or touch",
                w[0].0, w[0].1, w[1].0, w[1].1
            )));
        }
    }

    let mut nodes = Vec::new();
    let mut interval_id = Vec::new();
    let mut offsets = vec![0];
    for (k, &(a, b)) in sorted.iter().enumerate() {
        let ratio = (b - a) / h;
        let cells = ratio.round();
        if (ratio - cells).abs() > COMMENSURATE_RTOL * ratio.max(1.0) || cells < 2.0 {
            return Err(Error::InvalidGrid(format!(
                "interval ({a}, {b}) is not a multiple of h = {h} with at least one interior node"
            )));
        }
        for j in 1..cells as usize {
            nodes.push(a + j as f64 * h);
            interval_id.push(k);
        }
        offsets.push(nodes.len());
    }
    Ok(Grid {
        intervals: sorted,
        h,
        nodes,
        interval_id,
        offsets,
    })
}

/// Nodal values of a function vanishing outside the mesh's intervals.
#[derive(Debug, Clone)]
pub struct Field {
    mesh: Arc<Mesh>,
    values: Vec<f64>,
}

impl PartialEq for Field {
    fn eq(&self, other: &Self) -> bool {
        same_mesh(&self.mesh, &other.mesh) && self.values == other.values
    }
}

impl Field {
    pub fn new(mesh: Arc<Mesh>, values: Vec<f64>) -> Result<Self> {
        if values.len() != mesh.len() {
            return Err(Error::DimensionMismatch {
                expected: mesh.len(),
                got: values.len(),
            });
        }
        Ok(Self { mesh, values })
    }

    pub fn zeros(mesh: Arc<Mesh>) -> Self {
        let n = mesh.len();
        Self {
            mesh,
            values: vec![0.0; n],
        }
    }

    pub fn constant(mesh: Arc<Mesh>, c: f64) -> Self {
        let n = mesh.len();
        Self {
            mesh,
            values: vec![c; n],
        }
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Same mesh, new values.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        Field::new(self.mesh.clone(), values)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            mesh: self.mesh.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn abs(&self) -> Self {
        self.map(f64::abs)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Piecewise-linear evaluation; exactly zero outside the domain.
    pub fn eval(&self, x: f64) -> f64 {
        match &*self.mesh {
            Mesh::Bounded(g) => {
                let Some(k) = g.locate(x) else {
                    return 0.0;
                };
                let (a, b) = g.intervals[k];
                let range = g.interval_nodes(k);
                let vals = &self.values[range];
                let cells = vals.len() + 1;
                let t = (x - a) / g.h;
                let j = (t.floor() as usize).min(cells - 1);
                let left = if j == 0 { 0.0 } else { vals[j - 1] };
                let right = if j + 1 >= cells { 0.0 } else { vals[j] };
                let frac = t - j as f64;
                let v = left + frac * (right - left);
                // guard against rounding right at the closure
                if x <= a || x >= b {
                    0.0
                } else {
                    v
                }
            }
            Mesh::Periodic(p) => {
                let n = p.n;
                // node i sits at -1/2 + (i+1) h
                let t = ((x + 0.5) / p.h - 1.0).rem_euclid(n as f64);
                let j = (t.floor() as usize) % n;
                let frac = t - t.floor();
                let left = self.values[j];
                let right = self.values[(j + 1) % n];
                left + frac * (right - left)
            }
        }
    }
}

/// Shape of a convolution kernel before discretization.
#[derive(Debug, Clone, PartialEq)]
pub enum KernelShape {
    /// Indicator of `[-ρ, ρ]`.
    Uniform,
    /// `(1 - |x|/ρ)_+`.
    Triangular,
    /// Equally spaced samples over `[-ρ, ρ]`, linearly interpolated.
    Sampled(Vec<f64>),
}

/// Even, nonnegative, unit-mass convolution kernel sampled on a lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    shape: KernelShape,
    radius: f64,
    h: f64,
    // weights at offsets -K..=K
    weights: Vec<f64>,
}

impl Kernel {
    pub fn shape(&self) -> &KernelShape {
        &self.shape
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    /// Largest lattice offset `K` carrying weight.
    pub fn reach(&self) -> usize {
        (self.weights.len() - 1) / 2
    }

    /// Weights `J(k h)` for `k = -K..=K`.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `J(k h)`, zero beyond the reach.
    pub fn weight(&self, k: i64) -> f64 {
        let reach = self.reach() as i64;
        if k.abs() > reach {
            0.0
        } else {
            self.weights[(k + reach) as usize]
        }
    }

    /// `h Σ_k J(k h)`; one up to rounding.
    pub fn discrete_mass(&self) -> f64 {
        self.h * self.weights.iter().sum::<f64>()
    }
}

/// Samples `shape` on the lattice `h Z` and renormalizes to unit discrete mass.
pub fn build_kernel(shape: KernelShape, rho: f64, h: f64) -> Result<Kernel> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidKernel(format!("spacing must be positive, got {h}")));
    }
    if !(rho.is_finite() && rho >= h) {
        return Err(Error::InvalidKernel(format!(
            "radius {rho} is not resolved by spacing {h}"
        )));
    }
    if let KernelShape::Sampled(samples) = &shape {
        if samples.len() < 2 {
            return Err(Error::InvalidKernel("need at least two samples".into()));
        }
        let n = samples.len();
        if samples.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidKernel("samples must be finite and nonnegative".into()));
        }
        if (0..n).any(|i| samples[i] != samples[n - 1 - i]) {
            return Err(Error::InvalidKernel("samples are not symmetric".into()));
        }
    }
    let reach = (rho / h + 1e-9).floor() as usize;
    let profile = |x: f64| -> f64 {
        let r = x.abs() / rho;
        match &shape {
            KernelShape::Uniform => {
                if r <= 1.0 + 1e-12 {
                    1.0
                } else {
                    0.0
                }
            }
            KernelShape::Triangular => (1.0 - r).max(0.0),
            KernelShape::Sampled(samples) => {
                if r > 1.0 {
                    return 0.0;
                }
                let n = samples.len();
                // sample i sits at -ρ + 2ρ i/(n-1)
                let t = (x / rho + 1.0) * 0.5 * (n - 1) as f64;
                let t = t.clamp(0.0, (n - 1) as f64);
                let j = (t.floor() as usize).min(n - 2);
                let frac = t - j as f64;
                samples[j] + frac * (samples[j + 1] - samples[j])
            }
        }
    };
    // sample k >= 0 and mirror, so evenness is exact
    let mut half: Vec<f64> = (0..=reach).map(|k| profile(k as f64 * h)).collect();
    let mass = h * (half[0] + 2.0 * half[1..].iter().sum::<f64>());
    if !(mass > 0.0) {
        return Err(Error::InvalidKernel("kernel has zero discrete mass".into()));
    }
    for w in &mut half {
        *w /= mass;
    }
    let mut weights = Vec::with_capacity(2 * reach + 1);
    weights.extend(half[1..].iter().rev());
    weights.extend(half.iter());
    Ok(Kernel {
        shape,
        radius: rho,
        h,
        weights,
    })
}

/// Description of a coefficient to be sampled at the nodes.
#[derive(Clone)]
pub enum Coefficient {
    Constant(f64),
    Function(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
    Table(Vec<f64>),
}

impl Coefficient {
    pub fn function(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Coefficient::Function(Arc::new(f))
    }
}

impl fmt::Debug for Coefficient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Coefficient::Constant(c) => f.debug_tuple("Constant").field(c).finish(),
            Coefficient::Function(_) => f.write_str("Function(..)"),
            Coefficient::Table(t) => f.debug_tuple("Table").field(&t.len()).finish(),
        }
    }
}

impl From<f64> for Coefficient {
    fn from(c: f64) -> Self {
        Coefficient::Constant(c)
    }
}

/// Evaluates `coef` at every node of `mesh`.
pub fn sample_function(mesh: &Arc<Mesh>, coef: &Coefficient) -> Result<Field> {
    let values = match coef {
        Coefficient::Constant(c) => vec![*c; mesh.len()],
        Coefficient::Function(f) => (0..mesh.len()).map(|i| f(mesh.node(i))).collect(),
        Coefficient::Table(t) => {
            if t.len() != mesh.len() {
                return Err(Error::DimensionMismatch {
                    expected: mesh.len(),
                    got: t.len(),
                });
            }
            t.clone()
        }
    };
    Field::new(mesh.clone(), values)
}

/// `h Σ a_i b_i`.
pub fn l2_inner(a: &Field, b: &Field) -> Result<f64> {
    ensure_same_mesh(&a.mesh, &b.mesh)?;
    Ok(a.mesh.h() * dot(&a.values, &b.values))
}

/// `sqrt(h Σ u_i²)`.
pub fn l2_norm(u: &Field) -> f64 {
    (u.mesh.h() * dot(&u.values, &u.values)).sqrt()
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Solver tolerances shared by every minimization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub solver_tol: f64,
    /// `None` selects `1e-6 · (max σ + τ)`.
    pub triviality_tol: Option<f64>,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            solver_tol: 1e-10,
            triviality_tol: None,
        }
    }
}

/// Full data of a steady logistic problem on one mesh.
#[derive(Debug, Clone)]
pub struct ProblemSpec {
    pub s: f64,
    pub sigma: Field,
    pub mu: Field,
    pub tau: f64,
    pub kernel: Option<Kernel>,
    pub solver_tol: f64,
    pub triviality_tol: f64,
}

impl ProblemSpec {
    /// Validates and broadcasts the coefficients onto `mesh`.
    ///
    /// `s = 1` selects the classical operator.
    pub fn new(
        mesh: Arc<Mesh>,
        s: f64,
        sigma: &Coefficient,
        mu: &Coefficient,
        tau: f64,
        kernel: Option<Kernel>,
        tolerances: Tolerances,
    ) -> Result<Self> {
        if !(s > 0.0 && s <= 1.0) {
            return Err(Error::param("s", format!("must lie in (0, 1], got {s}")));
        }
        if !(tau >= 0.0 && tau.is_finite()) {
            return Err(Error::param("tau", format!("must be >= 0, got {tau}")));
        }
        if !(tolerances.solver_tol > 0.0) {
            return Err(Error::param("solver_tol", "must be positive"));
        }
        if let Some(k) = &kernel {
            if (k.h() - mesh.h()).abs() > 1e-12 * mesh.h() {
                return Err(Error::InvalidKernel(format!(
                    "kernel sampled with h = {}, grid uses h = {}",
                    k.h(),
                    mesh.h()
                )));
            }
            if let Mesh::Periodic(p) = &*mesh {
                if k.radius() >= p.image_cutoff() as f64 - 1.0 {
                    return Err(Error::InvalidKernel(format!(
                        "radius {} exceeds the periodic image cutoff {}",
                        k.radius(),
                        p.image_cutoff()
                    )));
                }
            }
        } else if tau > 0.0 {
            return Err(Error::param("kernel", "a kernel is required when tau > 0"));
        }
        let sigma = sample_function(&mesh, sigma)?;
        let mu = sample_function(&mesh, mu)?;
        if sigma.values.iter().chain(&mu.values).any(|v| !v.is_finite()) {
            return Err(Error::param("sigma/mu", "coefficients must be finite"));
        }
        let triviality_tol = match tolerances.triviality_tol {
            Some(t) if t > 0.0 => t,
            Some(_) => return Err(Error::param("triviality_tol", "must be positive")),
            None => default_triviality_tol(sigma.max(), tau),
        };
        Ok(Self {
            s,
            sigma,
            mu,
            tau,
            kernel,
            solver_tol: tolerances.solver_tol,
            triviality_tol,
        })
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        self.sigma.mesh()
    }

    /// Positive-branch requirement: `μ > 0` at every node.
    pub fn require_positive_mu(&self) -> Result<()> {
        if self.mu.values.iter().all(|&m| m > 0.0) {
            Ok(())
        } else {
            Err(Error::param("mu", "must be positive at every node"))
        }
    }
}

pub(crate) fn default_triviality_tol(sigma_max: f64, tau: f64) -> f64 {
    // floor keeps the tolerance positive when the a priori bound is zero
    (1e-6 * (sigma_max + tau)).max(1e-12)
}
