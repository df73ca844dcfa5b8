//! Small quadrature toolkit used by the matrix assembly routines.

use std::sync::OnceLock;

/// Gauss-Legendre rule on [-1, 1].
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "rule needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            // Tricomi initial guess, then Newton on P_n.
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        Self { nodes, weights }
    }

    /// Shared 16-point rule.
    pub fn sixteen() -> &'static GaussLegendre {
        static RULE: OnceLock<GaussLegendre> = OnceLock::new();
        RULE.get_or_init(|| GaussLegendre::new(16))
    }

    /// Integrates `f` over `[a, b]`.
    pub fn integrate(&self, a: f64, b: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(mid + half * x))
            .sum::<f64>()
            * half
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// `∫_a^b z^(q-1) dz` for `0 <= a < b`, stable when `q` is near zero.
///
/// `a == 0` requires `q > 0`.
pub fn power_integral(a: f64, b: f64, q: f64) -> f64 {
    debug_assert!(a >= 0.0 && b > a);
    if a == 0.0 {
        assert!(q > 0.0, "divergent power integral at the origin");
        return b.powf(q) / q;
    }
    let (la, lb) = (a.ln(), b.ln());
    if q == 0.0 {
        return lb - la;
    }
    (f64::exp_m1(q * lb) - f64::exp_m1(q * la)) / q
}

/// Hurwitz zeta `Σ_{n>=0} (q + n)^(-p)` for `p > 1`, `q > 0`.
pub fn hurwitz_zeta(p: f64, q: f64) -> f64 {
    debug_assert!(p > 1.0 && q > 0.0);
    // Euler-Maclaurin after a block of explicit terms.
    const DIRECT: usize = 12;
    const BERNOULLI: [f64; 8] = [
        1.0 / 6.0,
        -1.0 / 30.0,
        1.0 / 42.0,
        -1.0 / 30.0,
        5.0 / 66.0,
        -691.0 / 2730.0,
        7.0 / 6.0,
        -3617.0 / 510.0,
    ];
    let mut sum = 0.0;
    for n in 0..DIRECT {
        sum += (q + n as f64).powf(-p);
    }
    let a = q + DIRECT as f64;
    sum += a.powf(1.0 - p) / (p - 1.0) + 0.5 * a.powf(-p);
    // term_j = B_{2j}/(2j)! * p(p+1)...(p+2j-2) * a^(-p-2j+1)
    let mut rising = p;
    let mut factorial = 2.0;
    let mut power = a.powf(-p - 1.0);
    for (j, b) in BERNOULLI.iter().enumerate() {
        let term = b / factorial * rising * power;
        sum += term;
        let k = 2.0 * (j as f64 + 1.0);
        rising *= (p + k - 1.0) * (p + k);
        factorial *= (k + 1.0) * (k + 2.0);
        power /= a * a;
    }
    sum
}
