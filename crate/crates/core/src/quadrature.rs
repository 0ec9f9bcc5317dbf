//! Gauss–Legendre rules and an adaptive integrator for exponentially
//! decaying integrands on a half line.

use num_complex::Complex64;
use std::f64::consts::PI;

/// Gauss–Legendre nodes and weights on `[-1, 1]`, nodes ascending.
///
/// Newton iteration on the three-term recurrence, started from the
/// Tricomi asymptotic guess.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() <= 1e-16 * z.abs().max(1.0) {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, z);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - z * z) * dp * dp);
        nodes[i] = -z;
        nodes[n - 1 - i] = z;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, z: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = z;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}

/// Gauss–Legendre rule mapped to `[a, b]`.
pub fn gauss_legendre_on(n: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(n);
    let half = 0.5 * (b - a);
    let mid = 0.5 * (b + a);
    (
        x.iter().map(|&u| mid + half * u).collect(),
        w.iter().map(|&v| v * half).collect(),
    )
}

const PANEL_ORDER: usize = 10;
const MAX_DEPTH: usize = 40;

/// Fixed panel rule reused by the adaptive integrator.
#[derive(Debug, Clone)]
pub struct AdaptiveGauss {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    rel_tol: f64,
}

impl Default for AdaptiveGauss {
    fn default() -> Self {
        let (nodes, weights) = gauss_legendre(PANEL_ORDER);
        AdaptiveGauss {
            nodes,
            weights,
            rel_tol: 1e-15,
        }
    }
}

impl AdaptiveGauss {
    fn panel<F, E>(&self, f: &mut F, a: f64, b: f64) -> Result<Complex64, E>
    where
        F: FnMut(f64) -> Result<Complex64, E>,
    {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (b + a);
        let mut acc = Complex64::new(0.0, 0.0);
        for (u, w) in self.nodes.iter().zip(&self.weights) {
            acc += f(mid + half * u)? * (w * half);
        }
        Ok(acc)
    }

    /// Integrates `f` over `[a, b]` by recursive bisection, accepting a panel
    /// when the two-half estimate agrees with the whole-panel estimate to
    /// `rel_tol` of `scale`.
    pub fn integrate<F, E>(&self, mut f: F, a: f64, b: f64) -> Result<Complex64, E>
    where
        F: FnMut(f64) -> Result<Complex64, E>,
    {
        let whole = self.panel(&mut f, a, b)?;
        let scale = whole.norm().max(f64::MIN_POSITIVE);
        self.refine(&mut f, a, b, whole, scale, 0)
    }

    fn refine<F, E>(
        &self,
        f: &mut F,
        a: f64,
        b: f64,
        whole: Complex64,
        scale: f64,
        depth: usize,
    ) -> Result<Complex64, E>
    where
        F: FnMut(f64) -> Result<Complex64, E>,
    {
        let m = 0.5 * (a + b);
        let left = self.panel(f, a, m)?;
        let right = self.panel(f, m, b)?;
        let split = left + right;
        if (split - whole).norm() <= self.rel_tol * scale || depth >= MAX_DEPTH {
            return Ok(split);
        }
        Ok(self.refine(f, a, m, left, scale, depth + 1)? + self.refine(f, m, b, right, scale, depth + 1)?)
    }
}

/// Envelope level at which the half-line integral is truncated.
pub const TAIL_ENVELOPE: f64 = 1e-14;

/// `∫_x^∞ f(z) dz` for an integrand behaving like `C e^{c z}` at infinity,
/// `Re c < 0`. Integrates adaptively up to the point where the envelope
/// `e^{Re(c)(X - x)}` falls below [`TAIL_ENVELOPE`], then adds the exact tail
/// of the asymptotic exponential, `-f(X)/c`.
pub fn half_line_exponential<F, E>(mut f: F, x: f64, c: Complex64) -> Result<Complex64, E>
where
    F: FnMut(f64) -> Result<Complex64, E>,
{
    let rate = -c.re;
    debug_assert!(rate > 0.0);
    let length = -TAIL_ENVELOPE.ln() / rate;
    let end = x + length;
    let body = AdaptiveGauss::default().integrate(&mut f, x, end)?;
    let tail = -f(end)? / c;
    Ok(body + tail)
}
