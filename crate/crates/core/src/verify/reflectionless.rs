//! Standalone evaluation of the reflectionless step generated by the
//! condensate measure `2 s sqrt(1 - s^2) ds` on `[0, 1]`.
//!
//! With `E_j = w_j e^{8 s_j^3 t - 2 s_j x}` and `C_ij = 1 / (s_i + s_j)`, the
//! rescaled unknowns `Z_j = E_j Y_j` solve `(E^{-1} + C) Z = 1` and
//! `q = 2 (Σ Z_j)^2 - 4 Σ s_j Z_j`. For `x << 0` the matrix is extremely
//! ill-conditioned (`E` grows like `e^{2|x|}` while `C` is a Cauchy matrix),
//! so the factorization runs in binary floating point at a precision chosen
//! from `max E`. This path shares nothing with the Fredholm pipeline but the
//! node rule.

use astro_float::{BigFloat, RoundingMode, Sign};

use crate::error::{DarbouxError, Result};
use crate::measure::{discretize, Scheme, SpectralMeasure};
use crate::parallel;

const RM: RoundingMode = RoundingMode::ToEven;

/// Smallest node count accepted.
pub const MIN_NODES: usize = 8;

#[derive(Debug, Clone, PartialEq)]
pub struct ReflectionlessStep {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    /// Working precision never drops below this many bits.
    pub min_bits: usize,
}

/// `q_ρ(x, t)` with `n` sine-substitution nodes.
pub fn reflectionless_step(x: f64, t: f64, n: usize) -> Result<f64> {
    ReflectionlessStep::new(n, Scheme::Sine)?.eval(x, t)
}

impl ReflectionlessStep {
    pub fn new(n: usize, scheme: Scheme) -> Result<Self> {
        if n < MIN_NODES {
            return Err(DarbouxError::Config(format!(
                "reflectionless step needs at least {MIN_NODES} nodes, got {n}"
            )));
        }
        let dm = discretize(&SpectralMeasure::semicircle(), n, scheme)?;
        Ok(ReflectionlessStep {
            nodes: dm.nodes,
            weights: dm.weights,
            min_bits: 128,
        })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn log_e(&self, x: f64, t: f64) -> Vec<f64> {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&s, &w)| w.ln() + 8.0 * s.powi(3) * t - 2.0 * s * x)
            .collect()
    }

    /// Working precision at `(x, t)`. Each LDL^T pivot of `E^{-1} + C` is at
    /// least `max(E_j^{-1}, c_j)` with `c_j` the closed-form pivot of the
    /// Cauchy matrix alone; the precision covers the spread between the
    /// largest entry and the smallest such bound, plus 128 guard bits.
    pub fn precision_bits(&self, x: f64, t: f64) -> usize {
        let log_e = self.log_e(x, t);
        let s = &self.nodes;
        let mut log_entry_max = f64::NEG_INFINITY;
        let mut log_pivot_min = f64::INFINITY;
        for j in 0..s.len() {
            let cauchy =
                -(2.0 * s[j]).ln() + 2.0 * (0..j).map(|k| ((s[j] - s[k]) / (s[j] + s[k])).abs().ln()).sum::<f64>();
            log_pivot_min = log_pivot_min.min(cauchy.max(-log_e[j]));
            log_entry_max = log_entry_max.max((-log_e[j]).max(-(2.0 * s[j]).ln()));
        }
        let spread = ((log_entry_max - log_pivot_min) / std::f64::consts::LN_2).max(0.0);
        let bits = (128.0 + spread).max(self.min_bits as f64) as usize;
        bits.div_ceil(64) * 64
    }

    pub fn eval(&self, x: f64, t: f64) -> Result<f64> {
        let log_e = self.log_e(x, t);
        if let Some(&worst) = log_e.iter().find(|l| **l > 700.0) {
            return Err(DarbouxError::MagnitudeOverflow {
                s_max: 1.0,
                t,
                exponent: worst,
            });
        }
        let p = self.precision_bits(x, t);
        let n = self.len();
        let big = |v: f64| BigFloat::from_f64(v, p);
        let one = big(1.0);

        // A = E^{-1} + C, lower triangle, row-major. The node sums are formed
        // in working precision: rounding them to f64 perturbs C by more than
        // its smallest eigenvalue.
        let s_big: Vec<BigFloat> = self.nodes.iter().map(|&s| big(s)).collect();
        let mut a: Vec<Vec<BigFloat>> = (0..n)
            .map(|i| {
                (0..=i)
                    .map(|j| {
                        let c = one.div(&s_big[i].add(&s_big[j], p, RM), p, RM);
                        if i == j {
                            c.add(&big((-log_e[i]).exp()), p, RM)
                        } else {
                            c
                        }
                    })
                    .collect()
            })
            .collect();

        // LDL^T in place: a[i][j] <- L_ij for j < i, a[i][i] <- D_i
        for j in 0..n {
            let lj: Vec<BigFloat> = (0..j).map(|k| a[j][k].mul(&a[k][k], p, RM)).collect();
            let mut d = a[j][j].clone();
            for (k, v) in lj.iter().enumerate() {
                d = d.sub(&v.mul(&a[j][k], p, RM), p, RM);
            }
            if !d.is_positive() {
                return Err(DarbouxError::SingularSystem {
                    x,
                    t,
                    condition: f64::INFINITY,
                });
            }
            a[j][j] = d.clone();
            let inv = one.div(&d, p, RM);
            for row in a.iter_mut().skip(j + 1) {
                let mut v = row[j].clone();
                for (k, l) in lj.iter().enumerate() {
                    v = v.sub(&row[k].mul(l, p, RM), p, RM);
                }
                row[j] = v.mul(&inv, p, RM);
            }
        }

        // L u = 1, u <- D^{-1} u, L^T Z = u
        let mut z: Vec<BigFloat> = vec![one.clone(); n];
        for i in 0..n {
            let mut v = z[i].clone();
            for k in 0..i {
                v = v.sub(&a[i][k].mul(&z[k], p, RM), p, RM);
            }
            z[i] = v;
        }
        for i in 0..n {
            z[i] = z[i].div(&a[i][i], p, RM);
        }
        for i in (0..n).rev() {
            let mut v = z[i].clone();
            for k in (i + 1)..n {
                v = v.sub(&a[k][i].mul(&z[k], p, RM), p, RM);
            }
            z[i] = v;
        }

        let mut sum = BigFloat::from_f64(0.0, p);
        let mut moment = BigFloat::from_f64(0.0, p);
        for (zi, s) in z.iter().zip(&s_big) {
            sum = sum.add(zi, p, RM);
            moment = moment.add(&zi.mul(s, p, RM), p, RM);
        }
        let q = big(2.0)
            .mul(&sum.mul(&sum, p, RM), p, RM)
            .sub(&big(4.0).mul(&moment, p, RM), p, RM);
        Ok(to_f64(&q))
    }
}

/// Nearest-ish `f64` to `v` from its two leading mantissa words.
fn to_f64(v: &BigFloat) -> f64 {
    if v.is_zero() {
        return 0.0;
    }
    let Some((words, _, sign, exponent, _)) = v.as_raw_parts() else {
        return f64::NAN;
    };
    let word = 2f64.powi(64);
    let mut top = 0.0;
    for w in words.iter().rev().take(2) {
        top = top * word + *w as f64;
    }
    let used = words.len().min(2) as i32;
    let mag = top * 2f64.powi(-64 * used) * 2f64.powi(exponent);
    match sign {
        Sign::Neg => -mag,
        Sign::Pos => mag,
    }
}

/// Mean of `q_ρ(·, t)` over `points` equispaced samples of `[x_lo, x_hi]`.
pub fn window_average(step: &ReflectionlessStep, x_lo: f64, x_hi: f64, points: usize, t: f64) -> Result<f64> {
    let xs: Vec<f64> = (0..points)
        .map(|i| x_lo + (x_hi - x_lo) * i as f64 / (points.max(2) - 1) as f64)
        .collect();
    let qs = parallel::par_map(&xs, |&x| step.eval(x, t));
    let mut total = 0.0;
    for q in qs {
        total += q?;
    }
    Ok(total / points as f64)
}
