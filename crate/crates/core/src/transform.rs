//! The transformation `(q, ψ, σ) -> (q_σ, ψ_σ)`: adding or removing negative
//! spectrum, composing transformations, and undoing them.

use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::background::{BackgroundModel, LocalBackground};
use crate::error::{DarbouxError, Result};
use crate::fredholm::{self, kernel, Factorization, KernelSystem, Mode, Solution};
use crate::measure::{check_admissible, discretize, AdmissibilityReport, DiscretizedMeasure, Scheme, SpectralMeasure};
use crate::parallel;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Step of the finite-difference log-det derivative (Richardson with `h`, `h/2`).
pub const LOGDET_FD_STEP: f64 = 1e-3;

/// How `q_σ` is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// `q + 2 (∫ψ_σ ψ dσ_t)^2 + 4 ∫ψ_σ ψ' dσ_t`.
    #[default]
    Direct,
    /// `q - 2 ∂²ₓ log det(I + K)`, closed-form derivative when the weights
    /// share a sign, finite differences otherwise.
    #[serde(rename = "logdet")]
    LogDet,
    /// `q - 2 ∂²ₓ log det(I + K)` by Richardson-extrapolated differences.
    #[serde(rename = "logdet_fd")]
    LogDetFd,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ApplyOptions {
    /// Nodes per absolutely continuous component.
    pub nodes: usize,
    pub scheme: Scheme,
    /// Skip the admissibility check (singular-solution experiments).
    pub force: bool,
}

impl Default for ApplyOptions {
    fn default() -> Self {
        ApplyOptions {
            nodes: 128,
            scheme: Scheme::GaussLegendre,
            force: false,
        }
    }
}

/// `q_σ`, `ψ_σ` for a background and a discretized measure. Immutable; every
/// evaluation solves the system at the requested `(x, t)`.
#[derive(Debug, Clone)]
pub struct PotentialField {
    background: BackgroundModel,
    measure: SpectralMeasure,
    discretization: DiscretizedMeasure,
    admissibility: AdmissibilityReport,
    forced: bool,
}

pub fn apply(bg: &BackgroundModel, sigma: &SpectralMeasure, n_nodes: usize) -> Result<PotentialField> {
    apply_with(
        bg,
        sigma,
        &ApplyOptions {
            nodes: n_nodes,
            ..ApplyOptions::default()
        },
    )
}

pub fn apply_with(bg: &BackgroundModel, sigma: &SpectralMeasure, opts: &ApplyOptions) -> Result<PotentialField> {
    sigma.validate()?;
    let dm = discretize(sigma, opts.nodes, opts.scheme)?;
    apply_discretized(bg, dm, opts.force)
}

/// Applies an already discretized measure; `dm.parent` is the measure used
/// for the admissibility check and the norming-measure bookkeeping.
pub fn apply_discretized(bg: &BackgroundModel, dm: DiscretizedMeasure, force: bool) -> Result<PotentialField> {
    let admissibility = check_admissible(&bg.norming_measure(), &dm.parent);
    if !force && !admissibility.admissible() {
        return Err(DarbouxError::InadmissibleMeasure(admissibility.violations.join("; ")));
    }
    Ok(PotentialField {
        background: bg.clone(),
        measure: dm.parent.clone(),
        discretization: dm,
        admissibility,
        forced: force,
    })
}

/// Applies `-σ` on top of `field`, reusing the same nodes so the round trip
/// is exact up to round-off. The result evaluates to the original background.
pub fn invert(field: &PotentialField) -> Result<PotentialField> {
    let bg = BackgroundModel::Transformed(Arc::new(field.clone()));
    apply_discretized(&bg, field.discretization.negated(), field.forced)
}

/// Largest `|q_{σ1 σ2} - q_{σ2 σ1}|` over `grid`, both orders built on the
/// zero background.
pub fn commutativity_check(
    sigma1: &SpectralMeasure,
    sigma2: &SpectralMeasure,
    grid: &[(f64, f64)],
    opts: &ApplyOptions,
) -> Result<f64> {
    let compose = |first: &SpectralMeasure, second: &SpectralMeasure| -> Result<PotentialField> {
        let inner = apply_with(&BackgroundModel::Zero, first, opts)?;
        apply_with(&inner.into(), second, opts)
    };
    let f12 = compose(sigma1, sigma2)?;
    let f21 = compose(sigma2, sigma1)?;
    let devs = parallel::par_map(grid, |&(x, t)| -> Result<f64> {
        Ok((f12.potential(x, t, Method::Direct)? - f21.potential(x, t, Method::Direct)?).abs())
    });
    devs.into_iter().try_fold(0.0, |m, d| Ok(f64::max(m, d?)))
}

pub fn transformed_jost(field: &PotentialField, x: f64, t: f64, k: Complex64) -> Result<Complex64> {
    field.jost(x, t, k)
}

pub fn transformed_jost_dx(field: &PotentialField, x: f64, t: f64, k: Complex64) -> Result<Complex64> {
    field.jost_dx(x, t, k)
}

pub fn transformed_potential(field: &PotentialField, x: f64, t: f64, method: Method) -> Result<f64> {
    field.potential(x, t, method)
}

impl PotentialField {
    pub fn background(&self) -> &BackgroundModel {
        &self.background
    }

    pub fn measure(&self) -> &SpectralMeasure {
        &self.measure
    }

    pub fn discretization(&self) -> &DiscretizedMeasure {
        &self.discretization
    }

    pub fn admissibility(&self) -> &AdmissibilityReport {
        &self.admissibility
    }

    pub fn is_forced(&self) -> bool {
        self.forced
    }

    /// Norming measure of `q_σ`: the background's plus `σ`.
    pub fn norming_measure(&self) -> SpectralMeasure {
        self.background.norming_measure().plus(&self.measure)
    }

    /// Solves the system at `(x, t)`.
    pub fn state(&self, x: f64, t: f64) -> Result<FieldState> {
        FieldState::new(
            self.background.at(x, t)?,
            &self.discretization.nodes,
            &self.discretization.weights,
        )
    }

    /// The assembled system at `(x, t)` without solving it.
    pub fn system(&self, x: f64, t: f64) -> Result<KernelSystem> {
        KernelSystem::assemble(&self.background, &self.discretization, x, t, Mode::Add)
    }

    pub fn log_det(&self, x: f64, t: f64) -> Result<f64> {
        fredholm::log_det(&self.system(x, t)?)
    }

    pub fn determinant(&self, x: f64, t: f64) -> Result<f64> {
        Ok(fredholm::determinant(&self.system(x, t)?))
    }

    pub fn jost(&self, x: f64, t: f64, k: Complex64) -> Result<Complex64> {
        self.state(x, t)?.jost(k)
    }

    pub fn jost_dx(&self, x: f64, t: f64, k: Complex64) -> Result<Complex64> {
        self.state(x, t)?.jost_dx(k)
    }

    pub fn potential(&self, x: f64, t: f64, method: Method) -> Result<f64> {
        match method {
            Method::Direct => self.state(x, t)?.potential_direct(),
            Method::LogDet => {
                let local = self.background.at(x, t)?;
                let q_bg = local.potential()?;
                let ks = KernelSystem::assemble_local(
                    &local,
                    &self.discretization.nodes,
                    &self.discretization.weights,
                    Mode::Add,
                )?;
                match fredholm::d2_logdet(&ks) {
                    Ok(d2) => Ok(q_bg - 2.0 * d2),
                    Err(DarbouxError::MixedSignWeights) => Ok(q_bg - 2.0 * self.d2_logdet_fd(x, t)?),
                    Err(e) => Err(e),
                }
            }
            Method::LogDetFd => {
                let q_bg = self.background.potential(x, t)?;
                Ok(q_bg - 2.0 * self.d2_logdet_fd(x, t)?)
            }
        }
    }

    /// `∂²ₓ log det(I + K)` from centered second differences at `h` and
    /// `h/2`, Richardson-extrapolated.
    pub fn d2_logdet_fd(&self, x: f64, t: f64) -> Result<f64> {
        let h = LOGDET_FD_STEP;
        let f0 = self.log_det(x, t)?;
        let second =
            |h: f64| -> Result<f64> { Ok((self.log_det(x + h, t)? - 2.0 * f0 + self.log_det(x - h, t)?) / (h * h)) };
        let coarse = second(h)?;
        let fine = second(0.5 * h)?;
        Ok((4.0 * fine - coarse) / 3.0)
    }

    /// Bisects for a sign change of `det(I + K)` in `[a, b]` at fixed `t`.
    pub fn locate_det_zero(&self, a: f64, b: f64, t: f64, tol: f64) -> Result<f64> {
        let (mut lo, mut hi) = (a, b);
        let mut f_lo = self.determinant(lo, t)?;
        let f_hi = self.determinant(hi, t)?;
        if f_lo == 0.0 {
            return Ok(lo);
        }
        if f_hi == 0.0 {
            return Ok(hi);
        }
        if f_lo.signum() == f_hi.signum() {
            return Err(DarbouxError::Config(format!(
                "det(I + K) does not change sign on [{a}, {b}]"
            )));
        }
        while hi - lo > tol {
            let mid = 0.5 * (lo + hi);
            let f_mid = self.determinant(mid, t)?;
            if f_mid == 0.0 {
                return Ok(mid);
            }
            if f_mid.signum() == f_lo.signum() {
                lo = mid;
                f_lo = f_mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }
}

/// The solved system of one transformation at a single `(x, t)`, together
/// with everything needed to evaluate `ψ_σ`, `ψ_σ'` and `q_σ` there.
#[derive(Debug)]
pub struct FieldState {
    background: LocalBackground,
    system: KernelSystem,
    factorization: Factorization,
    solution: Solution,
    /// `c_j = w_j e^{8 s_j^3 t} y_j`.
    coeff: Vec<f64>,
    /// `∂ₓ c_j`.
    coeff_dx: Vec<f64>,
    /// `y_j'`.
    y_dx: Vec<f64>,
    /// `Σ ψ_j c_j`.
    beta: f64,
}

impl FieldState {
    pub fn new(background: LocalBackground, nodes: &[f64], weights: &[f64]) -> Result<FieldState> {
        let system = KernelSystem::assemble_local(&background, nodes, weights, Mode::Add)?;
        let factorization = system.factorize();
        let solution = fredholm::solve_with(&system, &factorization)?;
        let coeff: Vec<f64> = solution
            .z
            .iter()
            .zip(system.signs.iter().zip(&system.scale))
            .map(|(z, (e, d))| e * d * z)
            .collect();
        let beta: f64 = system.rhs.iter().zip(&coeff).map(|(p, c)| p * c).sum();
        // (I + K W) y' = ψ' + ψ β, from ∂ₓ K(s_i, s_j) = -ψ_i ψ_j
        let rhs_dx: Vec<f64> = system.a_dx.iter().zip(&system.a).map(|(da, a)| da + a * beta).collect();
        let z_dx = factorization.solve(&rhs_dx);
        let coeff_dx = z_dx
            .iter()
            .zip(system.signs.iter().zip(&system.scale))
            .map(|(z, (e, d))| e * d * z)
            .collect();
        let y_dx = z_dx.iter().zip(&system.scale).map(|(z, d)| z / d).collect();
        Ok(FieldState {
            background,
            system,
            factorization,
            solution,
            coeff,
            coeff_dx,
            y_dx,
            beta,
        })
    }

    pub fn x(&self) -> f64 {
        self.system.x
    }

    pub fn t(&self) -> f64 {
        self.system.t
    }

    pub fn background(&self) -> &LocalBackground {
        &self.background
    }

    pub fn system(&self) -> &KernelSystem {
        &self.system
    }

    pub fn solution(&self) -> &Solution {
        &self.solution
    }

    /// `y_j = ψ_σ(x, t; is_j)`.
    pub fn y(&self) -> &[f64] {
        &self.solution.y
    }

    pub fn condition(&self) -> f64 {
        self.solution.condition
    }

    pub fn log_det(&self) -> f64 {
        self.factorization.log_abs_det
    }

    fn row(&self, k: Complex64, psi_k: Complex64, dpsi_k: Complex64) -> Result<Vec<Complex64>> {
        kernel::kernel_row_with(
            &self.background,
            k,
            psi_k,
            dpsi_k,
            &self.system.nodes,
            &self.system.rhs,
            &self.system.rhs_dx,
        )
    }

    /// `ψ_σ(k) = ψ(k) - Σ K(k/i, s_j) c_j`.
    pub fn jost(&self, k: Complex64) -> Result<Complex64> {
        let psi = self.background.jost(k)?;
        if self.coeff.is_empty() {
            return Ok(psi);
        }
        let row = self.row(k, psi, self.background.jost_dx(k)?)?;
        Ok(psi - row.iter().zip(&self.coeff).map(|(r, c)| r * c).sum::<Complex64>())
    }

    /// `|ψ(k)| + Σ |K(k/i, s_j) c_j|`, the size of the terms that cancel in
    /// [`FieldState::jost`]; its absolute round-off is a few ulps of this.
    pub fn jost_magnitude(&self, k: Complex64) -> Result<f64> {
        let psi = self.background.jost(k)?;
        if self.coeff.is_empty() {
            return Ok(psi.norm());
        }
        let row = self.row(k, psi, self.background.jost_dx(k)?)?;
        Ok(psi.norm() + row.iter().zip(&self.coeff).map(|(r, c)| (r * c).norm()).sum::<f64>())
    }

    /// `ψ_σ'(k) = ψ'(k) + ψ(k) β - Σ K(k/i, s_j) c_j'`.
    pub fn jost_dx(&self, k: Complex64) -> Result<Complex64> {
        let psi = self.background.jost(k)?;
        let dpsi = self.background.jost_dx(k)?;
        if self.coeff.is_empty() {
            return Ok(dpsi);
        }
        let row = self.row(k, psi, dpsi)?;
        Ok(dpsi + psi * self.beta - row.iter().zip(&self.coeff_dx).map(|(r, c)| r * c).sum::<Complex64>())
    }

    /// Index of `s` among this system's nodes (exact match).
    fn node_index(&self, s: f64) -> Option<usize> {
        self.system.nodes.binary_search_by(|n| n.total_cmp(&s)).ok()
    }

    /// `(ψ_σ(is), ψ_σ'(is))`. On the system's own nodes this is `(y_j, y_j')`,
    /// which avoids the cancellation in `ψ - Σ K c` where the background
    /// Jost values are large.
    pub fn jost_imag(&self, s: f64) -> Result<(f64, f64)> {
        if let Some(j) = self.node_index(s) {
            if self.solution.y_valid {
                return Ok((self.solution.y[j], self.y_dx[j]));
            }
        }
        let psi = self.background.jost(I * s)?;
        let dpsi = self.background.jost_dx(I * s)?;
        if self.coeff.is_empty() {
            return Ok((psi.re, dpsi.re));
        }
        let row = self.row(I * s, psi, dpsi)?;
        let sum = |c: &[f64]| row.iter().zip(c).map(|(r, c)| r.re * c).sum::<f64>();
        Ok((
            psi.re - sum(&self.coeff),
            dpsi.re + psi.re * self.beta - sum(&self.coeff_dx),
        ))
    }

    /// `q_σ = q + 2 β^2 + 4 Σ ψ'_j c_j`.
    pub fn potential_direct(&self) -> Result<f64> {
        let q = self.background.potential()?;
        let p: f64 = self.system.rhs_dx.iter().zip(&self.coeff).map(|(p, c)| p * c).sum();
        Ok(q + 2.0 * self.beta * self.beta + 4.0 * p)
    }

    /// `∂²ₓ log det(I + K)` in closed form (sign-definite weights only).
    pub fn d2_logdet(&self) -> Result<f64> {
        fredholm::d2_logdet_with(&self.system, &self.factorization)
    }

    /// `S' + M'` for the system that removes this state's own measure again
    /// (same nodes, negated weights), or `None` for any other measure.
    ///
    /// On its own nodes the transformed kernel is `G K` with
    /// `G = (I + K W)^{-1}`, so the removal system `I - G K W` is exactly `G`
    /// and its symmetric form is `-(I + M S)^{-1} S`. Building it column by
    /// column from this factorization never forms `1 - w K_σ(s, s)`, which
    /// cancels to `O(1 / det(I + K))` where the determinant is large.
    pub fn inverse_shifted_matrix(&self, nodes: &[f64], weights: &[f64]) -> Option<DMatrix<f64>> {
        let own = &self.system;
        let n = own.len();
        if n == 0 || nodes != own.nodes.as_slice() || weights.len() != n {
            return None;
        }
        if !weights.iter().zip(&own.weights).all(|(w, v)| *w == -v) {
            return None;
        }
        let mut out = DMatrix::zeros(n, n);
        for l in 0..n {
            let mut e = vec![0.0; n];
            e[l] = own.signs[l];
            let u = self.factorization.solve(&e);
            for j in 0..n {
                out[(j, l)] = -u[j];
            }
        }
        Some(0.5 * (&out + out.transpose()))
    }

    /// Kernel `∫_x^∞ ψ_σ(z, k) ψ_σ(z, is) dz` of the transformed potential.
    ///
    /// With `G = (I + K W)^{-1}` this is `K(k, s) - K(k, ·) W G K(·, s)` in
    /// terms of the background kernel; both sides vanish at `+∞` and have
    /// x-derivative `-ψ_σ(k) ψ_σ(is)`. No Wronskian division is involved, so
    /// it is the near-diagonal rule on transformed backgrounds.
    ///
    /// When `k = is_j` is one of the nodes, `K - K W G K = G K` row-wise, so
    /// the entry is `[G K(·, s)]_j` with no subtraction at all.
    pub fn kernel_exact(&self, k: Complex64, s: f64) -> Result<Complex64> {
        if self.coeff.is_empty() {
            return kernel::kernel_local(&self.background, k, s);
        }
        let psi_s = self.background.jost(I * s)?;
        let col = self.row(I * s, psi_s, self.background.jost_dx(I * s)?)?;
        let scaled: Vec<f64> = col.iter().zip(&self.system.scale).map(|(c, d)| c.re * d).collect();
        let v = self.factorization.solve(&scaled);
        if k.re == 0.0 {
            if let Some(j) = self.node_index(k.im) {
                return Ok(Complex64::new(v[j] / self.system.scale[j], 0.0));
            }
        }
        let base = kernel::kernel_local(&self.background, k, s)?;
        let psi = self.background.jost(k)?;
        let row = self.row(k, psi, self.background.jost_dx(k)?)?;
        let correction: Complex64 = row
            .iter()
            .zip(v.iter().zip(self.system.signs.iter().zip(&self.system.scale)))
            .map(|(r, (v, (e, d)))| r * (e * d * v))
            .sum();
        Ok(base - correction)
    }
}
