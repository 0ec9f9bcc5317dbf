//! The finite Fredholm system `y + K W y = ψ` on discretization nodes, its
//! determinant, and the second x-derivative of `log det(I + K W)`.
//!
//! Everything is carried in symmetrized variables: with `D = diag(sqrt|w|)`
//! and `S = diag(sign w)`, `M = D K D` is symmetric and
//! `det(I + K W) = det(I + M S)`. The scaling works from log-weights
//! `log|w_j| + 8 s_j^3 t`, so evolution factors never appear on their own.

pub mod kernel;
mod linalg;

pub use linalg::{Factorization, NEAR_SINGULAR_CONDITION, SINGULAR_CONDITION};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::background::{BackgroundModel, LocalBackground};
use crate::error::{DarbouxError, Result};
use crate::measure::DiscretizedMeasure;

/// Whether the measure is added (`I + K`) or removed (`I - K`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    #[default]
    Add,
    Remove,
}

#[derive(Debug, Clone)]
pub struct KernelSystem {
    pub x: f64,
    pub t: f64,
    pub nodes: Vec<f64>,
    /// Unevolved signed node weights as given.
    pub weights: Vec<f64>,
    /// Sign of each evolved weight, after the mode flip.
    pub signs: Vec<f64>,
    /// `log |w_j| + 8 s_j^3 t`.
    pub log_weights: Vec<f64>,
    /// `sqrt |w_j e^{8 s_j^3 t}|`.
    pub scale: Vec<f64>,
    /// Symmetric `M_ij = scale_i K(s_i, s_j) scale_j`.
    pub matrix: DMatrix<f64>,
    /// `S + M` when it is known more accurately than the sum of its parts.
    pub shifted: Option<DMatrix<f64>>,
    /// Background `ψ(x, t; is_j)`.
    pub rhs: Vec<f64>,
    /// Background `ψ'(x, t; is_j)`.
    pub rhs_dx: Vec<f64>,
    /// `scale_j ψ(x, t; is_j)`.
    pub a: Vec<f64>,
    /// `scale_j ψ'(x, t; is_j)`.
    pub a_dx: Vec<f64>,
}

impl KernelSystem {
    pub fn assemble(bg: &BackgroundModel, dm: &DiscretizedMeasure, x: f64, t: f64, mode: Mode) -> Result<KernelSystem> {
        Self::assemble_local(&bg.at(x, t)?, &dm.nodes, &dm.weights, mode)
    }

    /// Assembles on an already evaluated background; `weights` are the
    /// unevolved signed node weights.
    pub fn assemble_local(bg: &LocalBackground, nodes: &[f64], weights: &[f64], mode: Mode) -> Result<KernelSystem> {
        let (x, t) = (bg.x(), bg.t());
        let n = nodes.len();
        let flip = match mode {
            Mode::Add => 1.0,
            Mode::Remove => -1.0,
        };
        let mut signs = Vec::with_capacity(n);
        let mut log_weights = Vec::with_capacity(n);
        let mut scale = Vec::with_capacity(n);
        for (&s, &w) in nodes.iter().zip(weights) {
            let lw = w.abs().ln() + 8.0 * s.powi(3) * t;
            let d = (0.5 * lw).exp();
            if !d.is_finite() {
                return Err(DarbouxError::MagnitudeOverflow {
                    s_max: s,
                    t,
                    exponent: 8.0 * s.powi(3) * t,
                });
            }
            signs.push(flip * w.signum());
            log_weights.push(lw);
            scale.push(d);
        }
        let mut rhs = Vec::with_capacity(n);
        let mut rhs_dx = Vec::with_capacity(n);
        for &s in nodes {
            let (p, dp) = bg.jost_imag(s)?;
            rhs.push(p);
            rhs_dx.push(dp);
        }
        let a: Vec<f64> = rhs.iter().zip(&scale).map(|(p, d)| p * d).collect();
        let a_dx: Vec<f64> = rhs_dx.iter().zip(&scale).map(|(p, d)| p * d).collect();

        if mode == Mode::Add {
            if let LocalBackground::Transformed(st) = bg {
                if let Some(shifted) = st.inverse_shifted_matrix(nodes, weights) {
                    let mut matrix = shifted.clone();
                    for (i, s) in signs.iter().enumerate() {
                        matrix[(i, i)] -= s;
                    }
                    return Ok(KernelSystem {
                        x,
                        t,
                        nodes: nodes.to_vec(),
                        weights: weights.to_vec(),
                        signs,
                        log_weights,
                        scale,
                        matrix,
                        shifted: Some(shifted),
                        rhs,
                        rhs_dx,
                        a,
                        a_dx,
                    });
                }
            }
        }

        let mut matrix = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let (si, sj) = (nodes[i], nodes[j]);
                let k = if kernel::is_near_diagonal(num_complex::Complex64::new(0.0, si), sj) {
                    scale[i] * scale[j] * bg.kernel_near_diagonal(num_complex::Complex64::new(0.0, si), sj)?.re
                } else {
                    // scaled Wronskian quotient (ψ'_i ψ_j - ψ_i ψ'_j) / (s_j^2 - s_i^2)
                    (a_dx[i] * a[j] - a[i] * a_dx[j]) / (sj * sj - si * si)
                };
                matrix[(i, j)] = k;
                matrix[(j, i)] = k;
            }
        }
        Ok(KernelSystem {
            x,
            t,
            nodes: nodes.to_vec(),
            weights: weights.to_vec(),
            signs,
            log_weights,
            scale,
            matrix,
            shifted: None,
            rhs,
            rhs_dx,
            a,
            a_dx,
        })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// The common sign of all weights, if there is one (`+1` when empty).
    pub fn uniform_sign(&self) -> Option<f64> {
        match self.signs.first() {
            None => Some(1.0),
            Some(&s) if self.signs.iter().all(|&v| v == s) => Some(s),
            _ => None,
        }
    }

    /// Evolved signed weights `w_j e^{8 s_j^3 t}` (may overflow to inf for
    /// extreme log-weights; only used for reporting).
    pub fn evolved_weights(&self) -> Vec<f64> {
        self.signs
            .iter()
            .zip(&self.log_weights)
            .map(|(s, l)| s * l.exp())
            .collect()
    }

    /// The unsymmetrized kernel matrix `K(s_i, s_j)`.
    pub fn kernel_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.len(), self.len(), |i, j| {
            self.matrix[(i, j)] / (self.scale[i] * self.scale[j])
        })
    }

    pub fn factorize(&self) -> Factorization {
        match &self.shifted {
            Some(a) => Factorization::from_shifted(a.clone(), &self.signs),
            None => Factorization::new(&self.matrix, &self.signs),
        }
    }
}

/// Solution of the system in the original variables.
#[derive(Debug, Clone)]
pub struct Solution {
    /// `y_j`, the transformed Jost solution at the nodes.
    pub y: Vec<f64>,
    /// Scaled unknowns `z = D y`.
    pub z: Vec<f64>,
    /// Every `y_j` is finite (tiny weights at very negative x can push the
    /// unscaled values out of range while `z` stays representable).
    pub y_valid: bool,
    pub condition: f64,
    pub near_singular: bool,
    pub log_abs_det: f64,
    pub det_sign: f64,
}

/// Rejects factorizations that cannot be trusted: a failed factorization,
/// a determinant of the wrong sign (a pole of the transformed potential was
/// crossed), or a condition estimate beyond [`SINGULAR_CONDITION`].
pub fn check_solvable(f: &Factorization, x: f64, t: f64) -> Result<()> {
    if f.det_sign <= 0.0 || f.condition.is_nan() || f.condition > SINGULAR_CONDITION {
        return Err(DarbouxError::SingularSystem {
            x,
            t,
            condition: f.condition,
        });
    }
    Ok(())
}

pub fn solve_with(ks: &KernelSystem, f: &Factorization) -> Result<Solution> {
    check_solvable(f, ks.x, ks.t)?;
    let z = f.solve(&ks.a);
    let y: Vec<f64> = z.iter().zip(&ks.scale).map(|(z, d)| z / d).collect();
    Ok(Solution {
        y_valid: y.iter().all(|v| v.is_finite()),
        y,
        z,
        condition: f.condition,
        near_singular: f.condition > NEAR_SINGULAR_CONDITION,
        log_abs_det: f.log_abs_det,
        det_sign: f.det_sign,
    })
}

pub fn solve(ks: &KernelSystem) -> Result<Solution> {
    solve_with(ks, &ks.factorize())
}

/// `(sign, log|det|)` of `det(I + K W)`; no solvability policy applied.
pub fn signed_log_det(ks: &KernelSystem) -> (f64, f64) {
    let f = ks.factorize();
    (f.det_sign, f.log_abs_det)
}

/// `det(I + K W)` as a plain number, for locating sign changes.
pub fn determinant(ks: &KernelSystem) -> f64 {
    let (sign, log) = signed_log_det(ks);
    sign * log.exp()
}

pub fn log_det(ks: &KernelSystem) -> Result<f64> {
    let (sign, log) = signed_log_det(ks);
    if sign <= 0.0 {
        return Err(DarbouxError::NonPositiveDeterminant { x: ks.x, t: ks.t });
    }
    Ok(log)
}

/// `∂²ₓ log det(I + K W)` in closed form: with `∂ₓ M = -ε a aᵀ` for a
/// uniform sign `ε`, it equals `-⟨a, z⟩² - 2 ε ⟨a', z⟩` where
/// `(I + M S) z = a`.
pub fn d2_logdet(ks: &KernelSystem) -> Result<f64> {
    d2_logdet_with(ks, &ks.factorize())
}

pub fn d2_logdet_with(ks: &KernelSystem, f: &Factorization) -> Result<f64> {
    let eps = ks.uniform_sign().ok_or(DarbouxError::MixedSignWeights)?;
    if ks.is_empty() {
        return Ok(0.0);
    }
    if f.det_sign <= 0.0 {
        return Err(DarbouxError::NonPositiveDeterminant { x: ks.x, t: ks.t });
    }
    let z = f.solve(&ks.a);
    let p: f64 = ks.a.iter().zip(&z).map(|(a, z)| a * z).sum();
    let r: f64 = ks.a_dx.iter().zip(&z).map(|(a, z)| a * z).sum();
    Ok(-p * p - 2.0 * eps * r)
}

/// The same closed form for an explicit Gram matrix `A` with
/// `∂ₓ A = -a aᵀ`: `-⟨a, (I+A)⁻¹ a⟩² - 2 ⟨a', (I+A)⁻¹ a⟩`.
pub fn d2_logdet_gram(gram: &DMatrix<f64>, a: &[f64], a_dx: &[f64]) -> Result<f64> {
    if a.is_empty() {
        return Ok(0.0);
    }
    let f = Factorization::new(gram, &vec![1.0; a.len()]);
    if f.det_sign <= 0.0 {
        return Err(DarbouxError::NonPositiveDeterminant {
            x: f64::NAN,
            t: f64::NAN,
        });
    }
    let z = f.solve(a);
    let p: f64 = a.iter().zip(&z).map(|(a, z)| a * z).sum();
    let r: f64 = a_dx.iter().zip(&z).map(|(a, z)| a * z).sum();
    Ok(-p * p - 2.0 * r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::{discretize, Scheme, SpectralMeasure};

    fn one_atom(mode: Mode, x: f64) -> KernelSystem {
        let dm = discretize(&SpectralMeasure::atom(1.0, 2.0).unwrap(), 1, Scheme::GaussLegendre).unwrap();
        KernelSystem::assemble(&BackgroundModel::Zero, &dm, x, 0.0, mode).unwrap()
    }

    #[test]
    fn empty_system() {
        let ks = KernelSystem::assemble(
            &BackgroundModel::Zero,
            &DiscretizedMeasure::empty(),
            0.0,
            0.0,
            Mode::Add,
        )
        .unwrap();
        assert!(ks.is_empty());
        assert!(solve(&ks).unwrap().y.is_empty());
        assert_eq!(log_det(&ks).unwrap(), 0.0);
        assert_eq!(d2_logdet(&ks).unwrap(), 0.0);
    }

    #[test]
    fn single_atom_system() {
        let ks = one_atom(Mode::Add, 0.0);
        let k = ks.kernel_matrix();
        assert!((k[(0, 0)] - 0.5).abs() < 1e-14);
        // I + K W = [2]
        assert!((ks.matrix[(0, 0)] - 1.0).abs() < 1e-14);
        let sol = solve(&ks).unwrap();
        assert!((sol.y[0] - 0.5).abs() < 1e-14);
        assert!((log_det(&ks).unwrap() - 2f64.ln()).abs() < 1e-14);
        // q = -2 d2 = -2 at the crest
        assert!((-2.0 * d2_logdet(&ks).unwrap() + 2.0).abs() < 1e-13);
    }

    #[test]
    fn removal_is_singular_at_the_crossing() {
        let ks = one_atom(Mode::Remove, 0.0);
        assert!(determinant(&ks).abs() < 1e-15);
        assert!(matches!(solve(&ks), Err(DarbouxError::SingularSystem { .. })));
        for x in [-1.0, -1e-3] {
            assert!(matches!(
                solve(&one_atom(Mode::Remove, x)),
                Err(DarbouxError::SingularSystem { .. })
            ));
            assert!(matches!(
                log_det(&one_atom(Mode::Remove, x)),
                Err(DarbouxError::NonPositiveDeterminant { .. })
            ));
        }
        for x in [1e-3, 0.5, 3.0] {
            let ks = one_atom(Mode::Remove, x);
            assert!((determinant(&ks) - (1.0 - (-2.0 * x).exp())).abs() < 1e-14);
            assert!(solve(&ks).is_ok());
        }
    }

    #[test]
    fn two_soliton_log_det_matches_dense_determinant() {
        let dm = discretize(
            &SpectralMeasure::atoms(&[(1.0, 1.0), (2.0, 1.0)]).unwrap(),
            1,
            Scheme::GaussLegendre,
        )
        .unwrap();
        let ks = KernelSystem::assemble(&BackgroundModel::Zero, &dm, 0.0, 0.0, Mode::Add).unwrap();
        let dense: f64 = DMatrix::from_row_slice(2, 2, &[1.5, 1.0 / 3.0, 1.0 / 3.0, 1.25]).determinant();
        assert!((log_det(&ks).unwrap() - dense.ln()).abs() < 1e-14);
        let fd = |h: f64| {
            let f = |x: f64| {
                log_det(&KernelSystem::assemble(&BackgroundModel::Zero, &dm, x, 0.0, Mode::Add).unwrap()).unwrap()
            };
            (f(h) - 2.0 * f(0.0) + f(-h)) / (h * h)
        };
        let richardson = (4.0 * fd(5e-4) - fd(1e-3)) / 3.0;
        assert!((d2_logdet(&ks).unwrap() - richardson).abs() < 1e-6);
    }

    #[test]
    fn mixed_signs_refuse_closed_form() {
        let dm = discretize(
            &SpectralMeasure::atoms(&[(1.0, 1.0), (2.0, -0.1)]).unwrap(),
            1,
            Scheme::GaussLegendre,
        )
        .unwrap();
        let ks = KernelSystem::assemble(&BackgroundModel::Zero, &dm, 1.0, 0.0, Mode::Add).unwrap();
        assert_eq!(d2_logdet(&ks), Err(DarbouxError::MixedSignWeights));
        assert!(solve(&ks).is_ok());
    }

    #[test]
    fn gas_system_is_positive_definite() {
        let dm = discretize(&SpectralMeasure::semicircle(), 48, Scheme::GaussLegendre).unwrap();
        for x in [-3.0, 0.0, 4.0] {
            let ks = KernelSystem::assemble(&BackgroundModel::Zero, &dm, x, 0.2, Mode::Add).unwrap();
            let m = &ks.matrix;
            assert!((m - m.transpose()).amax() <= 1e-14 * m.amax());
            let eig = m.clone().symmetric_eigen().eigenvalues.min();
            assert!(eig >= -1e-10 * m.amax(), "x = {x}: {eig}");
            assert!(log_det(&ks).unwrap() >= -1e-10);
        }
    }
}
