//! Backgrounds: Jost solutions, their x-derivatives and potentials, plus the
//! closed-form reference solutions used as oracles.

use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{DarbouxError, Result};
use crate::fredholm::{self, kernel};
use crate::measure::{density, SpectralMeasure};
use crate::transform::{FieldState, PotentialField};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// A background potential with its right Jost solution.
#[derive(Debug, Clone, Default)]
pub enum BackgroundModel {
    #[default]
    Zero,
    Transformed(Arc<PotentialField>),
}

impl BackgroundModel {
    /// Everything needed to evaluate this background at a single `(x, t)`.
    pub fn at(&self, x: f64, t: f64) -> Result<LocalBackground> {
        match self {
            BackgroundModel::Zero => Ok(LocalBackground::Zero { x, t }),
            BackgroundModel::Transformed(field) => Ok(LocalBackground::Transformed(Box::new(field.state(x, t)?))),
        }
    }

    pub fn jost(&self, x: f64, t: f64, k: Complex64) -> Result<Complex64> {
        self.at(x, t)?.jost(k)
    }

    pub fn jost_dx(&self, x: f64, t: f64, k: Complex64) -> Result<Complex64> {
        self.at(x, t)?.jost_dx(k)
    }

    pub fn potential(&self, x: f64, t: f64) -> Result<f64> {
        self.at(x, t)?.potential()
    }

    /// Norming measure of the background relative to the zero potential.
    pub fn norming_measure(&self) -> SpectralMeasure {
        match self {
            BackgroundModel::Zero => SpectralMeasure::zero(),
            BackgroundModel::Transformed(f) => f.norming_measure(),
        }
    }

    /// Number of transformations stacked on the zero potential.
    pub fn depth(&self) -> usize {
        match self {
            BackgroundModel::Zero => 0,
            BackgroundModel::Transformed(f) => 1 + f.background().depth(),
        }
    }
}

impl From<PotentialField> for BackgroundModel {
    fn from(field: PotentialField) -> Self {
        BackgroundModel::Transformed(Arc::new(field))
    }
}

/// A background evaluated at one `(x, t)`. For transformed backgrounds this
/// holds the solved system, so repeated Jost and kernel evaluations at the
/// same point are cheap.
#[derive(Debug)]
pub enum LocalBackground {
    Zero { x: f64, t: f64 },
    Transformed(Box<FieldState>),
}

impl LocalBackground {
    pub fn x(&self) -> f64 {
        match self {
            LocalBackground::Zero { x, .. } => *x,
            LocalBackground::Transformed(s) => s.x(),
        }
    }

    pub fn t(&self) -> f64 {
        match self {
            LocalBackground::Zero { t, .. } => *t,
            LocalBackground::Transformed(s) => s.t(),
        }
    }

    pub fn jost(&self, k: Complex64) -> Result<Complex64> {
        match self {
            LocalBackground::Zero { x, .. } => Ok(zero_jost(*x, k)),
            LocalBackground::Transformed(s) => s.jost(k),
        }
    }

    pub fn jost_dx(&self, k: Complex64) -> Result<Complex64> {
        match self {
            LocalBackground::Zero { x, .. } => Ok(I * k * zero_jost(*x, k)),
            LocalBackground::Transformed(s) => s.jost_dx(k),
        }
    }

    /// `(ψ(x, is), ψ'(x, is))`, both real.
    pub fn jost_imag(&self, s: f64) -> Result<(f64, f64)> {
        match self {
            LocalBackground::Zero { x, .. } => {
                let e = (-s * x).exp();
                Ok((e, -s * e))
            }
            LocalBackground::Transformed(st) => st.jost_imag(s),
        }
    }

    pub fn potential(&self) -> Result<f64> {
        match self {
            LocalBackground::Zero { .. } => Ok(0.0),
            LocalBackground::Transformed(s) => s.potential_direct(),
        }
    }

    /// `∫_x^∞ ψ(z, k) ψ(z, is) dz` for `k` close to `is`, where the
    /// Wronskian quotient loses its digits.
    pub fn kernel_near_diagonal(&self, k: Complex64, s: f64) -> Result<Complex64> {
        match self {
            LocalBackground::Zero { x, .. } => kernel::zero_kernel_closed_form(k, s, *x),
            LocalBackground::Transformed(st) => st.kernel_exact(k, s),
        }
    }
}

/// `e^{ikx}`.
pub fn zero_jost(x: f64, k: Complex64) -> Complex64 {
    (I * k * x).exp()
}

/// Reflection coefficient of the step `q = -h^2` on `x < 0`, `0` on `x > 0`:
/// `R(k) = -(h / (|k| + sqrt(k^2 + h^2)))^2`. At `k = 0` this is the limit `-1`.
pub fn pure_step_reflection(h: f64, k: f64) -> Complex64 {
    let r = h / (k.abs() + (k * k + h * h).sqrt());
    Complex64::new(-r * r, 0.0)
}

/// `(2k / (pi h^2)) sqrt(h^2 - k^2)` on `[0, h]`.
pub fn pure_step_norming_density(h: f64, k: f64) -> Result<f64> {
    if !(k >= 0.0 && k <= h) {
        return Err(DarbouxError::Domain {
            what: "k",
            value: k,
            domain: format!("[0, {h}]"),
        });
    }
    Ok(density::pure_step_density_unchecked(h, k))
}

/// `-2 kappa^2 sech^2(4 kappa^3 t - kappa x + log(c / sqrt(2 kappa)))`.
pub fn one_soliton_reference(kappa: f64, c: f64, x: f64, t: f64) -> f64 {
    let arg = 4.0 * kappa.powi(3) * t - kappa * x + (c / (2.0 * kappa).sqrt()).ln();
    if arg.abs() > 350.0 {
        return 0.0;
    }
    let e = (-2.0 * arg.abs()).exp();
    // sech^2(u) = 4 e^{-2|u|} / (1 + e^{-2|u|})^2
    -2.0 * kappa * kappa * 4.0 * e / ((1.0 + e) * (1.0 + e))
}

/// Pure N-soliton potential `-2 d^2/dx^2 log det(I + A)` with
/// `A_mn = a_m a_n / (kappa_m + kappa_n)`, `a_m = c_m e^{4 kappa_m^3 t - kappa_m x}`.
pub fn nsoliton_reference(kappas: &[f64], cs: &[f64], x: f64, t: f64) -> Result<f64> {
    if kappas.len() != cs.len() {
        return Err(DarbouxError::Config(format!(
            "{} wavenumbers but {} norming constants",
            kappas.len(),
            cs.len()
        )));
    }
    let a: Vec<f64> = kappas
        .iter()
        .zip(cs)
        .map(|(&k, &c)| c * (4.0 * k.powi(3) * t - k * x).exp())
        .collect();
    let a_dx: Vec<f64> = kappas.iter().zip(&a).map(|(k, a)| -k * a).collect();
    let n = a.len();
    let gram = DMatrix::from_fn(n, n, |i, j| a[i] * a[j] / (kappas[i] + kappas[j]));
    let d2 = fredholm::d2_logdet_gram(&gram, &a, &a_dx).map_err(|e| match e {
        DarbouxError::NonPositiveDeterminant { .. } => DarbouxError::NonPositiveDeterminant { x, t },
        other => other,
    })?;
    Ok(-2.0 * d2)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_jost_values() {
        assert_eq!(zero_jost(0.0, I), Complex64::new(1.0, 0.0));
        assert!((zero_jost(1.0, I).re - (-1f64).exp()).abs() < 1e-16);
        let v = zero_jost(2.0, Complex64::new(0.5, 0.0));
        assert!((v - Complex64::new(1f64.cos(), 1f64.sin())).norm() < 1e-15);
        let bg = BackgroundModel::Zero;
        assert_eq!(bg.potential(3.0, 1.0).unwrap(), 0.0);
        let d = bg.jost_dx(1.0, 0.0, 2.0 * I).unwrap();
        assert!((d.re + 2.0 * (-2f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn pure_step_reflection_values() {
        let r = pure_step_reflection(1.0, 1.0);
        assert!((r.re + 0.171_572_875_253_809_9).abs() < 1e-12);
        assert!(pure_step_reflection(1.0, 20.0).norm() < 1e-3);
        assert_eq!(pure_step_reflection(1.0, 0.0).re, -1.0);
        assert!((pure_step_reflection(1.0, 1e-9).re + 1.0).abs() < 1e-8);
        for k in [-3.0, -0.2, 0.1, 2.0, 50.0] {
            assert!(pure_step_reflection(2.0, k).norm() <= 1.0);
        }
    }

    #[test]
    fn pure_step_density_values() {
        assert_eq!(pure_step_norming_density(1.0, 0.0).unwrap(), 0.0);
        assert_eq!(pure_step_norming_density(1.0, 1.0).unwrap(), 0.0);
        let v = pure_step_norming_density(1.0, 0.5).unwrap();
        assert!((v - 0.275_664).abs() < 1e-6);
        assert!(matches!(
            pure_step_norming_density(1.0, 1.5),
            Err(DarbouxError::Domain { .. })
        ));
    }

    #[test]
    fn one_soliton_examples() {
        let c = 2f64.sqrt();
        assert!((one_soliton_reference(1.0, c, 0.0, 0.0) + 2.0).abs() < 1e-15);
        for t in [0.1, 0.5, 1.3] {
            assert!((one_soliton_reference(1.0, c, 4.0 * t, t) + 2.0).abs() < 1e-12);
        }
        let far = one_soliton_reference(1.0, c, 10.0, 0.0);
        let expect = -2.0 / 10f64.cosh().powi(2);
        assert!((far - expect).abs() < 1e-20 && (far + 1.65e-8).abs() < 1e-10);
        assert_eq!(one_soliton_reference(1.0, c, 1000.0, 0.0), 0.0);
    }

    #[test]
    fn nsoliton_one_matches_closed_form() {
        let c = 2f64.sqrt();
        for i in 0..100 {
            let x = -10.0 + 0.2 * i as f64;
            let a = nsoliton_reference(&[1.0], &[c], x, 0.3).unwrap();
            let b = one_soliton_reference(1.0, c, x, 0.3);
            assert!((a - b).abs() < 1e-10, "x = {x}: {a} vs {b}");
        }
    }

    fn log_det_two(x: f64) -> f64 {
        let k = [1.0, 2.0];
        let a: Vec<f64> = k.iter().map(|&k: &f64| (-k * x).exp()).collect();
        let m = DMatrix::from_fn(2, 2, |i, j| {
            (if i == j { 1.0 } else { 0.0 }) + a[i] * a[j] / (k[i] + k[j])
        });
        m.determinant().ln()
    }

    #[test]
    fn nsoliton_two_matches_finite_differences() {
        let d = |h: f64| (log_det_two(h) - 2.0 * log_det_two(0.0) + log_det_two(-h)) / (h * h);
        let h = 1e-3;
        let fd = -2.0 * (4.0 * d(h / 2.0) - d(h)) / 3.0;
        let q = nsoliton_reference(&[1.0, 2.0], &[1.0, 1.0], 0.0, 0.0).unwrap();
        assert!((q - fd).abs() < 1e-6, "{q} vs {fd}");
        let far = nsoliton_reference(&[1.0, 2.0], &[1.0, 1.0], 20.0, 0.0).unwrap();
        let farther = nsoliton_reference(&[1.0, 2.0], &[1.0, 1.0], 25.0, 0.0).unwrap();
        assert!(far.abs() < 1e-15 && farther.abs() < far.abs() * 1e-3);
    }
}
