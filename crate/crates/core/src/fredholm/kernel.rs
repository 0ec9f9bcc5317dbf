//! Kernel entries `K(k/i, s; x, t) = ∫_x^∞ ψ(z, t; k) ψ(z, t; is) dz`.
//!
//! Away from the diagonal the integral collapses to a Wronskian quotient of
//! boundary values. Near `k = is` that quotient cancels catastrophically and
//! the entry is taken from [`LocalBackground::kernel_near_diagonal`] instead.

use num_complex::Complex64;

use crate::background::{BackgroundModel, LocalBackground};
use crate::error::{DarbouxError, Result};
use crate::quadrature::half_line_exponential;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Relative distance below which an entry counts as near-diagonal.
pub const NEAR_DIAGONAL_REL: f64 = 1e-3;

pub fn is_near_diagonal(k: Complex64, s: f64) -> bool {
    (k - I * s).norm() <= NEAR_DIAGONAL_REL * k.norm().max(s)
}

fn check_decay(k: Complex64, s: f64) -> Result<()> {
    if k.im + s > 0.0 {
        Ok(())
    } else {
        Err(DarbouxError::NonDecayingJost {
            k_re: k.re,
            k_im: k.im,
            s,
        })
    }
}

/// `(ψ'(k) ψ(is) - ψ(k) ψ'(is)) / (s^2 + k^2)`.
pub fn wronskian_quotient(
    psi_k: Complex64,
    dpsi_k: Complex64,
    k: Complex64,
    psi_s: f64,
    dpsi_s: f64,
    s: f64,
) -> Complex64 {
    (dpsi_k * psi_s - psi_k * dpsi_s) / (k * k + s * s)
}

/// Kernel entries `K(k/i, s_j)` for every node, given the background Jost
/// values `ψ(is_j)`, `ψ'(is_j)` already evaluated at the same point.
pub fn kernel_row(
    bg: &LocalBackground,
    k: Complex64,
    nodes: &[f64],
    jost: &[f64],
    jost_dx: &[f64],
) -> Result<Vec<Complex64>> {
    if nodes.is_empty() {
        return Ok(vec![]);
    }
    kernel_row_with(bg, k, bg.jost(k)?, bg.jost_dx(k)?, nodes, jost, jost_dx)
}

/// [`kernel_row`] with `ψ(k)`, `ψ'(k)` supplied by the caller.
pub fn kernel_row_with(
    bg: &LocalBackground,
    k: Complex64,
    psi_k: Complex64,
    dpsi_k: Complex64,
    nodes: &[f64],
    jost: &[f64],
    jost_dx: &[f64],
) -> Result<Vec<Complex64>> {
    nodes
        .iter()
        .zip(jost.iter().zip(jost_dx))
        .map(|(&s, (&p, &dp))| {
            check_decay(k, s)?;
            if is_near_diagonal(k, s) {
                bg.kernel_near_diagonal(k, s)
            } else {
                Ok(wronskian_quotient(psi_k, dpsi_k, k, p, dp, s))
            }
        })
        .collect()
}

/// Single entry `K(k/i, s)` on an evaluated background.
pub fn kernel_local(bg: &LocalBackground, k: Complex64, s: f64) -> Result<Complex64> {
    check_decay(k, s)?;
    if is_near_diagonal(k, s) {
        return bg.kernel_near_diagonal(k, s);
    }
    let (p, dp) = bg.jost_imag(s)?;
    Ok(wronskian_quotient(bg.jost(k)?, bg.jost_dx(k)?, k, p, dp, s))
}

/// `∫_x^∞ e^{ikz} e^{-sz} dz = e^{(ik - s)x} / (s - ik)`.
pub fn zero_kernel_closed_form(k: Complex64, s: f64, x: f64) -> Result<Complex64> {
    check_decay(k, s)?;
    let c = I * k - s;
    Ok((c * x).exp() / -c)
}

/// `∫_x^∞ e^{ikz} e^{-sz} dz` by adaptive quadrature plus exponential tail;
/// oracle for [`zero_kernel_closed_form`].
pub fn zero_kernel_by_quadrature(k: Complex64, s: f64, x: f64) -> Result<Complex64> {
    check_decay(k, s)?;
    let c = I * k - s;
    half_line_exponential(|z| Ok::<_, DarbouxError>((c * z).exp()), x, c)
}

/// The defining integral evaluated by quadrature on any background. Costly
/// for transformed backgrounds (one solve per integrand sample); this is the
/// independent oracle for the Wronskian and near-diagonal branches.
pub fn kernel_by_quadrature(bg: &BackgroundModel, k: Complex64, s: f64, x: f64, t: f64) -> Result<Complex64> {
    check_decay(k, s)?;
    let c = I * k - s;
    half_line_exponential(
        |z| {
            let local = bg.at(z, t)?;
            Ok::<_, DarbouxError>(local.jost(k)? * local.jost_imag(s)?.0)
        },
        x,
        c,
    )
}

/// `K(k/i, s; x, t)` for complex `k`.
pub fn kernel_entry_complex(bg: &BackgroundModel, k: Complex64, s: f64, x: f64, t: f64) -> Result<Complex64> {
    kernel_local(&bg.at(x, t)?, k, s)
}

/// `K(alpha, s; x, t)` for real wavenumbers `alpha, s > 0`.
pub fn kernel_entry(bg: &BackgroundModel, alpha: f64, s: f64, x: f64, t: f64) -> Result<f64> {
    Ok(kernel_entry_complex(bg, I * alpha, s, x, t)?.re)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_background_closed_form() {
        let bg = BackgroundModel::Zero;
        assert!((kernel_entry(&bg, 1.0, 1.0, 0.0, 0.0).unwrap() - 0.5).abs() < 1e-14);
        let v = kernel_entry(&bg, 1.0, 2.0, 1.0, 0.0).unwrap();
        assert!((v - (-3f64).exp() / 3.0).abs() < 1e-16);
        assert!((v - 0.016_595).abs() < 1e-6);
    }

    #[test]
    fn branch_boundary_agrees() {
        let bg = BackgroundModel::Zero;
        let s = 1.000_000_1;
        let exact = 1.0 / (1.0 + s);
        let local = bg.at(0.0, 0.0).unwrap();
        let near = local.kernel_near_diagonal(I, s).unwrap().re;
        let quad = zero_kernel_by_quadrature(I, s, 0.0).unwrap().re;
        assert!((quad - exact).abs() < 1e-14);
        let (p, dp) = local.jost_imag(s).unwrap();
        let wr = wronskian_quotient(local.jost(I).unwrap(), local.jost_dx(I).unwrap(), I, p, dp, s).re;
        assert!((near - exact).abs() < 1e-8);
        assert!((wr - exact).abs() < 1e-8);
        assert!((kernel_entry(&bg, 1.0, s, 0.0, 0.0).unwrap() - exact).abs() < 1e-14);
    }

    #[test]
    fn quadrature_matches_closed_form_for_complex_k() {
        let k = Complex64::new(0.7, 0.3);
        for x in [-2.0, 0.0, 1.5] {
            let q = zero_kernel_by_quadrature(k, 0.9, x).unwrap();
            let exact = ((I * k - 0.9) * x).exp() / (0.9 - I * k);
            assert!((q - exact).norm() < 1e-13 * exact.norm(), "x = {x}");
            let w = kernel_entry_complex(&BackgroundModel::Zero, k, 0.9, x, 0.0).unwrap();
            assert!((w - exact).norm() < 1e-13 * exact.norm());
        }
    }

    #[test]
    fn symmetric_in_its_arguments() {
        let bg = BackgroundModel::Zero;
        let a = kernel_entry(&bg, 0.3, 1.7, -0.4, 0.0).unwrap();
        let b = kernel_entry(&bg, 1.7, 0.3, -0.4, 0.0).unwrap();
        assert!((a - b).abs() < 1e-12 * a.abs());
    }

    #[test]
    fn non_decaying_pair_is_an_error() {
        let r = kernel_entry_complex(&BackgroundModel::Zero, Complex64::new(1.0, -2.0), 1.0, 0.0, 0.0);
        assert!(matches!(r, Err(DarbouxError::NonDecayingJost { .. })));
    }
}
