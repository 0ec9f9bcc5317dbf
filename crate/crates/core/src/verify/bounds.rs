use nalgebra::DMatrix;
use serde::Serialize;

use crate::background::BackgroundModel;
use crate::error::Result;
use crate::fredholm::{KernelSystem, Mode};
use crate::measure::DiscretizedMeasure;

/// Both sides of `‖A - B‖₂ ≤ (|||a||| + |||b|||) |||a - b|||`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HsBound {
    pub lhs: f64,
    pub rhs: f64,
    pub norm_a: f64,
    pub norm_b: f64,
    pub norm_diff: f64,
}

impl HsBound {
    /// The inequality, with a few ulps of slack for the equality case.
    pub fn holds(&self) -> bool {
        self.lhs <= self.rhs * (1.0 + 1e-12) + 1e-300
    }
}

fn union(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut all: Vec<f64> = a.iter().chain(b).copied().collect();
    all.sort_by(f64::total_cmp);
    all.dedup();
    all
}

fn evolved_on(nodes: &[f64], dm: &DiscretizedMeasure, t: f64) -> Vec<f64> {
    nodes
        .iter()
        .map(|s| {
            dm.nodes
                .iter()
                .zip(&dm.weights)
                .filter(|(n, _)| *n == s)
                .map(|(_, w)| w.abs())
                .sum::<f64>()
                * (8.0 * s.powi(3) * t).exp()
        })
        .collect()
}

/// Hilbert-Schmidt difference bound for the discretized operators of two
/// measures, with `|||a|||^2 = Σ μ_j K(s_j, s_j)` on the union of nodes.
pub fn hs_bound_check(
    dm_a: &DiscretizedMeasure,
    dm_b: &DiscretizedMeasure,
    bg: &BackgroundModel,
    x: f64,
    t: f64,
) -> Result<HsBound> {
    let nodes = union(&dm_a.nodes, &dm_b.nodes);
    let unit = vec![1.0; nodes.len()];
    let k = KernelSystem::assemble_local(&bg.at(x, t)?, &nodes, &unit, Mode::Add)?.kernel_matrix();
    let (ma, mb) = (evolved_on(&nodes, dm_a, t), evolved_on(&nodes, dm_b, t));
    let (ra, rb): (Vec<f64>, Vec<f64>) = (
        ma.iter().map(|m| m.sqrt()).collect(),
        mb.iter().map(|m| m.sqrt()).collect(),
    );
    let n = nodes.len();
    let diff = DMatrix::from_fn(n, n, |i, j| (ra[i] * ra[j] - rb[i] * rb[j]) * k[(i, j)]);
    let diag_norm = |v: &dyn Fn(usize) -> f64| (0..n).map(|i| v(i) * k[(i, i)]).sum::<f64>().sqrt();
    let norm_a = diag_norm(&|i| ma[i]);
    let norm_b = diag_norm(&|i| mb[i]);
    let norm_diff = diag_norm(&|i| (ra[i] - rb[i]).powi(2));
    Ok(HsBound {
        lhs: diff.norm(),
        rhs: (norm_a + norm_b) * norm_diff,
        norm_a,
        norm_b,
        norm_diff,
    })
}

/// `F(x) = Σ_j |w_j| e^{8 s_j^3 t} ψ(x, t; i s_j)^2`, the discretized
/// `∫ ψ(x, is)^2 dσ_t`.
pub fn jost_energy(bg: &BackgroundModel, dm: &DiscretizedMeasure, x: f64, t: f64) -> Result<f64> {
    let local = bg.at(x, t)?;
    let mut total = 0.0;
    for (&s, &w) in dm.nodes.iter().zip(&dm.weights) {
        let (p, _) = local.jost_imag(s)?;
        total += w.abs() * (8.0 * s.powi(3) * t).exp() * p * p;
    }
    Ok(total)
}

/// Least-squares exponent `r` in `F(x) ≈ C e^{-r x}`.
pub fn fit_decay_rate(xs: &[f64], values: &[f64]) -> f64 {
    let logs: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = logs.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&logs).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    -sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::{discretize, Scheme, SpectralMeasure};
    use crate::transform::apply;

    #[test]
    fn identical_measures_give_zero() {
        let dm = discretize(&SpectralMeasure::semicircle(), 16, Scheme::Sine).unwrap();
        let b = hs_bound_check(&dm, &dm, &BackgroundModel::Zero, 0.5, 0.0).unwrap();
        assert_eq!(b.lhs, 0.0);
        assert_eq!(b.rhs, 0.0);
        assert!(b.holds());
    }

    #[test]
    fn perturbed_weights_match_direct_norms() {
        let a = discretize(
            &SpectralMeasure::atoms(&[(1.0, 1.0), (2.0, 0.5)]).unwrap(),
            1,
            Scheme::GaussLegendre,
        )
        .unwrap();
        let mut b = a.clone();
        b.weights[1] = 0.8;
        let r = hs_bound_check(&a, &b, &BackgroundModel::Zero, 0.0, 0.0).unwrap();
        // zero background at x = 0: K_ij = 1 / (s_i + s_j)
        let (d1, d2) = (0.0, 0.5f64.sqrt() - 0.8f64.sqrt());
        let lhs = ((0.5 - 0.8) * 0.25f64).hypot(2f64.sqrt() * (0.5f64.sqrt() - 0.8f64.sqrt()) / 3.0);
        assert!((r.lhs - lhs).abs() < 1e-15);
        assert!((r.norm_diff - (d1 * d1 * 0.5 + d2 * d2 * 0.25f64).sqrt()).abs() < 1e-15);
        assert!(r.holds());
    }

    #[test]
    fn refined_discretization_on_transformed_background() {
        let rho = SpectralMeasure::semicircle();
        let coarse = discretize(&rho, 8, Scheme::Sine).unwrap();
        let fine = discretize(&rho, 16, Scheme::Sine).unwrap();
        let bg =
            BackgroundModel::from(apply(&BackgroundModel::Zero, &SpectralMeasure::atom(1.5, 1.0).unwrap(), 1).unwrap());
        for x in [-1.0, 0.0, 2.0] {
            let b = hs_bound_check(&coarse, &fine, &bg, x, 0.1).unwrap();
            assert!(b.holds() && b.lhs > 0.0, "{b:?}");
        }
    }

    #[test]
    fn jost_energy_decays_at_twice_the_lowest_node() {
        let sigma = SpectralMeasure::new(
            vec![],
            vec![crate::measure::AcPart::new(
                0.5,
                1.0,
                crate::measure::Density::Uniform { value: 1.0 },
            )],
        )
        .unwrap();
        let dm = discretize(&sigma, 16, Scheme::GaussLegendre).unwrap();
        let bg =
            BackgroundModel::from(apply(&BackgroundModel::Zero, &SpectralMeasure::atom(1.2, 1.0).unwrap(), 1).unwrap());
        let xs: Vec<f64> = (0..21).map(|i| 10.0 + i as f64).collect();
        let fs: Vec<f64> = xs.iter().map(|&x| jost_energy(&bg, &dm, x, 0.0).unwrap()).collect();
        let s_min = dm.nodes[0];
        assert!(fit_decay_rate(&xs, &fs) >= 1.8 * s_min);
    }
}
