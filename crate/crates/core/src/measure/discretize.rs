use serde::{Deserialize, Serialize};

use super::SpectralMeasure;
use crate::error::{DarbouxError, Result};
use crate::quadrature::gauss_legendre_on;

/// Quadrature rule used for absolutely continuous parts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Gauss–Legendre mapped to the support.
    #[default]
    GaussLegendre,
    /// `s = b sin(theta)` followed by Gauss–Legendre in `theta`, for
    /// densities with a `sqrt(b^2 - s^2)` edge at `b`. Parts without such an
    /// edge fall back to plain Gauss–Legendre.
    #[serde(alias = "sine_substitution")]
    Sine,
}

/// Nodes and signed weights approximating a [`SpectralMeasure`].
#[derive(Debug, Clone, PartialEq)]
pub struct DiscretizedMeasure {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub scheme: Scheme,
    pub parent: SpectralMeasure,
}

impl DiscretizedMeasure {
    pub fn empty() -> Self {
        DiscretizedMeasure {
            nodes: vec![],
            weights: vec![],
            scheme: Scheme::default(),
            parent: SpectralMeasure::zero(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn is_nonnegative(&self) -> bool {
        self.weights.iter().all(|&w| w >= 0.0)
    }

    /// Same nodes, weights (and parent) sign-flipped.
    pub fn negated(&self) -> Self {
        DiscretizedMeasure {
            nodes: self.nodes.clone(),
            weights: self.weights.iter().map(|w| -w).collect(),
            scheme: self.scheme,
            parent: self.parent.negate(),
        }
    }
}

fn part_rule(n: usize, a: f64, b: f64, scheme: Scheme, sqrt_edge_at_b: bool) -> (Vec<f64>, Vec<f64>) {
    match scheme {
        Scheme::Sine if sqrt_edge_at_b => {
            let theta_lo = (a / b).asin();
            let (theta, w) = gauss_legendre_on(n, theta_lo, std::f64::consts::FRAC_PI_2);
            theta
                .iter()
                .zip(&w)
                .map(|(&th, &wi)| (b * th.sin(), wi * b * th.cos()))
                .unzip()
        }
        _ => gauss_legendre_on(n, a, b),
    }
}

/// Atoms pass through unchanged; each ac part contributes `n_per_component`
/// nodes with weight `rule weight * density(node)`. Coincident nodes are
/// merged and exact zeros dropped, so nodes come out strictly increasing.
pub fn discretize(sigma: &SpectralMeasure, n_per_component: usize, scheme: Scheme) -> Result<DiscretizedMeasure> {
    if n_per_component == 0 {
        return Err(DarbouxError::Config(
            "discretization needs at least one node per component".into(),
        ));
    }
    let mut pairs: Vec<(f64, f64)> = sigma.atoms.iter().map(|a| (a.kappa, a.weight)).collect();
    for part in &sigma.ac_parts {
        let edge = part.density.has_sqrt_edge() && part.b == part.density.domain().1;
        let (nodes, rule) = part_rule(n_per_component, part.a, part.b, scheme, edge);
        for (s, w) in nodes.into_iter().zip(rule) {
            pairs.push((s, w * part.value(s)?));
        }
    }
    pairs.sort_by(|l, r| l.0.total_cmp(&r.0));
    let mut nodes: Vec<f64> = Vec::with_capacity(pairs.len());
    let mut weights: Vec<f64> = Vec::with_capacity(pairs.len());
    for (s, w) in pairs {
        match nodes.last() {
            Some(&last) if last == s => *weights.last_mut().unwrap() += w,
            _ => {
                nodes.push(s);
                weights.push(w);
            }
        }
    }
    let (nodes, weights) = nodes.into_iter().zip(weights).filter(|&(_, w)| w != 0.0).unzip();
    Ok(DiscretizedMeasure {
        nodes,
        weights,
        scheme,
        parent: sigma.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::SpectralMeasure;

    #[test]
    fn atoms_are_exact() {
        let m = SpectralMeasure::atoms(&[(2.0, 0.5), (1.0, 2.0)]).unwrap();
        for n in [1, 7, 64] {
            let d = discretize(&m, n, Scheme::GaussLegendre).unwrap();
            assert_eq!(d.nodes, vec![1.0, 2.0]);
            assert_eq!(d.weights, vec![2.0, 0.5]);
        }
    }

    #[test]
    fn semicircle_mass_gauss_legendre() {
        let d = discretize(&SpectralMeasure::semicircle(), 64, Scheme::GaussLegendre).unwrap();
        // The sqrt edge limits plain Gauss–Legendre to O(n^-3): 1.09e-6 here.
        let err = d.total() - 2.0 / 3.0;
        assert!(err > 1.0e-6 && err < 1.2e-6, "{err}");
        assert!(d.is_nonnegative());
        assert!(d.nodes.windows(2).all(|p| p[0] < p[1]) && d.nodes[0] > 0.0);
    }

    #[test]
    fn semicircle_mass_sine() {
        let d = discretize(&SpectralMeasure::semicircle(), 64, Scheme::Sine).unwrap();
        assert!((d.total() - 2.0 / 3.0).abs() < 1e-10);
    }

    #[test]
    fn self_convergence_under_doubling() {
        // Plain Gauss–Legendre only reaches the 1e-6 doubling band from n = 128.
        for (scheme, start) in [(Scheme::GaussLegendre, 128), (Scheme::Sine, 64)] {
            let mut n = start;
            while n <= 512 {
                let a = discretize(&SpectralMeasure::semicircle(), n, scheme).unwrap().total();
                let b = discretize(&SpectralMeasure::semicircle(), 2 * n, scheme)
                    .unwrap()
                    .total();
                assert!((a - b).abs() < a * 1e-6, "{scheme:?} n = {n}");
                n *= 2;
            }
        }
    }

    #[test]
    fn zero_nodes_rejected() {
        assert!(discretize(&SpectralMeasure::semicircle(), 0, Scheme::GaussLegendre).is_err());
    }

    #[test]
    fn cancelling_atoms_vanish() {
        let m = SpectralMeasure::atom(1.0, 2.0)
            .unwrap()
            .plus(&SpectralMeasure::atom(1.0, -2.0).unwrap());
        assert!(discretize(&m, 4, Scheme::GaussLegendre).unwrap().is_empty());
    }

    #[test]
    fn restricted_part_uses_plain_rule_under_sine() {
        let r = SpectralMeasure::semicircle().restrict(0.2, 0.8);
        let a = discretize(&r, 16, Scheme::Sine).unwrap();
        let b = discretize(&r, 16, Scheme::GaussLegendre).unwrap();
        assert_eq!(a.nodes, b.nodes);
    }
}
