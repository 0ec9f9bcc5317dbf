use serde::Serialize;

use super::{AcPart, SpectralMeasure};
use crate::quadrature::gauss_legendre_on;

/// Equispaced sample points per ac component used to test `ρ + σ >= 0`.
pub const NONNEGATIVITY_SAMPLES: usize = 1024;

const NEGATIVITY_TOL: f64 = 1e-12;

/// Outcome of [`check_admissible`]. A report, not an error: callers decide
/// whether an inadmissible pair is fatal.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdmissibilityReport {
    /// `∫ |dσ(s)| / s`, `inf` when it diverges.
    pub inverse_moment: f64,
    pub inverse_moment_finite: bool,
    pub nonnegative: bool,
    pub violations: Vec<String>,
}

impl AdmissibilityReport {
    pub fn admissible(&self) -> bool {
        self.inverse_moment_finite && self.nonnegative
    }
}

fn inverse_moment(sigma: &SpectralMeasure, violations: &mut Vec<String>) -> f64 {
    let mut total: f64 = sigma.atoms.iter().map(|a| a.weight.abs() / a.kappa).sum();
    for p in &sigma.ac_parts {
        if p.a == 0.0 && !p.density.vanishes_at_origin() {
            violations.push(format!(
                "{} density on [0, {}] has a divergent inverse moment",
                p.density.name(),
                p.b
            ));
            return f64::INFINITY;
        }
        let (nodes, w) = gauss_legendre_on(128, p.a, p.b);
        total += nodes
            .iter()
            .zip(&w)
            .map(|(&s, wi)| wi * p.value(s).map(|v| v.abs() / s).unwrap_or(f64::INFINITY))
            .sum::<f64>();
    }
    total
}

fn combined_density(parts: &[&AcPart], s: f64) -> (f64, f64) {
    parts
        .iter()
        .filter(|p| p.contains(s))
        .filter_map(|p| p.value(s).ok())
        .fold((0.0, 0.0), |(sum, mag), v| (sum + v, mag + v.abs()))
}

/// Checks `∫|dσ|/s < ∞` and `dρ + dσ >= 0`.
///
/// Point masses are compared wavenumber by wavenumber; a negative combined
/// point mass cannot be offset by a density. The combined density is sampled
/// at [`NONNEGATIVITY_SAMPLES`] equispaced points (endpoints included) across
/// every ac component of either measure.
pub fn check_admissible(rho: &SpectralMeasure, sigma: &SpectralMeasure) -> AdmissibilityReport {
    let mut violations = Vec::new();
    let inverse_moment = inverse_moment(sigma, &mut violations);

    let combined = rho.plus(sigma);
    let mut nonnegative = true;
    for atom in &combined.atoms {
        let scale = rho
            .atoms
            .iter()
            .chain(&sigma.atoms)
            .filter(|a| a.kappa == atom.kappa)
            .map(|a| a.weight.abs())
            .sum::<f64>();
        if atom.weight < -NEGATIVITY_TOL * scale.max(1.0) {
            nonnegative = false;
            violations.push(format!(
                "negative total at kappa={}: combined point mass {}",
                atom.kappa, atom.weight
            ));
        }
    }

    let parts: Vec<&AcPart> = combined.ac_parts.iter().collect();
    for part in &parts {
        let n = NONNEGATIVITY_SAMPLES;
        for i in 0..n {
            let s = part.a + (part.b - part.a) * i as f64 / (n - 1) as f64;
            let (sum, mag) = combined_density(&parts, s);
            if sum < -NEGATIVITY_TOL * mag.max(f64::MIN_POSITIVE) {
                nonnegative = false;
                violations.push(format!("negative combined density {sum:.3e} at s={s}"));
                break;
            }
        }
    }

    AdmissibilityReport {
        inverse_moment,
        inverse_moment_finite: inverse_moment.is_finite(),
        nonnegative,
        violations,
    }
}
