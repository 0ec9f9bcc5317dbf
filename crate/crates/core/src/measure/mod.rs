//! Signed spectral measures on `[0, ∞)`: point masses plus absolutely
//! continuous parts drawn from a closed-form density catalog.

mod admissible;
pub(crate) mod density;
mod discretize;

pub use admissible::{check_admissible, AdmissibilityReport, NONNEGATIVITY_SAMPLES};
pub use density::Density;
pub use discretize::{discretize, DiscretizedMeasure, Scheme};

use serde::{Deserialize, Serialize};

use crate::error::{DarbouxError, Result};
use crate::quadrature::gauss_legendre_on;

/// Largest exponent accepted by [`SpectralMeasure::evolve`].
pub const MAX_EVOLUTION_EXPONENT: f64 = 700.0;

/// Atoms above this wavenumber are accepted but flagged by
/// [`SpectralMeasure::warnings`]; their evolution factors leave the
/// double-precision range after very short times.
pub const LARGE_KAPPA_WARNING: f64 = 50.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub kappa: f64,
    /// Signed mass `c^2`.
    pub weight: f64,
}

fn one() -> f64 {
    1.0
}

fn is_one(v: &f64) -> bool {
    *v == 1.0
}

fn is_zero(v: &f64) -> bool {
    *v == 0.0
}

/// Absolutely continuous part: `scale * density(s) * exp(8 s^3 time)` on
/// `[a, b]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcPart {
    pub a: f64,
    pub b: f64,
    #[serde(flatten)]
    pub density: Density,
    #[serde(default = "one", skip_serializing_if = "is_one")]
    pub scale: f64,
    /// Accumulated evolution time.
    #[serde(default, skip_serializing_if = "is_zero")]
    pub time: f64,
}

impl AcPart {
    pub fn new(a: f64, b: f64, density: Density) -> Self {
        AcPart {
            a,
            b,
            density,
            scale: 1.0,
            time: 0.0,
        }
    }

    pub fn value(&self, s: f64) -> Result<f64> {
        let base = self.density.eval(s)?;
        let growth = if self.time == 0.0 {
            1.0
        } else {
            (8.0 * s * s * s * self.time).exp()
        };
        Ok(self.scale * base * growth)
    }

    pub fn contains(&self, s: f64) -> bool {
        s >= self.a && s <= self.b
    }

    fn validate(&self) -> Result<()> {
        self.density.validate()?;
        let (lo, hi) = self.density.domain();
        if !(self.a >= 0.0 && self.a < self.b && self.b.is_finite()) {
            return Err(DarbouxError::InvalidMeasure(format!(
                "ac support [{}, {}] must satisfy 0 <= a < b < inf",
                self.a, self.b
            )));
        }
        if self.a < lo || self.b > hi {
            return Err(DarbouxError::InvalidMeasure(format!(
                "ac support [{}, {}] leaves the {} domain [{lo}, {hi}]",
                self.a,
                self.b,
                self.density.name()
            )));
        }
        if !self.scale.is_finite() || !self.time.is_finite() {
            return Err(DarbouxError::InvalidMeasure("ac scale and time must be finite".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SpectralMeasure {
    #[serde(default)]
    pub atoms: Vec<Atom>,
    #[serde(default, rename = "ac")]
    pub ac_parts: Vec<AcPart>,
}

impl SpectralMeasure {
    pub fn new(atoms: Vec<Atom>, ac_parts: Vec<AcPart>) -> Result<Self> {
        let m = SpectralMeasure { atoms, ac_parts };
        m.validate()?;
        Ok(m)
    }

    pub fn zero() -> Self {
        SpectralMeasure::default()
    }

    pub fn atom(kappa: f64, weight: f64) -> Result<Self> {
        SpectralMeasure::new(vec![Atom { kappa, weight }], vec![])
    }

    pub fn atoms(pairs: &[(f64, f64)]) -> Result<Self> {
        SpectralMeasure::new(
            pairs.iter().map(|&(kappa, weight)| Atom { kappa, weight }).collect(),
            vec![],
        )
    }

    /// `2 s sqrt(1 - s^2) ds` on `[0, 1]`, the norming measure of the
    /// reflectionless step.
    pub fn semicircle() -> Self {
        SpectralMeasure {
            atoms: vec![],
            ac_parts: vec![AcPart::new(0.0, 1.0, Density::SemicircleTwoS)],
        }
    }

    /// Norming measure of the pure step of depth `h^2`.
    pub fn pure_step(h: f64) -> Result<Self> {
        SpectralMeasure::new(vec![], vec![AcPart::new(0.0, h, Density::PureStep { h })])
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let m: SpectralMeasure = serde_json::from_str(text)?;
        m.validate()?;
        Ok(m)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("measure serializes")
    }

    pub fn validate(&self) -> Result<()> {
        for atom in &self.atoms {
            if !(atom.kappa.is_finite() && atom.kappa > 0.0) {
                return Err(DarbouxError::InvalidMeasure(format!(
                    "atom wavenumber {} must be positive",
                    atom.kappa
                )));
            }
            if !atom.weight.is_finite() {
                return Err(DarbouxError::InvalidMeasure(format!(
                    "atom at {} has non-finite weight",
                    atom.kappa
                )));
            }
        }
        self.ac_parts.iter().try_for_each(AcPart::validate)
    }

    pub fn warnings(&self) -> Vec<String> {
        self.atoms
            .iter()
            .filter(|a| a.kappa > LARGE_KAPPA_WARNING)
            .map(|a| {
                format!(
                    "atom at kappa = {} exceeds {LARGE_KAPPA_WARNING}; evolution factors overflow quickly",
                    a.kappa
                )
            })
            .collect()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty() && self.ac_parts.is_empty()
    }

    /// Largest wavenumber carrying mass.
    pub fn s_max(&self) -> f64 {
        self.atoms
            .iter()
            .map(|a| a.kappa)
            .chain(self.ac_parts.iter().map(|p| p.b))
            .fold(0.0, f64::max)
    }

    /// Smallest wavenumber in the support.
    pub fn s_min(&self) -> f64 {
        self.atoms
            .iter()
            .map(|a| a.kappa)
            .chain(self.ac_parts.iter().map(|p| p.a))
            .fold(f64::INFINITY, f64::min)
    }

    /// `dσ_t(s) = e^{8 s^3 t} dσ(s)`. Negative `t` is allowed and only
    /// shrinks the factors.
    pub fn evolve(&self, t: f64) -> Result<SpectralMeasure> {
        let s_max = self.s_max();
        let exponent = 8.0 * s_max.powi(3) * t;
        if exponent > MAX_EVOLUTION_EXPONENT {
            return Err(DarbouxError::MagnitudeOverflow { s_max, t, exponent });
        }
        let atoms = self
            .atoms
            .iter()
            .map(|a| Atom {
                kappa: a.kappa,
                weight: a.weight * (8.0 * a.kappa.powi(3) * t).exp(),
            })
            .collect();
        let ac_parts = self
            .ac_parts
            .iter()
            .map(|p| AcPart {
                time: p.time + t,
                ..p.clone()
            })
            .collect();
        Ok(SpectralMeasure { atoms, ac_parts })
    }

    pub fn negate(&self) -> SpectralMeasure {
        SpectralMeasure {
            atoms: self
                .atoms
                .iter()
                .map(|a| Atom {
                    kappa: a.kappa,
                    weight: -a.weight,
                })
                .collect(),
            ac_parts: self
                .ac_parts
                .iter()
                .map(|p| AcPart {
                    scale: -p.scale,
                    ..p.clone()
                })
                .collect(),
        }
    }

    /// Sum of two measures. Atoms at identical wavenumbers are merged.
    pub fn plus(&self, other: &SpectralMeasure) -> SpectralMeasure {
        let mut atoms = self.atoms.clone();
        for a in &other.atoms {
            match atoms.iter_mut().find(|b| b.kappa == a.kappa) {
                Some(b) => b.weight += a.weight,
                None => atoms.push(*a),
            }
        }
        let mut ac_parts = self.ac_parts.clone();
        ac_parts.extend(other.ac_parts.iter().cloned());
        SpectralMeasure { atoms, ac_parts }
    }

    /// Restriction to `[a, b]`.
    pub fn restrict(&self, a: f64, b: f64) -> SpectralMeasure {
        SpectralMeasure {
            atoms: self
                .atoms
                .iter()
                .filter(|at| at.kappa >= a && at.kappa <= b)
                .copied()
                .collect(),
            ac_parts: self
                .ac_parts
                .iter()
                .filter_map(|p| {
                    let lo = p.a.max(a);
                    let hi = p.b.min(b);
                    (lo < hi).then(|| AcPart {
                        a: lo,
                        b: hi,
                        ..p.clone()
                    })
                })
                .collect(),
        }
    }

    /// Total signed mass, ac parts integrated with a 256-point rule.
    pub fn total_mass(&self) -> Result<f64> {
        let mut m: f64 = self.atoms.iter().map(|a| a.weight).sum();
        for p in &self.ac_parts {
            let (x, w) = gauss_legendre_on(256, p.a, p.b);
            for (s, wi) in x.iter().zip(&w) {
                m += wi * p.value(*s)?;
            }
        }
        Ok(m)
    }
}
