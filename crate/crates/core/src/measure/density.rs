use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{DarbouxError, Result};

/// Closed-form density catalog for absolutely continuous measure parts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "density")]
pub enum Density {
    /// `2 s sqrt(1 - s^2)` on `[0, 1]`: the reflectionless condensate.
    #[serde(rename = "semicircle_2s")]
    SemicircleTwoS,
    /// `(2 s / (pi h^2)) sqrt(h^2 - s^2)` on `[0, h]`: norming density of the
    /// pure step `q = -h^2 1_{x<0}`.
    #[serde(rename = "purestep")]
    PureStep { h: f64 },
    #[serde(rename = "uniform")]
    Uniform { value: f64 },
}

impl Density {
    pub fn name(&self) -> &'static str {
        match self {
            Density::SemicircleTwoS => "semicircle_2s",
            Density::PureStep { .. } => "purestep",
            Density::Uniform { .. } => "uniform",
        }
    }

    /// Interval on which the closed form is defined.
    pub fn domain(&self) -> (f64, f64) {
        match self {
            Density::SemicircleTwoS => (0.0, 1.0),
            Density::PureStep { h } => (0.0, *h),
            Density::Uniform { .. } => (0.0, f64::INFINITY),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Density::PureStep { h } if !(h.is_finite() && *h > 0.0) => {
                Err(DarbouxError::InvalidMeasure(format!("purestep needs h > 0, got {h}")))
            }
            Density::Uniform { value } if !value.is_finite() => Err(DarbouxError::InvalidMeasure(format!(
                "uniform density value {value} is not finite"
            ))),
            _ => Ok(()),
        }
    }

    pub fn eval(&self, s: f64) -> Result<f64> {
        let (lo, hi) = self.domain();
        if !(s >= lo && s <= hi) {
            return Err(DarbouxError::DensityEvaluation {
                density: self.name().to_string(),
                node: s,
            });
        }
        Ok(match self {
            Density::SemicircleTwoS => 2.0 * s * (1.0 - s * s).max(0.0).sqrt(),
            Density::PureStep { h } => pure_step_density_unchecked(*h, s),
            Density::Uniform { value } => *value,
        })
    }

    /// Whether `density(s) / s` stays bounded as `s -> 0+`.
    pub fn vanishes_at_origin(&self) -> bool {
        match self {
            Density::SemicircleTwoS | Density::PureStep { .. } => true,
            Density::Uniform { value } => *value == 0.0,
        }
    }

    /// True when the density has a square-root edge at the right end of its
    /// domain, where the sine substitution restores spectral convergence.
    pub fn has_sqrt_edge(&self) -> bool {
        !matches!(self, Density::Uniform { .. })
    }
}

pub(crate) fn pure_step_density_unchecked(h: f64, k: f64) -> f64 {
    2.0 * k / (PI * h * h) * (h * h - k * k).max(0.0).sqrt()
}
