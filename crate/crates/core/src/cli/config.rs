use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{DarbouxError, Result};
use crate::measure::{Scheme, SpectralMeasure};
use crate::transform::{ApplyOptions, Method};

/// Evaluation route for the CSV `q` column. `Both` writes the direct value
/// and reports the largest direct/log-det discrepancy in the sidecar.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodChoice {
    #[default]
    Direct,
    #[serde(rename = "logdet")]
    LogDet,
    #[serde(rename = "logdet_fd")]
    LogDetFd,
    Both,
}

impl MethodChoice {
    pub fn primary(self) -> Method {
        match self {
            MethodChoice::Direct | MethodChoice::Both => Method::Direct,
            MethodChoice::LogDet => Method::LogDet,
            MethodChoice::LogDetFd => Method::LogDetFd,
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_value(serde_json::Value::String(text.to_string()))
            .map_err(|_| DarbouxError::Config(format!("unknown method {text:?} (direct, logdet, logdet_fd, both)")))
    }
}

pub fn parse_scheme(text: &str) -> Result<Scheme> {
    serde_json::from_value(serde_json::Value::String(text.to_string()))
        .map_err(|_| DarbouxError::Config(format!("unknown scheme {text:?} (gauss_legendre, sine)")))
}

/// One transformation in the background stack, applied in order to zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub measure: SpectralMeasure,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nodes: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scheme: Option<Scheme>,
    #[serde(default)]
    pub force: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub x_min: f64,
    pub x_max: f64,
    pub dx: f64,
    #[serde(default = "default_times")]
    pub t: Vec<f64>,
}

fn default_times() -> Vec<f64> {
    vec![0.0]
}

fn default_nodes() -> usize {
    ApplyOptions::default().nodes
}

impl GridSpec {
    /// Parses `x_min:x_max:dx`.
    pub fn parse_range(text: &str) -> Result<(f64, f64, f64)> {
        let parts: Vec<&str> = text.split(':').collect();
        let bad = || DarbouxError::Config(format!("grid {text:?} is not x_min:x_max:dx"));
        if parts.len() != 3 {
            return Err(bad());
        }
        let v: Vec<f64> = parts
            .iter()
            .map(|p| p.trim().parse::<f64>().map_err(|_| bad()))
            .collect::<Result<_>>()?;
        Ok((v[0], v[1], v[2]))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dx.is_finite() && self.dx > 0.0) {
            return Err(DarbouxError::Config(format!("dx must be positive, got {}", self.dx)));
        }
        if !(self.x_min.is_finite() && self.x_max.is_finite() && self.x_min < self.x_max) {
            return Err(DarbouxError::Config(format!(
                "need x_min < x_max, got {} and {}",
                self.x_min, self.x_max
            )));
        }
        if self.t.is_empty() || self.t.iter().any(|t| !t.is_finite()) {
            return Err(DarbouxError::Config("t list must be nonempty and finite".into()));
        }
        if self.xs().len() > 10_000_000 {
            return Err(DarbouxError::Config("grid has more than 1e7 points".into()));
        }
        Ok(())
    }

    /// `x_min + i dx` up to `x_max`, tolerating round-off at the end point.
    pub fn xs(&self) -> Vec<f64> {
        let n = ((self.x_max - self.x_min) / self.dx + 1e-9).floor() as usize;
        (0..=n).map(|i| self.x_min + i as f64 * self.dx).collect()
    }

    /// Row order of the CSV: `t` outer, `x` inner.
    pub fn points(&self) -> Vec<(f64, f64)> {
        let xs = self.xs();
        self.t.iter().flat_map(|&t| xs.iter().map(move |&x| (x, t))).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Outputs {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub csv: Option<PathBuf>,
    /// Defaults to the CSV path with a `.json` extension.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub json: Option<PathBuf>,
}

impl Outputs {
    pub fn sidecar(&self) -> Option<PathBuf> {
        self.json
            .clone()
            .or_else(|| self.csv.as_ref().map(|p| p.with_extension("json")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub background: Vec<Layer>,
    #[serde(default)]
    pub measure: SpectralMeasure,
    pub grid: GridSpec,
    #[serde(default = "default_nodes")]
    pub nodes: usize,
    #[serde(default)]
    pub scheme: Scheme,
    #[serde(default)]
    pub method: MethodChoice,
    /// Wavenumber `[re, im]` for the optional `psi_re,psi_im` columns.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub psi_k: Option<[f64; 2]>,
    #[serde(default)]
    pub outputs: Outputs,
    #[serde(default)]
    pub force: bool,
    /// For `verify`: the run is expected to stop at a singular system.
    #[serde(default)]
    pub expect_singular: bool,
}

impl ScenarioConfig {
    pub fn new(grid: GridSpec) -> Self {
        ScenarioConfig {
            background: vec![],
            measure: SpectralMeasure::zero(),
            grid,
            nodes: default_nodes(),
            scheme: Scheme::default(),
            method: MethodChoice::default(),
            psi_k: None,
            outputs: Outputs::default(),
            force: false,
            expect_singular: false,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ScenarioConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| DarbouxError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        if self.nodes == 0 {
            return Err(DarbouxError::Config("nodes must be at least 1".into()));
        }
        if let Some(layer) = self.background.iter().find(|l| l.nodes == Some(0)) {
            return Err(DarbouxError::Config(format!(
                "background layer {} has zero nodes",
                layer.measure.to_json()
            )));
        }
        if let Some([re, im]) = self.psi_k {
            if !(re.is_finite() && im.is_finite()) {
                return Err(DarbouxError::Config("psi_k must be finite".into()));
            }
        }
        self.measure.validate()?;
        for layer in &self.background {
            layer.measure.validate()?;
        }
        Ok(())
    }

    pub fn options(&self) -> ApplyOptions {
        ApplyOptions {
            nodes: self.nodes,
            scheme: self.scheme,
            force: self.force,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_parses_with_defaults() {
        let cfg = ScenarioConfig::from_json(
            r#"{"measure": {"atoms": [{"kappa": 1.0, "weight": 2.0}]},
                "grid": {"x_min": -1, "x_max": 1, "dx": 0.5}}"#,
        )
        .unwrap();
        assert_eq!(cfg.nodes, 128);
        assert_eq!(cfg.method, MethodChoice::Direct);
        assert_eq!(cfg.grid.t, vec![0.0]);
        assert_eq!(cfg.grid.xs(), vec![-1.0, -0.5, 0.0, 0.5, 1.0]);
    }

    #[test]
    fn grid_end_point_survives_round_off() {
        let g = GridSpec {
            x_min: -10.0,
            x_max: 10.0,
            dx: 0.1,
            t: vec![0.0, 0.5],
        };
        assert_eq!(g.xs().len(), 201);
        assert_eq!(g.points().len(), 402);
        assert_eq!(g.points()[201], (-10.0, 0.5));
    }

    #[test]
    fn invalid_grids_are_rejected() {
        for (lo, hi, dx) in [(0.0, 1.0, 0.0), (1.0, 0.0, 0.1), (0.0, 1.0, -0.1), (0.0, f64::NAN, 0.1)] {
            let g = GridSpec {
                x_min: lo,
                x_max: hi,
                dx,
                t: vec![0.0],
            };
            assert!(g.validate().is_err(), "{lo} {hi} {dx}");
        }
        assert!(GridSpec::parse_range("-1:1").is_err());
        assert_eq!(GridSpec::parse_range("-1:2:0.25").unwrap(), (-1.0, 2.0, 0.25));
    }

    #[test]
    fn method_and_scheme_names() {
        assert_eq!(MethodChoice::parse("both").unwrap(), MethodChoice::Both);
        assert_eq!(MethodChoice::parse("logdet").unwrap().primary(), Method::LogDet);
        assert!(MethodChoice::parse("fast").is_err());
        assert_eq!(parse_scheme("sine").unwrap(), Scheme::Sine);
        assert!(parse_scheme("trapezoid").is_err());
    }

    #[test]
    fn zero_nodes_rejected() {
        let mut cfg = ScenarioConfig::new(GridSpec {
            x_min: 0.0,
            x_max: 1.0,
            dx: 0.5,
            t: vec![0.0],
        });
        cfg.nodes = 0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn sidecar_defaults_next_to_csv() {
        let o = Outputs {
            csv: Some("out/q.csv".into()),
            json: None,
        };
        assert_eq!(o.sidecar(), Some(PathBuf::from("out/q.json")));
    }
}
