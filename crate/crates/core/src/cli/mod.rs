//! Scenario runner: JSON configs in, CSV and JSON reports out.

mod args;
mod config;

use std::io::Write;
use std::path::Path;

use num_complex::Complex64;
use serde::Serialize;
use serde_json::json;

use crate::background::{nsoliton_reference, one_soliton_reference, BackgroundModel};
use crate::error::{DarbouxError, Result};
use crate::measure::{Scheme, SpectralMeasure};
use crate::parallel;
use crate::transform::{apply, apply_with, commutativity_check, ApplyOptions, Method, PotentialField};
use crate::verify::{self, ProbeGrid, ReflectionlessStep};

pub use args::run;
pub use config::{parse_scheme, GridSpec, Layer, MethodChoice, Outputs, ScenarioConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILED: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_SINGULAR: i32 = 3;

pub fn exit_code(e: &DarbouxError) -> i32 {
    match e {
        DarbouxError::Config(_)
        | DarbouxError::InvalidMeasure(_)
        | DarbouxError::InadmissibleMeasure(_)
        | DarbouxError::Domain { .. }
        | DarbouxError::DensityEvaluation { .. } => EXIT_CONFIG,
        DarbouxError::SingularSystem { .. } | DarbouxError::NonPositiveDeterminant { .. } => EXIT_SINGULAR,
        _ => EXIT_FAILED,
    }
}

/// The background stack of `cfg` followed by its measure.
pub fn build_field(cfg: &ScenarioConfig) -> Result<PotentialField> {
    let mut bg = BackgroundModel::Zero;
    for layer in &cfg.background {
        let opts = ApplyOptions {
            nodes: layer.nodes.unwrap_or(cfg.nodes),
            scheme: layer.scheme.unwrap_or(cfg.scheme),
            force: layer.force,
        };
        bg = apply_with(&bg, &layer.measure, &opts)?.into();
    }
    apply_with(&bg, &cfg.measure, &cfg.options())
}

/// Per-point solver diagnostics for the JSON sidecar.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointDiagnostics {
    pub x: f64,
    pub t: f64,
    pub log_abs_det: f64,
    pub det_sign: f64,
    pub condition: f64,
    pub near_singular: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q_logdet: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransformOutput {
    pub csv: String,
    pub sidecar: serde_json::Value,
}

struct Row {
    x: f64,
    t: f64,
    q: f64,
    psi: Option<Complex64>,
    diag: PointDiagnostics,
}

fn eval_point(field: &PotentialField, cfg: &ScenarioConfig, x: f64, t: f64) -> Result<Row> {
    let state = field.state(x, t)?;
    let q = match cfg.method.primary() {
        Method::Direct => state.potential_direct()?,
        m => field.potential(x, t, m)?,
    };
    let q_logdet = match cfg.method {
        MethodChoice::Both => Some(field.potential(x, t, Method::LogDet)?),
        _ => None,
    };
    let psi = cfg
        .psi_k
        .map(|[re, im]| state.jost(Complex64::new(re, im)))
        .transpose()?;
    let sol = state.solution();
    Ok(Row {
        x,
        t,
        q,
        psi,
        diag: PointDiagnostics {
            x,
            t,
            log_abs_det: sol.log_abs_det,
            det_sign: sol.det_sign,
            condition: sol.condition,
            near_singular: sol.near_singular,
            q_logdet,
        },
    })
}

fn csv_header(with_psi: bool) -> String {
    if with_psi {
        "x,t,q,psi_re,psi_im\n".to_string()
    } else {
        "x,t,q\n".to_string()
    }
}

/// Evaluates `cfg` on its grid. Rows come back in grid order whatever the
/// thread count, and the first failing point (in that order) is reported.
pub fn run_transform(cfg: &ScenarioConfig) -> Result<TransformOutput> {
    cfg.validate()?;
    let field = build_field(cfg)?;
    let points = cfg.grid.points();
    let rows = parallel::par_map(&points, |&(x, t)| eval_point(&field, cfg, x, t));
    let rows: Vec<Row> = rows.into_iter().collect::<Result<_>>()?;

    let mut csv = csv_header(cfg.psi_k.is_some());
    for r in &rows {
        match r.psi {
            Some(p) => csv.push_str(&format!("{:?},{:?},{:?},{:?},{:?}\n", r.x, r.t, r.q, p.re, p.im)),
            None => csv.push_str(&format!("{:?},{:?},{:?}\n", r.x, r.t, r.q)),
        }
    }

    let max_condition = rows.iter().map(|r| r.diag.condition).fold(0.0, f64::max);
    let near_singular = rows.iter().filter(|r| r.diag.near_singular).count();
    let discrepancy = (cfg.method == MethodChoice::Both).then(|| {
        rows.iter()
            .map(|r| (r.q - r.diag.q_logdet.unwrap_or(r.q)).abs())
            .fold(0.0, f64::max)
    });
    let sidecar = json!({
        "config": cfg,
        "nodes_total": field.discretization().len(),
        "admissibility": field.admissibility().violations,
        "summary": {
            "points": rows.len(),
            "max_condition": max_condition,
            "near_singular_points": near_singular,
            "max_method_discrepancy": discrepancy,
        },
        "points": rows.iter().map(|r| &r.diag).collect::<Vec<_>>(),
    });
    Ok(TransformOutput { csv, sidecar })
}

/// `x,t,q` CSV for the pure N-soliton `-2 ∂²ₓ log det(I + A)`.
pub fn soliton_csv(kappas: &[f64], cs: &[f64], grid: &GridSpec) -> Result<String> {
    grid.validate()?;
    let points = grid.points();
    let qs = parallel::par_map(&points, |&(x, t)| nsoliton_reference(kappas, cs, x, t));
    let mut csv = csv_header(false);
    for (&(x, t), q) in points.iter().zip(qs) {
        csv.push_str(&format!("{x:?},{t:?},{:?}\n", q?));
    }
    Ok(csv)
}

/// `x,t,q` CSV for the reflectionless step, evaluated by the standalone
/// extended-precision path.
pub fn gas_csv(nodes: usize, scheme: Scheme, grid: &GridSpec) -> Result<String> {
    grid.validate()?;
    let step = ReflectionlessStep::new(nodes, scheme)?;
    let points = grid.points();
    let qs = parallel::par_map(&points, |&(x, t)| step.eval(x, t));
    let mut csv = csv_header(false);
    for (&(x, t), q) in points.iter().zip(qs) {
        csv.push_str(&format!("{x:?},{t:?},{:?}\n", q?));
    }
    Ok(csv)
}

/// Writes through a temporary file in the target directory, then renames.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents.as_bytes())?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| DarbouxError::Io(e.error.to_string()))?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub pass: bool,
    pub detail: serde_json::Value,
}

impl CheckResult {
    fn new(name: &str, pass: bool, detail: serde_json::Value) -> Self {
        CheckResult {
            name: name.to_string(),
            pass,
            detail,
        }
    }

    /// A check that errored counts as failed, with the error recorded.
    fn from_result(name: &str, r: Result<CheckResult>) -> Self {
        r.unwrap_or_else(|e| CheckResult::new(name, false, json!({ "error": e.to_string() })))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub suite: String,
    pub checks: Vec<CheckResult>,
    pub pass: bool,
}

impl VerifyReport {
    fn new(suite: &str, checks: Vec<CheckResult>) -> Self {
        let pass = checks.iter().all(|c| c.pass);
        VerifyReport {
            suite: suite.to_string(),
            checks,
            pass,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

pub const SUITES: [&str; 4] = ["soliton", "singular", "commutativity", "gas"];

pub fn run_verify_suite(name: &str) -> Result<VerifyReport> {
    let checks = match name {
        "soliton" => soliton_suite(),
        "singular" => singular_suite(),
        "commutativity" => commutativity_suite(),
        "gas" => gas_suite(),
        other => {
            return Err(DarbouxError::Config(format!(
                "unknown suite {other:?} (expected one of {})",
                SUITES.join(", ")
            )))
        }
    };
    Ok(VerifyReport::new(name, checks))
}

/// Runs a scenario as a check: it passes when it completes with finite
/// values, or, with `expect_singular`, when it stops at a singular system.
pub fn run_verify_config(cfg: &ScenarioConfig) -> Result<VerifyReport> {
    cfg.validate()?;
    let check = match (run_transform(cfg), cfg.expect_singular) {
        (Err(DarbouxError::SingularSystem { x, t, condition }), true) => CheckResult::new(
            "expected_singular",
            true,
            json!({ "x": x, "t": t, "condition": condition }),
        ),
        (Err(e), _) if exit_code(&e) == EXIT_CONFIG => return Err(e),
        (Err(e), expect) => CheckResult::new(
            if expect { "expected_singular" } else { "scenario" },
            false,
            json!({ "error": e.to_string() }),
        ),
        (Ok(out), expect) => {
            let finite = out
                .csv
                .lines()
                .skip(1)
                .all(|l| l.split(',').all(|v| v.parse::<f64>().is_ok_and(f64::is_finite)));
            CheckResult::new(
                if expect { "expected_singular" } else { "scenario" },
                !expect && finite,
                out.sidecar["summary"].clone(),
            )
        }
    };
    Ok(VerifyReport::new("config", vec![check]))
}

fn grid_points(x_lo: f64, x_hi: f64, dx: f64, ts: &[f64]) -> Vec<(f64, f64)> {
    GridSpec {
        x_min: x_lo,
        x_max: x_hi,
        dx,
        t: ts.to_vec(),
    }
    .points()
}

fn sup_over<F>(points: &[(f64, f64)], f: F) -> Result<f64>
where
    F: Fn(f64, f64) -> Result<f64> + Sync,
{
    parallel::par_map(points, |&(x, t)| f(x, t))
        .into_iter()
        .try_fold(0.0, |m, v| Ok(f64::max(m, v?)))
}

fn soliton_suite() -> Vec<CheckResult> {
    let c = 2f64.sqrt();
    let field = match apply(
        &BackgroundModel::Zero,
        &SpectralMeasure::atom(1.0, 2.0).expect("valid atom"),
        1,
    ) {
        Ok(f) => f,
        Err(e) => return vec![CheckResult::new("build", false, json!({ "error": e.to_string() }))],
    };
    let exact = CheckResult::from_result(
        "one_soliton_exact",
        (|| {
            let pts = grid_points(-10.0, 10.0, 0.1, &[0.0, 0.5, 1.0]);
            let dev = sup_over(&pts, |x, t| {
                Ok((field.potential(x, t, Method::Direct)? - one_soliton_reference(1.0, c, x, t)).abs())
            })?;
            Ok(CheckResult::new(
                "one_soliton_exact",
                dev < 1e-8,
                json!({ "max_deviation": dev }),
            ))
        })(),
    );
    let methods = CheckResult::from_result(
        "direct_vs_logdet",
        (|| {
            let pts = grid_points(-5.0, 10.0, 0.5, &[0.0, 0.5]);
            let dev = sup_over(&pts, |x, t| {
                let a = field.potential(x, t, Method::Direct)?;
                let b = field.potential(x, t, Method::LogDet)?;
                Ok((a - b).abs() / a.abs().max(1e-300).max(b.abs()).max(1e-3))
            })?;
            Ok(CheckResult::new(
                "direct_vs_logdet",
                dev < 1e-5,
                json!({ "max_relative": dev }),
            ))
        })(),
    );
    let kdv = CheckResult::from_result(
        "kdv_residual",
        (|| {
            let grid = ProbeGrid {
                x_range: (-5.0, 10.0),
                t_range: (0.0, 1.0),
                nx: 16,
                nt: 3,
            };
            let r = verify::kdv_residual(|x, t| field.potential(x, t, Method::Direct), &grid, &[0.04, 0.02, 0.01])?;
            Ok(CheckResult::new("kdv_residual", r.pass, serde_json::to_value(&r)?))
        })(),
    );
    let bg = BackgroundModel::from(field.clone());
    let schrod = CheckResult::from_result(
        "schrodinger_residual",
        (|| {
            let k = [Complex64::new(0.0, 1.0), Complex64::new(0.0, 2.0)];
            let r = verify::schrodinger_residual(&bg, 0.0, &k, (-5.0, 10.0), 16, &[0.2, 0.1, 0.05])?;
            Ok(CheckResult::new(
                "schrodinger_residual",
                r.pass,
                serde_json::to_value(&r)?,
            ))
        })(),
    );
    let identity = CheckResult::from_result(
        "node_identity",
        (|| {
            // ψ - Σ K c cancels down from |ψ(is)|; a few ulps of the cancelling
            // terms bound what any f64 evaluation can reach
            let pts = grid_points(-5.0, 5.0, 1.0, &[0.0, 0.7]);
            let devs = parallel::par_map(&pts, |&(x, t)| -> Result<(f64, f64)> {
                let st = field.state(x, t)?;
                let y = st.y()[0];
                let k = Complex64::new(0.0, 1.0);
                let floor = 16.0 * f64::EPSILON * st.jost_magnitude(k)?;
                Ok(((st.jost(k)?.re - y).abs(), 1e-10 * y.abs() + floor))
            });
            let mut worst: f64 = 0.0;
            let mut pass = true;
            for d in devs {
                let (err, allowed) = d?;
                worst = worst.max(err / allowed);
                pass &= err <= allowed;
            }
            Ok(CheckResult::new(
                "node_identity",
                pass,
                json!({ "max_error_over_allowed": worst }),
            ))
        })(),
    );
    vec![exact, methods, kdv, schrod, identity]
}

fn singular_suite() -> Vec<CheckResult> {
    let removal = SpectralMeasure::atom(1.0, -2.0).expect("valid atom");
    let refused = match apply(&BackgroundModel::Zero, &removal, 1) {
        Err(DarbouxError::InadmissibleMeasure(msg)) => {
            CheckResult::new("unforced_refused", true, json!({ "message": msg }))
        }
        other => CheckResult::new("unforced_refused", false, json!({ "outcome": format!("{other:?}") })),
    };
    let opts = ApplyOptions {
        nodes: 1,
        force: true,
        ..ApplyOptions::default()
    };
    let field = match apply_with(&BackgroundModel::Zero, &removal, &opts) {
        Ok(f) => f,
        Err(e) => {
            return vec![
                refused,
                CheckResult::new("forced_build", false, json!({ "error": e.to_string() })),
            ]
        }
    };
    let singular = match field.potential(0.0, 0.0, Method::Direct) {
        Err(DarbouxError::SingularSystem { x, t, condition }) => CheckResult::new(
            "singular_at_crossing",
            true,
            json!({ "x": x, "t": t, "condition": condition }),
        ),
        other => CheckResult::new(
            "singular_at_crossing",
            false,
            json!({ "outcome": format!("{other:?}") }),
        ),
    };
    let located = CheckResult::from_result(
        "det_zero_located",
        (|| {
            let x0 = field.locate_det_zero(-1.0, 1.0, 0.0, 1e-9)?;
            Ok(CheckResult::new(
                "det_zero_located",
                x0.abs() < 1e-6,
                json!({ "x": x0 }),
            ))
        })(),
    );
    vec![refused, singular, located]
}

fn commutativity_suite() -> Vec<CheckResult> {
    let check = CheckResult::from_result(
        "atoms_commute",
        (|| {
            let s1 = SpectralMeasure::atom(1.0, 1.0)?;
            let s2 = SpectralMeasure::atom(2.0, 1.0)?;
            let pts = grid_points(-5.0, 10.0, 0.25, &[0.0, 0.5]);
            let dev = commutativity_check(
                &s1,
                &s2,
                &pts,
                &ApplyOptions {
                    nodes: 1,
                    ..ApplyOptions::default()
                },
            )?;
            Ok(CheckResult::new(
                "atoms_commute",
                dev < 1e-9,
                json!({ "max_deviation": dev }),
            ))
        })(),
    );
    vec![check]
}

fn gas_suite() -> Vec<CheckResult> {
    let oracle = CheckResult::from_result(
        "pipeline_vs_standalone",
        (|| {
            let rho = SpectralMeasure::semicircle();
            let opts = ApplyOptions {
                nodes: 128,
                scheme: Scheme::Sine,
                force: false,
            };
            let field = apply_with(&BackgroundModel::Zero, &rho, &opts)?;
            let step = ReflectionlessStep::new(128, Scheme::Sine)?;
            let pts = grid_points(-5.0, 10.0, 1.0, &[0.0]);
            let dev = sup_over(&pts, |x, t| {
                Ok((field.potential(x, t, Method::Direct)? - step.eval(x, t)?).abs())
            })?;
            Ok(CheckResult::new(
                "pipeline_vs_standalone",
                dev < 1e-6,
                json!({ "max_deviation": dev }),
            ))
        })(),
    );
    let refinement = CheckResult::from_result(
        "node_refinement",
        (|| {
            let a = verify::reflectionless_step(0.0, 0.0, 128)?;
            let b = verify::reflectionless_step(0.0, 0.0, 256)?;
            Ok(CheckResult::new(
                "node_refinement",
                (a - b).abs() < 1e-8,
                json!({ "q128": a, "q256": b }),
            ))
        })(),
    );
    let left = CheckResult::from_result(
        "left_limit",
        (|| {
            let q = verify::reflectionless_step(-30.0, 0.0, 128)?;
            Ok(CheckResult::new("left_limit", (q + 1.0).abs() < 0.2, json!({ "q": q })))
        })(),
    );
    vec![oracle, refinement, left]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_grid() -> GridSpec {
        GridSpec {
            x_min: -1.0,
            x_max: 1.0,
            dx: 0.5,
            t: vec![0.0],
        }
    }

    #[test]
    fn one_soliton_row_at_origin() {
        let mut cfg = ScenarioConfig::new(small_grid());
        cfg.measure = SpectralMeasure::atom(1.0, 2.0).unwrap();
        let out = run_transform(&cfg).unwrap();
        let row = out.csv.lines().find(|l| l.starts_with("0.0,0.0,")).unwrap();
        let q: f64 = row.split(',').nth(2).unwrap().parse().unwrap();
        assert!((q + 2.0).abs() < 1e-14, "{row}");
        assert_eq!(out.sidecar["summary"]["points"], 5);
    }

    #[test]
    fn empty_measure_gives_zero_column() {
        let out = run_transform(&ScenarioConfig::new(small_grid())).unwrap();
        assert!(out.csv.lines().skip(1).all(|l| l.ends_with(",0.0")));
    }

    #[test]
    fn psi_columns_and_both_method() {
        let mut cfg = ScenarioConfig::new(small_grid());
        cfg.measure = SpectralMeasure::atom(1.0, 2.0).unwrap();
        cfg.psi_k = Some([0.5, 0.0]);
        cfg.method = MethodChoice::Both;
        let out = run_transform(&cfg).unwrap();
        assert!(out.csv.starts_with("x,t,q,psi_re,psi_im\n"));
        let d = out.sidecar["summary"]["max_method_discrepancy"].as_f64().unwrap();
        assert!(d < 1e-12);
    }

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&DarbouxError::Config("x".into())), EXIT_CONFIG);
        assert_eq!(
            exit_code(&DarbouxError::SingularSystem {
                x: 0.0,
                t: 0.0,
                condition: 1e20
            }),
            EXIT_SINGULAR
        );
        assert_eq!(exit_code(&DarbouxError::MixedSignWeights), EXIT_FAILED);
    }

    #[test]
    fn forced_removal_config_verifies_as_expected_singular() {
        let mut cfg = ScenarioConfig::new(small_grid());
        cfg.measure = SpectralMeasure::atom(1.0, -2.0).unwrap();
        cfg.force = true;
        cfg.expect_singular = true;
        let r = run_verify_config(&cfg).unwrap();
        assert!(r.pass, "{r:?}");
        cfg.expect_singular = false;
        assert!(!run_verify_config(&cfg).unwrap().pass);
    }

    #[test]
    fn unknown_suite_is_config_error() {
        assert!(matches!(run_verify_suite("nope"), Err(DarbouxError::Config(_))));
    }

    #[test]
    fn atomic_write_replaces_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.csv");
        write_atomic(&path, "a\n").unwrap();
        write_atomic(&path, "b\n").unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "b\n");
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
