use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use super::*;

#[derive(Debug, Parser)]
#[command(name = "darboux", version, about = "Binary Darboux transformations for KdV")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Evaluate q_σ (and optionally ψ_σ) on a grid.
    Transform(TransformArgs),
    /// Run a verification suite or a scenario check.
    Verify(VerifyArgs),
    /// Emit the closed-form N-soliton on a grid.
    Soliton(SolitonArgs),
    /// Emit the reflectionless step from the standalone oracle.
    Gas(GasArgs),
}

#[derive(Debug, Args)]
struct GridArgs {
    /// x_min:x_max:dx
    #[arg(long, allow_hyphen_values = true)]
    grid: Option<String>,
    /// Comma-separated times.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    t: Option<Vec<f64>>,
}

impl GridArgs {
    fn resolve(&self, base: Option<GridSpec>) -> Result<GridSpec> {
        let mut grid = match (&self.grid, base) {
            (Some(text), base) => {
                let (x_min, x_max, dx) = GridSpec::parse_range(text)?;
                GridSpec {
                    x_min,
                    x_max,
                    dx,
                    t: base.map(|b| b.t).unwrap_or_else(|| vec![0.0]),
                }
            }
            (None, Some(base)) => base,
            (None, None) => {
                return Err(DarbouxError::Config(
                    "no grid given (use --grid or a config file)".into(),
                ))
            }
        };
        if let Some(t) = &self.t {
            grid.t = t.clone();
        }
        grid.validate()?;
        Ok(grid)
    }
}

#[derive(Debug, Args)]
struct TransformArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// JSON spectral measure; replaces the config's measure.
    #[arg(long)]
    measure_file: Option<PathBuf>,
    /// JSON list of background layers; replaces the config's background.
    #[arg(long)]
    background_file: Option<PathBuf>,
    #[command(flatten)]
    grid: GridArgs,
    #[arg(long)]
    nodes: Option<usize>,
    #[arg(long)]
    scheme: Option<String>,
    /// direct, logdet, logdet_fd or both.
    #[arg(long)]
    method: Option<String>,
    /// Wavenumber re,im for the ψ columns.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    psi_k: Option<Vec<f64>>,
    /// CSV path; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Sidecar path; defaults next to the CSV.
    #[arg(long)]
    json_out: Option<PathBuf>,
    #[arg(long)]
    force: bool,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    /// One of soliton, singular, commutativity, gas.
    #[arg(long, conflicts_with = "config")]
    suite: Option<String>,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Report path; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SolitonArgs {
    /// Comma-separated wavenumbers κ_m.
    #[arg(long, value_delimiter = ',', required = true)]
    kappa: Vec<f64>,
    /// Comma-separated norming constants c_m.
    #[arg(long, value_delimiter = ',', required = true)]
    norming: Vec<f64>,
    #[command(flatten)]
    grid: GridArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct GasArgs {
    #[command(flatten)]
    grid: GridArgs,
    #[arg(long, default_value_t = 128)]
    nodes: usize,
    #[arg(long, default_value = "sine")]
    scheme: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| DarbouxError::Config(format!("cannot read {}: {e}", path.display())))
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => write_atomic(p, text),
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn transform_config(a: &TransformArgs) -> Result<ScenarioConfig> {
    let base = a.config.as_deref().map(ScenarioConfig::from_file).transpose()?;
    let grid = a.grid.resolve(base.as_ref().map(|c| c.grid.clone()))?;
    let mut cfg = base.unwrap_or_else(|| ScenarioConfig::new(grid.clone()));
    cfg.grid = grid;
    if let Some(p) = &a.measure_file {
        cfg.measure = SpectralMeasure::from_json(&read(p)?)?;
    }
    if let Some(p) = &a.background_file {
        cfg.background = serde_json::from_str(&read(p)?)?;
    }
    if let Some(n) = a.nodes {
        cfg.nodes = n;
    }
    if let Some(s) = &a.scheme {
        cfg.scheme = parse_scheme(s)?;
    }
    if let Some(m) = &a.method {
        cfg.method = MethodChoice::parse(m)?;
    }
    if let Some(k) = &a.psi_k {
        let [re, im] = k[..] else {
            return Err(DarbouxError::Config("--psi-k takes re,im".into()));
        };
        cfg.psi_k = Some([re, im]);
    }
    if a.out.is_some() {
        cfg.outputs.csv = a.out.clone();
    }
    if a.json_out.is_some() {
        cfg.outputs.json = a.json_out.clone();
    }
    cfg.force |= a.force;
    cfg.validate()?;
    Ok(cfg)
}

fn transform(a: &TransformArgs) -> Result<i32> {
    let cfg = transform_config(a)?;
    let out = run_transform(&cfg)?;
    emit(cfg.outputs.csv.as_deref(), &out.csv)?;
    if let Some(p) = cfg.outputs.sidecar() {
        let text = serde_json::to_string_pretty(&out.sidecar)? + "\n";
        write_atomic(&p, &text)?;
    }
    Ok(EXIT_OK)
}

fn verify_cmd(a: &VerifyArgs) -> Result<i32> {
    let report = match (&a.suite, &a.config) {
        (Some(s), _) => run_verify_suite(s)?,
        (None, Some(p)) => run_verify_config(&ScenarioConfig::from_file(p)?)?,
        (None, None) => return Err(DarbouxError::Config("verify needs --suite or --config".into())),
    };
    emit(a.out.as_deref(), &(report.to_json() + "\n"))?;
    Ok(if report.pass { EXIT_OK } else { EXIT_FAILED })
}

fn soliton(a: &SolitonArgs) -> Result<i32> {
    let grid = a.grid.resolve(None)?;
    emit(a.out.as_deref(), &soliton_csv(&a.kappa, &a.norming, &grid)?)?;
    Ok(EXIT_OK)
}

fn gas(a: &GasArgs) -> Result<i32> {
    let grid = a.grid.resolve(None)?;
    emit(a.out.as_deref(), &gas_csv(a.nodes, parse_scheme(&a.scheme)?, &grid)?)?;
    Ok(EXIT_OK)
}

/// Entry point for the `darboux` binary; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let result = match &cli.command {
        Command::Transform(a) => transform(a),
        Command::Verify(a) => verify_cmd(a),
        Command::Soliton(a) => soliton(a),
        Command::Gas(a) => gas(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
