use thiserror::Error;

pub type Result<T> = std::result::Result<T, DarbouxError>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DarbouxError {
    #[error("invalid measure: {0}")]
    InvalidMeasure(String),

    #[error("evolution factor overflows: 8 s^3 t = {exponent:.3e} with s_max = {s_max}, t = {t}")]
    MagnitudeOverflow { s_max: f64, t: f64, exponent: f64 },

    #[error("{what} = {value} is outside the domain {domain}")]
    Domain {
        what: &'static str,
        value: f64,
        domain: String,
    },

    #[error("density {density} cannot be evaluated at s = {node}")]
    DensityEvaluation { density: String, node: f64 },

    #[error("singular system at x = {x}, t = {t} (condition estimate {condition:.3e})")]
    SingularSystem { x: f64, t: f64, condition: f64 },

    #[error("det(I + K) is not positive at x = {x}, t = {t}")]
    NonPositiveDeterminant { x: f64, t: f64 },

    #[error("closed-form log-det derivative needs sign-definite weights")]
    MixedSignWeights,

    #[error("measure is not admissible: {0}")]
    InadmissibleMeasure(String),

    #[error("Jost solution does not decay at +infinity (k = {k_re}+{k_im}i, s = {s})")]
    NonDecayingJost { k_re: f64, k_im: f64, s: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for DarbouxError {
    fn from(e: std::io::Error) -> Self {
        DarbouxError::Io(e.to_string())
    }
}

impl From<serde_json::Error> for DarbouxError {
    fn from(e: serde_json::Error) -> Self {
        DarbouxError::Config(e.to_string())
    }
}
