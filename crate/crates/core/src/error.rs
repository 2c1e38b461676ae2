use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("Hilbert space of dimension {dim} exceeds dense capacity {max}")]
    Capacity { dim: usize, max: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("{0}")]
    Domain(String),

    #[error("straddling regime: bare cavity frequency lies inside (omega_q - eta, omega_q) (detuning {delta} rad/ns, eta {eta} rad/ns)")]
    StraddlingRegime { delta: f64, eta: f64 },

    #[error("branch tracking failed at transmon level {level}, photon number {photons}: best overlap {overlap:.3}")]
    BranchTracking {
        level: usize,
        photons: usize,
        overlap: f64,
    },

    #[error("step size underflow at t = {t} ns (h = {h:e}, error norm {err_norm:e})")]
    Stiffness { t: f64, h: f64, err_norm: f64 },

    #[error("Poisson truncation at n_max = {n_max} leaves tail mass {tail:e}")]
    TailMass { n_max: usize, tail: f64 },

    #[error("counting-field grid too coarse: {reason}; increase the number of xi points")]
    GridResolution { reason: String },

    #[error("integration failed at xi = {xi}: {source}")]
    CountingField { xi: f64, source: Box<Error> },

    #[error("unphysical state: {0}")]
    Unphysical(String),

    #[error("config line {line}: {reason}")]
    Config { line: usize, reason: String },

    #[error("I/O error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
