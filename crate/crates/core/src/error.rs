use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown setting `{0}` (available settings: S1, S2)")]
    UnknownSetting(String),

    #[error("invalid value for `{key}`: {reason}")]
    InvalidSetting { key: String, reason: String },

    #[error("cannot read setting file {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("cannot parse setting file: {0}")]
    Parse(String),

    #[error("invalid pulse: {0}")]
    InvalidPulse(String),

    #[error("quadrature did not converge: estimated error {achieved:.3e} above tolerance {tolerance:.3e}")]
    Quadrature { achieved: f64, tolerance: f64 },

    #[error("integration step size underflow at t = {t} ns")]
    StepUnderflow { t: f64 },

    #[error("density matrix lost hermiticity during integration (deviation {deviation:.3e})")]
    NonHermitian { deviation: f64 },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    Dimension { expected: usize, actual: usize },

    #[error("control and target bases differ: {0}")]
    BasisMismatch(String),

    #[error(
        "phase of |{state}> unreliable: overlap magnitude {overlap:.3} < 0.5; \
         check blockade strength and leakage"
    )]
    UnreliablePhases { state: &'static str, overlap: f64 },

    #[error("leakage model evaluated at a resonance ({0})")]
    Pole(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("no sign change of dP/dB in bracket [{lo:.6}, {hi:.6}] rad/ns; scan minimum at {scan_min:.6} rad/ns")]
    NoSignChange { lo: f64, hi: f64, scan_min: f64 },
}

impl Error {
    /// True for errors caused by invalid input rather than by a failed
    /// numerical procedure.
    pub fn is_configuration(&self) -> bool {
        matches!(
            self,
            Error::UnknownSetting(_)
                | Error::InvalidSetting { .. }
                | Error::Io { .. }
                | Error::Parse(_)
                | Error::InvalidPulse(_)
                | Error::Dimension { .. }
                | Error::BasisMismatch(_)
                | Error::InvalidArgument(_)
        )
    }
}
