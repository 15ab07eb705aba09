use alloc::boxed::Box;
use alloc::string::String;
use core::fmt;

pub type Result<T, E = Error> = core::result::Result<T, E>;

/// Which end of the channel a boundary failure happened at.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum End {
    Upstream,
    Downstream,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// An argument outside the domain of the operation.
    Domain { what: &'static str, value: f64 },
    /// Configuration rejected at construction time.
    InvalidConfig(String),
    /// The flow left the fluvial regime, or the height cap was exceeded.
    Regime { x: f64, detail: String },
    /// Steady ODE denominator `g - Q^2/H^3` vanished.
    CriticalFlow { x: f64 },
    /// Two profiles that must share a grid do not.
    GridMismatch,
    /// The scalar boundary equation could not be solved.
    BoundarySolve { end: End, detail: &'static str },
    /// Time step exceeds the CFL limit.
    Cfl { courant: f64, limit: f64 },
    /// No certificate can be built for the requested gains.
    CertificateInfeasible(String),
    /// A time series is too short or not positive where it has to be.
    InsufficientData(String),
    /// An iterative solver did not converge.
    NonConvergence(&'static str),
    /// Failure inside a time-dependent computation.
    AtTime { t: f64, source: Box<Error> },
}

impl Error {
    pub(crate) fn regime(x: f64, detail: impl Into<String>) -> Self {
        Error::Regime {
            x,
            detail: detail.into(),
        }
    }

    pub(crate) fn at_time(self, t: f64) -> Self {
        match self {
            e @ Error::AtTime { .. } => e,
            e => Error::AtTime {
                t,
                source: Box::new(e),
            },
        }
    }

    /// The innermost error, with any time annotation stripped.
    pub fn root(&self) -> &Error {
        match self {
            Error::AtTime { source, .. } => source.root(),
            e => e,
        }
    }

    pub fn is_regime(&self) -> bool {
        matches!(
            self.root(),
            Error::Regime { .. } | Error::CriticalFlow { .. }
        )
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Domain { what, value } => write!(f, "{what} out of domain: {value}"),
            Error::InvalidConfig(msg) => write!(f, "invalid configuration: {msg}"),
            Error::Regime { x, detail } => write!(f, "regime violation at x = {x}: {detail}"),
            Error::CriticalFlow { x } => write!(f, "critical flow reached at x = {x}"),
            Error::GridMismatch => f.write_str("profiles are not on the same grid"),
            Error::BoundarySolve { end, detail } => {
                write!(f, "{end:?} boundary solve failed: {detail}")
            }
            Error::Cfl { courant, limit } => {
                write!(f, "Courant number {courant} exceeds limit {limit}")
            }
            Error::CertificateInfeasible(msg) => write!(f, "certificate infeasible: {msg}"),
            Error::InsufficientData(msg) => write!(f, "insufficient data: {msg}"),
            Error::NonConvergence(what) => write!(f, "{what} did not converge"),
            Error::AtTime { t, source } => write!(f, "at t = {t}: {source}"),
        }
    }
}

impl core::error::Error for Error {}
