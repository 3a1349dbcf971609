//! Error type shared by all model and analysis code.

use thiserror::Error;

#[derive(Debug, Clone, Error)]
pub enum Error {
    /// Matrix inversion failed or the reciprocal condition estimate fell
    /// below the acceptance floor (1e-14).
    #[error("singular matrix (reciprocal condition estimate {rcond:.3e})")]
    SingularMatrix { rcond: f64 },

    /// The two propagation modes of the rail line coincide; the eigenvector
    /// basis is not usable. Real coupled lines do not hit this, so it almost
    /// always indicates a configuration mistake.
    #[error("degenerate propagation modes (eigenvalue separation {separation:.3e})")]
    DegenerateModes { separation: f64 },

    /// Ballast resistance must be strictly positive.
    #[error("ballast resistance must be positive, got {0} ohm*km")]
    NonPositiveBallast(f64),

    /// A quantity that must be strictly positive was zero or negative.
    #[error("{name} must be positive, got {value}")]
    NonPositive { name: &'static str, value: f64 },

    /// A dead short cannot be represented as a shunt chain matrix.
    #[error("zero impedance is not representable as a shunt element")]
    ZeroImpedance,

    /// A fault was applied to an element of the wrong kind.
    #[error("operation applies to {expected} elements, got {got}")]
    WrongKind {
        expected: &'static str,
        got: &'static str,
    },

    /// Requested position lies outside the main track section.
    #[error("position {position} m is outside the section (0, {length} m]")]
    OutOfSection { position: f64, length: f64 },

    /// The assembled boundary system could not be solved reliably.
    #[error("shunting-point system is singular or inconsistent ({detail})")]
    SingularSystem { detail: String },

    /// The scenario has no wheel sets, so no shunting point exists.
    #[error("scenario has no wheel sets; no shunting point exists")]
    EmptyTrain,

    /// Nonlinear regression failed to converge.
    #[error("curve fit diverged: {0}")]
    FitDiverged(String),

    /// Steady-value extraction excluded every sample.
    #[error("no samples remain after exclusion zones are removed")]
    EmptyAfterExclusion,

    /// Goodness-of-fit is undefined when the observations have no variance.
    #[error("observations have zero variance; R-square is undefined")]
    DegenerateVariance,

    /// A measured-trace file could not be parsed.
    #[error("trace format error: {0}")]
    TraceFormat(String),

    /// Scenario configuration is invalid.
    #[error("configuration error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
