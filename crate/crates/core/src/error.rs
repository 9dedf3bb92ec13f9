use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("non-finite input: {0}")]
    NonFinite(&'static str),

    #[error("flight duration must be non-negative, got {0}")]
    NegativeDuration(f64),

    #[error("sampling interval must be positive, got {0}")]
    BadSampleInterval(f64),

    #[error("infeasible time-of-flight {delta} (post-impulse rotation has the wrong sign)")]
    Infeasible { delta: f64 },

    #[error("degenerate configuration: {0}")]
    Degenerate(&'static str),

    #[error("tan singularity at theta = {0}")]
    Singular(f64),

    #[error("angular velocity {omega} has the wrong sign for impulse {k}")]
    WrongRotationSign { omega: f64, k: u32 },

    #[error("orientation {theta} is not the scheduled angle {expected} for impulse {k}")]
    OffSchedule { theta: f64, expected: f64, k: u32 },

    #[error("time-of-flight quadratic has no positive root (a={a}, b={b}, c={c})")]
    NoPositiveRoot { a: f64, b: f64, c: f64 },

    #[error("impulse offset r={r} lies outside the stick (half-length {half_length})")]
    RodExceeded { r: f64, half_length: f64 },

    #[error("orientations are not symmetric about the vertical; no 2-periodic orbit exists")]
    AsymmetricSpec,

    #[error("omega* must be negative, got {0}")]
    WrongSign(f64),

    #[error("state is not on the section (theta={theta}, omega={omega})")]
    NotOnSection { theta: f64, omega: f64 },

    #[error("finite differences inconsistent under step halving: {which}[{row},{col}] = {coarse} vs {fine}")]
    FdInconsistent {
        which: &'static str,
        row: usize,
        col: usize,
        coarse: f64,
        fine: f64,
    },

    #[error("Riccati iteration did not converge after {0} iterations")]
    RiccatiDiverged(usize),

    #[error("closed loop is not stabilizing (spectral radius {0})")]
    NotStabilizing(f64),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("episode log is empty")]
    EmptyLog,

    #[error("invalid parameters: {0}")]
    Invalid(String),
}
