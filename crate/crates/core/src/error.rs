use thiserror::Error;

/// Errors raised by the analysis pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("eigen-decomposition failed: {0}")]
    EigenSolver(String),

    #[error("degenerate sample: {0}")]
    DegenerateSample(String),

    #[error("requested derivative order {requested} exceeds the jet order cap {cap}")]
    OrderCap { requested: usize, cap: usize },

    #[error("unsupported observable: {0}")]
    UnsupportedObservable(String),

    /// A Hankel determinant is negative. `failing_order` is the first
    /// approximant order that needs it; `max_order` is the largest approximant
    /// order that is still reliable.
    #[error("negative Hankel determinant at approximant order {failing_order}; maximal reliable order is {max_order}")]
    NegativeDeterminant { failing_order: usize, max_order: usize },

    #[error("sign of a determinant could not be certified at {precision_bits} bits")]
    IndeterminateSign { precision_bits: usize },

    #[error("moment residual {residual:e} above tolerance after raising precision to {precision_bits} bits")]
    Residual { residual: f64, precision_bits: usize },

    #[error("evaluation at a pole: s = {0}")]
    AtPole(String),

    #[error("time step rejected: {0}")]
    StepTooLarge(String),

    #[error("energy drift {drift:e} exceeds bound {bound:e}; try dt <= {suggested_dt:e}")]
    EnergyDrift {
        drift: f64,
        bound: f64,
        suggested_dt: f64,
    },

    #[error("time grid point {t} is not a multiple of the step {dt}")]
    GridMisaligned { t: f64, dt: f64 },

    #[error("insufficient data: {0}")]
    Insufficient(String),

    #[error("malformed file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
