use thiserror::Error;

/// Errors raised by the lattice toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("difference stencil of order {order} needs a halo of {order}, box has {halo}")]
    StencilOutOfRange { order: usize, halo: usize },

    #[error(
        "torus grid with {m} points per axis aliases lattice radius {radius}; need at least {need}"
    )]
    Aliasing {
        m: usize,
        radius: usize,
        need: usize,
    },

    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("lattice point {0:?} lies outside the tabulated range")]
    OutsideTable(Vec<i64>),

    #[error("unknown builtin symbol `{0}`")]
    UnknownBuiltin(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("expression error at byte {pos}: {msg}")]
    Parse { pos: usize, msg: String },

    #[error("asymptotic sum needs strictly decreasing orders (got {prev} then {next})")]
    NonDecreasingOrders { prev: f64, next: f64 },

    #[error("symbol `{label}` failed the ellipticity scan (estimated C = {constant:e}, threshold {threshold:e})")]
    NotElliptic {
        label: String,
        constant: f64,
        threshold: f64,
    },

    #[error("symbol evaluation produced a non-finite value at k = {0:?}")]
    NonFinite(Vec<i64>),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
