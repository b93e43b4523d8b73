use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("scale j={j} out of range: valid scales are 0..={max} (thickness would exceed width)")]
    ScaleOutOfRange { j: u32, max: u32 },

    #[error("invalid {name}: {value} ({reason})")]
    InvalidParameter {
        name: &'static str,
        value: String,
        reason: &'static str,
    },

    #[error("adapted scale j*={j_star} has no valid strip family (valid scales are 0..={max})")]
    NoValidScale { j_star: i64, max: u32 },

    #[error("associated strip index out of range at cell {k}: l1={l1}, l2={l2}")]
    IndexOutOfRange { k: u32, l1: i64, l2: i64 },

    #[error("point {index} = ({x}, {y}) lies outside the unit square")]
    PointOutOfRange { index: usize, x: f64, y: f64 },

    #[error("invalid curve specification `{spec}`: {reason}")]
    CurveSpec { spec: String, reason: String },

    #[error("50% power not bracketed at n={n}: power {lo_power:.3} at eps={lo:.3e}, {hi_power:.3} at eps={hi:.3e}")]
    InsufficientPowerRange {
        n: usize,
        lo: f64,
        hi: f64,
        lo_power: f64,
        hi_power: f64,
    },

    #[error("malformed point file: {0}")]
    Malformed(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid<T: std::fmt::Display>(
    name: &'static str,
    value: T,
    reason: &'static str,
) -> Error {
    Error::InvalidParameter {
        name,
        value: value.to_string(),
        reason,
    }
}
