use thiserror::Error;

use crate::lpcore::LpError;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("invalid operator: {0}")]
    InvalidOperator(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("degenerate source: Z-basis states are identical up to phase (overlap {overlap:.3e} from unity)")]
    DegenerateSource { overlap: f64 },
    #[error("invalid channel: {0}")]
    InvalidChannel(String),
    #[error("inconsistent model: {0}")]
    InconsistentModel(String),
    #[error("singular preparation: reconstruction system condition estimate {condition:.3e}")]
    SingularPreparation { condition: f64 },
    #[error("no signal: {0}")]
    NoSignal(String),
    #[error("data inconsistency: {0}")]
    DataInconsistency(String),
    #[error("config line {line}: {msg}")]
    Config { line: usize, msg: String },
    #[error(transparent)]
    Lp(#[from] LpError),
}
