use crate::model::{Control, State};

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("non-finite model evaluation at state ({}, {}) with control ({}, {})", .state.y, .state.z, .control.v, .control.w)]
    Evaluation { state: State, control: Control },

    #[error("invalid parameters: {}", .0.join("; "))]
    InvalidParameters(Vec<String>),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("misuse: {0}")]
    Misuse(String),

    #[error("no viable effort at state ({}, {}): state is outside the kernel", .0.y, .0.z)]
    NoSolution(State),

    #[error("model contract violated: {0}")]
    ModelContract(String),

    #[error("policy error: {0}")]
    Policy(String),

    #[error("data error at row {row}, column `{column}`: {message}")]
    Data {
        row: usize,
        column: String,
        message: String,
    },

    #[error("objective became non-finite: {0}")]
    NonFinite(String),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
