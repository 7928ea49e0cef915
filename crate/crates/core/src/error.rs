use thiserror::Error;

use crate::geometry::Cell;

#[derive(Debug, Error)]
pub enum Error {
    #[error("grid must have at least 8 cells per side, got {0}")]
    GridTooSmall(usize),
    #[error("field has {got} values but grid needs {expected}")]
    FieldSize { expected: usize, got: usize },
    #[error("field contains a non-finite value at index {0}")]
    NonFinite(usize),
    #[error("invalid scene: {0}")]
    InvalidScene(String),
    #[error("scene JSON: {0}")]
    SceneParse(#[from] serde_json::Error),
    #[error("speed must be positive everywhere, found {value} at index {index}")]
    NonPositiveSpeed { index: usize, value: f64 },
    #[error("eikonal solve needs at least one source cell")]
    NoSources,
    #[error("cell {0} is outside the grid")]
    OutOfGrid(Cell),
    #[error("cell {0} lies inside an obstacle")]
    InsideObstacle(Cell),
    #[error("time step {dt} violates the CFL bound {bound}")]
    Cfl { dt: f64, bound: f64 },
    #[error("grid size {m} exceeds the value-function limit {limit}; raise the limit explicitly")]
    GridTooLarge { m: usize, limit: usize },
    #[error("state is already terminal: {0}")]
    Terminal(&'static str),
    #[error("invalid action: {0}")]
    InvalidAction(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("unknown evaluator kind `{0}`")]
    UnknownEvaluator(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
