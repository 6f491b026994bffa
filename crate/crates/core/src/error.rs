use crate::model::{Infeasibility, ModelError};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolverError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
    #[error("initial point is infeasible: {0}")]
    InfeasibleInit(Infeasibility),
    #[error("objective is infinite at the starting point; no finite-delay allocation reachable")]
    Unsolvable,
    #[error("projection input has a non-finite component: {0:?}")]
    NonFiniteInput([f64; 4]),
    #[error("no multiplier with a feasible inner minimizer after {steps} bracketing steps (lambda reached {lambda:e})")]
    BracketNotFound { steps: usize, lambda: f64 },
    #[error("grid oracle found no feasible finite-objective point")]
    EmptyGrid,
}
