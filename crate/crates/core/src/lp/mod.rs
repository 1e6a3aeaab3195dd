//! Small dense linear-programming layer shared by every model in the crate.

mod problem;
mod simplex;

pub use problem::{
    Constraint, Direction, LpProblem, LpSolution, LpStatus, RowId, Sense, SolverOptions, VarId, Variable, TOLERANCE,
};
