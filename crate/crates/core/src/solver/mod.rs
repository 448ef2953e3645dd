//! Finite-difference solvers for the Schrödinger system on a tree.

pub mod derivative;
pub mod grid;
pub mod modal;
pub mod problem;
pub mod stationary;
pub mod stepper;
pub mod tridiag;

pub use derivative::{second_derivative, second_derivative_reference, spatial_derivative};
pub use grid::{integrate, EdgeField, GridFunction, GridSpec, RealField};
pub use modal::{
    assemble_time_solution, linspace, mode_frequency, solve_modal, ModalSolution, Mode, ModeSpec, TimeSolution,
};
pub use problem::{ComplexValue, ModeDocument, PotentialSpec, ProblemDocument, SourceSpec};
pub use stationary::{
    discrete_residual, flux_imbalance, solve_dense, solve_stationary, BoundaryValues, HelmholtzFactor,
    StationaryProblem, StationarySolution, CONDITION_LIMIT,
};
pub use stepper::{time_step_crosscheck, CrossCheckReport, StepConfig};
