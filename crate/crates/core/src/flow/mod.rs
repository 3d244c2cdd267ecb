//! Time integration of ∂ₜu = -Δ²u - f(u) with constraint restoration.

pub mod nonlinear;
pub mod solver;
pub mod stability;
pub mod stepper;

pub use nonlinear::{check_constrained, nonlinearity_f, rhs, tension};
pub use solver::{
    solve_clamped_bilaplacian, solve_periodic_bilaplacian, BiharmonicSolver, SolveReport,
    SolverOptions,
};
pub use stability::{stability_probe, StabilityReport};
pub use stepper::{
    run, step_imex, EnergyLedger, FlowOptions, FlowState, LedgerEntry, RunControl, Snapshot,
    StepReport, Stepper, StopReason, Trajectory,
};
