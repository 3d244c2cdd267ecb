//! Small-energy perturbations of a constant map with constant clamped data
//! flow back to the constant.

use crate::error::{Error, Result};
use crate::flow::stepper::{run, FlowOptions, RunControl, Stepper, StopReason};
use crate::grid::{BoundaryData, Grid};
use crate::io::random::{generate_random_field, RandomFieldSpec};
use crate::manifold::TargetManifold;

use super::AnalysisConfig;

/// F₂ level regarded as converged.
pub const CONVERGED_F2: f64 = 1e-12;

/// Largest sup-norm deviation from the constant regarded as converged.
pub const CONVERGED_DEVIATION: f64 = 1e-3;

#[derive(Clone, Debug, PartialEq)]
pub struct GapReport {
    pub converged_to_constant: bool,
    pub final_sup_deviation: f64,
    pub f2_initial: f64,
    pub f2_final: f64,
    pub steps: u64,
    pub t: f64,
    pub stop: StopReason,
    /// Accepted steps that exceeded their energy budget (expected zero).
    pub violations: usize,
    /// Accepted steps with an energy increase above tol_energy·F₂(u₀).
    pub increases_over_tol: usize,
}

/// Runs the flow from π(p + amplitude·perturbation) with g ≡ p, ∂_ν u = 0
/// until F₂ < [`CONVERGED_F2`] or the final time.
///
/// Fails with `Precondition` when F₂(u₀) exceeds ε₀², the regime the gap
/// statement is about.
pub fn gap_experiment(
    grid: Grid,
    target: &TargetManifold,
    constant: &[f64],
    spec: &RandomFieldSpec,
    opts: &FlowOptions,
    cfg: &AnalysisConfig,
) -> Result<GapReport> {
    let bc = BoundaryData::constant(grid, constant)?;
    let mut opts = *opts;
    opts.stop_below_f2 = Some(CONVERGED_F2);
    let stepper = Stepper::new(*target, Some(bc), grid, opts)?;
    let spec = RandomFieldSpec {
        offset: Some(constant.to_vec()),
        ..spec.clone()
    };
    let u0 = generate_random_field(&spec, &grid, target)?;
    let state = stepper.initial_state(&u0)?;
    let f2_initial = state.ledger.f2_initial;
    let quantum = cfg.epsilon0 * cfg.epsilon0;
    if f2_initial > quantum {
        return Err(Error::Precondition(format!(
            "initial energy {f2_initial:e} exceeds epsilon0^2 = {quantum:e}"
        )));
    }
    let traj = run(&stepper, state, &RunControl::default(), |_, _| Ok(()))?;
    let end = &traj.final_state;
    let final_sup_deviation = end.u.sup_distance_to(constant);
    let f2_final = end.ledger.f2_current();
    Ok(GapReport {
        converged_to_constant: f2_final < CONVERGED_F2
            && final_sup_deviation <= CONVERGED_DEVIATION,
        final_sup_deviation,
        f2_initial,
        f2_final,
        steps: end.step_index,
        t: end.t,
        stop: traj.stop,
        violations: end.ledger.violations(),
        increases_over_tol: end.ledger.increases_beyond(opts.tol_energy * f2_initial),
    })
}
