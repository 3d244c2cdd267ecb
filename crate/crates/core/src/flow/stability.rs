//! Continuous dependence on initial data: two trajectories advanced on one
//! step schedule, monitoring w = u - v.

use crate::error::{Error, Result};
use crate::grid::{ops::integrate_norm_sq, Field};

use super::stepper::{Stepper, StopReason};

#[derive(Clone, Debug, PartialEq)]
pub struct StabilityReport {
    /// ∫|u₀ - v₀|².
    pub initial: f64,
    /// sup over accepted steps of ∫|u - v|².
    pub sup: f64,
    /// sup / initial, with 0/0 reported as 1.
    pub growth_factor: f64,
    /// (t, ∫|u - v|²) after every step, starting at t = 0.
    pub samples: Vec<(f64, f64)>,
    pub steps: u64,
    pub stop: StopReason,
    /// Accepted steps of u above their recorded energy budget.
    pub violations: usize,
    /// Accepted steps of u with an energy increase above tol_energy·F₂(u₀).
    pub increases_over_tol: usize,
}

/// Advances u adaptively and v with exactly the steps accepted for u, up
/// to the stepper's final time.
pub fn stability_probe(stepper: &Stepper, u0: &Field, v0: &Field) -> Result<StabilityReport> {
    u0.check_shape(v0)?;
    let mut u = stepper.initial_state(u0)?;
    let mut v = stepper.initial_state(v0)?;
    let w2 =
        |a: &Field, b: &Field| -> Result<f64> { Ok(integrate_norm_sq(&a.axpby(1.0, b, -1.0)?)) };
    let initial = w2(&u.u, &v.u)?;
    let mut sup = initial;
    let mut samples = vec![(0.0, initial)];
    let stop = loop {
        if let Some(reason) = stepper.stop_reason(&u) {
            break reason;
        }
        let report = match stepper.advance(&mut u) {
            Ok(x) => x,
            Err(Error::SingularityStop { t, node }) => break StopReason::Singularity { t, node },
            Err(e) => return Err(e),
        };
        match stepper.advance_fixed_in_place(&mut v, report.dt) {
            Ok(()) => {}
            Err(Error::SingularityStop { t, node }) => break StopReason::Singularity { t, node },
            Err(e) => return Err(e),
        };
        let d = w2(&u.u, &v.u)?;
        sup = sup.max(d);
        samples.push((u.t, d));
    };
    let growth_factor = if initial == 0.0 {
        if sup == 0.0 {
            1.0
        } else {
            f64::INFINITY
        }
    } else {
        sup / initial
    };
    Ok(StabilityReport {
        initial,
        sup,
        growth_factor,
        samples,
        steps: u.step_index,
        stop,
        violations: u.ledger.violations(),
        increases_over_tol: u
            .ledger
            .increases_beyond(stepper.options().tol_energy * u.ledger.f2_initial),
    })
}
