//! IMEX time stepping with energy-based step control.
//!
//! One step treats Δ² implicitly and f explicitly, projects the result back
//! onto N nodewise and reapplies the boundary data:
//!
//! u* = (I + dt·Δ²ₕ)⁻¹ (uⁿ - dt·f(uⁿ)),  uⁿ⁺¹ = π_N(u*).
//!
//! A step is accepted when F₂ does not grow by more than the declared
//! budget; otherwise it is retried with half the step.

use crate::analysis::energy::energy_f2;
use crate::analysis::local::{concentration_events, ConcentrationEvent};
use crate::analysis::AnalysisConfig;
use crate::error::{Error, Result};
use crate::grid::{apply_boundary, ops::integrate_norm_sq, BoundaryData, Field};
use crate::manifold::TargetManifold;

use super::nonlinear::{check_constrained, nonlinearity_f};
use super::solver::{BiharmonicSolver, SolveReport, SolverOptions};

/// Step-control parameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FlowOptions {
    pub t_final: f64,
    pub dt_init: f64,
    /// dt_max = c_cfl·h⁴.
    pub c_cfl: f64,
    pub solver: SolverOptions,
    /// Relative part of the energy budget, in units of F₂(u₀).
    pub tol_energy: f64,
    /// Factor applied to dt after an accepted step, capped at dt_max.
    pub dt_growth: f64,
    pub max_halvings: usize,
    pub max_steps: Option<u64>,
    /// Stop once F₂ drops below this value.
    pub stop_below_f2: Option<f64>,
}

impl Default for FlowOptions {
    fn default() -> Self {
        Self {
            t_final: 1e-3,
            dt_init: f64::INFINITY,
            c_cfl: 0.5,
            solver: SolverOptions::default(),
            tol_energy: 1e-8,
            dt_growth: 1.25,
            max_halvings: 30,
            max_steps: None,
            stop_below_f2: None,
        }
    }
}

/// One accepted step as recorded in the ledger.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LedgerEntry {
    pub t: f64,
    pub step: u64,
    pub dt: f64,
    pub f2: f64,
    pub dissipation: f64,
    /// Energy increase the acceptance rule allowed for this step.
    pub tolerance: f64,
    pub halvings: usize,
    pub cg_iterations: usize,
}

/// F₂ history and the discrete dissipation 2∫∫|uₜ|².
#[derive(Clone, Debug, Default, PartialEq)]
pub struct EnergyLedger {
    pub f2_initial: f64,
    pub dissipation: f64,
    pub history: Vec<LedgerEntry>,
    pub events: Vec<ConcentrationEvent>,
}

impl EnergyLedger {
    pub fn new(f2_initial: f64) -> Self {
        Self {
            f2_initial,
            ..Self::default()
        }
    }

    /// F₂ of the most recent state.
    pub fn f2_current(&self) -> f64 {
        self.history.last().map_or(self.f2_initial, |e| e.f2)
    }

    /// Accepted steps whose energy increase exceeds the recorded budget.
    pub fn violations(&self) -> usize {
        let mut prev = self.f2_initial;
        let mut count = 0;
        for e in &self.history {
            if e.f2 > prev + e.tolerance {
                count += 1;
            }
            prev = e.f2;
        }
        count
    }

    /// Accepted steps whose energy rose by more than `budget`, ignoring the
    /// recorded per-step allowance.
    pub fn increases_beyond(&self, budget: f64) -> usize {
        let mut prev = self.f2_initial;
        let mut count = 0;
        for e in &self.history {
            if e.f2 > prev + budget {
                count += 1;
            }
            prev = e.f2;
        }
        count
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FlowState {
    pub u: Field,
    pub t: f64,
    /// Nominal step for the next attempt.
    pub dt: f64,
    pub step_index: u64,
    pub ledger: EnergyLedger,
}

impl FlowState {
    /// Initial state; the ledger starts at F₂(u₀).
    pub fn new(u: Field, dt: f64) -> Result<Self> {
        let f2 = energy_f2(&u)?;
        Ok(Self {
            u,
            t: 0.0,
            dt,
            step_index: 0,
            ledger: EnergyLedger::new(f2),
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum StopReason {
    FinalTime,
    MaxSteps,
    EnergyBelowThreshold,
    /// Projection onto N failed at `node`; the state before the failing step
    /// is kept.
    Singularity {
        t: f64,
        node: Vec<isize>,
    },
}

/// A state kept in memory by [`run`].
#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub t: f64,
    pub step: u64,
    pub u: Field,
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub initial: Snapshot,
    pub snapshots: Vec<Snapshot>,
    pub final_state: FlowState,
    pub stop: StopReason,
}

/// Per-step diagnostics returned alongside the new state.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct StepReport {
    pub dt: f64,
    pub halvings: usize,
    pub solve: SolveReport,
    pub ut_norm_sq: f64,
}

/// Everything one trajectory needs besides its state.
pub struct Stepper {
    target: TargetManifold,
    bc: Option<BoundaryData>,
    solver: BiharmonicSolver,
    opts: FlowOptions,
    dt_max: f64,
}

impl Stepper {
    pub fn new(
        target: TargetManifold,
        bc: Option<BoundaryData>,
        grid: crate::grid::Grid,
        opts: FlowOptions,
    ) -> Result<Self> {
        if grid.is_periodic() != bc.is_none() {
            return Err(Error::Precondition(
                "boundary data is required on boxes and meaningless on tori".into(),
            ));
        }
        if let Some(bc) = &bc {
            bc.validate(&target)?;
        }
        let dt_max = opts.c_cfl * grid.h().powi(4);
        Ok(Self {
            target,
            bc,
            solver: BiharmonicSolver::new(grid),
            opts,
            dt_max,
        })
    }

    pub fn options(&self) -> &FlowOptions {
        &self.opts
    }

    pub fn target(&self) -> &TargetManifold {
        &self.target
    }

    pub fn boundary(&self) -> Option<&BoundaryData> {
        self.bc.as_ref()
    }

    pub fn dt_max(&self) -> f64 {
        self.dt_max
    }

    /// Initial state from u₀: checks the constraint and the boundary trace,
    /// applies the boundary closure and clamps dt to dt_max.
    pub fn initial_state(&self, u0: &Field) -> Result<FlowState> {
        check_constrained(u0, &self.target)?;
        let u = self.close(u0)?;
        FlowState::new(u, self.opts.dt_init.min(self.dt_max))
    }

    /// Reapplies the boundary data after a mutation (no-op on tori).
    pub fn close(&self, u: &Field) -> Result<Field> {
        match &self.bc {
            Some(bc) => {
                let mismatch = bc.trace_mismatch(u);
                if !(mismatch <= 1e-8) {
                    return Err(Error::IncompatibleInitialData { mismatch });
                }
                apply_boundary(u, bc)
            }
            None => Ok(u.clone()),
        }
    }

    fn explicit_part(&self, u: &Field) -> Result<Option<Field>> {
        if self.target.is_flat() {
            Ok(None)
        } else {
            nonlinearity_f(u, &self.target).map(Some)
        }
    }

    /// One IMEX update with step `dt`, without acceptance logic.
    fn attempt(
        &self,
        state: &FlowState,
        f: Option<&Field>,
        dt: f64,
    ) -> Result<(Field, SolveReport)> {
        let u = &state.u;
        let r = match f {
            Some(f) => u.axpby(1.0, f, -dt)?,
            None => u.clone(),
        };
        let (mut w, report) =
            self.solver
                .solve_step(&r, self.bc.as_ref(), dt, &self.opts.solver)?;
        let grid = *u.grid();
        let projected = if grid.is_periodic() {
            w.project_nodes(&self.target, |_| true)
        } else {
            w.project_nodes(&self.target, |c| !grid.is_boundary(c))
        };
        if let Err(node) = projected {
            return Err(Error::SingularityStop {
                t: state.t,
                node: node[..grid.dim()].to_vec(),
            });
        }
        let w = match &self.bc {
            Some(bc) => apply_boundary(&w, bc)?,
            None => w,
        };
        Ok((w, report))
    }

    /// Advances by exactly `dt`, skipping the energy test. Used to co-evolve
    /// a second trajectory on a shared schedule.
    pub fn advance_fixed(&self, state: &FlowState, dt: f64) -> Result<FlowState> {
        let mut next = state.clone();
        self.advance_fixed_in_place(&mut next, dt)?;
        Ok(next)
    }

    /// [`Stepper::advance_fixed`] in place; `state` is untouched on error.
    pub fn advance_fixed_in_place(&self, state: &mut FlowState, dt: f64) -> Result<()> {
        let f = self.explicit_part(&state.u)?;
        let (w, report) = self.attempt(state, f.as_ref(), dt)?;
        let ut2 = integrate_norm_sq(&w.axpby(1.0, &state.u, -1.0)?) / (dt * dt);
        let f2 = energy_f2(&w)?;
        self.record(state, w, f2, ut2, dt, 0, report, f64::INFINITY);
        Ok(())
    }

    #[allow(clippy::too_many_arguments)]
    fn record(
        &self,
        state: &mut FlowState,
        w: Field,
        f2: f64,
        ut_norm_sq: f64,
        dt: f64,
        halvings: usize,
        solve: SolveReport,
        tolerance: f64,
    ) -> StepReport {
        let ledger = &mut state.ledger;
        ledger.dissipation += 2.0 * dt * ut_norm_sq;
        state.step_index += 1;
        state.t += dt;
        ledger.history.push(LedgerEntry {
            t: state.t,
            step: state.step_index,
            dt,
            f2,
            dissipation: ledger.dissipation,
            tolerance,
            halvings,
            cg_iterations: solve.iterations,
        });
        state.u = w;
        StepReport {
            dt,
            halvings,
            solve,
            ut_norm_sq,
        }
    }

    /// One accepted IMEX step, halving dt until F₂(uⁿ⁺¹) ≤ F₂(uⁿ) + tol_energy.
    pub fn step(&self, state: &FlowState) -> Result<(FlowState, StepReport)> {
        let mut next = state.clone();
        let report = self.advance(&mut next)?;
        Ok((next, report))
    }

    /// [`Stepper::step`] in place, so long runs do not copy the ledger at
    /// every step. On error `state` is left as it was.
    pub fn advance(&self, state: &mut FlowState) -> Result<StepReport> {
        let f = self.explicit_part(&state.u)?;
        let f2_old = state.ledger.f2_current();
        let remaining = self.opts.t_final - state.t;
        let mut nominal = state.dt.min(self.dt_max);
        for halvings in 0..=self.opts.max_halvings {
            let truncated = remaining <= nominal * (1.0 + 1e-9);
            let dt = if truncated { remaining } else { nominal };
            let (w, solve) = self.attempt(state, f.as_ref(), dt)?;
            let ut2 = integrate_norm_sq(&w.axpby(1.0, &state.u, -1.0)?) / (dt * dt);
            let tolerance = self.opts.tol_energy * state.ledger.f2_initial + 100.0 * dt * dt * ut2;
            let f2_new = energy_f2(&w)?;
            if f2_new <= f2_old + tolerance {
                let report = self.record(state, w, f2_new, ut2, dt, halvings, solve, tolerance);
                if truncated {
                    state.t = self.opts.t_final;
                    state.dt = nominal;
                } else {
                    state.dt = (nominal * self.opts.dt_growth).min(self.dt_max);
                }
                if let Some(e) = state.ledger.history.last_mut() {
                    e.t = state.t;
                }
                return Ok(report);
            }
            nominal *= 0.5;
        }
        Err(Error::StepRejected {
            halvings: self.opts.max_halvings,
            dt: nominal * 2.0,
        })
    }

    /// True when no further step should be taken from `state`.
    pub fn stop_reason(&self, state: &FlowState) -> Option<StopReason> {
        if state.t >= self.opts.t_final || self.opts.t_final - state.t <= 1e-12 * self.dt_max {
            return Some(StopReason::FinalTime);
        }
        if let Some(max) = self.opts.max_steps {
            if state.step_index >= max {
                return Some(StopReason::MaxSteps);
            }
        }
        if let Some(level) = self.opts.stop_below_f2 {
            if state.ledger.f2_current() < level {
                return Some(StopReason::EnergyBelowThreshold);
            }
        }
        None
    }
}

/// `step` as a free function over borrowed pieces.
pub fn step_imex(
    state: &FlowState,
    target: &TargetManifold,
    bc: Option<&BoundaryData>,
    opts: &FlowOptions,
) -> Result<FlowState> {
    Stepper::new(*target, bc.cloned(), *state.u.grid(), *opts)?
        .step(state)
        .map(|(s, _)| s)
}

/// Controls for [`run`] beyond step control.
#[derive(Clone, Debug, Default)]
pub struct RunControl {
    /// Observe (and keep) every `snapshot_stride`-th state; 0 disables.
    pub snapshot_stride: u64,
    /// Keep observed states in the trajectory.
    pub keep_snapshots: bool,
    /// Concentration detection at observed states.
    pub detection: Option<AnalysisConfig>,
}

/// Iterates [`Stepper::step`] from `state` until a stop condition holds.
///
/// `observe` is called with the initial state, every `snapshot_stride`-th
/// state, and the final state, together with the concentration events
/// detected in it. A projection failure ends the run with
/// [`StopReason::Singularity`] rather than an error.
pub fn run<O>(
    stepper: &Stepper,
    state: FlowState,
    control: &RunControl,
    mut observe: O,
) -> Result<Trajectory>
where
    O: FnMut(&FlowState, &[ConcentrationEvent]) -> Result<()>,
{
    let mut state = state;
    let initial = Snapshot {
        t: state.t,
        step: state.step_index,
        u: state.u.clone(),
    };
    let mut snapshots = Vec::new();
    let mut visit = |state: &mut FlowState, snapshots: &mut Vec<Snapshot>| -> Result<()> {
        let events = match &control.detection {
            Some(cfg) => concentration_events(&state.u, cfg, state.t, state.step_index)?,
            None => Vec::new(),
        };
        state.ledger.events.extend(events.iter().cloned());
        observe(state, &events)?;
        if control.keep_snapshots {
            snapshots.push(Snapshot {
                t: state.t,
                step: state.step_index,
                u: state.u.clone(),
            });
        }
        Ok(())
    };
    visit(&mut state, &mut snapshots)?;
    let mut last_observed = state.step_index;
    let stop = loop {
        if let Some(reason) = stepper.stop_reason(&state) {
            break reason;
        }
        match stepper.advance(&mut state) {
            Ok(_) => {}
            Err(Error::SingularityStop { t, node }) => break StopReason::Singularity { t, node },
            Err(e) => return Err(e),
        }
        if control.snapshot_stride > 0 && state.step_index % control.snapshot_stride == 0 {
            visit(&mut state, &mut snapshots)?;
            last_observed = state.step_index;
        }
    };
    if last_observed != state.step_index {
        visit(&mut state, &mut snapshots)?;
    }
    Ok(Trajectory {
        initial,
        snapshots,
        final_state: state,
        stop,
    })
}
