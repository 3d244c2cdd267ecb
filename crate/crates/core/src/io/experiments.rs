//! Experiment drivers: each turns a validated [`RunConfig`] into output
//! files and a plain-text report.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use crate::analysis::{
    blowup_extract, energy_identity_residual_of, gap_experiment, quantization_check,
    singular_events, BallIntegrals, Inequality,
};
use crate::error::{Error, Result};
use crate::flow::{
    run, stability_probe, FlowOptions, RunControl, StabilityReport, Stepper, StopReason,
};
use crate::grid::{apply_boundary, BoundaryData, CompensatedSum, Field, Grid};
use crate::manifold::TargetManifold;

use super::config::{Experiment, InitKind, RunConfig};
use super::output::{DiagnosticsRow, OutputDir};
use super::random::{default_offset, generate_random_field, Bubble, RandomFieldSpec};
use super::snapshot::read_snapshot;

pub const REPORT_FILE: &str = "report.txt";

/// Ordered `key = value` summary of an experiment.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Report {
    pub lines: Vec<(String, String)>,
    /// How the underlying flow stopped, when there was one.
    pub stop: Option<StopReason>,
}

impl Report {
    pub fn push(&mut self, key: &str, value: impl ToString) {
        self.lines.push((key.to_string(), value.to_string()));
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.lines
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.lines {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }
}

/// Initial map and matching clamped data (`None` on a torus). The map
/// carries a valid boundary closure.
pub fn initial_data(cfg: &RunConfig) -> Result<(Field, Option<BoundaryData>)> {
    let grid = cfg.grid()?;
    let target = cfg.target();
    match cfg.init_kind {
        InitKind::Random => {
            let u = generate_random_field(&cfg.random_spec(), &grid, &target)?;
            if grid.is_periodic() {
                return Ok((u, None));
            }
            let bc = BoundaryData::constant(grid, &default_offset(&target))?;
            Ok((apply_boundary(&u, &bc)?, Some(bc)))
        }
        InitKind::Bubble => {
            let bubble = Bubble::new(&grid, &target, &vec![0.5; grid.dim()], cfg.bubble_scale)?;
            let u = bubble.field(&grid);
            if grid.is_periodic() {
                return Ok((u, None));
            }
            let bc = bubble.boundary(&grid)?;
            Ok((apply_boundary(&u, &bc)?, Some(bc)))
        }
    }
}

fn stepper_for(cfg: &RunConfig, bc: Option<BoundaryData>) -> Result<Stepper> {
    Stepper::new(cfg.target(), bc, cfg.grid()?, cfg.flow_options())
}

fn no_resume(which: Experiment, resume: Option<&Path>) -> Result<()> {
    match resume {
        Some(_) => Err(Error::ConstraintViolation {
            fields: vec!["--resume".into()],
            message: format!(
                "the {} experiment cannot resume from a snapshot",
                which.as_str()
            ),
        }),
        None => Ok(()),
    }
}

/// Dispatches on `cfg.experiment`, writes `report.txt` and returns the report.
pub fn run_experiment(cfg: &RunConfig, resume: Option<&Path>) -> Result<Report> {
    let report = match cfg.experiment {
        Experiment::Run => flow_run(cfg, resume, false)?,
        Experiment::Blowup => flow_run(cfg, resume, true)?,
        Experiment::Gap => {
            no_resume(cfg.experiment, resume)?;
            gap(cfg)?
        }
        Experiment::LinearValidate => {
            no_resume(cfg.experiment, resume)?;
            linear_validate(cfg)?
        }
        Experiment::ProbeInequalities => {
            no_resume(cfg.experiment, resume)?;
            probe_inequalities(cfg)?
        }
        Experiment::Stability => {
            no_resume(cfg.experiment, resume)?;
            stability(cfg)?
        }
    };
    Ok(report)
}

fn header(cfg: &RunConfig) -> Report {
    let mut r = Report::default();
    r.push("experiment", cfg.experiment.as_str());
    r.push(
        "grid",
        format!(
            "d={} n={} {}",
            cfg.grid_d,
            cfg.grid_n,
            cfg.topology.as_str()
        ),
    );
    r
}

fn push_stop(r: &mut Report, stop: &StopReason) {
    let s = match stop {
        StopReason::FinalTime => "final_time".to_string(),
        StopReason::MaxSteps => "max_steps".to_string(),
        StopReason::EnergyBelowThreshold => "energy_below_threshold".to_string(),
        StopReason::Singularity { t, node } => format!("singularity t={t:e} node={node:?}"),
    };
    r.push("stop", s);
}

/// The plain flow run (and, with `extract`, blow-up extraction at every
/// singular event). Diagnostics, events and snapshots are written at every
/// observed state.
fn flow_run(cfg: &RunConfig, resume: Option<&Path>, extract: bool) -> Result<Report> {
    let target = cfg.target();
    let acfg = cfg.analysis();
    let grid = cfg.grid()?;
    acfg.validate(&grid)?;
    let (u0, bc) = initial_data(cfg)?;
    let stepper = stepper_for(cfg, bc)?;
    let state = match resume {
        Some(path) => {
            let snap = read_snapshot(path)?;
            if *snap.u.grid() != grid || snap.u.ncomp() != target.ambient_dim() {
                return Err(Error::ConstraintViolation {
                    fields: vec!["grid.d".into(), "grid.n".into(), "target.L".into()],
                    message: "snapshot does not match the configured grid and target".into(),
                });
            }
            snap.into_state(&stepper)?
        }
        None => stepper.initial_state(&u0)?,
    };
    let start_step = state.step_index;
    let mut out = OutputDir::open(&cfg.out_dir, resume.is_some())?;
    out.write_text("config.txt", &cfg.serialize())?;
    let control = RunControl {
        snapshot_stride: cfg.snapshot_stride,
        keep_snapshots: extract,
        detection: Some(acfg),
    };
    let mut observed = Vec::new();
    let traj = run(&stepper, state, &control, |s, events| {
        observed.push(s.step_index);
        if resume.is_some() && s.step_index == start_step {
            return Ok(());
        }
        out.write_row(&DiagnosticsRow::of_state(s, &target, &acfg)?)?;
        out.log_events(events, if extract { "pending" } else { "not_requested" })?;
        out.write_snapshot(s)?;
        Ok(())
    })?;
    let end = &traj.final_state;
    if let StopReason::Singularity { t, node } = &traj.stop {
        out.log(&format!("singularity t={t:e} node={node:?}"))?;
    }

    let mut r = header(cfg);
    push_stop(&mut r, &traj.stop);
    r.push("steps", end.step_index);
    r.push("t", format!("{:e}", end.t));
    r.push("f2_initial", format!("{:e}", end.ledger.f2_initial));
    r.push("f2_final", format!("{:e}", end.ledger.f2_current()));
    r.push("dissipation", format!("{:e}", end.ledger.dissipation));
    r.push(
        "energy_identity_residual",
        format!("{:e}", energy_identity_residual_of(&end.ledger)),
    );
    r.push("energy_violations", end.ledger.violations());
    r.push(
        "energy_increases_over_tol",
        end.ledger
            .increases_beyond(cfg.tol_energy * end.ledger.f2_initial),
    );
    let episodes = singular_events(&end.ledger.events, &observed, &end.ledger);
    let q = quantization_check(&episodes, end.ledger.f2_initial, &acfg);
    r.push("singular_events", q.k_observed);
    r.push("singular_event_bound", q.k_bound);
    r.push("quantization_ok", q.ok);

    if extract {
        for (i, ep) in episodes.iter().enumerate() {
            let key = format!("blowup.{i}");
            match blowup_extract(&traj, &ep.peak, &acfg) {
                Ok(c) => {
                    out.log(&format!(
                        "extraction episode={i} t={:e} status=extracted radius={:e}",
                        c.time, c.radius
                    ))?;
                    r.push(
                        &key,
                        format!(
                            "t={:e} center={:?} radius={:e} local_energy={:e} interior={}",
                            c.time,
                            c.center,
                            c.radius,
                            c.local_energy,
                            c.is_interior()
                        ),
                    );
                    out.write_text(&format!("blowup_{i}.csv"), &profile_csv(&c.rescaled))?;
                }
                Err(e @ (Error::RadiusBelowResolution { .. } | Error::NoCandidate(_))) => {
                    out.log(&format!(
                        "extraction episode={i} t={:e} status=failed reason={e}",
                        ep.peak.t
                    ))?;
                    r.push(&key, format!("not extracted: {e}"));
                }
                Err(e) => return Err(e),
            }
        }
    }
    r.stop = Some(traj.stop.clone());
    out.write_text(REPORT_FILE, &r.render())?;
    Ok(r)
}

/// Rescaled profile as CSV: ξ coordinates followed by the components.
fn profile_csv(v: &Field) -> String {
    let g = v.grid();
    let d = g.dim();
    let mut s = String::new();
    let cols: Vec<String> = (0..d)
        .map(|k| format!("xi{k}"))
        .chain((0..v.ncomp()).map(|j| format!("v{j}")))
        .collect();
    let _ = writeln!(s, "{}", cols.join(","));
    for idx in g.node_indices() {
        let x = g.position(&g.coords(idx));
        let row: Vec<String> = (0..d)
            .map(|k| format!("{:e}", 2.0 * x[k] - 1.0))
            .chain(v.at(idx).iter().map(|y| format!("{y:e}")))
            .collect();
        let _ = writeln!(s, "{}", row.join(","));
    }
    s
}

fn gap(cfg: &RunConfig) -> Result<Report> {
    let grid = cfg.grid()?;
    let target = cfg.target();
    let out = OutputDir::open(&cfg.out_dir, false)?;
    out.write_text("config.txt", &cfg.serialize())?;
    let rep = gap_experiment(
        grid,
        &target,
        &default_offset(&target),
        &cfg.random_spec(),
        &cfg.flow_options(),
        &cfg.analysis(),
    )?;
    let mut r = header(cfg);
    push_stop(&mut r, &rep.stop);
    r.push("converged_to_constant", rep.converged_to_constant);
    r.push(
        "final_sup_deviation",
        format!("{:e}", rep.final_sup_deviation),
    );
    r.push("f2_initial", format!("{:e}", rep.f2_initial));
    r.push("f2_final", format!("{:e}", rep.f2_final));
    r.push("steps", rep.steps);
    r.push("t", format!("{:e}", rep.t));
    r.push("energy_violations", rep.violations);
    r.push("energy_increases_over_tol", rep.increases_over_tol);
    r.stop = Some(rep.stop);
    out.write_text(REPORT_FILE, &r.render())?;
    Ok(r)
}

/// Result of evolving a single Fourier mode under the linear flow.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearModeReport {
    pub steps: u64,
    pub t: f64,
    /// Initial and final amplitude of the mode, read off by projection.
    pub initial: f64,
    pub measured: f64,
    /// A·Πₙ 1/(1 + dtₙλ²) over the accepted steps.
    pub recurrence: f64,
    /// A·exp(-|2πm|⁴ t).
    pub continuum: f64,
    pub recurrence_error: f64,
    pub continuum_error: f64,
    pub energy_identity_residual: f64,
    pub violations: usize,
    pub increases_over_tol: usize,
}

/// Discrete symbol of the periodic Laplacian for wavevector `mode`.
pub fn discrete_symbol(grid: &Grid, mode: &[usize]) -> f64 {
    let h = grid.h();
    mode.iter()
        .map(|&m| {
            let s = (PI * m as f64 / grid.n() as f64).sin();
            -4.0 * s * s / (h * h)
        })
        .sum()
}

/// Discrete half-life ln 2/λ² of `mode`.
pub fn discrete_half_life(grid: &Grid, mode: &[usize]) -> f64 {
    let lam = discrete_symbol(grid, mode);
    std::f64::consts::LN_2 / (lam * lam)
}

fn mode_amplitude(u: &Field, mode: &[usize]) -> f64 {
    let g = u.grid();
    let mut s = CompensatedSum::new();
    for idx in g.node_indices() {
        let x = g.position(&g.coords(idx));
        let phase: f64 = (0..g.dim()).map(|k| 2.0 * PI * mode[k] as f64 * x[k]).sum();
        s.add(u.at(idx)[0] * phase.cos());
    }
    2.0 * s.value() / g.node_count() as f64
}

/// Evolves A·cos(2πm·x)e₁ under the flow into a flat target on a torus and
/// compares the final amplitude with the scalar recurrence and the
/// continuum exponential.
pub fn linear_mode_experiment(
    grid: Grid,
    target: TargetManifold,
    mode: &[usize],
    amplitude: f64,
    opts: &FlowOptions,
) -> Result<LinearModeReport> {
    if !target.is_flat() || !grid.is_periodic() {
        return Err(Error::Precondition(
            "the linear mode check needs a flat target on a torus".into(),
        ));
    }
    if mode.len() != grid.dim()
        || mode.iter().all(|&m| m == 0)
        || mode.iter().any(|&m| 2 * m >= grid.n())
    {
        return Err(Error::Precondition(
            "mode must be a nonzero wavevector below the Nyquist limit".into(),
        ));
    }
    let l = target.ambient_dim();
    let u0 = Field::from_fn(grid, l, |x, out| {
        out.iter_mut().for_each(|v| *v = 0.0);
        let phase: f64 = x
            .iter()
            .zip(mode)
            .map(|(xk, &m)| 2.0 * PI * m as f64 * xk)
            .sum();
        out[0] = amplitude * phase.cos();
    });
    let stepper = Stepper::new(target, None, grid, *opts)?;
    let state = stepper.initial_state(&u0)?;
    let traj = run(&stepper, state, &RunControl::default(), |_, _| Ok(()))?;
    let end = &traj.final_state;
    let lam2 = discrete_symbol(&grid, mode).powi(2);
    let initial = mode_amplitude(&traj.initial.u, mode);
    let recurrence = end
        .ledger
        .history
        .iter()
        .fold(initial, |a, e| a / (1.0 + e.dt * lam2));
    let k2: f64 = mode.iter().map(|&m| (2.0 * PI * m as f64).powi(2)).sum();
    let continuum = initial * (-k2 * k2 * end.t).exp();
    let measured = mode_amplitude(&end.u, mode);
    Ok(LinearModeReport {
        steps: end.step_index,
        t: end.t,
        initial,
        measured,
        recurrence,
        continuum,
        recurrence_error: (measured - recurrence).abs() / recurrence.abs(),
        continuum_error: (measured - continuum).abs() / continuum.abs(),
        energy_identity_residual: energy_identity_residual_of(&end.ledger),
        violations: end.ledger.violations(),
        increases_over_tol: end
            .ledger
            .increases_beyond(opts.tol_energy * end.ledger.f2_initial),
    })
}

fn linear_validate(cfg: &RunConfig) -> Result<Report> {
    let grid = cfg.grid()?;
    let out = OutputDir::open(&cfg.out_dir, false)?;
    out.write_text("config.txt", &cfg.serialize())?;
    let mut mode = vec![0; grid.dim()];
    mode[0] = 1;
    let rep = linear_mode_experiment(
        grid,
        cfg.target(),
        &mode,
        cfg.amplitude.max(f64::MIN_POSITIVE),
        &cfg.flow_options(),
    )?;
    let mut r = header(cfg);
    r.push("mode", format!("{mode:?}"));
    r.push("steps", rep.steps);
    r.push("t", format!("{:e}", rep.t));
    r.push("amplitude_initial", format!("{:e}", rep.initial));
    r.push("amplitude_measured", format!("{:e}", rep.measured));
    r.push("amplitude_recurrence", format!("{:e}", rep.recurrence));
    r.push("amplitude_continuum", format!("{:e}", rep.continuum));
    r.push("recurrence_error", format!("{:e}", rep.recurrence_error));
    r.push("continuum_error", format!("{:e}", rep.continuum_error));
    r.push(
        "energy_identity_residual",
        format!("{:e}", rep.energy_identity_residual),
    );
    r.push("energy_violations", rep.violations);
    r.push("energy_increases_over_tol", rep.increases_over_tol);
    out.write_text(REPORT_FILE, &r.render())?;
    Ok(r)
}

/// Largest empirical constant of one inequality over a probe corpus.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbeSummary {
    pub which: Inequality,
    pub max_ratio: f64,
    pub argmax_seed: u64,
    pub mean_ratio: f64,
}

/// Measures every inequality on `count` seeded random maps (seeds
/// `base.seed + i`) over B_R(x0). A degenerate right-hand side is an error.
pub fn probe_corpus(
    grid: Grid,
    target: &TargetManifold,
    base: &RandomFieldSpec,
    count: usize,
    x0: &[f64],
    radius: f64,
) -> Result<Vec<ProbeSummary>> {
    let bc = if grid.is_periodic() {
        None
    } else {
        Some(BoundaryData::constant(grid, &default_offset(target))?)
    };
    let mut out: Vec<ProbeSummary> = Inequality::ALL
        .iter()
        .map(|&which| ProbeSummary {
            which,
            max_ratio: 0.0,
            argmax_seed: base.seed,
            mean_ratio: 0.0,
        })
        .collect();
    for i in 0..count as u64 {
        let spec = RandomFieldSpec {
            seed: base.seed.wrapping_add(i),
            ..base.clone()
        };
        let mut u = generate_random_field(&spec, &grid, target)?;
        if let Some(bc) = &bc {
            u = apply_boundary(&u, bc)?;
        }
        let b = BallIntegrals::measure(&u, x0, radius)?;
        for s in &mut out {
            let r = b.ratio(s.which)?;
            s.mean_ratio += r / count as f64;
            if r > s.max_ratio {
                s.max_ratio = r;
                s.argmax_seed = spec.seed;
            }
        }
    }
    Ok(out)
}

/// Ball used by the probe experiment: centred in the domain, radius 1/4.
pub const PROBE_RADIUS: f64 = 0.25;

fn probe_inequalities(cfg: &RunConfig) -> Result<Report> {
    let grid = cfg.grid()?;
    let out = OutputDir::open(&cfg.out_dir, false)?;
    out.write_text("config.txt", &cfg.serialize())?;
    let x0 = vec![0.5; grid.dim()];
    let rows = probe_corpus(
        grid,
        &cfg.target(),
        &cfg.random_spec(),
        cfg.probe_count,
        &x0,
        PROBE_RADIUS,
    )?;
    let mut r = header(cfg);
    r.push("probes", cfg.probe_count);
    r.push("radius", PROBE_RADIUS);
    let mut csv = String::from("inequality,max_ratio,argmax_seed,mean_ratio\n");
    for s in &rows {
        r.push(
            &format!("{}.max_ratio", s.which.name()),
            format!("{:e} (seed {})", s.max_ratio, s.argmax_seed),
        );
        r.push(
            &format!("{}.mean_ratio", s.which.name()),
            format!("{:e}", s.mean_ratio),
        );
        let _ = writeln!(
            csv,
            "{},{:e},{},{:e}",
            s.which.name(),
            s.max_ratio,
            s.argmax_seed,
            s.mean_ratio
        );
    }
    out.write_text("inequalities.csv", &csv)?;
    out.write_text(REPORT_FILE, &r.render())?;
    Ok(r)
}

/// π(u + δψ) with ψ a seeded band-limited field vanishing to the decay
/// order at ∂Ω, so both maps share their clamped data.
pub fn perturbed_copy(
    u: &Field,
    target: &TargetManifold,
    spec: &RandomFieldSpec,
    delta: f64,
) -> Result<Field> {
    let grid = *u.grid();
    let l = u.ncomp();
    let flat = TargetManifold::flat_subspace(l, l);
    let psi_spec = RandomFieldSpec {
        amplitude: delta,
        offset: Some(vec![0.0; l]),
        ..spec.clone()
    };
    let psi = generate_random_field(&psi_spec, &grid, &flat)?;
    let mut v = u.axpby(1.0, &psi, 1.0)?;
    if let Err(node) = v.project_nodes(target, |_| true) {
        return Err(Error::NearSingularPoint {
            norm: v.value(&node).iter().map(|x| x * x).sum::<f64>().sqrt(),
        });
    }
    Ok(v)
}

/// Stability probe from the configured initial data and a perturbed copy.
pub fn stability_run(cfg: &RunConfig) -> Result<StabilityReport> {
    let (u0, bc) = initial_data(cfg)?;
    let spec = RandomFieldSpec {
        seed: cfg.seed.wrapping_add(1),
        ..cfg.random_spec()
    };
    let v0 = perturbed_copy(&u0, &cfg.target(), &spec, cfg.perturbation)?;
    let stepper = stepper_for(cfg, bc)?;
    stability_probe(&stepper, &u0, &v0)
}

fn stability(cfg: &RunConfig) -> Result<Report> {
    let out = OutputDir::open(&cfg.out_dir, false)?;
    out.write_text("config.txt", &cfg.serialize())?;
    let rep = stability_run(cfg)?;
    let mut r = header(cfg);
    push_stop(&mut r, &rep.stop);
    r.push("steps", rep.steps);
    r.push("initial_difference", format!("{:e}", rep.initial));
    r.push("sup_difference", format!("{:e}", rep.sup));
    r.push("growth_factor", format!("{:e}", rep.growth_factor));
    r.push("energy_violations", rep.violations);
    r.push("energy_increases_over_tol", rep.increases_over_tol);
    let mut csv = String::from("t,difference\n");
    for (t, w) in &rep.samples {
        let _ = writeln!(csv, "{t:e},{w:e}");
    }
    out.write_text("stability.csv", &csv)?;
    r.stop = Some(rep.stop);
    out.write_text(REPORT_FILE, &r.render())?;
    Ok(r)
}
