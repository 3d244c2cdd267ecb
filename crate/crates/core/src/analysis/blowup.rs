//! Blow-up radius selection and rescaling around a concentration point.

use crate::error::{Error, Result};
use crate::flow::stepper::Trajectory;
use crate::grid::{Field, Grid, Topology, MAX_DIM};

use super::local::{ConcentrationEvent, EnergyDensity};
use super::AnalysisConfig;

/// Nodes per axis of the rescaled window over [-1, 1]ᵈ.
pub const WINDOW_NODES: usize = 33;

/// Accepted relative deviation of E(B_r) from ε₁/C₀.
pub const SELECTION_TOLERANCE: f64 = 0.05;

#[derive(Clone, Debug)]
pub struct BlowupCandidate {
    pub center: Vec<f64>,
    pub time: f64,
    pub radius: f64,
    /// v(ξ) = u(x + rξ) on [-1, 1]ᵈ, stored on a [`WINDOW_NODES`]ᵈ box grid
    /// whose node at position y corresponds to ξ = 2y - 1.
    pub rescaled: Field,
    pub local_energy: f64,
    /// dist(x, ∂Ω)/r; infinite on a torus.
    pub boundary_distance_ratio: f64,
}

impl BlowupCandidate {
    /// Interior bubbles have balls that stay clear of the boundary.
    pub fn is_interior(&self) -> bool {
        self.boundary_distance_ratio > 1.0
    }
}

/// Multilinear interpolation of `u` at `x`; points outside the box are
/// clamped onto it, periodic coordinates are wrapped.
pub fn interpolate(u: &Field, x: &[f64], out: &mut [f64]) {
    let g = u.grid();
    let d = g.dim();
    let n = g.n() as isize;
    let mut base = [0isize; MAX_DIM];
    let mut frac = [0.0; MAX_DIM];
    for k in 0..d {
        let s = x[k] / g.h();
        if g.is_periodic() {
            let f = s.floor();
            base[k] = f as isize;
            frac[k] = s - f;
        } else {
            let s = s.clamp(0.0, (n - 1) as f64);
            let f = s.floor().min((n - 2) as f64);
            base[k] = f as isize;
            frac[k] = s - f;
        }
    }
    out.iter_mut().for_each(|v| *v = 0.0);
    for corner in 0..(1usize << d) {
        let mut w = 1.0;
        let mut c = base;
        for k in 0..d {
            if corner >> k & 1 == 1 {
                c[k] += 1;
                w *= frac[k];
            } else {
                w *= 1.0 - frac[k];
            }
        }
        if w == 0.0 {
            continue;
        }
        for (o, v) in out.iter_mut().zip(u.value(&c)) {
            *o += w * v;
        }
    }
}

/// v(ξ) = u(center + r·ξ) sampled on the rescaled window.
pub fn rescale(u: &Field, center: &[f64], radius: f64) -> Result<Field> {
    let g = *u.grid();
    let window = Grid::new(g.dim(), WINDOW_NODES, Topology::BoxClamped)?;
    let l = u.ncomp();
    let mut out = Field::zeros(window, l);
    let mut x = [0.0; MAX_DIM];
    let mut buf = vec![0.0; l];
    let data = out.data_mut();
    for idx in window.node_indices() {
        let y = window.position(&window.coords(idx));
        for k in 0..g.dim() {
            x[k] = center[k] + radius * (2.0 * y[k] - 1.0);
        }
        interpolate(u, &x[..g.dim()], &mut buf);
        data[idx * l..(idx + 1) * l].copy_from_slice(&buf);
    }
    Ok(out)
}

/// Selects r with E(u; B_r(center)) = ε₁/C₀ by bisection between 2h and the
/// diameter, then rescales u around `center` by r.
pub fn extract_at(
    u: &Field,
    center: &[f64],
    time: f64,
    cfg: &AnalysisConfig,
) -> Result<BlowupCandidate> {
    let g = *u.grid();
    let density = EnergyDensity::new(u)?;
    let target = cfg.extraction_level();
    let energy = |r: f64| density.local_energy(center, r);
    let r_min = 2.0 * g.h();
    let r_max = (g.dim() as f64).sqrt();
    let e_min = energy(r_min)?;
    if e_min > target * (1.0 + SELECTION_TOLERANCE) {
        return Err(Error::RadiusBelowResolution { min_radius: r_min });
    }
    let e_max = energy(r_max)?;
    if e_max < target * (1.0 - SELECTION_TOLERANCE) {
        return Err(Error::NoCandidate(format!(
            "E over the whole domain is {e_max:e}, below the selection level {target:e}"
        )));
    }
    // E is a nondecreasing step function of r: keep E(lo) < target <= E(hi)
    let (mut lo, mut hi) = (r_min, r_max);
    let (mut e_lo, mut e_hi) = (e_min, e_max);
    if e_lo >= target {
        hi = lo;
        e_hi = e_lo;
    }
    for _ in 0..80 {
        if hi - lo <= 1e-12 * r_max {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let e = energy(mid)?;
        if e >= target {
            hi = mid;
            e_hi = e;
        } else {
            lo = mid;
            e_lo = e;
        }
    }
    let (radius, local_energy) = if (e_hi - target).abs() <= (target - e_lo).abs() {
        (hi, e_hi)
    } else {
        (lo, e_lo)
    };
    if (local_energy - target).abs() > SELECTION_TOLERANCE * target {
        return Err(Error::NoCandidate(format!(
            "E jumps across the selection level {target:e} (from {e_lo:e} to {e_hi:e}) at r = {radius}"
        )));
    }
    let boundary_distance_ratio = if g.is_periodic() {
        f64::INFINITY
    } else {
        (0..g.dim())
            .map(|k| center[k].min(1.0 - center[k]))
            .fold(f64::INFINITY, f64::min)
            .max(0.0)
            / radius
    };
    Ok(BlowupCandidate {
        center: center[..g.dim()].to_vec(),
        time,
        radius,
        rescaled: rescale(u, center, radius)?,
        local_energy,
        boundary_distance_ratio,
    })
}

/// Extraction for an event recorded during `traj`, using the state kept for
/// the event's step.
pub fn blowup_extract(
    traj: &Trajectory,
    event: &ConcentrationEvent,
    cfg: &AnalysisConfig,
) -> Result<BlowupCandidate> {
    let snap = traj
        .snapshots
        .iter()
        .chain(std::iter::once(&traj.initial))
        .find(|s| s.step == event.step)
        .ok_or_else(|| Error::Precondition(format!("no stored state for step {}", event.step)))?;
    extract_at(&snap.u, &event.center, event.t, cfg)
}
