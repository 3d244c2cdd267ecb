//! Global energies, the energy identity and variational checks.

use crate::error::{Error, Result};
use crate::flow::nonlinear::{check_constrained, nonlinearity_f, tension};
use crate::flow::stepper::{EnergyLedger, Trajectory};
use crate::grid::{bilaplacian, integrate, laplacian, CompensatedSum, Field};
use crate::manifold::TargetManifold;

/// F₂(u) = ∫|Δu|².
pub fn energy_f2(u: &Field) -> Result<f64> {
    Ok(integrate(&laplacian(u)?.norm_sq()))
}

/// E₂(u) = ∫|τ(u)|².
pub fn energy_e2(u: &Field, m: &TargetManifold) -> Result<f64> {
    Ok(integrate(&tension(u, m)?.norm_sq()))
}

/// |D(T) + F₂(T) - F₂(0)| / max(F₂(0), ε_machine), where D = 2∫∫|uₜ|² is
/// the dissipation as accumulated by the ledger.
pub fn energy_identity_residual_of(ledger: &EnergyLedger) -> f64 {
    let f0 = ledger.f2_initial;
    (ledger.dissipation + ledger.f2_current() - f0).abs() / f0.max(f64::EPSILON)
}

pub fn energy_identity_residual(traj: &Trajectory) -> f64 {
    energy_identity_residual_of(&traj.final_state.ledger)
}

/// Discrete L² norm of the tangential part of Δ²u + f(u) over the nodes
/// away from the boundary (all nodes on a torus).
pub fn biharmonic_residual(u: &Field, m: &TargetManifold) -> Result<f64> {
    let el = bilaplacian(u)?.axpby(1.0, &nonlinearity_f(u, m)?, 1.0)?;
    let g = *u.grid();
    let l = u.ncomp();
    let mut v = vec![0.0; l];
    let mut s = CompensatedSum::new();
    for idx in g.interior_indices() {
        v.copy_from_slice(el.at(idx));
        m.tangential_unchecked(u.at(idx), &mut v);
        s.add(v.iter().map(|x| x * x).sum());
    }
    Ok((g.cell_volume() * s.value()).sqrt())
}

/// Layers next to ∂Ω where a test direction must vanish: the boundary node
/// and the two layers whose values feed the ghost reflection.
pub const DIRECTION_CLEARANCE: isize = 3;

/// Relative mismatch between the central difference quotient
/// (F₂(π(u + εφ)) - F₂(π(u - εφ)))/2ε and the first variation
/// 2∫⟨Δ²u + f(u), φ⟩.
///
/// φ must be tangent along u and vanish within [`DIRECTION_CLEARANCE`]
/// layers of ∂Ω, so the perturbed maps share u's boundary closure.
pub fn gradient_consistency(u: &Field, m: &TargetManifold, phi: &Field, eps: f64) -> Result<f64> {
    u.check_shape(phi)?;
    u.require_ghosts(2)?;
    check_constrained(u, m)?;
    let g = *u.grid();
    let l = u.ncomp();
    let last = g.n() as isize - 1;
    for idx in g.node_indices() {
        let c = g.coords(idx);
        let p = phi.at(idx);
        let size = p.iter().map(|x| x * x).sum::<f64>().sqrt();
        let nc = m.normal_component_unchecked(u.at(idx), p);
        if nc > 1e-10 * size.max(1.0) {
            return Err(Error::NonTangentDirection {
                normal_component: nc,
            });
        }
        if !g.is_periodic() && size > 0.0 {
            let near = (0..g.dim())
                .any(|k| c[k] < DIRECTION_CLEARANCE || c[k] > last - DIRECTION_CLEARANCE);
            if near {
                return Err(Error::Precondition(format!(
                    "direction is nonzero within {DIRECTION_CLEARANCE} layers of the boundary at {:?}",
                    &c[..g.dim()]
                )));
            }
        }
    }
    let perturbed = |s: f64| -> Result<f64> {
        let mut w = u.clone();
        let mut buf = vec![0.0; l];
        let data = w.data_mut();
        for idx in g.node_indices() {
            let p = phi.at(idx);
            if p.iter().all(|x| *x == 0.0) {
                continue;
            }
            let v = &mut data[idx * l..(idx + 1) * l];
            for c in 0..l {
                v[c] += s * p[c];
            }
            m.project_into(v, &mut buf)?;
            v.copy_from_slice(&buf);
        }
        // the support avoids every node the ghosts are built from
        w.set_ghost_depth(u.ghost_depth().min(g.pad()));
        energy_f2(&w)
    };
    let fd = (perturbed(eps)? - perturbed(-eps)?) / (2.0 * eps);
    let el = bilaplacian(u)?.axpby(1.0, &nonlinearity_f(u, m)?, 1.0)?;
    let exact = 2.0 * integrate(&el.dot(phi)?);
    let scale = fd.abs().max(exact.abs());
    Ok(if scale == 0.0 {
        0.0
    } else {
        (fd - exact).abs() / scale
    })
}
