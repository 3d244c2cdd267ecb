//! Tension field and the lower-order part f(u) of the Euler-Lagrange operator
//! of F₂, assembled from the grid operators.
//!
//! The normal frame is extended off N (for the sphere ν(p) = p), so the
//! products with dνᵢ are also evaluated at ghost nodes, which need not lie
//! on N.

use crate::error::{Error, Result};
use crate::grid::{bilaplacian, divergence, gradient, laplacian, Field, VectorField};
use crate::manifold::TargetManifold;

/// Tolerance for the on-manifold precondition of the flow operators.
pub const CONSTRAINT_TOLERANCE: f64 = 1e-10;

/// Fails with `PointOffManifold` if a physical node is farther than
/// [`CONSTRAINT_TOLERANCE`] from N.
pub fn check_constrained(u: &Field, m: &TargetManifold) -> Result<()> {
    if u.ncomp() != m.ambient_dim() {
        return Err(Error::ShapeMismatch);
    }
    let distance = u.max_distance_to(m);
    if !(distance <= CONSTRAINT_TOLERANCE) {
        return Err(Error::PointOffManifold { distance });
    }
    Ok(())
}

/// Tension field, the tangential part of Δu, valid on the physical nodes.
///
/// With A(y)(X, Y) the second fundamental form as returned by
/// [`TargetManifold::second_fundamental_form`] (for the sphere
/// -⟨X, Y⟩y), the tangential part is Δu - Σₖ A(u)(∂ₖu, ∂ₖu); it is often
/// written Δu + A(u)(∇u, ∇u) under the opposite sign convention for A.
/// The normal leakage of the discrete ∂ₖu is removed before it enters A.
pub fn tension(u: &Field, m: &TargetManifold) -> Result<Field> {
    check_constrained(u, m)?;
    let lap = laplacian(u)?;
    let grad = gradient(u)?;
    let g = *u.grid();
    let l = u.ncomp();
    let data = g.map_region(0, l, |idx, out| {
        let y = u.at(idx);
        out.copy_from_slice(lap.at(idx));
        let mut t = vec![0.0; l];
        let mut a = vec![0.0; l];
        for comp in &grad.components {
            t.copy_from_slice(comp.at(idx));
            m.tangential_unchecked(y, &mut t);
            m.second_fundamental_form_unchecked(y, &t, &t, &mut a);
            for c in 0..l {
                out[c] -= a[c];
            }
        }
    });
    Ok(Field::from_raw(g, l, data, 0))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// f(u) = Σᵢ (Δ⟨∇u, dνᵢ∇u⟩ + ∇·⟨Δu, dνᵢ∇u⟩ + ⟨∇Δu, dνᵢ∇u⟩) νᵢ(u), valid on
/// the physical nodes. Identically zero for flat targets.
pub fn nonlinearity_f(u: &Field, m: &TargetManifold) -> Result<Field> {
    u.require_ghosts(2)?;
    check_constrained(u, m)?;
    let g = *u.grid();
    let l = u.ncomp();
    if m.is_flat() {
        return Ok(Field::from_raw(g, l, vec![0.0; g.storage_len() * l], 0));
    }
    let grad = gradient(u)?;
    let lap = laplacian(u)?;
    let grad_lap = gradient(&lap)?;
    let depth = grad.ghost_depth();
    let d = g.dim();

    let mut total = vec![0.0; g.storage_len() * l];
    for i in 0..m.codim() {
        // dνᵢ(u)∂ₖu for every axis, needed one layer out
        let dnu: Vec<Field> = (0..d)
            .map(|k| {
                let data = g.map_region(depth, l, |idx, out| {
                    m.dnormal_unchecked(u.at(idx), i, grad.components[k].at(idx), out);
                });
                Field::from_raw(g, l, data, depth)
            })
            .collect();
        let s = Field::from_raw(
            g,
            1,
            g.map_region(depth, 1, |idx, out| {
                out[0] = (0..d)
                    .map(|k| dot(grad.components[k].at(idx), dnu[k].at(idx)))
                    .sum();
            }),
            depth,
        );
        let v = VectorField {
            components: (0..d)
                .map(|k| {
                    let data = g.map_region(depth, 1, |idx, out| {
                        out[0] = dot(lap.at(idx), dnu[k].at(idx));
                    });
                    Field::from_raw(g, 1, data, depth)
                })
                .collect(),
        };
        let t1 = laplacian(&s)?;
        let t2 = divergence(&v)?;
        let data = g.map_region(0, l, |idx, out| {
            let t3: f64 = (0..d)
                .map(|k| dot(grad_lap.components[k].at(idx), dnu[k].at(idx)))
                .sum();
            let coef = t1.at(idx)[0] + t2.at(idx)[0] + t3;
            m.normal_unchecked(u.at(idx), i, out);
            out.iter_mut().for_each(|x| *x *= coef);
        });
        for (acc, x) in total.iter_mut().zip(&data) {
            *acc += x;
        }
    }
    Ok(Field::from_raw(g, l, total, 0))
}

/// -Δ²u - f(u) on the physical nodes.
pub fn rhs(u: &Field, m: &TargetManifold) -> Result<Field> {
    let f = nonlinearity_f(u, m)?;
    let b = bilaplacian(u)?;
    let mut out = b.axpby(-1.0, &f, -1.0)?;
    out.set_ghost_depth(0);
    Ok(out)
}
