//! Second-order central difference operators and quadrature.
//!
//! On clamped boxes every first- or second-order stencil consumes one ghost
//! layer: a field with two valid layers yields ∇u and Δu valid one layer
//! deep, and Δ²u = Δ(Δu) valid on the physical nodes.

use crate::error::Result;

use super::{CompensatedSum, Field, Grid, VectorField, MAX_DIM};

fn derived_depth(u: &Field, reach: usize) -> Result<usize> {
    u.require_ghosts(reach)?;
    let g = u.grid();
    Ok(u.ghost_depth().min(g.pad()).saturating_sub(reach))
}

/// Central differences (u(x + heₖ) - u(x - heₖ)) / 2h along every axis.
pub fn gradient(u: &Field) -> Result<VectorField> {
    let depth = derived_depth(u, 1)?;
    let g = *u.grid();
    let l = u.ncomp();
    let inv = 0.5 / g.h();
    let components = (0..g.dim())
        .map(|k| {
            let data = g.map_region(depth, l, |idx, out| {
                let p = u.at(g.neighbor(idx, k, 1));
                let m = u.at(g.neighbor(idx, k, -1));
                for c in 0..l {
                    out[c] = (p[c] - m[c]) * inv;
                }
            });
            Field::from_raw(g, l, data, depth)
        })
        .collect();
    Ok(VectorField { components })
}

/// (2d+1)-point Laplacian Σₖ (u(x + heₖ) - 2u(x) + u(x - heₖ)) / h².
pub fn laplacian(u: &Field) -> Result<Field> {
    let depth = derived_depth(u, 1)?;
    let g = *u.grid();
    let l = u.ncomp();
    let inv = 1.0 / (g.h() * g.h());
    let data = g.map_region(depth, l, |idx, out| {
        let center = u.at(idx);
        for c in 0..l {
            out[c] = 0.0;
        }
        for k in 0..g.dim() {
            let p = u.at(g.neighbor(idx, k, 1));
            let m = u.at(g.neighbor(idx, k, -1));
            for c in 0..l {
                out[c] += (p[c] - 2.0 * center[c] + m[c]) * inv;
            }
        }
    });
    Ok(Field::from_raw(g, l, data, depth))
}

/// Δ²u as the composition Δ(Δu).
pub fn bilaplacian(u: &Field) -> Result<Field> {
    u.require_ghosts(2)?;
    laplacian(&laplacian(u)?)
}

/// Σₖ central difference of component k along axis k.
pub fn divergence(v: &VectorField) -> Result<Field> {
    let first = &v.components[0];
    let g = *first.grid();
    let l = first.ncomp();
    let mut depth = usize::MAX;
    for comp in &v.components {
        first.check_shape(comp)?;
        depth = depth.min(derived_depth(comp, 1)?);
    }
    let inv = 0.5 / g.h();
    let data = g.map_region(depth, l, |idx, out| {
        for c in 0..l {
            out[c] = 0.0;
        }
        for (k, comp) in v.components.iter().enumerate() {
            let p = comp.at(g.neighbor(idx, k, 1));
            let m = comp.at(g.neighbor(idx, k, -1));
            for c in 0..l {
                out[c] += (p[c] - m[c]) * inv;
            }
        }
    });
    Ok(Field::from_raw(g, l, data, depth))
}

/// Quadrature weight of a physical node: hᵈ, halved once per boundary face
/// the node lies on (trapezoid rule) on clamped boxes.
pub fn quadrature_weight(g: &Grid, coords: &[isize]) -> f64 {
    let mut w = g.cell_volume();
    if !g.is_periodic() {
        let last = g.n() as isize - 1;
        for k in 0..g.dim() {
            if coords[k] == 0 || coords[k] == last {
                w *= 0.5;
            }
        }
    }
    w
}

/// ∫ f over the physical nodes of a scalar field, summed in canonical order
/// with compensation.
pub fn integrate(f: &Field) -> f64 {
    assert_eq!(f.ncomp(), 1, "integrate expects a scalar field");
    let g = f.grid();
    let s: CompensatedSum = g
        .node_indices()
        .into_iter()
        .map(|idx| quadrature_weight(g, &g.coords(idx)) * f.at(idx)[0])
        .collect();
    s.value()
}

/// ∫ |u|².
pub fn integrate_norm_sq(u: &Field) -> f64 {
    integrate(&u.norm_sq())
}

/// One-dimensional difference weights for ∂ᵐ at offsets -2..=2.
fn axis_stencil(m: usize, h: f64) -> [f64; 5] {
    match m {
        0 => [0.0, 0.0, 1.0, 0.0, 0.0],
        1 => {
            let c = 0.5 / h;
            [0.0, -c, 0.0, c, 0.0]
        }
        2 => {
            let c = 1.0 / (h * h);
            [0.0, c, -2.0 * c, c, 0.0]
        }
        3 => {
            let c = 0.5 / (h * h * h);
            [-c, 2.0 * c, 0.0, -2.0 * c, c]
        }
        4 => {
            let c = 1.0 / (h * h * h * h);
            [c, -4.0 * c, 6.0 * c, -4.0 * c, c]
        }
        _ => panic!("axis derivative order {m} unsupported"),
    }
}

/// ∂^α u at storage node `idx`, as a tensor product of composed central
/// differences (D for order 1, D² for order 2, D·D² for 3, D²·D² for 4).
pub(crate) fn partial_at(u: &Field, idx: usize, alpha: &[usize], out: &mut [f64]) {
    let g = u.grid();
    let l = u.ncomp();
    let d = g.dim();
    out.iter_mut().for_each(|x| *x = 0.0);
    // nonzero taps per axis, in increasing shift order
    let mut taps = [[(0isize, 0.0f64); 5]; MAX_DIM];
    let mut count = [0usize; MAX_DIM];
    for k in 0..d {
        for (j, &w) in axis_stencil(alpha[k], g.h()).iter().enumerate() {
            if w != 0.0 {
                taps[k][count[k]] = (j as isize - 2, w);
                count[k] += 1;
            }
        }
    }
    let mut pos = [0usize; MAX_DIM];
    loop {
        let mut w = 1.0;
        let mut node = idx;
        for k in 0..d {
            let (s, wk) = taps[k][pos[k]];
            w *= wk;
            if s != 0 {
                node = g.neighbor(node, k, s);
            }
        }
        let v = u.at(node);
        for c in 0..l {
            out[c] += w * v[c];
        }
        let mut k = d;
        loop {
            if k == 0 {
                return;
            }
            k -= 1;
            pos[k] += 1;
            if pos[k] < count[k] {
                break;
            }
            pos[k] = 0;
        }
    }
}

/// Multi-indices α with |α| = order in d variables, paired with the number
/// of ordered index tuples they represent (order! / Π αᵢ!).
pub(crate) fn multi_indices(d: usize, order: usize) -> Vec<(Vec<usize>, f64)> {
    fn fact(n: usize) -> f64 {
        (1..=n).map(|x| x as f64).product()
    }
    let mut out = Vec::new();
    let mut alpha = vec![0usize; d];
    fn rec(k: usize, left: usize, alpha: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if k + 1 == alpha.len() {
            alpha[k] = left;
            out.push(alpha.clone());
            return;
        }
        for m in 0..=left {
            alpha[k] = m;
            rec(k + 1, left - m, alpha, out);
        }
    }
    let mut list = Vec::new();
    rec(0, order, &mut alpha, &mut list);
    for a in list {
        let mult = fact(order) / a.iter().map(|&m| fact(m)).product::<f64>();
        out.push((a, mult));
    }
    out
}

/// |∇ᵏu|² at a node: the squared norm of the full k-th derivative tensor.
pub(crate) fn tensor_norm_sq_at(
    u: &Field,
    idx: usize,
    indices: &[(Vec<usize>, f64)],
    buf: &mut [f64],
) -> f64 {
    let mut s = 0.0;
    for (alpha, mult) in indices {
        partial_at(u, idx, alpha, buf);
        s += mult * buf.iter().map(|x| x * x).sum::<f64>();
    }
    s
}

/// Scalar field |∇ᵏu|² on the physical nodes for 1 ≤ k ≤ 4, built from
/// composed central differences. Orders three and four need two ghost
/// layers, lower orders one.
pub fn derivative_norm_sq(u: &Field, order: usize) -> Result<Field> {
    assert!(
        (1..=4).contains(&order),
        "derivative order {order} unsupported"
    );
    u.require_ghosts(if order >= 3 { 2 } else { 1 })?;
    let g = *u.grid();
    let indices = multi_indices(g.dim(), order);
    let l = u.ncomp();
    let data = g.map_region(0, 1, |idx, out| {
        let mut buf = vec![0.0; l];
        out[0] = tensor_norm_sq_at(u, idx, &indices, &mut buf);
    });
    Ok(Field::from_raw(g, 1, data, 0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Topology;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn periodic(d: usize, n: usize) -> Grid {
        Grid::new(d, n, Topology::Periodic).unwrap()
    }

    fn max_over_nodes(f: &Field, g: impl Fn(&[isize], &[f64]) -> f64) -> f64 {
        let grid = f.grid();
        grid.node_indices()
            .into_iter()
            .map(|i| g(&grid.coords(i), f.at(i)))
            .fold(0.0, f64::max)
    }

    #[test]
    fn gradient_exact_on_affine() {
        let g = Grid::new(3, 9, Topology::BoxClamped).unwrap();
        let u = Field::from_fn(g, 2, |x, o| {
            o[0] = 1.0 + 2.0 * x[0] - 3.0 * x[1] + 0.5 * x[2];
            o[1] = -x[2];
        });
        let gu = gradient(&u).unwrap();
        let expect = [[2.0, 0.0], [-3.0, 0.0], [0.5, -1.0]];
        for k in 0..3 {
            let err = max_over_nodes(&gu.components[k], |_, v| {
                (v[0] - expect[k][0]).abs().max((v[1] - expect[k][1]).abs())
            });
            assert!(err < 1e-12, "axis {k}: {err}");
        }
        assert_eq!(gu.ghost_depth(), 1);
    }

    #[test]
    fn constant_fields_have_vanishing_derivatives() {
        let g = Grid::new(2, 8, Topology::BoxClamped).unwrap();
        let u = Field::constant(g, &[0.3, -0.2, 0.9]);
        for c in gradient(&u).unwrap().components {
            assert_eq!(c.sup_norm(), 0.0);
        }
        assert_eq!(laplacian(&u).unwrap().sup_norm(), 0.0);
        assert_eq!(bilaplacian(&u).unwrap().sup_norm(), 0.0);
    }

    fn richardson(err: impl Fn(usize) -> f64, n: usize) -> f64 {
        err(n) / err(2 * n)
    }

    #[test]
    fn gradient_is_second_order() {
        let err = |n: usize| {
            let g = periodic(1, n);
            let u = Field::from_fn(g, 1, |x, o| o[0] = (2.0 * PI * x[0]).sin());
            let gu = gradient(&u).unwrap();
            max_over_nodes(&gu.components[0], |c, v| {
                let x = c[0] as f64 * g.h();
                (v[0] - 2.0 * PI * (2.0 * PI * x).cos()).abs()
            })
        };
        let r = richardson(err, 32);
        assert!((3.7..=4.3).contains(&r), "ratio {r}");
    }

    #[test]
    fn laplacian_exact_on_quadratics() {
        for d in 1..=4 {
            let g = Grid::new(d, 8, Topology::BoxClamped).unwrap();
            let u = Field::from_fn(g, 1, |x, o| o[0] = x.iter().map(|v| v * v).sum());
            let lu = laplacian(&u).unwrap();
            let err = max_over_nodes(&lu, |_, v| (v[0] - 2.0 * d as f64).abs());
            assert!(err < 1e-10, "d={d}: {err}");
        }
    }

    #[test]
    fn laplacian_matches_discrete_symbol() {
        let g = periodic(2, 32);
        let k = [2.0, 3.0];
        let u = Field::from_fn(g, 1, |x, o| {
            o[0] = (2.0 * PI * (k[0] * x[0] + k[1] * x[1])).sin()
        });
        let symbol: f64 = k
            .iter()
            .map(|kk| -4.0 / (g.h() * g.h()) * (PI * kk * g.h()).sin().powi(2))
            .sum();
        let lu = laplacian(&u).unwrap();
        let err = max_over_nodes(&lu, |c, v| (v[0] - symbol * u.value(c)[0]).abs());
        assert!(err <= 1e-13 * symbol.abs(), "{err}");
    }

    #[test]
    fn laplacian_and_bilaplacian_are_second_order() {
        let err = |n: usize, bi: bool| {
            let g = periodic(2, n);
            let u = Field::from_fn(g, 1, |x, o| {
                o[0] = (2.0 * PI * x[0]).sin() * (2.0 * PI * x[1]).cos()
            });
            let (f, scale) = if bi {
                (bilaplacian(&u).unwrap(), (8.0 * PI * PI).powi(2))
            } else {
                (laplacian(&u).unwrap(), -8.0 * PI * PI)
            };
            max_over_nodes(&f, |c, v| (v[0] - scale * u.value(c)[0]).abs())
        };
        for bi in [false, true] {
            let r = err(32, bi) / err(64, bi);
            assert!((3.7..=4.3).contains(&r), "bi={bi} ratio {r}");
        }
    }

    #[test]
    fn bilaplacian_annihilates_cubics_and_matches_symbol() {
        let g = Grid::new(2, 12, Topology::BoxClamped).unwrap();
        let u = Field::from_fn(g, 1, |x, o| {
            o[0] = x[0].powi(3) - 2.0 * x[0] * x[1] * x[1] + x[1].powi(3) + x[0] * x[1]
        });
        let b = bilaplacian(&u).unwrap();
        assert!(b.sup_norm() < 1e-6, "{}", b.sup_norm());

        let p = periodic(2, 16);
        let u = Field::from_fn(p, 1, |x, o| o[0] = (2.0 * PI * (x[0] + 2.0 * x[1])).cos());
        let lam: f64 = [1.0, 2.0]
            .iter()
            .map(|kk| -4.0 / (p.h() * p.h()) * (PI * kk * p.h()).sin().powi(2))
            .sum();
        let b = bilaplacian(&u).unwrap();
        let err = max_over_nodes(&b, |c, v| (v[0] - lam * lam * u.value(c)[0]).abs());
        assert!(err <= 1e-12 * lam * lam, "{err}");
    }

    #[test]
    fn bilaplacian_of_quartic_radius() {
        // Δ²|x|⁴ = 64 in two dimensions; the composed stencil is exact on quartics
        // up to the h² correction from ∂⁴, which is constant: Δ_h²|x|⁴ = 64 + 0 since
        // the fourth differences of x⁴ equal 24 exactly and enter with weight 1.
        let g = Grid::new(2, 16, Topology::BoxClamped).unwrap();
        let u = Field::from_fn(g, 1, |x, o| o[0] = (x[0] * x[0] + x[1] * x[1]).powi(2));
        let b = bilaplacian(&u).unwrap();
        let grid = b.grid();
        let err = grid
            .interior_indices()
            .into_iter()
            .map(|i| (b.at(i)[0] - 64.0).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-7, "{err}");
    }

    #[test]
    fn divergence_examples() {
        let g = Grid::new(3, 8, Topology::BoxClamped).unwrap();
        let v = VectorField {
            components: (0..3)
                .map(|k| Field::from_fn(g, 1, move |x, o| o[0] = x[k]))
                .collect(),
        };
        let dv = divergence(&v).unwrap();
        assert!(max_over_nodes(&dv, |_, x| (x[0] - 3.0).abs()) < 1e-12);
        let c = VectorField {
            components: vec![Field::constant(g, &[2.0]); 3],
        };
        assert_eq!(divergence(&c).unwrap().sup_norm(), 0.0);

        let p = periodic(2, 32);
        let u = Field::from_fn(p, 1, |x, o| o[0] = (2.0 * PI * x[0]).sin());
        let dg = divergence(&gradient(&u).unwrap()).unwrap();
        let lu = laplacian(&u).unwrap();
        // div∘grad is the wide (step 2h) Laplacian; both share the same symbol
        // structure and agree to second order, with the exact difference
        // given by the two discrete symbols.
        let h = p.h();
        let wide = -((2.0 * PI * h).sin() / h).powi(2);
        let narrow = -4.0 / (h * h) * (PI * h).sin().powi(2);
        let err = max_over_nodes(&dg, |c, v| (v[0] - wide * u.value(c)[0]).abs());
        assert!(err < 1e-13 * wide.abs());
        let err = max_over_nodes(&lu, |c, v| (v[0] - narrow * u.value(c)[0]).abs());
        assert!(err < 1e-13 * wide.abs());
    }

    #[test]
    fn integrate_examples() {
        let b = Grid::new(2, 11, Topology::BoxClamped).unwrap();
        assert!((integrate(&Field::constant(b, &[1.0])) - 1.0).abs() < 1e-12);
        assert_eq!(integrate(&Field::zeros(b, 1)), 0.0);
        let p = periodic(2, 16);
        let f = Field::from_fn(p, 1, |x, o| o[0] = (2.0 * PI * x[0]).sin().powi(2));
        assert!((integrate(&f) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn stale_ghosts_are_reported() {
        let g = Grid::new(2, 8, Topology::BoxClamped).unwrap();
        let mut u = Field::constant(g, &[1.0]);
        u.at_mut(0)[0] = 1.0;
        assert!(matches!(
            gradient(&u),
            Err(crate::Error::StaleGhosts { .. })
        ));
        let u = Field::constant(g, &[1.0]);
        let lu = laplacian(&u).unwrap();
        assert!(laplacian(&lu).is_ok());
        assert!(bilaplacian(&lu).is_err());
    }

    #[test]
    fn multi_index_counts_cover_all_tuples() {
        for d in 1..=4 {
            for k in 0..=4 {
                let total: f64 = multi_indices(d, k).iter().map(|(_, m)| m).sum();
                assert_eq!(total, (d as f64).powi(k as i32));
            }
        }
    }

    #[test]
    fn tensor_derivatives_of_a_mode() {
        // u = sin(2πx₁): |∇ᵏu|² is (2π)^{2k} times sin² or cos², up to stencil error.
        let g = periodic(2, 64);
        let u = Field::from_fn(g, 1, |x, o| o[0] = (2.0 * PI * x[0]).sin());
        let idx = g.index(&[5, 3, 0, 0]);
        let x = 5.0 * g.h();
        let mut buf = [0.0];
        for k in 1..=4 {
            let got = tensor_norm_sq_at(&u, idx, &multi_indices(2, k), &mut buf);
            let trig = if k % 2 == 1 {
                (2.0 * PI * x).cos()
            } else {
                (2.0 * PI * x).sin()
            };
            let want = (2.0 * PI).powi(2 * k as i32) * trig * trig;
            assert!((got - want).abs() / want < 0.05, "k={k}: {got} vs {want}");
        }
    }

    fn random_periodic_field(seed: Vec<f64>, g: Grid) -> Field {
        let mut f = Field::zeros(g, 1);
        let nodes = g.node_indices();
        for (i, idx) in nodes.iter().enumerate() {
            f.at_mut(*idx)[0] = seed[i % seed.len()] * ((i * 7919 % 101) as f64 / 101.0 - 0.5);
        }
        f
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn periodic_laplacian_is_self_adjoint(
            a in prop::collection::vec(-1.0..1.0f64, 1..40),
            b in prop::collection::vec(-1.0..1.0f64, 1..40),
        ) {
            let g = periodic(2, 16);
            let u = random_periodic_field(a, g);
            let v = random_periodic_field(b.iter().rev().cloned().collect(), g);
            let lhs = integrate(&laplacian(&u).unwrap().dot(&v).unwrap());
            let rhs = integrate(&u.dot(&laplacian(&v).unwrap()).unwrap());
            let scale = integrate_norm_sq(&u).sqrt() * integrate_norm_sq(&v).sqrt();
            prop_assert!((lhs - rhs).abs() <= 1e-12 * scale.max(1e-300) / (g.h() * g.h()));

            let lap = laplacian(&u).unwrap();
            let quad = integrate(&u.dot(&bilaplacian(&u).unwrap()).unwrap());
            let norm = integrate_norm_sq(&lap);
            prop_assert!(quad >= -1e-12 * norm);
            prop_assert!((quad - norm).abs() <= 1e-12 * norm.max(1e-300));
        }
    }
}
