mod common;

use std::f64::consts::PI;

use bhf_core::analysis::energy::{energy_f2, gradient_consistency};
use bhf_core::flow::{
    nonlinearity_f, rhs, solve_clamped_bilaplacian, solve_periodic_bilaplacian, tension,
    BiharmonicSolver, FlowOptions, SolverOptions, Stepper,
};
use bhf_core::grid::ops::derivative_norm_sq;
use bhf_core::grid::{apply_boundary, bilaplacian, BoundaryData, Field};
use bhf_core::manifold::TargetManifold;
use bhf_core::Error;
use common::*;

#[test]
fn constant_maps_are_fixed_points() {
    let g = boxed(2, 12);
    let p = [0.0, 0.6, 0.8];
    let bc = BoundaryData::constant(g, &p).unwrap();
    let u = apply_boundary(&Field::constant(g, &p), &bc).unwrap();
    let m = sphere();
    assert_eq!(nonlinearity_f(&u, &m).unwrap().sup_norm(), 0.0);
    assert_eq!(rhs(&u, &m).unwrap().sup_norm(), 0.0);
    assert_eq!(tension(&u, &m).unwrap().sup_norm(), 0.0);
    let opts = FlowOptions {
        t_final: 1.0,
        dt_init: 1e-5,
        c_cfl: 1e6,
        max_steps: Some(5),
        ..FlowOptions::default()
    };
    let stepper = Stepper::new(m, Some(bc), g, opts).unwrap();
    let mut s = stepper.initial_state(&u).unwrap();
    for _ in 0..5 {
        s = stepper.step(&s).unwrap().0;
        assert!(max_abs_diff(s.u.data(), u.data()) < 1e-15);
        assert_eq!(s.ledger.f2_current(), 0.0);
    }
}

#[test]
fn flat_targets_have_no_nonlinearity() {
    let g = periodic(2, 16);
    let m = TargetManifold::flat_subspace(3, 2);
    let u = Field::from_fn(g, 3, |x, o| {
        o[0] = (2.0 * PI * x[0]).sin();
        o[1] = (2.0 * PI * x[1]).cos();
        o[2] = 0.0;
    });
    assert_eq!(nonlinearity_f(&u, &m).unwrap().sup_norm(), 0.0);
    let r = rhs(&u, &m).unwrap();
    let b = bilaplacian(&u).unwrap();
    assert!(max_abs_diff(r.data(), b.scaled(-1.0).data()) == 0.0);
    let t = tension(&u, &m).unwrap();
    let l = bhf_core::grid::laplacian(&u).unwrap();
    assert!(max_abs_diff(t.data(), l.data()) < 1e-12);
}

#[test]
fn tension_vanishes_on_great_circle_at_second_order() {
    let err = |n: usize| {
        let g = periodic(2, n);
        let u = Field::from_fn(g, 3, great_circle);
        tension(&u, &sphere()).unwrap().sup_norm()
    };
    let (a, b) = (err(32), err(64));
    assert!(
        a < 40.0 * (1.0 / 32.0f64).powi(2) * (2.0 * PI).powi(4),
        "{a}"
    );
    assert!(a / b > 3.5, "ratio {}", a / b);
}

#[test]
fn euler_lagrange_operator_is_tangent_at_second_order() {
    // on S² the normal part of Δ²u is cancelled by f(u); discretely the
    // cancellation holds up to O(h²)
    let leak = |n: usize| {
        let g = periodic(2, n);
        let u = Field::from_fn(g, 3, |x, o| {
            let p = [
                0.3 * (2.0 * PI * x[0]).sin(),
                0.3 * (2.0 * PI * x[1]).cos() + 0.1 * (2.0 * PI * x[0]).cos(),
            ];
            o.copy_from_slice(&stereographic(p));
        });
        let m = sphere();
        let el = bilaplacian(&u)
            .unwrap()
            .axpby(1.0, &nonlinearity_f(&u, &m).unwrap(), 1.0)
            .unwrap();
        let scale = bilaplacian(&u).unwrap().sup_norm();
        let worst = g
            .node_indices()
            .into_iter()
            .map(|i| {
                el.at(i)
                    .iter()
                    .zip(u.at(i))
                    .map(|(a, b)| a * b)
                    .sum::<f64>()
                    .abs()
            })
            .fold(0.0, f64::max);
        worst / scale
    };
    let (a, b) = (leak(32), leak(64));
    assert!(a < 0.05, "{a}");
    assert!(a / b > 3.5, "ratio {}", a / b);
}

#[test]
fn nonlinearity_obeys_growth_bound() {
    let g = boxed(2, 32);
    let (u, _) = random_sphere_map(g, 3, 0.5, 3);
    let m = sphere();
    let f = nonlinearity_f(&u, &m).unwrap();
    assert!(f.is_finite());
    let d1 = derivative_norm_sq(&u, 1).unwrap();
    let d2 = derivative_norm_sq(&u, 2).unwrap();
    let d3 = derivative_norm_sq(&u, 3).unwrap();
    // sup norms: the discrete stencils couple neighbouring nodes, so the
    // pointwise continuum bound only survives in this form
    let sup = |f: &Field| f.sup_norm();
    let (a, b, c) = (sup(&d1).sqrt(), sup(&d2).sqrt(), sup(&d3).sqrt());
    let bound = c * a + b * b + a.powi(4);
    let ratio = f.sup_norm() / bound;
    // the sphere constant is 2 + d for |∇²u|² and at most 4 for |∇³u||∇u|
    assert!(ratio <= 4.0, "{ratio}");
}

#[test]
fn identity_solve_at_zero_step() {
    let g = boxed(2, 12);
    let (u, bc) = random_sphere_map(g, 1, 0.2, 2);
    let w = solve_clamped_bilaplacian(&u, bc.as_ref().unwrap(), 0.0, 1e-10).unwrap();
    assert_eq!(w.node_values(), u.node_values());
    let (w, rep) = BiharmonicSolver::new(g)
        .solve_step(&u, bc.as_ref(), 0.0, &SolverOptions::default())
        .unwrap();
    assert_eq!(rep.iterations, 0);
    assert_eq!(w.node_values(), u.node_values());
}

#[test]
fn periodic_solve_divides_by_symbol() {
    let g = periodic(2, 32);
    let h = g.h();
    let k = [1.0, 2.0];
    let u = Field::from_fn(g, 1, |x, o| {
        o[0] = (2.0 * PI * (k[0] * x[0] + k[1] * x[1])).sin()
    });
    let lam: f64 = k
        .iter()
        .map(|kk| -4.0 / (h * h) * (PI * kk * h).sin().powi(2))
        .sum();
    let dt = 1e-6;
    let w = solve_periodic_bilaplacian(&u, dt).unwrap();
    let q = 1.0 / (1.0 + dt * lam * lam);
    assert!(max_abs_diff(w.data(), u.scaled(q).data()) < 1e-14);
}

#[test]
fn manufactured_clamped_solve() {
    for d in [1, 2, 3] {
        let g = boxed(d, 16);
        let value = |x: &[f64], o: &mut [f64]| {
            o[0] = x.iter().map(|v| (1.3 * v).sin()).product::<f64>() + 0.5;
            o[1] = x.iter().map(|v| v * v).sum::<f64>();
        };
        let partial = |x: &[f64], k: usize, o: &mut [f64]| {
            o[0] = (0..x.len())
                .map(|j| {
                    if j == k {
                        1.3 * (1.3 * x[j]).cos()
                    } else {
                        (1.3 * x[j]).sin()
                    }
                })
                .product::<f64>();
            o[1] = 2.0 * x[k];
        };
        let bc = BoundaryData::from_fn(g, 2, value, partial).unwrap();
        let exact = apply_boundary(&Field::from_fn(g, 2, value), &bc).unwrap();
        let dt = 1e-3;
        let rhs = exact.axpby(1.0, &bilaplacian(&exact).unwrap(), dt).unwrap();
        let tol = 1e-11;
        let w = solve_clamped_bilaplacian(&rhs, &bc, dt, tol).unwrap();
        let scale = exact.sup_norm();
        let err = max_abs_diff(&w.node_values(), &exact.node_values());
        assert!(
            err <= 10.0 * tol * scale * (g.node_count() as f64).sqrt(),
            "d={d}: {err}"
        );
        assert_eq!(w.ghost_depth(), 2);
    }
}

#[test]
fn solver_reports_iteration_cap() {
    let g = boxed(2, 32);
    let (u, bc) = random_sphere_map(g, 4, 0.3, 4);
    let opts = SolverOptions {
        tol: 1e-14,
        max_iterations: Some(1),
    };
    let r = BiharmonicSolver::new(g).solve_step(&u, bc.as_ref(), 1.0, &opts);
    assert!(matches!(r, Err(Error::NoConvergence { iterations: 1, .. })));
}

#[test]
fn single_step_matches_scalar_recurrence() {
    let g = periodic(2, 16);
    let h = g.h();
    let m = TargetManifold::flat_subspace(1, 1);
    let u = Field::from_fn(g, 1, |x, o| o[0] = 0.7 * (2.0 * PI * x[0]).cos());
    let lam = -4.0 / (h * h) * (PI * h).sin().powi(2);
    let dt = 0.5 * h.powi(4);
    let opts = FlowOptions {
        t_final: 10.0 * dt,
        ..FlowOptions::default()
    };
    let stepper = Stepper::new(m, None, g, opts).unwrap();
    let s0 = stepper.initial_state(&u).unwrap();
    assert_eq!(s0.dt, dt);
    let (s1, _) = stepper.step(&s0).unwrap();
    let q = 1.0 / (1.0 + dt * lam * lam);
    assert!(max_abs_diff(s1.u.data(), u.scaled(q).data()) < 1e-15);
    assert!((s1.t - dt).abs() < 1e-30);
}

#[test]
fn sphere_step_stays_on_target_and_dissipates() {
    let g = boxed(2, 24);
    let (u, bc) = random_sphere_map(g, 9, 0.3, 3);
    let m = sphere();
    let opts = FlowOptions {
        t_final: 1.0,
        dt_init: 1e-6,
        c_cfl: 1e3,
        max_steps: Some(10),
        ..FlowOptions::default()
    };
    let stepper = Stepper::new(m, bc, g, opts).unwrap();
    let mut s = stepper.initial_state(&u).unwrap();
    let f0 = energy_f2(&s.u).unwrap();
    for _ in 0..10 {
        s = stepper.step(&s).unwrap().0;
        assert!(s.u.max_distance_to(&m) <= 1e-10);
    }
    assert!(s.ledger.f2_current() < f0);
    assert_eq!(s.ledger.violations(), 0);
}

#[test]
fn gradient_consistency_on_sphere() {
    let g = boxed(2, 32);
    let m = sphere();
    let (u, _) = random_sphere_map(g, 11, 0.4, 3);
    let phi = tangent_direction(&u, &m, 5);
    let e1 = gradient_consistency(&u, &m, &phi, 1e-5).unwrap();
    let e2 = gradient_consistency(&u, &m, &phi, 5e-6).unwrap();
    assert!(e1 <= 1e-4, "{e1}");
    assert!((3.0..=5.0).contains(&(e1 / e2)), "{e1} {e2}");
}

#[test]
fn gradient_consistency_flat_and_zero() {
    let g = boxed(2, 24);
    let m = TargetManifold::flat_subspace(2, 2);
    let bc = BoundaryData::constant(g, &[0.0, 0.0]).unwrap();
    let u = apply_boundary(
        &Field::from_fn(g, 2, |x, o| {
            let w = (x[0] * (1.0 - x[0]) * x[1] * (1.0 - x[1])).powi(2) * 16.0;
            o[0] = w * (3.0 * x[0]).sin();
            o[1] = w;
        }),
        &bc,
    )
    .unwrap();
    let phi = bump_direction(g, 2, |_, o| {
        o[0] = 1.0;
        o[1] = -0.5;
    });
    assert!(gradient_consistency(&u, &m, &phi, 1e-3).unwrap() <= 1e-10);
    assert_eq!(
        gradient_consistency(&u, &m, &Field::zeros(g, 2), 1e-3).unwrap(),
        0.0
    );
}

#[test]
fn gradient_consistency_rejects_normal_directions() {
    let g = boxed(2, 24);
    let m = sphere();
    let (u, _) = random_sphere_map(g, 2, 0.2, 2);
    let mut phi = u.clone();
    let data = phi.data_mut();
    for idx in g.node_indices() {
        let c = g.coords(idx);
        if g.is_boundary(&c) || (0..2).any(|k| c[k] < 3 || c[k] > 20) {
            data[idx * 3..idx * 3 + 3].iter_mut().for_each(|x| *x = 0.0);
        }
    }
    assert!(matches!(
        gradient_consistency(&u, &m, &phi, 1e-5),
        Err(Error::NonTangentDirection { .. })
    ));
}
