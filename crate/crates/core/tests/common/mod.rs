//! Shared fixtures and independent oracles for the integration tests.
#![allow(dead_code)]

use std::f64::consts::PI;

use bhf_core::grid::{apply_boundary, BoundaryData, Field, Grid, Topology};
use bhf_core::io::random::{generate_random_field, RandomFieldSpec};
use bhf_core::manifold::TargetManifold;

pub fn periodic(d: usize, n: usize) -> Grid {
    Grid::new(d, n, Topology::Periodic).unwrap()
}

pub fn boxed(d: usize, n: usize) -> Grid {
    Grid::new(d, n, Topology::BoxClamped).unwrap()
}

pub fn sphere() -> TargetManifold {
    TargetManifold::unit_sphere(3)
}

/// Small random sphere map near the north pole with matching constant
/// clamped data, boundary closure applied.
pub fn random_sphere_map(
    grid: Grid,
    seed: u64,
    amplitude: f64,
    band: usize,
) -> (Field, Option<BoundaryData>) {
    let m = sphere();
    let spec = RandomFieldSpec {
        seed,
        band_limit: band,
        amplitude,
        ..RandomFieldSpec::default()
    };
    let u = generate_random_field(&spec, &grid, &m).unwrap();
    if grid.is_periodic() {
        (u, None)
    } else {
        let bc = BoundaryData::constant(grid, &[0.0, 0.0, 1.0]).unwrap();
        (apply_boundary(&u, &bc).unwrap(), Some(bc))
    }
}

/// Great circle x ↦ (cos 2πx₁, sin 2πx₁, 0) with its analytic derivative.
pub fn great_circle(x: &[f64], o: &mut [f64]) {
    let a = 2.0 * PI * x[0];
    o[0] = a.cos();
    o[1] = a.sin();
    o[2] = 0.0;
}

pub fn great_circle_partial(x: &[f64], k: usize, o: &mut [f64]) {
    let a = 2.0 * PI * x[0];
    if k == 0 {
        o[0] = -2.0 * PI * a.sin();
        o[1] = 2.0 * PI * a.cos();
    } else {
        o[0] = 0.0;
        o[1] = 0.0;
    }
    o[2] = 0.0;
}

/// Smooth sphere-valued map given by inverse stereographic projection of a
/// plane map.
pub fn stereographic(p: [f64; 2]) -> [f64; 3] {
    let r2 = p[0] * p[0] + p[1] * p[1];
    [
        2.0 * p[0] / (1.0 + r2),
        2.0 * p[1] / (1.0 + r2),
        (1.0 - r2) / (1.0 + r2),
    ]
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Compactly supported C³ bump (1 - r²)⁴ on r < 1.
pub fn bump_profile(r: f64) -> f64 {
    if r < 1.0 {
        (1.0 - r * r).powi(4)
    } else {
        0.0
    }
}

/// π(e₃ + a·ψ(|x - c|/s)·e₁) into S²; distances use the nearest image on
/// a torus.
pub fn bump_map(grid: Grid, center: &[f64], scale: f64, amplitude: f64) -> Field {
    let m = sphere();
    let c = center.to_vec();
    let periodic = grid.is_periodic();
    Field::from_fn(grid, 3, move |x, out| {
        let r2: f64 = x
            .iter()
            .zip(&c)
            .map(|(a, b)| {
                let mut d = a - b;
                if periodic {
                    d -= d.round();
                }
                d * d
            })
            .sum();
        let p = [amplitude * bump_profile(r2.sqrt() / scale), 0.0, 1.0];
        out.copy_from_slice(&m.project(&p).unwrap());
    })
}

/// Smooth bump on [0.2, 0.8]ᵈ times `shape`, zero near the boundary.
pub fn bump_direction<F: Fn(&[f64], &mut [f64]) + Sync>(
    g: bhf_core::grid::Grid,
    l: usize,
    shape: F,
) -> Field {
    let mut f = Field::from_fn(g, l, |x, o| {
        let w: f64 = x
            .iter()
            .map(|&v| {
                if v > 0.2 && v < 0.8 {
                    ((v - 0.2) * (0.8 - v) / 0.09).powi(3)
                } else {
                    0.0
                }
            })
            .product();
        shape(x, o);
        o.iter_mut().for_each(|v| *v *= w);
    });
    f.data_mut();
    f
}

/// Random-ish tangent direction along u supported inside [0.2, 0.8]ᵈ.
pub fn tangent_direction(u: &Field, m: &TargetManifold, seed: u64) -> Field {
    let g = *u.grid();
    let s = seed as f64;
    let mut phi = bump_direction(g, 3, |x, o| {
        o[0] = 20.0 * (2.0 * PI * (x[0] + 0.3 * s)).sin();
        o[1] = 20.0 * (2.0 * PI * (2.0 * x[1] - 0.1 * s)).cos();
        o[2] = 10.0 * (2.0 * PI * (x[0] + x[1])).sin();
    });
    let data = phi.data_mut();
    for idx in g.node_indices() {
        let v = m
            .tangential_project(u.at(idx), &data[idx * 3..idx * 3 + 3])
            .unwrap();
        data[idx * 3..idx * 3 + 3].copy_from_slice(&v);
    }
    phi
}
