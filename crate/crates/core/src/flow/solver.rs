//! Implicit solves with α + βΔ²ₕ.
//!
//! On a clamped box the unknowns are the interior nodes; boundary values and
//! ghosts follow from the boundary data. Splitting w = w₀ + w_bc, where w_bc
//! carries the boundary data over a zero interior, leaves the homogeneous
//! operator α + β(D² + 2h⁻⁴P) on the interior. Here D is the Dirichlet
//! Laplacian and P counts, per node, the faces it is adjacent to. That
//! operator is symmetric positive definite and is solved by conjugate
//! gradients preconditioned with the sine-transform inverse of α + βD².
//! On a torus the operator is diagonal in Fourier space.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::spectral::{DirichletSpectral, PeriodicSpectral};
use crate::grid::{apply_boundary, bilaplacian, BoundaryData, Field, Grid, MAX_DIM};

/// Conjugate-gradient controls.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverOptions {
    /// Relative residual target ‖r‖ ≤ tol·‖b‖.
    pub tol: f64,
    /// Iteration cap; `None` means 10·√(node count).
    pub max_iterations: Option<usize>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            max_iterations: None,
        }
    }
}

/// Outcome of one solve (the largest over the components).
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SolveReport {
    pub iterations: usize,
    pub residual: f64,
}

enum Backend {
    Clamped {
        spectral: DirichletSpectral,
        interior: Vec<usize>,
        faces: Vec<f64>,
    },
    Periodic(PeriodicSpectral),
}

/// Reusable solver for (α + βΔ²ₕ) w = r on one grid; holds the transform
/// plans and index maps.
pub struct BiharmonicSolver {
    grid: Grid,
    backend: Backend,
}

impl BiharmonicSolver {
    pub fn new(grid: Grid) -> Self {
        let d = grid.dim();
        let backend = if grid.is_periodic() {
            Backend::Periodic(PeriodicSpectral::new(d, grid.n(), grid.h()))
        } else {
            let m = grid.n() - 2;
            let last = grid.n() as isize - 2;
            let interior = grid.interior_indices();
            let faces = interior
                .iter()
                .map(|&i| {
                    let c = grid.coords(i);
                    (0..d)
                        .map(|k| (c[k] == 1) as usize + (c[k] == last) as usize)
                        .sum::<usize>() as f64
                })
                .collect();
            Backend::Clamped {
                spectral: DirichletSpectral::new(d, m, grid.h()),
                interior,
                faces,
            }
        };
        Self { grid, backend }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Solves (I + dt·Δ²ₕ) w = rhs. On a box `bc` supplies the closure and
    /// the returned field has boundary values and ghosts applied.
    pub fn solve_step(
        &self,
        rhs: &Field,
        bc: Option<&BoundaryData>,
        dt: f64,
        opts: &SolverOptions,
    ) -> Result<(Field, SolveReport)> {
        self.solve(rhs, bc, 1.0, dt, opts)
    }

    /// Solves (α + βΔ²ₕ) w = rhs.
    pub fn solve(
        &self,
        rhs: &Field,
        bc: Option<&BoundaryData>,
        alpha: f64,
        beta: f64,
        opts: &SolverOptions,
    ) -> Result<(Field, SolveReport)> {
        if rhs.grid() != &self.grid {
            return Err(Error::ShapeMismatch);
        }
        if !(opts.tol > 0.0) {
            return Err(Error::Precondition(
                "solver tolerance must be positive".into(),
            ));
        }
        let l = rhs.ncomp();
        match &self.backend {
            Backend::Periodic(spec) => {
                if beta == 0.0 {
                    return Ok((rhs.scaled(1.0 / alpha), SolveReport::default()));
                }
                let mut out = Field::zeros(self.grid, l);
                let data = out.data_mut();
                let n = self.grid.node_count();
                for c in 0..l {
                    let r: Vec<f64> = (0..n).map(|i| rhs.data()[i * l + c]).collect();
                    let w = spec.solve(&r, alpha, beta);
                    for i in 0..n {
                        data[i * l + c] = w[i];
                    }
                }
                out.set_ghost_depth(0);
                Ok((out, SolveReport::default()))
            }
            Backend::Clamped {
                spectral,
                interior,
                faces,
            } => {
                let bc = bc.ok_or_else(|| {
                    Error::Precondition("clamped solve needs boundary data".into())
                })?;
                if bc.grid() != &self.grid || bc.ncomp() != l {
                    return Err(Error::ShapeMismatch);
                }
                if beta == 0.0 {
                    let w = apply_boundary(&rhs.scaled(1.0 / alpha), bc)?;
                    return Ok((w, SolveReport::default()));
                }
                // boundary data carried over a zero interior
                let lift = apply_boundary(&Field::zeros(self.grid, l), bc)?;
                let lift_b2 = bilaplacian(&lift)?;
                let cap = opts.max_iterations.unwrap_or_else(|| {
                    (10.0 * (self.grid.node_count() as f64).sqrt()).ceil() as usize
                });
                let op = ClampedOperator {
                    dim: self.grid.dim(),
                    m: self.grid.n() - 2,
                    h: self.grid.h(),
                    faces,
                    alpha,
                    beta,
                };
                let mut out = lift.clone();
                let mut report = SolveReport::default();
                for c in 0..l {
                    let b: Vec<f64> = interior
                        .iter()
                        .map(|&i| rhs.at(i)[c] - beta * lift_b2.at(i)[c])
                        .collect();
                    let x0: Vec<f64> = interior
                        .iter()
                        .map(|&i| rhs.at(i)[c] / alpha.max(1e-300))
                        .collect();
                    let x0 = if alpha > 0.0 { x0 } else { vec![0.0; b.len()] };
                    let (x, rep) = pcg(&op, spectral, &b, x0, opts.tol, cap)?;
                    report.iterations = report.iterations.max(rep.iterations);
                    report.residual = report.residual.max(rep.residual);
                    let data = out.data_mut();
                    for (k, &i) in interior.iter().enumerate() {
                        data[i * l + c] = x[k];
                    }
                }
                Ok((apply_boundary(&out, bc)?, report))
            }
        }
    }
}

struct ClampedOperator<'a> {
    dim: usize,
    m: usize,
    h: f64,
    faces: &'a [f64],
    alpha: f64,
    beta: f64,
}

impl ClampedOperator<'_> {
    fn dirichlet_laplacian(&self, x: &[f64], out: &mut [f64]) {
        let (d, m) = (self.dim, self.m);
        let inv = 1.0 / (self.h * self.h);
        let mut strides = [0usize; MAX_DIM];
        let mut s = 1;
        for k in (0..d).rev() {
            strides[k] = s;
            s *= m;
        }
        out.par_chunks_mut(m).enumerate().for_each(|(row, chunk)| {
            let base = row * m;
            for j in 0..m {
                let i = base + j;
                let mut acc = -2.0 * d as f64 * x[i];
                for k in 0..d {
                    let c = (i / strides[k]) % m;
                    if c > 0 {
                        acc += x[i - strides[k]];
                    }
                    if c + 1 < m {
                        acc += x[i + strides[k]];
                    }
                }
                chunk[j] = acc * inv;
            }
        });
    }

    fn apply(&self, x: &[f64], tmp: &mut [f64], out: &mut [f64]) {
        self.dirichlet_laplacian(x, tmp);
        self.dirichlet_laplacian(tmp, out);
        let h4 = self.h.powi(4);
        for i in 0..x.len() {
            out[i] = self.alpha * x[i] + self.beta * (out[i] + 2.0 * self.faces[i] / h4 * x[i]);
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn pcg(
    op: &ClampedOperator,
    pre: &DirichletSpectral,
    b: &[f64],
    mut x: Vec<f64>,
    tol: f64,
    cap: usize,
) -> Result<(Vec<f64>, SolveReport)> {
    let n = b.len();
    let bnorm = dot(b, b).sqrt();
    if bnorm == 0.0 {
        return Ok((vec![0.0; n], SolveReport::default()));
    }
    let mut tmp = vec![0.0; n];
    let mut ax = vec![0.0; n];
    op.apply(&x, &mut tmp, &mut ax);
    let mut r: Vec<f64> = b.iter().zip(&ax).map(|(b, a)| b - a).collect();
    let mut rnorm = dot(&r, &r).sqrt();
    if rnorm <= tol * bnorm {
        return Ok((
            x,
            SolveReport {
                iterations: 0,
                residual: rnorm / bnorm,
            },
        ));
    }
    let mut z = r.clone();
    pre.apply(&mut z, op.alpha, op.beta);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    for it in 1..=cap {
        op.apply(&p, &mut tmp, &mut ap);
        let a = rz / dot(&p, &ap);
        for i in 0..n {
            x[i] += a * p[i];
            r[i] -= a * ap[i];
        }
        rnorm = dot(&r, &r).sqrt();
        if rnorm <= tol * bnorm {
            return Ok((
                x,
                SolveReport {
                    iterations: it,
                    residual: rnorm / bnorm,
                },
            ));
        }
        z.copy_from_slice(&r);
        pre.apply(&mut z, op.alpha, op.beta);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::NoConvergence {
        iterations: cap,
        residual: rnorm / bnorm,
    })
}

/// Solves (I + dt·Δ²ₕ) w = rhs on a clamped box with closure from `bc`,
/// iterating until the residual is below `tol` relative to the right-hand
/// side of the interior system.
pub fn solve_clamped_bilaplacian(
    rhs: &Field,
    bc: &BoundaryData,
    dt: f64,
    tol: f64,
) -> Result<Field> {
    if rhs.grid().is_periodic() {
        return Err(Error::TopologyMismatch { expected: "box" });
    }
    let opts = SolverOptions {
        tol,
        max_iterations: None,
    };
    if dt == 0.0 {
        return apply_boundary(rhs, bc);
    }
    BiharmonicSolver::new(*rhs.grid())
        .solve_step(rhs, Some(bc), dt, &opts)
        .map(|(w, _)| w)
}

/// Solves (I + dt·Δ²ₕ) w = rhs on a torus by symbol division.
pub fn solve_periodic_bilaplacian(rhs: &Field, dt: f64) -> Result<Field> {
    if !rhs.grid().is_periodic() {
        return Err(Error::TopologyMismatch {
            expected: "periodic",
        });
    }
    BiharmonicSolver::new(*rhs.grid())
        .solve_step(rhs, None, dt, &SolverOptions::default())
        .map(|(w, _)| w)
}
