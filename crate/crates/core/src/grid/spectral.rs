//! Fourier diagonalizations of the discrete Laplacian.
//!
//! On a torus the (2d+1)-point Laplacian is diagonal in the discrete
//! Fourier basis, so (α + βΔ²) is inverted by symbol division. On the
//! interior of a box with zero Dirichlet data it is diagonal in the
//! discrete sine basis; that inverse serves as a preconditioner.

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

/// Runs `f` on every line of a `len`ᵈ array along each axis in turn.
fn along_axes<T: Copy + Default>(
    data: &mut [T],
    dim: usize,
    len: usize,
    mut f: impl FnMut(&mut [T]),
) {
    let mut line = vec![T::default(); len];
    for k in 0..dim {
        let stride = len.pow((dim - 1 - k) as u32);
        let outer = len.pow(k as u32);
        for o in 0..outer {
            for i in 0..stride {
                let base = o * len * stride + i;
                for j in 0..len {
                    line[j] = data[base + j * stride];
                }
                f(&mut line);
                for j in 0..len {
                    data[base + j * stride] = line[j];
                }
            }
        }
    }
}

/// Eigenvalue of the 1D periodic second difference for wavenumber `m`.
pub(crate) fn periodic_eigenvalue(m: usize, n: usize, h: f64) -> f64 {
    let s = (PI * m as f64 / n as f64).sin();
    -4.0 * s * s / (h * h)
}

/// Exact solver for α + βΔ² on a periodic lattice.
pub(crate) struct PeriodicSpectral {
    dim: usize,
    n: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    symbol: Vec<f64>,
}

impl PeriodicSpectral {
    pub(crate) fn new(dim: usize, n: usize, h: f64) -> Self {
        let mut planner = FftPlanner::new();
        let eig: Vec<f64> = (0..n).map(|m| periodic_eigenvalue(m, n, h)).collect();
        let total = n.pow(dim as u32);
        let symbol = (0..total)
            .map(|mut i| {
                let mut s = 0.0;
                for _ in 0..dim {
                    s += eig[i % n];
                    i /= n;
                }
                s
            })
            .collect();
        Self {
            dim,
            n,
            fwd: planner.plan_fft_forward(n),
            inv: planner.plan_fft_inverse(n),
            symbol,
        }
    }

    /// Solves (α + βΔ²) w = r for scalar node data in canonical order. When
    /// α = 0 the mean mode is left at zero.
    ///
    /// For α ≠ 0 the solve is written as w = r/α - F⁻¹[F(r)·βλ²/(α(α + βλ²))]
    /// so that transform rounding only touches the (small, for short time
    /// steps) correction and not the bulk of r.
    pub(crate) fn solve(&self, r: &[f64], alpha: f64, beta: f64) -> Vec<f64> {
        let mut buf: Vec<Complex64> = r.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        along_axes(&mut buf, self.dim, self.n, |line| self.fwd.process(line));
        for (z, lam) in buf.iter_mut().zip(&self.symbol) {
            let b = beta * lam * lam;
            let den = alpha + b;
            *z = if den == 0.0 {
                Complex64::new(0.0, 0.0)
            } else if alpha != 0.0 {
                *z * (b / (alpha * den))
            } else {
                *z / den
            };
        }
        along_axes(&mut buf, self.dim, self.n, |line| self.inv.process(line));
        let scale = 1.0 / buf.len() as f64;
        if alpha != 0.0 {
            r.iter()
                .zip(&buf)
                .map(|(x, z)| x / alpha - z.re * scale)
                .collect()
        } else {
            buf.iter().map(|z| z.re * scale).collect()
        }
    }
}

/// Inverse of α + β D², D the Dirichlet Laplacian on the `m`ᵈ interior
/// nodes of a box, via the type-I discrete sine transform.
pub(crate) struct DirichletSpectral {
    dim: usize,
    m: usize,
    fft: Arc<dyn Fft<f64>>,
    symbol: Vec<f64>,
}

impl DirichletSpectral {
    pub(crate) fn new(dim: usize, m: usize, h: f64) -> Self {
        let mut planner = FftPlanner::new();
        let eig: Vec<f64> = (1..=m)
            .map(|j| {
                let s = (PI * j as f64 / (2.0 * (m + 1) as f64)).sin();
                -4.0 * s * s / (h * h)
            })
            .collect();
        let total = m.pow(dim as u32);
        let symbol = (0..total)
            .map(|mut i| {
                let mut s = 0.0;
                for _ in 0..dim {
                    s += eig[i % m];
                    i /= m;
                }
                s
            })
            .collect();
        Self {
            dim,
            m,
            fft: planner.plan_fft_forward(2 * (m + 1)),
            symbol,
        }
    }

    fn dst(&self, data: &mut [f64]) {
        let m = self.m;
        let len = 2 * (m + 1);
        let mut y = vec![Complex64::new(0.0, 0.0); len];
        along_axes(data, self.dim, m, |line| {
            y.iter_mut().for_each(|z| *z = Complex64::new(0.0, 0.0));
            for j in 0..m {
                y[j + 1] = Complex64::new(line[j], 0.0);
                y[len - 1 - j] = Complex64::new(-line[j], 0.0);
            }
            self.fft.process(&mut y);
            for k in 0..m {
                line[k] = -0.5 * y[k + 1].im;
            }
        });
    }

    /// Overwrites `r` (interior values, lexicographic) with (α + βD²)⁻¹ r.
    pub(crate) fn apply(&self, r: &mut [f64], alpha: f64, beta: f64) {
        self.dst(r);
        let norm = (2.0 / (self.m + 1) as f64).powi(self.dim as i32);
        for (x, lam) in r.iter_mut().zip(&self.symbol) {
            *x *= norm / (alpha + beta * lam * lam);
        }
        self.dst(r);
    }
}
