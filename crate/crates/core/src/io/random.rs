//! Seeded band-limited random maps for initial data and probe corpora, and
//! the planted bubble profile.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::grid::{Field, Grid, MAX_DIM};
use crate::manifold::{TargetKind, TargetManifold};

#[derive(Clone, Debug, PartialEq)]
pub struct RandomFieldSpec {
    pub seed: u64,
    /// Largest wavenumber per axis.
    pub band_limit: usize,
    pub amplitude: f64,
    /// On boxes the sum is multiplied by Πₖ(4xₖ(1 - xₖ))^order, so the
    /// field equals the offset to this order at ∂Ω.
    pub boundary_decay_order: u32,
    /// Point the perturbation is added to; `None` picks e_L on the sphere
    /// and the origin on a flat target.
    pub offset: Option<Vec<f64>>,
}

impl Default for RandomFieldSpec {
    fn default() -> Self {
        Self {
            seed: 0,
            band_limit: 4,
            amplitude: 0.1,
            boundary_decay_order: 2,
            offset: None,
        }
    }
}

impl RandomFieldSpec {
    pub fn validate(&self) -> Result<()> {
        let mut fields = Vec::new();
        if self.band_limit < 1 {
            fields.push("init.band_limit".to_string());
        }
        if self.boundary_decay_order < 2 {
            fields.push("init.decay_order".to_string());
        }
        if !self.amplitude.is_finite() {
            fields.push("init.amplitude".to_string());
        }
        if fields.is_empty() {
            Ok(())
        } else {
            Err(Error::ConstraintViolation {
                fields,
                message: "need band_limit >= 1, decay order >= 2 and a finite amplitude".into(),
            })
        }
    }
}

/// Default base point of random maps into `m`.
pub fn default_offset(m: &TargetManifold) -> Vec<f64> {
    let l = m.ambient_dim();
    let mut p = vec![0.0; l];
    if let TargetKind::UnitSphere { .. } = m.kind() {
        p[l - 1] = 1.0;
    }
    p
}

/// Wavevectors m ∈ {0..B}ᵈ without the zero mode, in lexicographic order.
pub fn wavevectors(dim: usize, band_limit: usize) -> Vec<[usize; MAX_DIM]> {
    let mut out = Vec::new();
    let mut m = [0usize; MAX_DIM];
    loop {
        if m.iter().any(|&x| x != 0) {
            out.push(m);
        }
        let mut k = dim;
        loop {
            if k == 0 {
                return out;
            }
            k -= 1;
            m[k] += 1;
            if m[k] <= band_limit {
                break;
            }
            m[k] = 0;
        }
    }
}

/// Coefficients (a, b) per component and wavevector, drawn uniformly from
/// (-1, 1) and damped by 1/(1 + |m|²). Components are drawn in order, and
/// within a component the wavevectors in [`wavevectors`] order.
pub fn coefficients(spec: &RandomFieldSpec, dim: usize, ncomp: usize) -> Vec<Vec<(f64, f64)>> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let modes = wavevectors(dim, spec.band_limit);
    (0..ncomp)
        .map(|_| {
            modes
                .iter()
                .map(|m| {
                    let damp = 1.0 / (1.0 + m.iter().map(|&x| (x * x) as f64).sum::<f64>());
                    let a = rng.gen_range(-1.0..1.0) * damp;
                    let b = rng.gen_range(-1.0..1.0) * damp;
                    (a, b)
                })
                .collect()
        })
        .collect()
}

/// offset + amplitude·window(x)·Σₘ (a cos 2πm·x + b sin 2πm·x), projected
/// onto `m` at every physical node. Ghost layers are left stale.
pub fn generate_random_field(
    spec: &RandomFieldSpec,
    grid: &Grid,
    m: &TargetManifold,
) -> Result<Field> {
    spec.validate()?;
    let l = m.ambient_dim();
    let d = grid.dim();
    let offset = spec.offset.clone().unwrap_or_else(|| default_offset(m));
    if offset.len() != l {
        return Err(Error::ConstraintViolation {
            fields: vec!["init.offset".into()],
            message: format!("offset has {} components, target needs {l}", offset.len()),
        });
    }
    let modes = wavevectors(d, spec.band_limit);
    let coef = coefficients(spec, d, l);
    let mut u = Field::zeros(*grid, l);
    let mut buf = vec![0.0; l];
    let data = u.data_mut();
    for idx in grid.node_indices() {
        let x = grid.position(&grid.coords(idx));
        let window = if grid.is_periodic() {
            1.0
        } else {
            (0..d)
                .map(|k| (4.0 * x[k] * (1.0 - x[k])).powi(spec.boundary_decay_order as i32))
                .product()
        };
        let v = &mut data[idx * l..(idx + 1) * l];
        v.copy_from_slice(&offset);
        if spec.amplitude != 0.0 && window != 0.0 {
            for (j, mv) in modes.iter().enumerate() {
                let phase = 2.0 * PI * (0..d).map(|k| mv[k] as f64 * x[k]).sum::<f64>();
                let (s, c) = phase.sin_cos();
                for comp in 0..l {
                    let (a, b) = coef[comp][j];
                    v[comp] += spec.amplitude * window * (a * c + b * s);
                }
            }
        }
        m.project_into(v, &mut buf)?;
        v.copy_from_slice(&buf);
    }
    Ok(u)
}

/// A sphere bubble: inverse stereographic projection of (x - center)/scale
/// through the first k = min(d, L - 1) coordinates, placed in components
/// 0..k and L - 1 of ℝᴸ. On a torus x - center is taken at the nearest
/// image.
#[derive(Clone, Debug, PartialEq)]
pub struct Bubble {
    pub center: Vec<f64>,
    pub scale: f64,
    pub ambient: usize,
    periodic: bool,
}

impl Bubble {
    pub fn new(grid: &Grid, m: &TargetManifold, center: &[f64], scale: f64) -> Result<Self> {
        if !matches!(m.kind(), TargetKind::UnitSphere { .. }) {
            return Err(Error::Precondition("a bubble needs a sphere target".into()));
        }
        if center.len() != grid.dim() || !(scale > 0.0) {
            return Err(Error::Precondition(
                "bubble needs a d-dimensional center and a positive scale".into(),
            ));
        }
        Ok(Self {
            center: center.to_vec(),
            scale,
            ambient: m.ambient_dim(),
            periodic: grid.is_periodic(),
        })
    }

    fn k(&self) -> usize {
        self.center.len().min(self.ambient - 1)
    }

    fn y(&self, x: &[f64]) -> [f64; MAX_DIM] {
        let mut y = [0.0; MAX_DIM];
        for j in 0..self.k() {
            let mut dx = x[j] - self.center[j];
            if self.periodic {
                dx -= dx.round();
            }
            y[j] = dx / self.scale;
        }
        y
    }

    pub fn value(&self, x: &[f64], out: &mut [f64]) {
        let y = self.y(x);
        let r2: f64 = y.iter().map(|v| v * v).sum();
        let q = 1.0 + r2;
        out.iter_mut().for_each(|v| *v = 0.0);
        for j in 0..self.k() {
            out[j] = 2.0 * y[j] / q;
        }
        out[self.ambient - 1] = 2.0 / q - 1.0;
    }

    /// ∂u/∂x_axis.
    pub fn partial(&self, x: &[f64], axis: usize, out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        if axis >= self.k() {
            return;
        }
        let y = self.y(x);
        let r2: f64 = y.iter().map(|v| v * v).sum();
        let q = 1.0 + r2;
        let s = 1.0 / self.scale;
        for i in 0..self.k() {
            let delta = if i == axis { 2.0 / q } else { 0.0 };
            out[i] = s * (delta - 4.0 * y[i] * y[axis] / (q * q));
        }
        out[self.ambient - 1] = -s * 4.0 * y[axis] / (q * q);
    }

    /// The bubble sampled at every storage node, ghosts included.
    pub fn field(&self, grid: &Grid) -> Field {
        Field::from_fn(*grid, self.ambient, |x, out| self.value(x, out))
    }

    /// Clamped data matching the bubble on ∂Ω (boxes only).
    pub fn boundary(&self, grid: &Grid) -> Result<crate::grid::BoundaryData> {
        crate::grid::BoundaryData::from_fn(
            *grid,
            self.ambient,
            |x, out| self.value(x, out),
            |x, k, out| self.partial(x, k, out),
        )
    }
}
