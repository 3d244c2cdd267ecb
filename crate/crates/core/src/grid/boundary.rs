//! Clamped boundary data and the ghost-layer closure.
//!
//! The prescribed normal derivative is the outward one, `∂_ν u`. A ghost
//! node `q` layers outside a face is the mirror image of the physical node
//! `q` layers inside, shifted by `2qh·∂_ν u` so the central difference
//! across the face reproduces the prescribed slope. Nodes outside several
//! faces at once average the reflections through each of those faces.

use crate::error::{Error, Result};
use crate::manifold::TargetManifold;

use super::{Field, Grid, MAX_DIM};

/// Dirichlet trace `g` and outward normal derivative `h` on the faces of a
/// clamped box.
///
/// `g` is stored for every physical node (only boundary entries are read);
/// the normal derivative is stored per face, face `2k` being `xₖ = 0` and
/// face `2k + 1` being `xₖ = 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryData {
    grid: Grid,
    ncomp: usize,
    g: Vec<f64>,
    normal: Vec<Vec<f64>>,
}

impl BoundaryData {
    /// Constant trace `p` with vanishing normal derivative.
    pub fn constant(grid: Grid, p: &[f64]) -> Result<Self> {
        check_box(&grid)?;
        let l = p.len();
        let g = p
            .iter()
            .copied()
            .cycle()
            .take(grid.node_count() * l)
            .collect();
        let face_len = face_len(&grid) * l;
        Ok(Self {
            grid,
            ncomp: l,
            g,
            normal: vec![vec![0.0; face_len]; 2 * grid.dim()],
        })
    }

    /// Samples the trace of a smooth map `value(x, out)` and its outward
    /// normal derivative from `partial(x, k, out) = ∂ₖu(x)`.
    pub fn from_fn<V, P>(grid: Grid, ncomp: usize, value: V, partial: P) -> Result<Self>
    where
        V: Fn(&[f64], &mut [f64]),
        P: Fn(&[f64], usize, &mut [f64]),
    {
        check_box(&grid)?;
        let d = grid.dim();
        let mut g = Vec::with_capacity(grid.node_count() * ncomp);
        let mut buf = vec![0.0; ncomp];
        for idx in grid.node_indices() {
            let x = grid.position(&grid.coords(idx));
            value(&x[..d], &mut buf);
            g.extend_from_slice(&buf);
        }
        let mut normal = Vec::with_capacity(2 * d);
        for k in 0..d {
            for side in 0..2 {
                let sign = if side == 0 { -1.0 } else { 1.0 };
                let mut face = Vec::with_capacity(face_len(&grid) * ncomp);
                for c in face_coords(&grid, k, side) {
                    let x = grid.position(&c);
                    partial(&x[..d], k, &mut buf);
                    face.extend(buf.iter().map(|v| sign * v));
                }
                normal.push(face);
            }
        }
        Ok(Self {
            grid,
            ncomp,
            g,
            normal,
        })
    }

    /// Trace of an existing field together with explicit per-face normal
    /// derivatives (each `n^{d-1}·L` values in face order).
    pub fn from_parts(u: &Field, normal: Vec<Vec<f64>>) -> Result<Self> {
        let grid = *u.grid();
        check_box(&grid)?;
        let l = u.ncomp();
        if normal.len() != 2 * grid.dim() || normal.iter().any(|f| f.len() != face_len(&grid) * l) {
            return Err(Error::InvalidBoundaryData(
                "normal derivative has the wrong shape".into(),
            ));
        }
        Ok(Self {
            grid,
            ncomp: l,
            g: u.node_values(),
            normal,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn ncomp(&self) -> usize {
        self.ncomp
    }

    /// Trace value at a physical node.
    pub fn g_at(&self, coords: &[isize]) -> &[f64] {
        let k = canonical_offset(&self.grid, coords);
        &self.g[k * self.ncomp..(k + 1) * self.ncomp]
    }

    /// Outward normal derivative on face (`axis`, `side`) at the face node
    /// obtained by clamping `coords` into the box.
    pub fn normal_at(&self, axis: usize, side: usize, coords: &[isize]) -> &[f64] {
        let k = face_offset(&self.grid, axis, coords);
        &self.normal[2 * axis + side][k * self.ncomp..(k + 1) * self.ncomp]
    }

    /// Checks that the trace lies on `m` within 1e-10 and the normal
    /// derivative is tangent at the trace within 1e-8.
    pub fn validate(&self, m: &TargetManifold) -> Result<()> {
        if m.ambient_dim() != self.ncomp {
            return Err(Error::InvalidBoundaryData(format!(
                "{} components, target lives in R^{}",
                self.ncomp,
                m.ambient_dim()
            )));
        }
        let g = &self.grid;
        for idx in g.node_indices() {
            let c = g.coords(idx);
            if !g.is_boundary(&c) {
                continue;
            }
            let dist = m.distance(self.g_at(&c));
            if !(dist <= 1e-10) {
                return Err(Error::InvalidBoundaryData(format!(
                    "trace off the target by {dist:e} at {:?}",
                    &c[..g.dim()]
                )));
            }
        }
        for k in 0..g.dim() {
            for side in 0..2 {
                for c in face_coords(g, k, side) {
                    let y = self.g_at(&c);
                    let v = self.normal_at(k, side, &c);
                    let leak = m.normal_component_unchecked(y, v);
                    if !(leak <= 1e-8) {
                        return Err(Error::InvalidBoundaryData(format!(
                            "normal derivative not tangent ({leak:e}) at {:?}",
                            &c[..g.dim()]
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Largest |u - g| over boundary nodes.
    pub fn trace_mismatch(&self, u: &Field) -> f64 {
        let g = &self.grid;
        g.node_indices()
            .into_iter()
            .filter(|&i| g.is_boundary(&g.coords(i)))
            .map(|i| {
                let c = g.coords(i);
                u.at(i)
                    .iter()
                    .zip(self.g_at(&c))
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max)
    }
}

fn check_box(grid: &Grid) -> Result<()> {
    if grid.is_periodic() {
        Err(Error::TopologyMismatch { expected: "box" })
    } else {
        Ok(())
    }
}

fn face_len(grid: &Grid) -> usize {
    grid.n().pow(grid.dim() as u32 - 1)
}

fn canonical_offset(grid: &Grid, coords: &[isize]) -> usize {
    (0..grid.dim()).fold(0, |acc, k| acc * grid.n() + coords[k] as usize)
}

/// Position of the clamped projection of `coords` within the face list
/// normal to `axis`.
fn face_offset(grid: &Grid, axis: usize, coords: &[isize]) -> usize {
    let last = grid.n() as isize - 1;
    (0..grid.dim()).filter(|&k| k != axis).fold(0, |acc, k| {
        acc * grid.n() + coords[k].clamp(0, last) as usize
    })
}

fn face_coords(grid: &Grid, axis: usize, side: usize) -> Vec<[isize; MAX_DIM]> {
    let fixed = if side == 0 { 0 } else { grid.n() as isize - 1 };
    grid.node_indices()
        .into_iter()
        .map(|i| grid.coords(i))
        .filter(|c| c[axis] == fixed)
        .collect()
}

/// Writes `g` on boundary nodes and fills both ghost layers from the
/// interior values of `u`.
pub fn apply_boundary(u: &Field, bc: &BoundaryData) -> Result<Field> {
    check_box(u.grid())?;
    if u.grid() != bc.grid() || u.ncomp() != bc.ncomp() {
        return Err(Error::ShapeMismatch);
    }
    let mut out = u.clone();
    let g = *u.grid();
    let l = u.ncomp();
    {
        let data = out.data_mut();
        for idx in g.node_indices() {
            let c = g.coords(idx);
            if g.is_boundary(&c) {
                data[idx * l..(idx + 1) * l].copy_from_slice(bc.g_at(&c));
            }
        }
    }
    fill_ghosts(&mut out, |axis, side, c| Some(bc.normal_at(axis, side, c)));
    out.set_ghost_depth(g.pad());
    Ok(out)
}

fn fill_ghosts<'a, N>(u: &mut Field, normal: N)
where
    N: Fn(usize, usize, &[isize]) -> Option<&'a [f64]>,
{
    let g = *u.grid();
    let d = g.dim();
    let l = u.ncomp();
    let n = g.n() as isize;
    let h = g.h();
    let region = g.region_indices(g.pad());
    let outside = |c: &[isize]| (0..d).filter(|&k| c[k] < 0 || c[k] >= n).count();
    let data = u.data_mut();
    let mut acc = vec![0.0; l];
    // nodes outside several faces reflect onto nodes outside fewer faces
    for layer in 1..=d {
        for &idx in &region {
            let c = g.coords(idx);
            let axes: Vec<usize> = (0..d).filter(|&k| c[k] < 0 || c[k] >= n).collect();
            if axes.len() != layer {
                continue;
            }
            // running mean, exact when all reflections agree
            for (count, &k) in axes.iter().enumerate() {
                let (side, q, mirror) = if c[k] < 0 {
                    (0, -c[k], -c[k])
                } else {
                    (1, c[k] - (n - 1), 2 * (n - 1) - c[k])
                };
                let mut r = c;
                r[k] = mirror;
                debug_assert_eq!(outside(&r), layer - 1);
                let src = g.index(&r);
                let shift = 2.0 * q as f64 * h;
                let hn = normal(k, side, &c);
                let w = 1.0 / (count + 1) as f64;
                for j in 0..l {
                    let v = match hn {
                        Some(hn) => data[src * l + j] + shift * hn[j],
                        None => data[src * l + j],
                    };
                    acc[j] = if count == 0 {
                        v
                    } else {
                        acc[j] + (v - acc[j]) * w
                    };
                }
            }
            for j in 0..l {
                data[idx * l + j] = acc[j];
            }
        }
    }
}
