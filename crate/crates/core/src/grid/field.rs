use crate::error::{Error, Result};
use crate::manifold::TargetManifold;

use super::{Grid, MAX_DIM};

/// ℝᴸ-valued node data on a [`Grid`], ghost layers included.
///
/// `ghost_depth` records how many ghost layers hold valid data. Writing to
/// node values resets it to zero; [`super::apply_boundary`] restores it.
/// Derived fields lose one layer per first- or second-order stencil.
#[derive(Clone, Debug, PartialEq)]
pub struct Field {
    grid: Grid,
    ncomp: usize,
    data: Vec<f64>,
    ghost_depth: usize,
}

/// One [`Field`] per axis, e.g. the partial derivatives ∂ₖu.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorField {
    pub components: Vec<Field>,
}

impl Field {
    pub fn zeros(grid: Grid, ncomp: usize) -> Self {
        Self {
            grid,
            ncomp,
            data: vec![0.0; grid.storage_len() * ncomp],
            ghost_depth: 0,
        }
    }

    /// Constant field; every ghost layer holds the constant too.
    pub fn constant(grid: Grid, value: &[f64]) -> Self {
        let ncomp = value.len();
        let mut data = Vec::with_capacity(grid.storage_len() * ncomp);
        for _ in 0..grid.storage_len() {
            data.extend_from_slice(value);
        }
        Self {
            grid,
            ncomp,
            data,
            ghost_depth: grid.pad(),
        }
    }

    /// Samples `f(x, out)` at every storage node, ghosts included, so the
    /// ghost layers carry exact values of the sampled function.
    pub fn from_fn<F>(grid: Grid, ncomp: usize, f: F) -> Self
    where
        F: Fn(&[f64], &mut [f64]) + Sync,
    {
        let data = grid.map_region(grid.pad(), ncomp, |idx, out| {
            let x = grid.position(&grid.coords(idx));
            f(&x[..grid.dim()], out);
        });
        Self {
            grid,
            ncomp,
            data,
            ghost_depth: grid.pad(),
        }
    }

    pub(crate) fn from_raw(grid: Grid, ncomp: usize, data: Vec<f64>, ghost_depth: usize) -> Self {
        debug_assert_eq!(data.len(), grid.storage_len() * ncomp);
        Self {
            grid,
            ncomp,
            data,
            ghost_depth,
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Components per node (L).
    pub fn ncomp(&self) -> usize {
        self.ncomp
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Raw mutable access; ghost layers are marked stale.
    pub fn data_mut(&mut self) -> &mut [f64] {
        self.ghost_depth = 0;
        &mut self.data
    }

    /// Valid ghost layers (unbounded on a torus).
    pub fn ghost_depth(&self) -> usize {
        if self.grid.is_periodic() {
            usize::MAX
        } else {
            self.ghost_depth
        }
    }

    pub(crate) fn set_ghost_depth(&mut self, depth: usize) {
        self.ghost_depth = depth;
    }

    pub fn require_ghosts(&self, needed: usize) -> Result<()> {
        let available = self.ghost_depth();
        if available < needed {
            return Err(Error::StaleGhosts { needed, available });
        }
        Ok(())
    }

    #[inline]
    pub fn at(&self, idx: usize) -> &[f64] {
        &self.data[idx * self.ncomp..(idx + 1) * self.ncomp]
    }

    /// Mutable access to one node; ghost layers are marked stale.
    pub fn at_mut(&mut self, idx: usize) -> &mut [f64] {
        self.ghost_depth = 0;
        &mut self.data[idx * self.ncomp..(idx + 1) * self.ncomp]
    }

    pub fn value(&self, coords: &[isize]) -> &[f64] {
        self.at(self.grid.index(coords))
    }

    pub fn same_shape(&self, other: &Field) -> bool {
        self.grid == other.grid && self.ncomp == other.ncomp
    }

    pub(crate) fn check_shape(&self, other: &Field) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(Error::ShapeMismatch)
        }
    }

    /// Node values of the physical nodes in canonical order.
    pub fn node_values(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.grid.node_count() * self.ncomp);
        for idx in self.grid.node_indices() {
            out.extend_from_slice(self.at(idx));
        }
        out
    }

    /// Inverse of [`Field::node_values`]; ghosts are left stale.
    pub fn from_node_values(grid: Grid, ncomp: usize, values: &[f64]) -> Result<Self> {
        if values.len() != grid.node_count() * ncomp {
            return Err(Error::ShapeMismatch);
        }
        let mut f = Field::zeros(grid, ncomp);
        for (k, idx) in grid.node_indices().into_iter().enumerate() {
            f.data[idx * ncomp..(idx + 1) * ncomp]
                .copy_from_slice(&values[k * ncomp..(k + 1) * ncomp]);
        }
        Ok(f)
    }

    /// Pointwise a·self + b·other over the whole storage; the result keeps the
    /// smaller of the two ghost depths.
    pub fn axpby(&self, a: f64, other: &Field, b: f64) -> Result<Field> {
        self.check_shape(other)?;
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(x, y)| a * x + b * y)
            .collect();
        Ok(Field {
            grid: self.grid,
            ncomp: self.ncomp,
            data,
            ghost_depth: self.ghost_depth.min(other.ghost_depth),
        })
    }

    pub fn scaled(&self, a: f64) -> Field {
        Field {
            grid: self.grid,
            ncomp: self.ncomp,
            data: self.data.iter().map(|x| a * x).collect(),
            ghost_depth: self.ghost_depth,
        }
    }

    /// Scalar field |u|² per node.
    pub fn norm_sq(&self) -> Field {
        let l = self.ncomp;
        let data = self
            .data
            .chunks(l)
            .map(|v| v.iter().map(|x| x * x).sum())
            .collect();
        Field {
            grid: self.grid,
            ncomp: 1,
            data,
            ghost_depth: self.ghost_depth,
        }
    }

    /// Scalar field ⟨u, v⟩ per node.
    pub fn dot(&self, other: &Field) -> Result<Field> {
        self.check_shape(other)?;
        let l = self.ncomp;
        let data = self
            .data
            .chunks(l)
            .zip(other.data.chunks(l))
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x * y).sum())
            .collect();
        Ok(Field {
            grid: self.grid,
            ncomp: 1,
            data,
            ghost_depth: self.ghost_depth.min(other.ghost_depth),
        })
    }

    /// Largest |value| over physical nodes (all components).
    pub fn sup_norm(&self) -> f64 {
        self.grid
            .node_indices()
            .into_iter()
            .flat_map(|i| self.at(i).iter().map(|x| x.abs()))
            .fold(0.0, f64::max)
    }

    /// Largest Euclidean distance |u(x) - p| over physical nodes.
    pub fn sup_distance_to(&self, p: &[f64]) -> f64 {
        self.grid
            .node_indices()
            .into_iter()
            .map(|i| {
                self.at(i)
                    .iter()
                    .zip(p)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt()
            })
            .fold(0.0, f64::max)
    }

    /// True when every physical-node entry is finite.
    pub fn is_finite(&self) -> bool {
        self.grid
            .node_indices()
            .into_iter()
            .all(|i| self.at(i).iter().all(|x| x.is_finite()))
    }

    /// Largest distance to the target over physical nodes.
    pub fn max_distance_to(&self, m: &TargetManifold) -> f64 {
        self.grid
            .node_indices()
            .into_iter()
            .map(|i| m.distance(self.at(i)))
            .fold(0.0, f64::max)
    }

    /// Nodewise projection onto `m` at physical nodes selected by `select`.
    /// On failure returns the offending node coordinates.
    pub(crate) fn project_nodes<S>(
        &mut self,
        m: &TargetManifold,
        select: S,
    ) -> std::result::Result<(), [isize; MAX_DIM]>
    where
        S: Fn(&[isize]) -> bool,
    {
        let l = self.ncomp;
        let mut buf = vec![0.0; l];
        for idx in self.grid.node_indices() {
            let c = self.grid.coords(idx);
            if !select(&c) {
                continue;
            }
            let v = &mut self.data[idx * l..(idx + 1) * l];
            if m.project_into(v, &mut buf).is_err() {
                return Err(c);
            }
            v.copy_from_slice(&buf);
        }
        self.ghost_depth = 0;
        Ok(())
    }
}

impl VectorField {
    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn ghost_depth(&self) -> usize {
        self.components
            .iter()
            .map(|c| c.ghost_depth())
            .min()
            .unwrap_or(0)
    }
}
