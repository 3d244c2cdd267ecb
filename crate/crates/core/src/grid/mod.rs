//! Structured lattices on the unit box [0, 1]ᵈ or the flat torus.
//!
//! Storage covers the node lattice plus `pad` ghost layers on every side
//! (two for clamped boxes, none for tori). Node coordinates are signed
//! integers in `[-pad, n + pad)`; the position of coordinate `i` along any
//! axis is `i * h`. Linear storage order is lexicographic with the last
//! axis fastest, and that order restricted to the `n^d` physical nodes is
//! the canonical node order used by quadrature and snapshots.

mod ball;
mod boundary;
mod field;
pub mod ops;
pub(crate) mod spectral;

pub use ball::ball_nodes;
pub use boundary::{apply_boundary, BoundaryData};
pub use field::{Field, VectorField};
pub use ops::{bilaplacian, divergence, gradient, integrate, laplacian};

use rayon::prelude::*;

use crate::error::{Error, Result};

/// Largest supported spatial dimension.
pub const MAX_DIM: usize = 4;

/// Ghost layers carried by clamped boxes.
pub const GHOST_LAYERS: usize = 2;

pub type Coords = [isize; MAX_DIM];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Topology {
    BoxClamped,
    Periodic,
}

impl Topology {
    pub fn as_str(&self) -> &'static str {
        match self {
            Topology::BoxClamped => "box",
            Topology::Periodic => "periodic",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid {
    dim: usize,
    n: usize,
    h: f64,
    topology: Topology,
    pad: usize,
    ext: usize,
    strides: [usize; MAX_DIM],
}

impl Grid {
    pub fn new(dim: usize, n: usize, topology: Topology) -> Result<Self> {
        if !(1..=MAX_DIM).contains(&dim) {
            return Err(Error::InvalidGrid(format!("dimension {dim} not in 1..=4")));
        }
        if n < 8 {
            return Err(Error::InvalidGrid(format!(
                "{n} nodes per axis, need at least 8"
            )));
        }
        let (h, pad) = match topology {
            Topology::BoxClamped => (1.0 / (n - 1) as f64, GHOST_LAYERS),
            Topology::Periodic => (1.0 / n as f64, 0),
        };
        let ext = n + 2 * pad;
        let mut strides = [0; MAX_DIM];
        let mut s = 1;
        for k in (0..dim).rev() {
            strides[k] = s;
            s *= ext;
        }
        Ok(Self {
            dim,
            n,
            h,
            topology,
            pad,
            ext,
            strides,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Nodes per axis.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn topology(&self) -> Topology {
        self.topology
    }

    pub fn is_periodic(&self) -> bool {
        self.topology == Topology::Periodic
    }

    pub fn pad(&self) -> usize {
        self.pad
    }

    /// Nodes per axis in storage, ghosts included.
    pub fn extent(&self) -> usize {
        self.ext
    }

    pub fn stride(&self, axis: usize) -> usize {
        self.strides[axis]
    }

    /// Number of physical nodes, n^d.
    pub fn node_count(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn storage_len(&self) -> usize {
        self.ext.pow(self.dim as u32)
    }

    /// hᵈ.
    pub fn cell_volume(&self) -> f64 {
        self.h.powi(self.dim as i32)
    }

    /// Storage index of `coords`; periodic coordinates are wrapped.
    pub fn index(&self, coords: &[isize]) -> usize {
        let mut idx = 0;
        for k in 0..self.dim {
            let c = if self.is_periodic() {
                coords[k].rem_euclid(self.n as isize)
            } else {
                debug_assert!(coords[k] >= -(self.pad as isize));
                debug_assert!(coords[k] < (self.n + self.pad) as isize);
                coords[k] + self.pad as isize
            };
            idx += c as usize * self.strides[k];
        }
        idx
    }

    pub fn coords(&self, idx: usize) -> Coords {
        let mut c = [0; MAX_DIM];
        let mut rem = idx;
        for k in 0..self.dim {
            c[k] = (rem / self.strides[k]) as isize - self.pad as isize;
            rem %= self.strides[k];
        }
        c
    }

    pub fn position(&self, coords: &[isize]) -> [f64; MAX_DIM] {
        let mut x = [0.0; MAX_DIM];
        for k in 0..self.dim {
            x[k] = coords[k] as f64 * self.h;
        }
        x
    }

    /// Index of the neighbour `shift` steps along `axis`.
    #[inline]
    pub fn neighbor(&self, idx: usize, axis: usize, shift: isize) -> usize {
        let s = self.strides[axis];
        if self.is_periodic() {
            let n = self.n as isize;
            let i = ((idx / s) % self.ext) as isize;
            let j = (i + shift).rem_euclid(n);
            (idx as isize + (j - i) * s as isize) as usize
        } else {
            (idx as isize + shift * s as isize) as usize
        }
    }

    /// Depth of a coordinate below the physical node set: 0 for physical
    /// nodes, q for nodes in the q-th ghost layer of some face.
    pub fn ghost_depth(&self, coords: &[isize]) -> usize {
        let n = self.n as isize;
        (0..self.dim)
            .map(|k| {
                let c = coords[k];
                if c < 0 {
                    (-c) as usize
                } else if c >= n {
                    (c - n + 1) as usize
                } else {
                    0
                }
            })
            .max()
            .unwrap_or(0)
    }

    /// True for physical nodes on ∂Ω of a clamped box.
    pub fn is_boundary(&self, coords: &[isize]) -> bool {
        if self.is_periodic() {
            return false;
        }
        let last = self.n as isize - 1;
        (0..self.dim).any(|k| coords[k] == 0 || coords[k] == last)
    }

    /// Physical nodes that are not on ∂Ω (all nodes on a torus).
    pub fn is_interior(&self, coords: &[isize]) -> bool {
        self.ghost_depth(coords) == 0 && !self.is_boundary(coords)
    }

    /// Storage indices of the physical nodes in canonical order.
    pub fn node_indices(&self) -> Vec<usize> {
        self.region_indices(0)
    }

    /// Storage indices of nodes within `depth` ghost layers of the physical
    /// set, in storage order. For a torus `depth` is ignored.
    pub fn region_indices(&self, depth: usize) -> Vec<usize> {
        let q = if self.is_periodic() {
            0
        } else {
            depth.min(self.pad)
        } as isize;
        let lo = -q;
        let hi = self.n as isize + q;
        let mut out = Vec::with_capacity(((hi - lo) as usize).pow(self.dim as u32));
        let mut c = [lo; MAX_DIM];
        for k in self.dim..MAX_DIM {
            c[k] = 0;
        }
        loop {
            out.push(self.index(&c));
            let mut k = self.dim;
            loop {
                if k == 0 {
                    return out;
                }
                k -= 1;
                c[k] += 1;
                if c[k] < hi {
                    break;
                }
                c[k] = lo;
            }
        }
    }

    /// Storage indices of interior (non-boundary) physical nodes.
    pub fn interior_indices(&self) -> Vec<usize> {
        self.node_indices()
            .into_iter()
            .filter(|&i| !self.is_boundary(&self.coords(i)))
            .collect()
    }

    /// Fills `ncomp` values per storage node within `depth` ghost layers by
    /// calling `f(idx, out)`; everything else is zero. Lines along the last
    /// axis are processed in parallel, so the result is independent of the
    /// worker count.
    pub(crate) fn map_region<F>(&self, depth: usize, ncomp: usize, f: F) -> Vec<f64>
    where
        F: Fn(usize, &mut [f64]) + Sync,
    {
        let mut out = vec![0.0; self.storage_len() * ncomp];
        let q = if self.is_periodic() {
            0
        } else {
            depth.min(self.pad)
        };
        let lo = self.pad - q;
        let hi = self.pad + self.n + q;
        let row_len = self.ext * ncomp;
        let dim = self.dim;
        let ext = self.ext;
        out.par_chunks_mut(row_len)
            .enumerate()
            .for_each(|(row, chunk)| {
                // decode the leading d-1 storage coordinates of this row
                let mut r = row;
                for _ in 0..dim.saturating_sub(1) {
                    let c = r % ext;
                    if c < lo || c >= hi {
                        return;
                    }
                    r /= ext;
                }
                let base = row * ext;
                for j in lo..hi {
                    let idx = base + j;
                    f(idx, &mut chunk[j * ncomp..(j + 1) * ncomp]);
                }
            });
        out
    }
}

/// Neumaier-compensated sum over a fixed ordering.
#[derive(Clone, Copy, Debug, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = CompensatedSum::new();
        for x in iter {
            s.add(x);
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_shapes() {
        assert!(Grid::new(0, 16, Topology::Periodic).is_err());
        assert!(Grid::new(5, 16, Topology::Periodic).is_err());
        assert!(Grid::new(2, 7, Topology::BoxClamped).is_err());
    }

    #[test]
    fn spacing_and_counts() {
        let b = Grid::new(2, 9, Topology::BoxClamped).unwrap();
        assert_eq!(b.h(), 0.125);
        assert_eq!(b.node_count(), 81);
        assert_eq!(b.storage_len(), 13 * 13);
        let p = Grid::new(3, 8, Topology::Periodic).unwrap();
        assert_eq!(p.h(), 0.125);
        assert_eq!(p.storage_len(), 512);
        assert_eq!(p.pad(), 0);
    }

    #[test]
    fn index_round_trip_and_wrap() {
        let b = Grid::new(3, 8, Topology::BoxClamped).unwrap();
        for idx in [0, 17, 300, b.storage_len() - 1] {
            let c = b.coords(idx);
            assert_eq!(b.index(&c), idx);
        }
        let p = Grid::new(2, 8, Topology::Periodic).unwrap();
        assert_eq!(p.index(&[-1, 0, 0, 0]), p.index(&[7, 0, 0, 0]));
        let i = p.index(&[0, 7, 0, 0]);
        assert_eq!(p.neighbor(i, 1, 1), p.index(&[0, 0, 0, 0]));
        assert_eq!(p.neighbor(i, 0, -2), p.index(&[6, 7, 0, 0]));
    }

    #[test]
    fn regions() {
        let b = Grid::new(2, 8, Topology::BoxClamped).unwrap();
        assert_eq!(b.node_indices().len(), 64);
        assert_eq!(b.region_indices(1).len(), 100);
        assert_eq!(b.interior_indices().len(), 36);
        let c = b.coords(b.region_indices(2)[0]);
        assert_eq!(b.ghost_depth(&c), 2);
    }

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let s: CompensatedSum = [1.0, 1e-16, 1e-16, -1.0].into_iter().collect();
        assert_eq!(s.value(), 2e-16);
    }
}
