//! Local energy E(u; B_R) = ∫_{B_R}|∇²u|² + (∫_{B_R}|∇u|⁴)^{1/2} and the
//! ε₁-concentration scan.

use rayon::prelude::*;

use crate::error::Result;
use crate::grid::ops::{multi_indices, tensor_norm_sq_at};
use crate::grid::{ball_nodes, CompensatedSum, Field, Grid, MAX_DIM};

use super::AnalysisConfig;

/// Nodewise |∇²u|² and |∇u|⁴ on the physical nodes, in canonical order.
#[derive(Clone, Debug)]
pub struct EnergyDensity {
    grid: Grid,
    hessian_sq: Vec<f64>,
    gradient_quartic: Vec<f64>,
}

impl EnergyDensity {
    /// Needs one valid ghost layer (or a torus).
    pub fn new(u: &Field) -> Result<Self> {
        u.require_ghosts(1)?;
        let grid = *u.grid();
        let second = multi_indices(grid.dim(), 2);
        let first = multi_indices(grid.dim(), 1);
        let l = u.ncomp();
        let nodes = grid.node_indices();
        let pairs: Vec<(f64, f64)> = nodes
            .par_iter()
            .map_init(
                || vec![0.0; l],
                |buf, &idx| {
                    let h2 = tensor_norm_sq_at(u, idx, &second, buf);
                    let g2 = tensor_norm_sq_at(u, idx, &first, buf);
                    (h2, g2 * g2)
                },
            )
            .collect();
        let (hessian_sq, gradient_quartic) = pairs.into_iter().unzip();
        Ok(Self {
            grid,
            hessian_sq,
            gradient_quartic,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    fn canonical(&self, coords: &[isize]) -> usize {
        (0..self.grid.dim()).fold(0, |acc, k| acc * self.grid.n() + coords[k] as usize)
    }

    /// E over a node set given by canonical positions.
    fn energy_over(&self, nodes: impl Iterator<Item = usize>) -> f64 {
        let mut a = CompensatedSum::new();
        let mut b = CompensatedSum::new();
        for k in nodes {
            a.add(self.hessian_sq[k]);
            b.add(self.gradient_quartic[k]);
        }
        let w = self.grid.cell_volume();
        w * a.value() + (w * b.value()).max(0.0).sqrt()
    }

    /// E(u; B_R(x0)).
    pub fn local_energy(&self, x0: &[f64], radius: f64) -> Result<f64> {
        let g = self.grid;
        let nodes = ball_nodes(&g, x0, radius)?;
        Ok(self.energy_over(nodes.into_iter().map(|i| self.canonical(&g.coords(i)))))
    }

    /// E over the whole domain; an upper bound for every ball.
    pub fn global_energy(&self) -> f64 {
        self.energy_over(0..self.hessian_sq.len())
    }

    /// E(u; B_R(x)) for every physical node x, in canonical order.
    ///
    /// The ball is split into lines along the last axis; each line is read
    /// off running sums, so the cost per center is the number of lines
    /// rather than the number of nodes. The node sets match [`ball_nodes`].
    pub fn scan(&self, radius: f64) -> Vec<f64> {
        let g = self.grid;
        let d = g.dim();
        let n = g.n() as isize;
        let h = g.h();
        let reach = (radius / h * (1.0 + 1e-12)).floor() as isize;
        let r2 = radius * radius * (1.0 + 1e-12);
        if g.is_periodic() && 2 * reach + 1 > n {
            // the ball meets its own periodic images; count each node once
            return self.scan_by_nodes(radius);
        }
        // (offset in the leading d - 1 axes, half-width along the last axis)
        let mut lines: Vec<([isize; MAX_DIM], isize)> = Vec::new();
        let mut o = [0isize; MAX_DIM];
        for k in 0..d - 1 {
            o[k] = -reach;
        }
        loop {
            let partial: f64 = (0..d - 1).map(|k| (o[k] as f64 * h).powi(2)).sum();
            if partial <= r2 {
                let mut w = 0;
                while w < reach && partial + ((w + 1) as f64 * h).powi(2) <= r2 {
                    w += 1;
                }
                lines.push((o, w));
            }
            let mut k = d - 1;
            let done = loop {
                if k == 0 {
                    break true;
                }
                k -= 1;
                o[k] += 1;
                if o[k] <= reach {
                    break false;
                }
                o[k] = -reach;
            };
            if done {
                break;
            }
        }
        let nu = g.n();
        let rows = self.hessian_sq.len() / nu;
        let running = |v: &[f64]| -> Vec<f64> {
            let mut out = Vec::with_capacity(rows * (nu + 1));
            for r in 0..rows {
                let mut acc = CompensatedSum::new();
                out.push(0.0);
                for &x in &v[r * nu..(r + 1) * nu] {
                    acc.add(x);
                    out.push(acc.value());
                }
            }
            out
        };
        let ph = running(&self.hessian_sq);
        let pg = running(&self.gradient_quartic);
        let w = g.cell_volume();
        let centers: Vec<[isize; MAX_DIM]> =
            g.node_indices().into_iter().map(|i| g.coords(i)).collect();
        centers
            .par_iter()
            .map(|c| {
                let mut a = CompensatedSum::new();
                let mut b = CompensatedSum::new();
                let mut take = |row: usize, lo: isize, hi: isize| {
                    let base = row * (nu + 1);
                    a.add(ph[base + hi as usize + 1] - ph[base + lo as usize]);
                    b.add(pg[base + hi as usize + 1] - pg[base + lo as usize]);
                };
                'line: for (off, half) in &lines {
                    let mut row = 0usize;
                    for k in 0..d - 1 {
                        let mut v = c[k] + off[k];
                        if g.is_periodic() {
                            v = v.rem_euclid(n);
                        } else if v < 0 || v >= n {
                            continue 'line;
                        }
                        row = row * nu + v as usize;
                    }
                    let (lo, hi) = (c[d - 1] - half, c[d - 1] + half);
                    if !g.is_periodic() {
                        take(row, lo.max(0), hi.min(n - 1));
                    } else if lo < 0 {
                        take(row, 0, hi);
                        take(row, lo + n, n - 1);
                    } else if hi >= n {
                        take(row, lo, n - 1);
                        take(row, 0, hi - n);
                    } else {
                        take(row, lo, hi);
                    }
                }
                w * a.value() + (w * b.value()).max(0.0).sqrt()
            })
            .collect()
    }

    /// Node-by-node variant of [`Self::scan`].
    fn scan_by_nodes(&self, radius: f64) -> Vec<f64> {
        let g = self.grid;
        let d = g.dim();
        let n = g.n() as isize;
        let reach = (radius / g.h() * (1.0 + 1e-12)).floor() as isize;
        let r2 = radius * radius * (1.0 + 1e-12);
        let mut offsets: Vec<[isize; MAX_DIM]> = Vec::new();
        let mut o = [0isize; MAX_DIM];
        for k in 0..d {
            o[k] = -reach;
        }
        loop {
            let dist2: f64 = (0..d).map(|k| (o[k] as f64 * g.h()).powi(2)).sum();
            if dist2 <= r2 {
                offsets.push(o);
            }
            let mut k = d;
            let done = loop {
                if k == 0 {
                    break true;
                }
                k -= 1;
                o[k] += 1;
                if o[k] <= reach {
                    break false;
                }
                o[k] = -reach;
            };
            if done {
                break;
            }
        }
        let centers: Vec<[isize; MAX_DIM]> =
            g.node_indices().into_iter().map(|i| g.coords(i)).collect();
        centers
            .par_iter()
            .map(|c| {
                let mut seen = Vec::new();
                for off in &offsets {
                    let mut p = [0isize; MAX_DIM];
                    for k in 0..d {
                        p[k] = (c[k] + off[k]).rem_euclid(n);
                    }
                    seen.push(self.canonical(&p));
                }
                seen.sort_unstable();
                seen.dedup();
                self.energy_over(seen.into_iter())
            })
            .collect()
    }
}

/// E(u; B_R(x0)) with hᵈ-weighted sums over [`ball_nodes`].
pub fn local_energy(u: &Field, x0: &[f64], radius: f64) -> Result<f64> {
    let g = *u.grid();
    // only the ball's nodes are needed, but the density is cheap compared to
    // a careful restriction
    ball_nodes(&g, x0, radius)?;
    EnergyDensity::new(u)?.local_energy(x0, radius)
}

/// A node whose detection ball carries more than ε₁.
#[derive(Clone, Debug, PartialEq)]
pub struct Concentration {
    pub node: Vec<isize>,
    pub center: Vec<f64>,
    pub energy: f64,
}

impl Concentration {
    pub fn at_time(self, t: f64, step: u64) -> ConcentrationEvent {
        ConcentrationEvent {
            t,
            step,
            node: self.node,
            center: self.center,
            energy: self.energy,
        }
    }
}

/// A cluster of exceedances at one observed time, represented by its
/// strongest node.
#[derive(Clone, Debug, PartialEq)]
pub struct ConcentrationEvent {
    pub t: f64,
    pub step: u64,
    pub node: Vec<isize>,
    pub center: Vec<f64>,
    pub energy: f64,
}

/// Every node x with E(u; B_{R_detect}(x)) > ε₁, sorted by E descending and
/// then by canonical node order.
pub fn detect_concentration(u: &Field, cfg: &AnalysisConfig) -> Result<Vec<Concentration>> {
    let density = EnergyDensity::new(u)?;
    detect_with(&density, cfg)
}

pub fn detect_with(density: &EnergyDensity, cfg: &AnalysisConfig) -> Result<Vec<Concentration>> {
    let g = *density.grid();
    let radius = cfg.detection_radius(&g);
    if density.global_energy() <= cfg.epsilon1 {
        return Ok(Vec::new());
    }
    let values = density.scan(radius);
    let mut hits: Vec<Concentration> = g
        .node_indices()
        .into_iter()
        .zip(values)
        .filter(|(_, e)| *e > cfg.epsilon1)
        .map(|(idx, energy)| {
            let c = g.coords(idx);
            Concentration {
                node: c[..g.dim()].to_vec(),
                center: g.position(&c)[..g.dim()].to_vec(),
                energy,
            }
        })
        .collect();
    // stable sort keeps canonical order among equal energies
    hits.sort_by(|a, b| b.energy.total_cmp(&a.energy));
    Ok(hits)
}

/// Distance on the box, or on the torus via the nearest image.
pub fn grid_distance(grid: &Grid, a: &[f64], b: &[f64]) -> f64 {
    (0..grid.dim())
        .map(|k| {
            let mut dx = a[k] - b[k];
            if grid.is_periodic() {
                dx -= dx.round();
            }
            dx * dx
        })
        .sum::<f64>()
        .sqrt()
}

/// Greedy clustering of sorted exceedances: each hit joins the first
/// representative within `2·radius`, otherwise it starts a new cluster.
pub fn cluster(grid: &Grid, hits: &[Concentration], radius: f64) -> Vec<Concentration> {
    let mut reps: Vec<Concentration> = Vec::new();
    for h in hits {
        if !reps
            .iter()
            .any(|r| grid_distance(grid, &r.center, &h.center) <= 2.0 * radius)
        {
            reps.push(h.clone());
        }
    }
    reps
}

/// Clustered concentration events of `u` at time `t`.
pub fn concentration_events(
    u: &Field,
    cfg: &AnalysisConfig,
    t: f64,
    step: u64,
) -> Result<Vec<ConcentrationEvent>> {
    let hits = detect_concentration(u, cfg)?;
    let radius = cfg.detection_radius(u.grid());
    Ok(cluster(u.grid(), &hits, radius)
        .into_iter()
        .map(|c| c.at_time(t, step))
        .collect())
}

/// Largest E(u; B_{R_detect}(x)) over all nodes.
pub fn max_local_energy(u: &Field, cfg: &AnalysisConfig) -> Result<f64> {
    let density = EnergyDensity::new(u)?;
    let radius = cfg.detection_radius(u.grid());
    Ok(density.scan(radius).into_iter().fold(0.0, f64::max))
}
