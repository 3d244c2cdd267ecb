//! Empirical constants of the local interpolation inequalities between
//! derivatives of orders one to four on a ball.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::ops::{multi_indices, tensor_norm_sq_at};
use crate::grid::{ball_nodes, CompensatedSum, Field};

/// The four inequalities, named by their left-hand sides.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Inequality {
    /// ∫|∇³u|² ≤ C(R²∫|∇⁴u|² + R⁻²∫|∇²u|²).
    ThirdOrderL2,
    /// (∫|∇³u|⁴)^{1/2} ≤ C(∫|∇⁴u|² + R⁻⁴∫|∇²u|²).
    ThirdOrderL4,
    /// ∫|∇²u|⁴ ≤ C∫|∇²u|²(∫|∇⁴u|² + R⁻⁴∫|∇²u|²).
    SecondOrderL4,
    /// ∫|∇u|⁸ ≤ C∫|∇u|⁴[∫|∇²u|²(∫|∇⁴u|² + R⁻⁴∫|∇²u|²) + R⁻⁴∫|∇u|⁴].
    FirstOrderL8,
}

impl Inequality {
    pub const ALL: [Inequality; 4] = [
        Inequality::ThirdOrderL2,
        Inequality::ThirdOrderL4,
        Inequality::SecondOrderL4,
        Inequality::FirstOrderL8,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Inequality::ThirdOrderL2 => "d3-l2",
            Inequality::ThirdOrderL4 => "d3-l4",
            Inequality::SecondOrderL4 => "d2-l4",
            Inequality::FirstOrderL8 => "d1-l8",
        }
    }
}

/// Ball integrals of the derivative powers entering the inequalities.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct BallIntegrals {
    pub radius: f64,
    pub d1_pow4: f64,
    pub d1_pow8: f64,
    pub d2_pow2: f64,
    pub d2_pow4: f64,
    pub d3_pow2: f64,
    pub d3_pow4: f64,
    pub d4_pow2: f64,
}

impl BallIntegrals {
    /// hᵈ-weighted sums over the nodes of B_R(x0); needs two ghost layers.
    pub fn measure(u: &Field, x0: &[f64], radius: f64) -> Result<Self> {
        u.require_ghosts(2)?;
        let g = *u.grid();
        let nodes = ball_nodes(&g, x0, radius)?;
        let orders: Vec<_> = (1..=4).map(|k| multi_indices(g.dim(), k)).collect();
        let l = u.ncomp();
        let per_node: Vec<[f64; 4]> = nodes
            .par_iter()
            .map_init(
                || vec![0.0; l],
                |buf, &idx| {
                    let mut s = [0.0; 4];
                    for (k, ix) in orders.iter().enumerate() {
                        s[k] = tensor_norm_sq_at(u, idx, ix, buf);
                    }
                    s
                },
            )
            .collect();
        let mut acc = [CompensatedSum::new(); 7];
        for s in &per_node {
            acc[0].add(s[0] * s[0]);
            acc[1].add(s[0].powi(4));
            acc[2].add(s[1]);
            acc[3].add(s[1] * s[1]);
            acc[4].add(s[2]);
            acc[5].add(s[2] * s[2]);
            acc[6].add(s[3]);
        }
        let w = g.cell_volume();
        let v: Vec<f64> = acc.iter().map(|a| w * a.value()).collect();
        Ok(Self {
            radius,
            d1_pow4: v[0],
            d1_pow8: v[1],
            d2_pow2: v[2],
            d2_pow4: v[3],
            d3_pow2: v[4],
            d3_pow4: v[5],
            d4_pow2: v[6],
        })
    }

    /// (LHS, RHS) of `which` with the constant stripped.
    pub fn sides(&self, which: Inequality) -> (f64, f64) {
        let r = self.radius;
        let r4 = r.powi(4);
        let top = self.d4_pow2 + self.d2_pow2 / r4;
        match which {
            Inequality::ThirdOrderL2 => {
                (self.d3_pow2, r * r * self.d4_pow2 + self.d2_pow2 / (r * r))
            }
            Inequality::ThirdOrderL4 => (self.d3_pow4.sqrt(), top),
            Inequality::SecondOrderL4 => (self.d2_pow4, self.d2_pow2 * top),
            Inequality::FirstOrderL8 => (
                self.d1_pow8,
                self.d1_pow4 * (self.d2_pow2 * top + self.d1_pow4 / r4),
            ),
        }
    }

    /// LHS/RHS, reporting 0/0 as 0 and failing when only the RHS vanishes.
    pub fn ratio(&self, which: Inequality) -> Result<f64> {
        let (lhs, rhs) = self.sides(which);
        if rhs > 0.0 {
            Ok(lhs / rhs)
        } else if lhs.abs() <= DEGENERACY_TOLERANCE {
            Ok(0.0)
        } else {
            Err(Error::DegenerateRhs { lhs })
        }
    }
}

/// Left-hand sides below this are treated as zero when the right-hand side
/// vanishes.
pub const DEGENERACY_TOLERANCE: f64 = 1e-12;

/// Empirical constant LHS/RHS of `which` for u on B_R(x0).
pub fn interpolation_probe(u: &Field, x0: &[f64], radius: f64, which: Inequality) -> Result<f64> {
    BallIntegrals::measure(u, x0, radius)?.ratio(which)
}
