use crate::error::{Error, Result};

use super::{Grid, MAX_DIM};

/// Physical nodes with |x - x0| ≤ R, as storage indices in canonical order.
///
/// On a box the ball is cut by the closed box; on a torus distances use the
/// nearest periodic image. A relative slack of 1e-12 keeps nodes that sit
/// exactly on the sphere |x - x0| = R.
pub fn ball_nodes(grid: &Grid, x0: &[f64], radius: f64) -> Result<Vec<usize>> {
    let d = grid.dim();
    let h = grid.h();
    let n = grid.n() as isize;
    let r2 = radius * radius * (1.0 + 1e-12) + 1e-300;
    let mut lo = [0isize; MAX_DIM];
    let mut hi = [0isize; MAX_DIM];
    for k in 0..d {
        let a = ((x0[k] - radius) / h).floor() as isize - 1;
        let b = ((x0[k] + radius) / h).ceil() as isize + 1;
        if grid.is_periodic() {
            if b - a + 1 >= n {
                lo[k] = 0;
                hi[k] = n - 1;
            } else {
                lo[k] = a;
                hi[k] = b;
            }
        } else {
            lo[k] = a.max(0);
            hi[k] = b.min(n - 1);
        }
    }
    let mut hits = Vec::new();
    if (0..d).all(|k| lo[k] <= hi[k]) {
        let mut c = lo;
        'outer: loop {
            let mut dist2 = 0.0;
            for k in 0..d {
                let mut dx = c[k] as f64 * h - x0[k];
                if grid.is_periodic() {
                    dx -= dx.round();
                }
                dist2 += dx * dx;
            }
            if dist2 <= r2 {
                hits.push(grid.index(&c));
            }
            let mut k = d;
            loop {
                if k == 0 {
                    break 'outer;
                }
                k -= 1;
                c[k] += 1;
                if c[k] <= hi[k] {
                    break;
                }
                c[k] = lo[k];
            }
        }
    }
    if hits.is_empty() {
        return Err(Error::EmptyBall {
            center: x0[..d].to_vec(),
            radius,
        });
    }
    hits.sort_unstable();
    hits.dedup();
    Ok(hits)
}
