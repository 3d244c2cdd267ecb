//! Numerical laboratory for the extrinsic biharmonic map heat flow
//! ∂ₜu = -Δ²u - f(u) from a flat box or torus of dimension at most four into
//! the unit sphere or a flat subspace.

pub mod analysis;
pub mod error;
pub mod flow;
pub mod grid;
pub mod io;
pub mod manifold;

pub use error::{Error, Result};
