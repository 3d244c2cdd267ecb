//! Embedded target manifolds N ⊂ ℝᴸ.
//!
//! Two families are supported, both with closed-form geometry:
//!
//! * the unit sphere S^{L-1}, with ν(y) = y, dν = Id and A(y)(X, Y) = -⟨X, Y⟩ y;
//! * the flat coordinate subspace spanned by e₁..eₙ, with a constant normal
//!   frame eₙ₊₁..e_L, dν = 0 and A = 0.
//!
//! The sphere carries a global normal frame, so no chart switching is needed.

use crate::error::{Error, Result};

/// Default tolerance for on-manifold checks.
pub const DEFAULT_PROJECTION_TOLERANCE: f64 = 1e-12;

/// Tolerance for tangency checks of vectors passed to the second fundamental form.
pub const TANGENCY_TOLERANCE: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TargetKind {
    /// Unit sphere in ℝᴸ.
    UnitSphere { ambient: usize },
    /// Span of the first `dim` coordinate vectors of ℝᴸ.
    FlatSubspace { ambient: usize, dim: usize },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TargetManifold {
    kind: TargetKind,
    projection_tolerance: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

impl TargetManifold {
    pub fn unit_sphere(ambient: usize) -> Self {
        assert!(ambient >= 2, "sphere needs ambient dimension >= 2");
        Self {
            kind: TargetKind::UnitSphere { ambient },
            projection_tolerance: DEFAULT_PROJECTION_TOLERANCE,
        }
    }

    pub fn flat_subspace(ambient: usize, dim: usize) -> Self {
        assert!(
            dim >= 1 && dim <= ambient,
            "subspace dimension out of range"
        );
        Self {
            kind: TargetKind::FlatSubspace { ambient, dim },
            projection_tolerance: DEFAULT_PROJECTION_TOLERANCE,
        }
    }

    pub fn with_tolerance(mut self, tol: f64) -> Self {
        self.projection_tolerance = tol;
        self
    }

    pub fn kind(&self) -> TargetKind {
        self.kind
    }

    pub fn projection_tolerance(&self) -> f64 {
        self.projection_tolerance
    }

    /// Ambient dimension L.
    pub fn ambient_dim(&self) -> usize {
        match self.kind {
            TargetKind::UnitSphere { ambient } | TargetKind::FlatSubspace { ambient, .. } => {
                ambient
            }
        }
    }

    /// Number of normal frame vectors, L - n.
    pub fn codim(&self) -> usize {
        match self.kind {
            TargetKind::UnitSphere { .. } => 1,
            TargetKind::FlatSubspace { ambient, dim } => ambient - dim,
        }
    }

    pub fn is_flat(&self) -> bool {
        matches!(self.kind, TargetKind::FlatSubspace { .. })
    }

    /// Euclidean distance from `p` to N.
    pub fn distance(&self, p: &[f64]) -> f64 {
        match self.kind {
            TargetKind::UnitSphere { .. } => (norm(p) - 1.0).abs(),
            TargetKind::FlatSubspace { dim, .. } => norm(&p[dim..]),
        }
    }

    fn check_on(&self, y: &[f64]) -> Result<()> {
        debug_assert_eq!(y.len(), self.ambient_dim());
        let distance = self.distance(y);
        if distance > self.projection_tolerance || !distance.is_finite() {
            return Err(Error::PointOffManifold { distance });
        }
        Ok(())
    }

    /// Nearest-point projection onto N, written into `out`.
    pub fn project_into(&self, p: &[f64], out: &mut [f64]) -> Result<()> {
        match self.kind {
            TargetKind::UnitSphere { .. } => {
                let r = norm(p);
                if !(r >= 10.0 * self.projection_tolerance) {
                    return Err(Error::NearSingularPoint { norm: r });
                }
                for (o, x) in out.iter_mut().zip(p) {
                    *o = x / r;
                }
            }
            TargetKind::FlatSubspace { dim, .. } => {
                out[..dim].copy_from_slice(&p[..dim]);
                out[dim..].iter_mut().for_each(|x| *x = 0.0);
            }
        }
        Ok(())
    }

    pub fn project(&self, p: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; p.len()];
        self.project_into(p, &mut out)?;
        Ok(out)
    }

    /// The i-th unit normal at `y`, without checking that `y` lies on N.
    pub(crate) fn normal_unchecked(&self, y: &[f64], i: usize, out: &mut [f64]) {
        match self.kind {
            TargetKind::UnitSphere { .. } => out.copy_from_slice(y),
            TargetKind::FlatSubspace { dim, .. } => {
                out.iter_mut().for_each(|x| *x = 0.0);
                out[dim + i] = 1.0;
            }
        }
    }

    /// (dνᵢ)(X) at `y`, without the on-manifold check. For the sphere the
    /// frame ν(p) = p is used as its own extension, so dν = Id everywhere.
    pub(crate) fn dnormal_unchecked(&self, _y: &[f64], _i: usize, x: &[f64], out: &mut [f64]) {
        match self.kind {
            TargetKind::UnitSphere { .. } => out.copy_from_slice(x),
            TargetKind::FlatSubspace { .. } => out.iter_mut().for_each(|v| *v = 0.0),
        }
    }

    /// Removes the normal components of `v` at `y` in place.
    pub(crate) fn tangential_unchecked(&self, y: &[f64], v: &mut [f64]) {
        match self.kind {
            TargetKind::UnitSphere { .. } => {
                let c = dot(v, y);
                for (vi, yi) in v.iter_mut().zip(y) {
                    *vi -= c * yi;
                }
            }
            TargetKind::FlatSubspace { dim, .. } => v[dim..].iter_mut().for_each(|x| *x = 0.0),
        }
    }

    /// A(y)(X, W) written into `out`, without on-manifold or tangency checks.
    pub(crate) fn second_fundamental_form_unchecked(
        &self,
        y: &[f64],
        x: &[f64],
        w: &[f64],
        out: &mut [f64],
    ) {
        match self.kind {
            TargetKind::UnitSphere { .. } => {
                let c = dot(x, w);
                for (o, yi) in out.iter_mut().zip(y) {
                    *o = -c * yi;
                }
            }
            TargetKind::FlatSubspace { .. } => out.iter_mut().for_each(|v| *v = 0.0),
        }
    }

    /// Largest |⟨v, νᵢ(y)⟩| over the normal frame.
    pub(crate) fn normal_component_unchecked(&self, y: &[f64], v: &[f64]) -> f64 {
        match self.kind {
            TargetKind::UnitSphere { .. } => dot(v, y).abs(),
            TargetKind::FlatSubspace { dim, .. } => {
                v[dim..].iter().fold(0.0_f64, |m, x| m.max(x.abs()))
            }
        }
    }

    /// Orthonormal frame ν_{n+1}, …, ν_L of the normal space at `y`.
    pub fn normal_frame(&self, y: &[f64]) -> Result<Vec<Vec<f64>>> {
        self.check_on(y)?;
        let l = self.ambient_dim();
        Ok((0..self.codim())
            .map(|i| {
                let mut v = vec![0.0; l];
                self.normal_unchecked(y, i, &mut v);
                v
            })
            .collect())
    }

    /// The list (dνᵢ)(X), one ambient vector per normal frame vector.
    pub fn normal_frame_differential(&self, y: &[f64], x: &[f64]) -> Result<Vec<Vec<f64>>> {
        self.check_on(y)?;
        Ok((0..self.codim())
            .map(|i| {
                let mut v = vec![0.0; x.len()];
                self.dnormal_unchecked(y, i, x, &mut v);
                v
            })
            .collect())
    }

    /// A(y)(X, Y) for tangent vectors X, Y at `y`.
    pub fn second_fundamental_form(&self, y: &[f64], x: &[f64], w: &[f64]) -> Result<Vec<f64>> {
        self.check_on(y)?;
        for v in [x, w] {
            let nc = self.normal_component_unchecked(y, v);
            if nc > TANGENCY_TOLERANCE * norm(v).max(1.0) {
                return Err(Error::NonTangentInput {
                    normal_component: nc,
                });
            }
        }
        Ok(match self.kind {
            TargetKind::UnitSphere { .. } => {
                let c = dot(x, w);
                y.iter().map(|yi| -c * yi).collect()
            }
            TargetKind::FlatSubspace { ambient, .. } => vec![0.0; ambient],
        })
    }

    /// v - Σᵢ ⟨v, νᵢ(y)⟩ νᵢ(y).
    pub fn tangential_project(&self, y: &[f64], v: &[f64]) -> Result<Vec<f64>> {
        self.check_on(y)?;
        let mut out = v.to_vec();
        self.tangential_unchecked(y, &mut out);
        Ok(out)
    }
}
