//! Measurements along the flow: energies, the energy identity, local
//! energy and concentration, blow-up extraction, interpolation probes, the
//! gap experiment and the quantization audit.

pub mod blowup;
pub mod energy;
pub mod gap;
pub mod interp;
pub mod local;
pub mod quantization;

pub use blowup::{blowup_extract, extract_at, rescale, BlowupCandidate};
pub use energy::{
    biharmonic_residual, energy_e2, energy_f2, energy_identity_residual,
    energy_identity_residual_of, gradient_consistency,
};
pub use gap::{gap_experiment, GapReport};
pub use interp::{interpolation_probe, BallIntegrals, Inequality};
pub use local::{
    concentration_events, detect_concentration, local_energy, max_local_energy, Concentration,
    ConcentrationEvent, EnergyDensity,
};
pub use quantization::{quantization_check, singular_events, QuantizationReport, SingularEvent};

use crate::error::{Error, Result};
use crate::grid::Grid;

/// Thresholds of the concentration analysis. The defaults are tuning
/// parameters; none of them is a proven constant.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AnalysisConfig {
    /// Concentration threshold ε₁.
    pub epsilon1: f64,
    /// Energy quantum ε₀ of the gap and quantization statements.
    pub epsilon0: f64,
    /// Covering constant C₀ of the blow-up radius selection.
    pub c0: u32,
    /// Detection radius; `None` means 8h.
    pub r_detect: Option<f64>,
    pub probe_count: usize,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            epsilon1: 0.05,
            epsilon0: 0.02,
            c0: 16,
            r_detect: None,
            probe_count: 100,
        }
    }
}

impl AnalysisConfig {
    /// Detection radius on `grid`.
    pub fn detection_radius(&self, grid: &Grid) -> f64 {
        self.r_detect.unwrap_or(8.0 * grid.h())
    }

    /// ε₁/C₀, the local energy that selects the blow-up radius.
    pub fn extraction_level(&self) -> f64 {
        self.epsilon1 / self.c0 as f64
    }

    /// Checks 0 < ε₀ ≤ ε₁, C₀ ≥ 1 and R_detect ≥ 2h on `grid`.
    pub fn validate(&self, grid: &Grid) -> Result<()> {
        let mut fields = Vec::new();
        let mut notes = Vec::new();
        if !(self.epsilon0 > 0.0 && self.epsilon0 <= self.epsilon1) {
            fields.extend([
                "analysis.epsilon0".to_string(),
                "analysis.epsilon1".to_string(),
            ]);
            notes.push("need 0 < epsilon0 <= epsilon1");
        }
        if self.c0 < 1 {
            fields.push("analysis.C0".into());
            notes.push("C0 must be at least 1");
        }
        if !(self.detection_radius(grid) >= 2.0 * grid.h() * (1.0 - 1e-12)) {
            fields.push("analysis.R_detect".into());
            notes.push("R_detect must be at least 2h");
        }
        if fields.is_empty() {
            Ok(())
        } else {
            Err(Error::ConstraintViolation {
                fields,
                message: notes.join("; "),
            })
        }
    }
}
