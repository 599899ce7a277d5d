use serde::{Deserialize, Serialize};

use crate::error::SdpError;

/// Interior-point solver settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Relative primal/dual residual tolerance.
    pub feas_tol: f64,
    /// Relative duality gap tolerance.
    pub gap_tol: f64,
    pub max_iters: usize,
    /// Fraction of the distance to the cone boundary taken per step.
    pub step_fraction: f64,
    /// Number of equilibration sweeps applied before solving.
    pub equilibration_sweeps: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            feas_tol: 1e-8,
            gap_tol: 1e-8,
            max_iters: 200,
            step_fraction: 0.98,
            equilibration_sweeps: 10,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), SdpError> {
        if !(self.feas_tol > 0.0 && self.feas_tol.is_finite()) {
            return Err(SdpError::Config("feas_tol must be positive".into()));
        }
        if !(self.gap_tol > 0.0 && self.gap_tol.is_finite()) {
            return Err(SdpError::Config("gap_tol must be positive".into()));
        }
        if !(self.step_fraction > 0.0 && self.step_fraction < 1.0) {
            return Err(SdpError::Config("step_fraction must lie in (0, 1)".into()));
        }
        if self.max_iters == 0 {
            return Err(SdpError::Config("max_iters must be at least 1".into()));
        }
        Ok(())
    }
}
