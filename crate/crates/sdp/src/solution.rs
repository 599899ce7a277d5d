use std::io::{self, Write};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SdpStatus {
    Optimal,
    /// The LMI has no solution; an improving ray for the dual is attached.
    Infeasible,
    /// The objective is unbounded above on the feasible set.
    Unbounded,
    NumericalFailure,
    IterLimit,
}

/// Dual ray proving that `F₀ + Σ xᵢ Fᵢ ⪯ 0` has no solution:
/// `Z ⪰ 0`, `Σ_b ⟨Fᵢ⁽ᵇ⁾, Z⁽ᵇ⁾⟩ = 0` for every `i` and `Σ_b ⟨F₀⁽ᵇ⁾, Z⁽ᵇ⁾⟩ > 0`.
/// Normalized to unit total trace.
#[derive(Clone, Debug, PartialEq)]
pub struct InfeasibilityCertificate {
    pub blocks: Vec<DMatrix<f64>>,
}

/// Independent numbers computed from an infeasibility certificate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertificateCheck {
    pub min_eigenvalue: f64,
    pub max_abs_coefficient_inner: f64,
    pub constant_inner: f64,
}

impl CertificateCheck {
    /// Acceptance thresholds used throughout the crate.
    pub fn is_valid(&self) -> bool {
        self.min_eigenvalue >= -1e-10
            && self.max_abs_coefficient_inner <= 1e-8
            && self.constant_inner >= 1e-10
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iter: usize,
    pub mu: f64,
    pub primal_res: f64,
    pub dual_res: f64,
    pub step: f64,
}

#[derive(Clone, Debug)]
pub struct SdpSolution {
    pub status: SdpStatus,
    /// Primal decision vector (last iterate unless `Optimal`).
    pub x: Vec<f64>,
    /// Dual PSD blocks, one per LMI block.
    pub z: Vec<DMatrix<f64>>,
    pub objective: f64,
    pub dual_objective: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub duality_gap: f64,
    pub iters: usize,
    pub certificate: Option<InfeasibilityCertificate>,
    pub log: Vec<IterationRecord>,
}

impl SdpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == SdpStatus::Optimal
    }

    /// Writes the iteration log as CSV (`iter,mu,primal_res,dual_res,step`).
    pub fn write_log_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "iter,mu,primal_res,dual_res,step")?;
        for r in &self.log {
            writeln!(
                out,
                "{},{:.16e},{:.16e},{:.16e},{:.16e}",
                r.iter, r.mu, r.primal_res, r.dual_res, r.step
            )?;
        }
        Ok(())
    }
}
