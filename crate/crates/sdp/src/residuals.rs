//! Residual and feasibility checks that only look at the problem data and a
//! candidate point, never at solver internals.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::problem::SdpProblem;
use crate::solution::{CertificateCheck, InfeasibilityCertificate, SdpSolution};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KktResiduals {
    /// `max_b λ_max⁺(F⁽ᵇ⁾(x)) / (1 + max_b ‖F₀⁽ᵇ⁾‖_F)`.
    pub primal: f64,
    /// Relative dual equality residual, or PSD violation of `Z` if larger.
    pub dual: f64,
    /// `|cᵀx + ⟨F₀, Z⟩| / (1 + |cᵀx| + |⟨F₀, Z⟩|)`.
    pub gap: f64,
}

/// Largest eigenvalue of each block evaluated at `x`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockFeasibility {
    pub max_eigenvalues: Vec<f64>,
    pub tol: f64,
}

impl BlockFeasibility {
    pub fn feasible(&self) -> bool {
        self.max_eigenvalues.iter().all(|&l| l <= self.tol)
    }

    pub fn worst(&self) -> f64 {
        self.max_eigenvalues
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

pub(crate) fn max_eigenvalue(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 1 {
        return m[(0, 0)];
    }
    SymmetricEigen::new(m.clone()).eigenvalues.max()
}

pub(crate) fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 1 {
        return m[(0, 0)];
    }
    SymmetricEigen::new(m.clone()).eigenvalues.min()
}

pub fn check_block_feasibility(problem: &SdpProblem, x: &[f64], tol: f64) -> BlockFeasibility {
    BlockFeasibility {
        max_eigenvalues: problem.evaluate(x).iter().map(max_eigenvalue).collect(),
        tol,
    }
}

pub(crate) fn residuals_at(problem: &SdpProblem, x: &[f64], z: &[DMatrix<f64>]) -> KktResiduals {
    let f0_norm = problem
        .blocks
        .iter()
        .map(|b| b.constant.frobenius_norm())
        .fold(0.0, f64::max);
    let violation = problem
        .evaluate(x)
        .iter()
        .map(max_eigenvalue)
        .fold(0.0, f64::max);
    let primal = violation / (1.0 + f0_norm);

    let c_norm = problem.c.iter().map(|v| v * v).sum::<f64>().sqrt();
    let eq = problem
        .adjoint(z)
        .iter()
        .zip(&problem.c)
        .map(|(a, c)| (a - c).powi(2))
        .sum::<f64>()
        .sqrt()
        / (1.0 + c_norm);
    let z_norm = z.iter().map(|b| b.norm_squared()).sum::<f64>().sqrt();
    let psd = z
        .iter()
        .map(|b| (-min_eigenvalue(b)).max(0.0))
        .fold(0.0, f64::max)
        / (1.0 + z_norm);
    let dual = eq.max(psd);

    let pobj = problem.objective(x);
    let dobj = -problem.constant_inner(z);
    let gap = (pobj - dobj).abs() / (1.0 + pobj.abs() + dobj.abs());
    KktResiduals { primal, dual, gap }
}

/// Recomputes primal, dual and gap residuals of a solution from scratch.
pub fn kkt_residuals(problem: &SdpProblem, solution: &SdpSolution) -> KktResiduals {
    residuals_at(problem, &solution.x, &solution.z)
}

/// Checks an infeasibility certificate against the problem data.
pub fn check_certificate(problem: &SdpProblem, cert: &InfeasibilityCertificate) -> CertificateCheck {
    let min_eigenvalue = cert
        .blocks
        .iter()
        .map(min_eigenvalue)
        .fold(f64::INFINITY, f64::min);
    let max_abs_coefficient_inner = problem
        .adjoint(&cert.blocks)
        .iter()
        .fold(0.0, |m: f64, v| m.max(v.abs()));
    CertificateCheck {
        min_eigenvalue,
        max_abs_coefficient_inner,
        constant_inner: problem.constant_inner(&cert.blocks),
    }
}
