//! Primal–dual interior-point solver for block linear matrix inequalities.
//!
//! Problems are posed as
//!
//! ```text
//! maximize cᵀx  subject to  F₀⁽ᵇ⁾ + Σᵢ xᵢ Fᵢ⁽ᵇ⁾ ⪯ 0,  b = 1..B
//! ```
//!
//! and solved with a homogeneous self-dual embedding, so infeasible LMIs are
//! reported with a dual certificate instead of a stalled iteration.

mod backend;
mod config;
mod equilibrate;
mod error;
mod ipm;
mod problem;
mod residuals;
mod solution;

pub use backend::{InteriorPoint, SdpBackend};
pub use config::SolverConfig;
pub use error::SdpError;
pub use ipm::solve;
pub use problem::{LmiBlock, SdpProblem, SymSparse};
pub use residuals::{
    check_block_feasibility, check_certificate, kkt_residuals, BlockFeasibility, KktResiduals,
};
pub use solution::{
    CertificateCheck, InfeasibilityCertificate, IterationRecord, SdpSolution, SdpStatus,
};
