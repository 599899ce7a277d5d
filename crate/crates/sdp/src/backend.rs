use crate::config::SolverConfig;
use crate::error::SdpError;
use crate::ipm;
use crate::problem::SdpProblem;
use crate::solution::SdpSolution;

/// Anything that can solve a block LMI problem.
///
/// Implementations must be deterministic for identical inputs and must
/// honour the [`SdpSolution`] status contract.
pub trait SdpBackend: Send + Sync {
    fn name(&self) -> &str;
    fn solve(&self, problem: &SdpProblem, config: &SolverConfig) -> Result<SdpSolution, SdpError>;
}

/// The embedded homogeneous self-dual interior-point solver.
#[derive(Clone, Copy, Debug, Default)]
pub struct InteriorPoint;

impl SdpBackend for InteriorPoint {
    fn name(&self) -> &str {
        "embedded-hsd-ipm"
    }

    fn solve(&self, problem: &SdpProblem, config: &SolverConfig) -> Result<SdpSolution, SdpError> {
        ipm::solve(problem, config)
    }
}
