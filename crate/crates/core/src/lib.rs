//! Local stability certificates for quadratic systems and stabilizing
//! linear state feedback for quadratic-bilinear systems.
//!
//! The pipeline: build a [`QbSystem`], [`assemble`] the block LMIs for a
//! scalar `ε` (and decay margin `α`), maximize `trace(P)` with a
//! [`Certifier`], then check the resulting [`Certificate`] empirically with
//! [`sample_check`] and [`convergence_check`]. The ellipsoid
//! `{x : xᵀP⁻¹x ≤ 1}` is an inner estimate of the region of attraction
//! (analysis) or of the region of stabilizability under `u = Kx`
//! (synthesis).

pub mod certificate;
pub mod certify;
pub mod error;
pub mod geometry;
pub mod io;
mod linalg;
pub mod lmi;
pub mod system;
pub mod verify;
pub mod zoo;

pub use certificate::{extract_gain, Certificate, CertificateDocument, SolverReport, TOOL_VERSION};
pub use certify::{
    linear_grid, log_grid, max_trace, optimize_epsilon, sweep_epsilon, Certifier, EpsilonSearch, Evaluation,
    GainConditioning, InfeasibilityEvidence, MaxTrace, SweepEntry, SweepResult, TRACE_TIE_RTOL,
};
pub use error::{QbError, Result};
pub use geometry::{ellipsoid_volume, union_volume, unit_ball_volume, Ellipsoid, UnionRegion};
pub use io::{load_system, save_system, LoadedSystem, SystemDocument};
pub use lmi::{
    assemble, default_alpha, default_delta, delta_matrix, delta_norm, layout, petersen_parts, smat, svec,
    DecisionLayout, LmiProblem, Mode, PetersenParts,
};
pub use system::{symmetrize_quadratic, QbSystem, ValidationReport};
pub use verify::{
    certified_system, convergence_check, default_dt, sample_check, simulate, vdot, ConvergenceOptions, Lyapunov,
    Trajectory, VerificationReport,
};

pub use qbstab_sdp as sdp;
