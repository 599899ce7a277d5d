//! `verify`: empirical checks of a saved certificate.

use std::path::PathBuf;

use clap::Args;
use qbstab::{certified_system, convergence_check, default_dt, sample_check, Certificate, ConvergenceOptions, TOOL_VERSION};
use serde_json::json;

use crate::failure::Failure;
use crate::output::{write_json, OutArgs};
use crate::source::SystemArgs;

#[derive(Args, Clone, Debug)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub source: SystemArgs,

    /// Certificate JSON written by analyze or synthesize.
    #[arg(long)]
    pub certificate: PathBuf,

    /// Points sampled uniformly from the ellipsoid.
    #[arg(long, default_value_t = 10_000)]
    pub samples: usize,

    /// Trajectories started on the ellipsoid boundary.
    #[arg(long, default_value_t = 100)]
    pub trajectories: usize,

    #[arg(long, default_value_t = 20.0)]
    pub t_final: f64,

    /// RK4 step; defaults to 1e-3/‖A‖_F of the certified system.
    #[arg(long)]
    pub dt: Option<f64>,

    /// A trajectory converged when √(V(T)/V(0)) is at most this.
    #[arg(long, default_value_t = 1e-3)]
    pub attraction_ratio: f64,

    /// Relative slack on the exponential envelope V(t) ≤ V(0)e^{−αt}.
    #[arg(long, default_value_t = 1e-3)]
    pub envelope_tol: f64,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    #[command(flatten)]
    pub out: OutArgs,
}

pub fn run(args: &VerifyArgs) -> Result<(), Failure> {
    let src = args.source.load()?;
    let cert = Certificate::load(&args.certificate)?;
    // Shape errors surface here as input errors.
    let certified = certified_system(&src.system, &cert)?;
    if let Some(dt) = args.dt {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Failure::Input(format!("--dt must be positive, got {dt}")));
        }
    }
    let opts = ConvergenceOptions {
        n_traj: args.trajectories,
        t_final: args.t_final,
        dt: args.dt,
        seed: args.seed,
        attraction_ratio: args.attraction_ratio,
        envelope_tol: args.envelope_tol,
    };
    let dir = args.out.dir()?;
    let sampled = sample_check(&src.system, &cert, args.samples, args.seed)?;
    let converged = convergence_check(&src.system, &cert, &opts)?;
    let merged = sampled.merge(&converged);
    let passed = merged.passed();
    write_json(
        &dir.join("verify.json"),
        &json!({
            "tool_version": TOOL_VERSION,
            "system": src.name,
            "certificate": args.certificate.display().to_string(),
            "mode": cert.mode,
            "epsilon": cert.epsilon,
            "alpha": cert.alpha,
            "options": opts,
            "dt": args.dt.unwrap_or_else(|| default_dt(&certified)),
            "sampling": sampled,
            "convergence": converged,
            "passed": passed,
        }),
    )?;
    println!(
        "{} samples: {} violations; {}/{} trajectories converged",
        merged.samples_tested, merged.violations, merged.trajectories_converged, merged.trajectories_total
    );
    if passed {
        Ok(())
    } else {
        Err(Failure::Verification(format!(
            "{} violations, {}/{} trajectories converged; see {}",
            merged.violations,
            merged.trajectories_converged,
            merged.trajectories_total,
            dir.join("verify.json").display()
        )))
    }
}
