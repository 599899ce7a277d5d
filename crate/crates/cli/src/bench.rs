//! `bench`: solve time against state dimension on stacked copies.

use std::io::Write;
use std::time::Instant;

use clap::Args;
use qbstab::sdp::SdpStatus;
use qbstab::{default_alpha, Certifier, MaxTrace, Mode, QbError, TOOL_VERSION};
use serde::Serialize;
use serde_json::json;

use crate::failure::Failure;
use crate::output::{create, num, write_json, OutArgs};
use crate::source::SystemArgs;

/// The exponent is fitted over sizes at least this large.
pub const FIT_MIN_N: usize = 40;

#[derive(Args, Clone, Debug)]
pub struct BenchArgs {
    #[command(flatten)]
    pub source: SystemArgs,

    /// Stack factors k; the benchmarked size is k·n.
    #[arg(long, value_delimiter = ',', default_values_t = [1usize, 2, 5, 10, 20])]
    pub factors: Vec<usize>,

    #[arg(long, default_value_t = 0.3)]
    pub eps: f64,

    /// Decay margin; defaults to 1e-6·‖A‖_F of each stacked system.
    #[arg(long)]
    pub alpha: Option<f64>,

    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Serialize)]
struct Point {
    n: usize,
    wall_seconds: f64,
    iters: Option<usize>,
    status: SdpStatus,
}

/// Least-squares slope of log(seconds) against log(n).
pub fn power_law_exponent(points: &[(usize, f64)]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|(_, s)| *s > 0.0)
        .map(|&(n, s)| ((n as f64).ln(), s.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

pub fn run(args: &BenchArgs) -> Result<(), Failure> {
    let src = args.source.load()?;
    if args.factors.is_empty() || args.factors.contains(&0) {
        return Err(Failure::Input("--factors must be positive integers".into()));
    }
    if !(args.eps > 0.0 && args.eps.is_finite()) {
        return Err(Failure::Input(format!("--eps must be positive, got {}", args.eps)));
    }
    let mut factors = args.factors.clone();
    factors.sort_unstable();
    factors.dedup();
    let dir = args.out.dir()?;
    let certifier = Certifier::default();
    let mut points = Vec::with_capacity(factors.len());
    for k in factors {
        let sys = src.system.stack(k)?;
        let alpha = args.alpha.unwrap_or_else(|| default_alpha(&sys));
        let start = Instant::now();
        let result = certifier.max_trace(&sys, args.eps, alpha, Mode::Analysis);
        let wall_seconds = start.elapsed().as_secs_f64();
        let (iters, status) = match result {
            Ok(MaxTrace::Certified(c)) => (Some(c.report.iters), c.report.status),
            Ok(MaxTrace::Infeasible(_)) => (None, SdpStatus::Infeasible),
            Err(QbError::Solver { status, .. }) => (None, status),
            Err(_) => (None, SdpStatus::NumericalFailure),
        };
        println!("n = {:4}  {wall_seconds:.3} s  {status:?}", sys.n());
        points.push(Point {
            n: sys.n(),
            wall_seconds,
            iters,
            status,
        });
    }

    let mut w = create(&dir.join("bench.csv"))?;
    writeln!(w, "n,wall_seconds,iters,status")?;
    for p in &points {
        let iters = p.iters.map(|i| i.to_string()).unwrap_or_default();
        writeln!(w, "{},{},{},{:?}", p.n, num(p.wall_seconds), iters, p.status)?;
    }
    w.flush()?;

    let solved: Vec<(usize, f64)> = points
        .iter()
        .filter(|p| p.status == SdpStatus::Optimal)
        .map(|p| (p.n, p.wall_seconds))
        .collect();
    let large: Vec<(usize, f64)> = solved.iter().copied().filter(|p| p.0 >= FIT_MIN_N).collect();
    let exponent = power_law_exponent(&large);
    let all = power_law_exponent(&solved);
    match exponent {
        Some(e) => println!("fitted exponent over n >= {FIT_MIN_N}: {e:.2}"),
        None => println!("fitted exponent over n >= {FIT_MIN_N}: needs two solved sizes"),
    }
    if let Some(e) = all {
        println!("fitted exponent over all sizes: {e:.2}");
    }
    write_json(
        &dir.join("bench.json"),
        &json!({
            "tool_version": TOOL_VERSION,
            "system": src.name,
            "epsilon": args.eps,
            "points": points,
            "fit_min_n": FIT_MIN_N,
            "exponent": exponent,
            "exponent_all_sizes": all,
        }),
    )?;
    Ok(())
}
