//! `simulate`: trajectory data for phase plots.

use std::fs;
use std::io::Write;
use std::path::PathBuf;

use clap::Args;
use nalgebra::DVector;
use qbstab::{certified_system, default_dt, simulate, Certificate, QbSystem, TOOL_VERSION};
use serde_json::json;

use crate::failure::Failure;
use crate::output::{create, num, write_json, OutArgs};
use crate::source::SystemArgs;

/// Boundary starts sit just inside the ellipsoid.
const BOUNDARY_SCALE: f64 = 0.999;
/// Rows kept per portrait trajectory.
const PORTRAIT_ROWS: usize = 200;

#[derive(Args, Clone, Debug)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub source: SystemArgs,

    /// Initial state as a comma list. Repeatable.
    #[arg(long = "x0", value_parser = parse_state)]
    pub x0: Vec<Vec<f64>>,

    /// Certificate to close the loop with (synthesis) and to place boundary starts.
    #[arg(long)]
    pub certificate: Option<PathBuf>,

    /// Starts on the certified boundary: N points for n = 2, ± principal axes otherwise.
    #[arg(long, requires = "certificate")]
    pub boundary: Option<usize>,

    #[arg(long, default_value_t = 5.0)]
    pub t_final: f64,

    /// RK4 step; defaults to 1e-3/‖A‖_F.
    #[arg(long)]
    pub dt: Option<f64>,

    /// For n = 2, a G×G grid of short trajectories (G given here).
    #[arg(long)]
    pub portrait: Option<usize>,

    /// Length of each portrait trajectory.
    #[arg(long, default_value_t = 1.0)]
    pub portrait_t: f64,

    #[command(flatten)]
    pub out: OutArgs,
}

fn parse_state(s: &str) -> Result<Vec<f64>, String> {
    s.split(',')
        .map(|v| v.trim().parse::<f64>().map_err(|_| format!("{v:?} is not a number")))
        .collect()
}

fn starts(args: &SimulateArgs, n: usize, cert: Option<&Certificate>) -> Result<Vec<DVector<f64>>, Failure> {
    let mut out = Vec::new();
    for x in &args.x0 {
        if x.len() != n {
            return Err(Failure::Input(format!("--x0 has {} entries, the system has n = {n}", x.len())));
        }
        out.push(DVector::from_column_slice(x));
    }
    if let (Some(count), Some(cert)) = (args.boundary, cert) {
        let e = cert.ellipsoid();
        if n == 2 {
            for [a, b] in e.boundary_polyline(count)? {
                out.push(DVector::from_vec(vec![a, b]) * BOUNDARY_SCALE);
            }
        } else {
            let (lengths, dirs) = e.principal_axes()?;
            for (i, len) in lengths.iter().enumerate() {
                let axis = dirs.column(i) * (*len * BOUNDARY_SCALE);
                out.push(axis.clone_owned());
                out.push(-axis);
            }
        }
    }
    if out.is_empty() {
        return Err(Failure::Input("pass --x0 or --certificate with --boundary".into()));
    }
    Ok(out)
}

fn write_portrait(args: &SimulateArgs, sys: &QbSystem, cert: Option<&Certificate>, g: usize, dt: f64) -> Result<(), Failure> {
    if sys.n() != 2 {
        return Err(Failure::Input("--portrait needs n = 2".into()));
    }
    if g < 2 {
        return Err(Failure::Input("--portrait needs at least 2 points per side".into()));
    }
    let half = match cert {
        Some(c) => c.ellipsoid().half_widths().iter().map(|h| 1.5 * h).collect(),
        None => vec![1.0, 1.0],
    };
    let mut w = create(&args.out.out.join("portrait.csv"))?;
    writeln!(w, "id,t,x1,x2")?;
    let mut id = 0;
    for i in 0..g {
        for j in 0..g {
            let s = |k: usize, h: f64| -h + 2.0 * h * k as f64 / (g - 1) as f64;
            let x0 = DVector::from_vec(vec![s(i, half[0]), s(j, half[1])]);
            let traj = simulate(sys, &x0, args.portrait_t, dt)?;
            let stride = (traj.times.len() / PORTRAIT_ROWS).max(1);
            let last = traj.times.len() - 1;
            for (k, (t, x)) in traj.times.iter().zip(&traj.states).enumerate() {
                if k % stride == 0 || k == last {
                    writeln!(w, "{id},{},{},{}", num(*t), num(x[0]), num(x[1]))?;
                }
            }
            id += 1;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn run(args: &SimulateArgs) -> Result<(), Failure> {
    let src = args.source.load()?;
    if !(args.t_final > 0.0 && args.t_final.is_finite()) {
        return Err(Failure::Input(format!("--t-final must be positive, got {}", args.t_final)));
    }
    let cert = args.certificate.as_deref().map(Certificate::load).transpose()?;
    let sys = match &cert {
        Some(c) => certified_system(&src.system, c)?,
        None => src.system.autonomous(),
    };
    let dt = args.dt.unwrap_or_else(|| default_dt(&sys));
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Failure::Input(format!("--dt must be positive, got {dt}")));
    }
    let x0s = starts(args, sys.n(), cert.as_ref())?;
    let dir = args.out.dir()?;
    let traj_dir = dir.join("trajectories");
    fs::create_dir_all(&traj_dir)?;

    let mut summary = Vec::with_capacity(x0s.len());
    for (id, x0) in x0s.iter().enumerate() {
        let traj = simulate(&sys, x0, args.t_final, dt)?;
        let mut w = create(&traj_dir.join(format!("traj_{id:03}.csv")))?;
        traj.write_csv(&mut w)?;
        w.flush()?;
        summary.push(json!({
            "id": id,
            "x0": x0.as_slice(),
            "t_end": traj.times.last(),
            "x_end": traj.last().as_slice(),
            "norm_end": traj.last().norm(),
            "terminated_early": traj.terminated_early,
        }));
    }
    if let Some(g) = args.portrait {
        write_portrait(args, &sys, cert.as_ref(), g, dt)?;
    }
    write_json(
        &dir.join("simulate.json"),
        &json!({
            "tool_version": TOOL_VERSION,
            "system": src.name,
            "closed_loop": cert.as_ref().is_some_and(|c| c.k.is_some()),
            "t_final": args.t_final,
            "dt": dt,
            "trajectories": summary,
        }),
    )?;
    println!("{} trajectories written to {}", x0s.len(), traj_dir.display());
    Ok(())
}
