//! `analyze` and `synthesize`.

use std::io::Write;
use std::path::Path;

use clap::Args;
use qbstab::sdp::{CertificateCheck, SdpStatus};
use qbstab::{
    default_alpha, union_volume, Certificate, Certifier, InfeasibilityEvidence, MaxTrace, Mode, QbError,
    SystemDocument, UnionRegion, TOOL_VERSION,
};
use serde::Serialize;
use serde_json::{json, Value};

use crate::eps::EpsSpec;
use crate::failure::Failure;
use crate::output::{create, num, write_json, OutArgs};
use crate::source::SystemArgs;

#[derive(Args, Clone, Debug)]
pub struct CertifyArgs {
    #[command(flatten)]
    pub source: SystemArgs,

    /// A value, grid:lo:hi:count[:log] or search:lo:hi.
    #[arg(long)]
    pub eps: EpsSpec,

    /// Decay margin; defaults to 1e-6·‖A‖_F.
    #[arg(long)]
    pub alpha: Option<f64>,

    /// Relative bracket width at which search stops.
    #[arg(long, default_value_t = 1e-3)]
    pub rel_tol: f64,

    /// Worker threads for grid sweeps; 1 gives the serial reference order.
    #[arg(long)]
    pub jobs: Option<usize>,

    /// Seed of the union-volume estimate.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// Monte Carlo samples (at least 1e4) for the union volume of a grid sweep; 0 skips it.
    #[arg(long, default_value_t = 1_000_000)]
    pub union_samples: usize,

    /// Keep the raw trace-optimal synthesis point even when its gain is huge.
    #[arg(long)]
    pub no_conditioning: bool,

    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Serialize)]
struct Row {
    epsilon: f64,
    status: String,
    #[serde(rename = "trace_P")]
    trace_p: Option<f64>,
    volume: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    infeasibility: Option<CertificateCheck>,
}

impl Row {
    fn certified(c: &Certificate) -> Self {
        Self {
            epsilon: c.epsilon,
            status: format!("{:?}", SdpStatus::Optimal),
            trace_p: Some(c.trace_p),
            volume: Some(c.ellipsoid().volume()),
            infeasibility: None,
        }
    }

    fn failed(epsilon: f64, status: SdpStatus, check: Option<CertificateCheck>) -> Self {
        Self {
            epsilon,
            status: format!("{status:?}"),
            trace_p: None,
            volume: None,
            infeasibility: check,
        }
    }
}

#[derive(Default)]
struct Outcome {
    rows: Vec<Row>,
    certificates: Vec<Certificate>,
    best: Option<Certificate>,
    evidence: Option<InfeasibilityEvidence>,
}

fn solve(args: &CertifyArgs, certifier: &Certifier, sys: &qbstab::QbSystem, alpha: f64, mode: Mode) -> Result<Outcome, Failure> {
    let mut out = Outcome::default();
    match &args.eps {
        EpsSpec::Single(eps) => match certifier.max_trace(sys, *eps, alpha, mode)? {
            MaxTrace::Certified(c) => {
                out.rows.push(Row::certified(&c));
                out.best = Some((*c).clone());
                out.certificates.push(*c);
            }
            MaxTrace::Infeasible(ev) => {
                out.rows.push(Row::failed(*eps, SdpStatus::Infeasible, Some(ev.check)));
                out.evidence = Some(ev);
            }
        },
        EpsSpec::Grid { .. } => {
            let grid = args.eps.grid().expect("grid spec");
            let sw = certifier.sweep_epsilon(sys, &grid, alpha, mode, args.jobs)?;
            out.best = sw.best().cloned();
            for e in sw.entries {
                match e.certificate {
                    Some(c) => {
                        out.rows.push(Row::certified(&c));
                        out.certificates.push(c);
                    }
                    None => out.rows.push(Row::failed(e.epsilon, e.status, e.infeasibility)),
                }
            }
        }
        EpsSpec::Search { lo, hi } => match certifier.optimize_epsilon(sys, *lo, *hi, args.rel_tol, alpha, mode) {
            Ok(s) => {
                for h in &s.history {
                    out.rows.push(match h.trace_p {
                        Some(t) => Row {
                            epsilon: h.epsilon,
                            status: format!("{:?}", SdpStatus::Optimal),
                            trace_p: Some(t),
                            volume: None,
                            infeasibility: None,
                        },
                        None => Row::failed(h.epsilon, SdpStatus::Infeasible, None),
                    });
                }
                out.certificates.push(s.best.clone());
                out.best = Some(s.best);
            }
            Err(QbError::AllInfeasible { evaluated }) => {
                for eps in evaluated {
                    out.rows.push(Row::failed(eps, SdpStatus::Infeasible, None));
                }
            }
            Err(e) => return Err(e.into()),
        },
    }
    Ok(out)
}

fn write_sweep_csv(path: &Path, rows: &[Row]) -> Result<(), Failure> {
    let mut w = create(path)?;
    writeln!(w, "epsilon,feasible,trace_P")?;
    for r in rows {
        match r.trace_p {
            Some(t) => writeln!(w, "{},true,{}", num(r.epsilon), num(t))?,
            None => writeln!(w, "{},false,", num(r.epsilon))?,
        }
    }
    w.flush()?;
    Ok(())
}

fn write_geometry(dir: &Path, certs: &[Certificate]) -> Result<(), Failure> {
    let Some(first) = certs.first() else {
        return Ok(());
    };
    let n = first.n;
    let mut w = create(&dir.join("geometry.csv"))?;
    let axes: Vec<String> = (1..=n).map(|i| format!("semi_axis_{i}")).collect();
    writeln!(w, "epsilon,trace_P,volume,{}", axes.join(","))?;
    for c in certs {
        let e = c.ellipsoid();
        let (lengths, _) = e.principal_axes()?;
        let cols: Vec<String> = lengths.iter().map(|v| num(*v)).collect();
        writeln!(w, "{},{},{},{}", num(c.epsilon), num(c.trace_p), num(e.volume()), cols.join(","))?;
    }
    w.flush()?;
    if n == 2 {
        let mut w = create(&dir.join("ellipses.csv"))?;
        writeln!(w, "epsilon,x1,x2")?;
        for c in certs {
            for [x1, x2] in c.ellipsoid().boundary_polyline(256)? {
                writeln!(w, "{},{},{}", num(c.epsilon), num(x1), num(x2))?;
            }
        }
        w.flush()?;
    }
    Ok(())
}

fn evidence_json(ev: &InfeasibilityEvidence) -> Value {
    let blocks: Vec<Vec<Vec<f64>>> = ev
        .certificate
        .blocks
        .iter()
        .map(|b| b.row_iter().map(|r| r.iter().copied().collect()).collect())
        .collect();
    json!({
        "epsilon": ev.epsilon,
        "check": ev.check,
        "valid": ev.check.is_valid(),
        "dual_blocks": blocks,
    })
}

pub fn run(args: &CertifyArgs, mode: Mode) -> Result<(), Failure> {
    let src = args.source.load()?;
    let sys = &src.system;
    if mode == Mode::Synthesis && sys.m() == 0 {
        return Err(Failure::Input(format!(
            "synthesis needs at least one input, but {} has m = 0",
            src.name
        )));
    }
    let alpha = args.alpha.unwrap_or_else(|| default_alpha(sys));
    let mut certifier = Certifier::default();
    if args.no_conditioning {
        certifier = certifier.with_conditioning(None);
    }
    let dir = args.out.dir()?;
    let outcome = solve(args, &certifier, sys, alpha, mode)?;

    write_sweep_csv(&dir.join("sweep.csv"), &outcome.rows)?;
    let mut union = Value::Null;
    if matches!(args.eps, EpsSpec::Grid { .. }) && outcome.certificates.len() >= 2 && args.union_samples > 0 {
        let region = UnionRegion::new(outcome.certificates.iter().map(Certificate::ellipsoid).collect())?;
        let (estimate, std_error) = union_volume(&region, args.union_samples, args.seed)?;
        union = json!({
            "estimate": estimate,
            "std_error": std_error,
            "samples": args.union_samples,
            "seed": args.seed,
            "members": outcome.certificates.len(),
        });
        println!("union volume {estimate:.6} ± {std_error:.6} ({} members)", outcome.certificates.len());
    }
    write_geometry(dir, &outcome.certificates)?;

    let mut best_json = Value::Null;
    if let Some(best) = &outcome.best {
        best.save(&dir.join("certificate.json"))?;
        best_json = json!({
            "epsilon": best.epsilon,
            "trace_P": best.trace_p,
            "volume": best.ellipsoid().volume(),
            "conditioning": best.report.conditioning,
            "K": best.k.as_ref().map(|k| k.row_iter().map(|r| r.iter().copied().collect::<Vec<f64>>()).collect::<Vec<_>>()),
        });
        if mode == Mode::Synthesis {
            let k = best.k.as_ref().ok_or_else(|| Failure::Numerical("synthesis certificate without gain".into()))?;
            let mut doc = SystemDocument::from_system(&sys.close_loop(k)?);
            doc.name = Some(format!("{} closed loop", src.name));
            doc.provenance = Some(format!("u = Kx with K from certificate.json (epsilon = {})", best.epsilon));
            doc.save(&dir.join("closed_loop.json"))?;
        }
        println!("best epsilon {} trace(P) {:.6}", best.epsilon, best.trace_p);
    }
    let evidence = outcome.evidence.as_ref().map(evidence_json);
    if let Some(ev) = &evidence {
        write_json(&dir.join("infeasibility.json"), ev)?;
    }
    let summary = json!({
        "tool_version": TOOL_VERSION,
        "system": src.name,
        "n": sys.n(),
        "m": sys.m(),
        "mode": mode,
        "epsilon_spec": args.eps.to_string(),
        "alpha": alpha,
        "entries": outcome.rows,
        "feasible": outcome.rows.iter().filter(|r| r.trace_p.is_some()).count(),
        "best": best_json,
        "union": union,
        "infeasibility": evidence,
    });
    write_json(&dir.join(format!("{mode}.json")), &summary)?;

    if outcome.best.is_none() {
        return Err(Failure::Infeasible(format!(
            "no feasible epsilon for {} with --eps {}; evidence in {}",
            src.name,
            args.eps,
            dir.display()
        )));
    }
    Ok(())
}
