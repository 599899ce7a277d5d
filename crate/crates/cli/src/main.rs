//! `qbstab`: certify, verify, benchmark and simulate quadratic(-bilinear) systems.

mod bench;
mod certify;
mod eps;
mod failure;
mod output;
mod simulate;
mod source;
mod verify;

use std::process::ExitCode;

use clap::{Parser, Subcommand};
use qbstab::Mode;

use crate::failure::Failure;

#[derive(Parser, Debug)]
#[command(name = "qbstab", version, about = "Ellipsoidal stability certificates for quadratic-bilinear systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Estimate the region of attraction of the unforced system.
    Analyze(certify::CertifyArgs),
    /// Design u = Kx and estimate its region of stabilizability.
    Synthesize(certify::CertifyArgs),
    /// Check a certificate by sampling and simulation.
    Verify(verify::VerifyArgs),
    /// Time single-epsilon solves on stacked copies of a system.
    Bench(bench::BenchArgs),
    /// Write trajectory data.
    Simulate(simulate::SimulateArgs),
}

fn dispatch(cli: &Cli) -> Result<(), Failure> {
    match &cli.command {
        Command::Analyze(a) => certify::run(a, Mode::Analysis),
        Command::Synthesize(a) => certify::run(a, Mode::Synthesis),
        Command::Verify(a) => verify::run(a),
        Command::Bench(a) => bench::run(a),
        Command::Simulate(a) => simulate::run(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            // clap's own code (2) would read as "infeasible".
            let f = Failure::Input(e.kind().to_string());
            eprintln!("{}", f.to_json());
            return ExitCode::from(f.code() as u8);
        }
    };
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("{}", f.to_json());
            ExitCode::from(f.code() as u8)
        }
    }
}
