//! Command-line driver for the verification experiments.
//!
//! ```text
//! rmf validate-regime --config regime.txt [--force]
//! rmf <kind> --config regime.txt --out runs/ [--threads K] [--force]
//! ```
//!
//! where `<kind>` is one of `kernel-verify`, `pde-run`, `dual-run`,
//! `couple-run`, `lln`, `rate`, `clt`. Exit codes: 0 success, 2
//! configuration or theorem-gate failure, 3 numerical failure.

use clap::{Args, Parser, Subcommand};
use riesz_meanfield::experiments::{
    report_text, run_experiment, sha256_hex, validate_regime, Kind, RegimeSpec, RunContext,
};
use riesz_meanfield::Error;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "rmf",
    version,
    about = "Empirical verification of mean-field limits for moderately interacting particles"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct RunArgs {
    /// Regime configuration file (flat `key = value` text).
    #[arg(long)]
    config: PathBuf,
    /// Output root; the run writes into a fresh content-addressed
    /// subdirectory `<kind>-<hash12>`.
    #[arg(long)]
    out: PathBuf,
    /// Rayon thread count (default: one per available core). Outputs are
    /// bit-identical for every choice.
    #[arg(long)]
    threads: Option<usize>,
    /// Run even if the theorem gates fail; outputs are labeled exploratory.
    #[arg(long)]
    force: bool,
}

#[derive(Subcommand)]
enum Cmd {
    /// Check a regime against the theorem gates and print the report.
    ValidateRegime {
        /// Regime configuration file (flat `key = value` text).
        #[arg(long)]
        config: PathBuf,
        /// Exit 0 even when the gates fail.
        #[arg(long)]
        force: bool,
    },
    /// Kernel factorization far-field check and width scaling sweep.
    KernelVerify(RunArgs),
    /// Nonlocal PDE runs: limit equation vs mollified approximations.
    PdeRun(RunArgs),
    /// Backward dual solves and adjoint-duality pairing checks.
    DualRun(RunArgs),
    /// Coupled particle/mean-field runs, pathwise coupling distances.
    CoupleRun(RunArgs),
    /// Drift law-of-large-numbers deviation sweep.
    Lln(RunArgs),
    /// Mean-square convergence rate sweep (also emits coupling and LLN).
    Rate(RunArgs),
    /// Fluctuation sampling and normality reports against dual targets.
    Clt(RunArgs),
}

fn load_spec(path: &PathBuf) -> Result<(RegimeSpec, String, String), Error> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    let spec = RegimeSpec::parse(&text)?;
    spec.validate()?;
    Ok((spec, path.display().to_string(), sha256_hex(text.as_bytes())))
}

fn run_kind(kind: Kind, args: &RunArgs) -> Result<(), Error> {
    let (spec, name, digest) = load_spec(&args.config)?;
    let ctx = RunContext {
        spec,
        out_root: args.out.clone(),
        threads: args.threads,
        force: args.force,
        input_file: Some((name, digest)),
    };
    let outcome = run_experiment(kind, &ctx)?;
    print!("{}", outcome.summary);
    println!("artifacts: {}", outcome.dir.display());
    Ok(())
}

fn real_main() -> Result<(), Error> {
    let cli = Cli::parse();
    match &cli.cmd {
        Cmd::ValidateRegime { config, force } => {
            let (spec, _, _) = load_spec(config)?;
            let gates = validate_regime(&spec)?;
            print!("{}", report_text(&spec, &gates));
            if !gates.pass && !force {
                return Err(Error::Gate(
                    "theorem gates failed; see the report above (--force to accept)".into(),
                ));
            }
            Ok(())
        }
        Cmd::KernelVerify(a) => run_kind(Kind::KernelVerify, a),
        Cmd::PdeRun(a) => run_kind(Kind::PdeRun, a),
        Cmd::DualRun(a) => run_kind(Kind::DualRun, a),
        Cmd::CoupleRun(a) => run_kind(Kind::CoupleRun, a),
        Cmd::Lln(a) => run_kind(Kind::Lln, a),
        Cmd::Rate(a) => run_kind(Kind::Rate, a),
        Cmd::Clt(a) => run_kind(Kind::Clt, a),
    }
}

fn main() -> ExitCode {
    match real_main() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config(_) | Error::Gate(_) => ExitCode::from(2),
                Error::Numerical(_) | Error::Io(_) => ExitCode::from(3),
            }
        }
    }
}
