//! `kinbc`: verify, design and simulate boundary-controlled kinetic models.
//!
//! Exit codes: 0 success, 2 invalid input (including a rejected control law
//! in `design` and a CFL violation), 1 numerical or I/O failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use kinbc_core::harness::{
    self, parse_range, write_report, write_sweep_table, Report, RunConfig, RunOptions,
    SweepParam,
};
use kinbc_core::{Error, Parallelism};

#[derive(Parser, Debug)]
#[command(name = "kinbc", version, about)]
struct Cli {
    /// Worker threads; above 1 the solver splits each step across them.
    #[arg(long, global = true, env = "KINBC_THREADS")]
    threads: Option<usize>,

    /// Directory for reports and CSV output (overrides `output.dir`).
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check the steady state and print the stability decomposition.
    Verify { config: PathBuf },
    /// Compute the Lyapunov certificate and check the control law.
    Design { config: PathBuf },
    /// Run the solver, write the time series and fit the decay rate.
    Simulate { config: PathBuf },
    /// Repeat `simulate` over a range of one parameter.
    Sweep {
        config: PathBuf,
        /// One of k1, k2, k3, alpha, dt.
        #[arg(long)]
        param: String,
        /// `lo:hi:step` or a comma-separated list.
        #[arg(long)]
        range: String,
    },
}

enum Outcome {
    Success,
    Rejected(String),
    Failed(String),
}

fn run(cli: Cli) -> Result<Outcome, Error> {
    let parallelism = match cli.threads {
        Some(0) => return Err(Error::Parameter("--threads must be at least 1".into())),
        Some(n) => {
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
                .map_err(|e| Error::Numerical(format!("thread pool: {e}")))?;
            if n > 1 {
                Parallelism::Rayon
            } else {
                Parallelism::Sequential
            }
        }
        None => Parallelism::Sequential,
    };
    let opts = RunOptions {
        output_dir: cli.output_dir,
        parallelism,
        write_files: true,
    };

    match cli.command {
        Command::Verify { config } => {
            let cfg = RunConfig::load(&config)?;
            let report = harness::verify(&cfg)?;
            println!("{}", report.text());
            write_report(&report, &cfg, &opts, "verify")?;
            Ok(Outcome::Success)
        }
        Command::Design { config } => {
            let cfg = RunConfig::load(&config)?;
            let report = harness::design(&cfg)?;
            println!("{}", report.text());
            write_report(&report, &cfg, &opts, "design")?;
            if report.admissibility.is_admissible() {
                Ok(Outcome::Success)
            } else {
                Ok(Outcome::Rejected("control law is not admissible".into()))
            }
        }
        Command::Simulate { config } => {
            let cfg = RunConfig::load(&config)?;
            let out = harness::simulate(&cfg, &opts)?;
            if !out.report.admissibility.is_admissible() {
                eprintln!("warning: control law is not admissible; decay is not guaranteed");
            }
            println!("{}", out.report.text());
            write_report(&out.report, &cfg, &opts, "simulate")?;
            Ok(Outcome::Success)
        }
        Command::Sweep {
            config,
            param,
            range,
        } => {
            let cfg = RunConfig::load(&config)?;
            let param: SweepParam = param.parse()?;
            let values = parse_range(&range)?;
            let report = harness::sweep(&cfg, param, &values)?;
            println!("{}", report.text());
            write_sweep_table(&report, &cfg, &opts)?;
            write_report(&report, &cfg, &opts, "sweep")?;
            if report.rows.iter().any(|r| r.succeeded()) {
                Ok(Outcome::Success)
            } else {
                Ok(Outcome::Failed("every sweep row failed".into()))
            }
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(Outcome::Success) => ExitCode::SUCCESS,
        Ok(Outcome::Rejected(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Ok(Outcome::Failed(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 2 } else { 1 })
        }
    }
}
