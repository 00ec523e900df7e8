use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hitlab::chain::AlphaSpec;
use hitlab::report::{
    self, AnalysisOptions, SimulationOptions, Status, VerifyOptions, DEFAULT_TOLERANCE,
};
use hitlab::rim::{rim_spec, RimParams, MAX_N};
use hitlab::{Error, MarkovChain};

#[derive(Parser)]
#[command(name = "hitlab", version, about = "First-hitting-time analysis of absorbing Markov chains")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Write the JSON document here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Directory for per-time CSV series.
    #[arg(long, global = true)]
    csv_dir: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[arg(long, global = true)]
    horizon: Option<usize>,
    #[arg(long, global = true, default_value_t = DEFAULT_TOLERANCE)]
    tolerance: f64,
}

#[derive(Subcommand)]
enum Command {
    /// Exact analysis: spectral data, minimal CSQST, representation and bounds.
    Analyze {
        chain: PathBuf,
        /// dirac:<label>, uniform, uniform-set:<l1,l2,...>, weights:<file> or mu-star. Repeatable.
        #[arg(long)]
        alpha: Vec<String>,
    },
    /// Monte Carlo estimates compared with the exact values.
    Simulate {
        chain: PathBuf,
        #[arg(long)]
        alpha: Option<String>,
        #[arg(long, default_value_t = 100_000)]
        trajectories: usize,
        /// Write one CSV row per simulated trajectory.
        #[arg(long)]
        dump_samples: Option<PathBuf>,
    },
    /// Emit the ring model as a chain file.
    Rim {
        #[arg(long, value_parser = clap::value_parser!(u32).range(1..=MAX_N as i64))]
        n: u32,
        #[arg(long)]
        lambda: f64,
        #[arg(long)]
        emit: Option<PathBuf>,
    },
    /// Run every exact invariant and a Monte Carlo conditional-law test.
    Verify {
        chain: PathBuf,
        #[arg(long, default_value_t = 100_000)]
        trajectories: usize,
    },
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::NonPrimitive(_) => 3,
        Error::NonConvergence { .. } => 4,
        Error::Numerical(_) | Error::ZeroMass(_) | Error::Horizon(_) | Error::InvalidControl(_) => 5,
        _ => 2,
    }
}

fn load(path: &Path) -> Result<(MarkovChain, Option<AlphaSpec>), Error> {
    let (chain, spec) = MarkovChain::from_file(path)?;
    Ok((chain, spec.alpha))
}

fn emit(text: &str, out: Option<&Path>) -> Result<(), Error> {
    match out {
        Some(path) => std::fs::write(path, text)?,
        None => std::io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn status_code(status: Status) -> u8 {
    match status {
        Status::Passed => 0,
        Status::Failed => 5,
    }
}

fn run(cli: Cli) -> Result<u8, Error> {
    let g = cli.global;
    match cli.command {
        Command::Analyze { chain, alpha } => {
            let (chain, embedded) = load(&chain)?;
            let mut alphas = alpha.iter().map(|a| AlphaSpec::parse_flag(a)).collect::<Result<Vec<_>, _>>()?;
            if alphas.is_empty() {
                alphas.extend(embedded);
            }
            let options = AnalysisOptions { alphas, horizon: g.horizon, tolerance: g.tolerance };
            let analysis = report::analyze(&chain, &options)?;
            if let Some(dir) = &g.csv_dir {
                std::fs::create_dir_all(dir)?;
                report::write_analysis_csv(&analysis, dir)?;
            }
            emit(&report::to_json(&analysis.report)?, g.out.as_deref())?;
            Ok(status_code(analysis.report.status))
        }
        Command::Simulate { chain, alpha, trajectories, dump_samples } => {
            let (chain, embedded) = load(&chain)?;
            let alpha = match alpha {
                Some(a) => Some(AlphaSpec::parse_flag(&a)?),
                None => embedded,
            };
            let options = SimulationOptions { alpha, seed: g.seed, trajectories, horizon: g.horizon };
            let run = report::simulate(&chain, &options)?;
            if let Some(path) = &dump_samples {
                report::write_samples_csv(&run.base, &chain, path)?;
            }
            if let Some(dir) = &g.csv_dir {
                std::fs::create_dir_all(dir)?;
                report::write_samples_csv(&run.base, &chain, &dir.join("samples.csv"))?;
                report::write_samples_csv(&run.tracked, &chain, &dir.join("tracking_samples.csv"))?;
            }
            emit(&report::to_json(&run.report)?, g.out.as_deref())?;
            Ok(status_code(run.report.status))
        }
        Command::Rim { n, lambda, emit: path } => {
            let spec = rim_spec(&RimParams::new(n, lambda)?);
            let text = spec.to_json()? + "\n";
            emit(&text, path.as_deref().or(g.out.as_deref()))?;
            Ok(0)
        }
        Command::Verify { chain, trajectories } => {
            let (chain, _) = load(&chain)?;
            let defaults = VerifyOptions::default();
            let options = VerifyOptions {
                horizon: g.horizon.unwrap_or(defaults.horizon),
                tolerance: g.tolerance,
                seed: g.seed,
                trajectories,
            };
            let report = report::verify(&chain, &options)?;
            emit(&report::to_json(&report)?, g.out.as_deref())?;
            for check in report.checks.iter().filter(|c| !c.pass) {
                eprintln!("FAIL {}", check.name);
            }
            eprintln!("{}", if report.status == Status::Passed { "PASS" } else { "FAIL" });
            Ok(status_code(report.status))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}
