// SPDX-License-Identifier: Apache-2.0

//! `streamclust` command-line front end.
//!
//! Exit codes: 0 success, 1 malformed input, 2 I/O failure, 3 invalid flags.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use clap::Parser;

use streamclust::eval::{audit_modularity, nmi, NMI_NORMALIZATION};
use streamclust::graph_io::{read_labels, write_clustering};
use streamclust::pipeline::run;
use streamclust::{Error, Mode, ModeConfig};

const EXIT_FORMAT: u8 = 1;
const EXIT_IO: u8 = 2;
const EXIT_USAGE: u8 = 3;

/// Clusters a METIS graph by streaming it from disk, maximising modularity.
#[derive(Debug, Parser)]
#[command(name = "streamclust", version)]
struct Args {
    /// Input graph in METIS format.
    graph: PathBuf,

    /// light, light-plus, evo or strong.
    #[arg(long, default_value = "light", value_parser = parse_mode)]
    mode: Mode,

    /// Wall-clock budget of the memetic phase, in seconds. 0 removes the
    /// limit and requires --evo-iterations.
    #[arg(long, default_value_t = 15.0, value_parser = parse_seconds)]
    evo_time: f64,

    /// Generation cap of the memetic phase; makes seeded runs reproducible.
    #[arg(long)]
    evo_iterations: Option<u64>,

    /// Memetic population size.
    #[arg(long, default_value_t = 10)]
    population: usize,

    /// Wall-clock budget of the local search, in seconds.
    #[arg(long, default_value_t = 600.0, value_parser = parse_seconds)]
    ls_time: f64,

    /// Local search stops once a round gains less than this fraction of the
    /// modularity so far.
    #[arg(long, default_value_t = 0.05)]
    ls_floor: f64,

    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// Drop self-loops and merge parallel edges instead of rejecting them.
    #[arg(long)]
    sanitize: bool,

    /// Clustering output, one cluster id per line.
    #[arg(long, short)]
    output: Option<PathBuf>,

    /// Write run statistics as JSON.
    #[arg(long)]
    stats_json: Option<PathBuf>,

    /// Ground-truth labels, one per line, for an NMI score.
    #[arg(long)]
    truth: Option<PathBuf>,

    /// Recompute modularity with an independent reader.
    #[arg(long)]
    audit: bool,

    /// Log progress to stderr.
    #[arg(long, short)]
    verbose: bool,
}

fn parse_mode(s: &str) -> Result<Mode, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_seconds(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(x) if x.is_finite() && x >= 0.0 => Ok(x),
        _ => Err(format!("`{s}` is not a non-negative number of seconds")),
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        _ if e.is_io() => EXIT_IO,
        Error::Config(_) => EXIT_USAGE,
        _ => EXIT_FORMAT,
    }
}

fn execute(args: &Args) -> Result<(), Error> {
    let cfg = ModeConfig {
        mode: args.mode,
        evo_time: Duration::from_secs_f64(args.evo_time),
        evo_iterations: args.evo_iterations,
        population: args.population,
        ls_time: Duration::from_secs_f64(args.ls_time),
        ls_floor: args.ls_floor,
        seed: args.seed,
        sanitize: args.sanitize,
    };
    cfg.validate()?;
    // Read the labels up front so a bad path fails before the long run.
    let truth = args.truth.as_ref().map(read_labels).transpose()?;

    let mut out = run(&cfg, &args.graph)?;
    if let Some(truth) = truth {
        out.stats.nmi = Some(nmi(&out.assignments, &truth)?);
        out.stats.nmi_normalization = Some(NMI_NORMALIZATION);
    }
    if args.audit {
        out.stats.audit_modularity = Some(audit_modularity(&out.assignments, &args.graph)?);
    }
    if let Some(path) = &args.output {
        write_clustering(path, &out.assignments)?;
    }
    if let Some(path) = &args.stats_json {
        std::fs::write(path, out.stats.to_json() + "\n")?;
    }
    eprintln!("{}", out.stats.to_kv_line());
    Ok(())
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(args) => args,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let level = if args.verbose { "info" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    match execute(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
