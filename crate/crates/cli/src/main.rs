//! `flagseq`: design, check and exercise Flag sequence sets from JSON configs.

mod artifacts;
mod bench;
mod design;
mod error;
mod estimate;
mod evaluate;
mod gnuplot;
mod verify;

use clap::{Args, Parser, Subcommand};
use error::CliError;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "flagseq", version, about = "Flag sequence design and delay-Doppler estimation")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Optimize peak sequences for a curtain set.
    Design(Common),
    /// Re-check every invariant of a design file.
    Verify(Common),
    /// Ambiguity grids and metrics for a design.
    Evaluate(Common),
    /// Run the two-step estimator on simulated echoes.
    Estimate(Common),
    /// Time the Flag search against the exhaustive one across N.
    Bench(Common),
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// JSON configuration file.
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory (created if missing).
    #[arg(long)]
    pub out: PathBuf,
    /// Overrides the seed in the config.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads for the parallel kernels.
    #[arg(long, env = "FLAGSEQ_THREADS")]
    pub threads: Option<usize>,
    /// Also write gnuplot scripts next to the data.
    #[arg(long)]
    pub emit_gnuplot: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (c, f): (&Common, fn(&Common) -> error::CliResult<()>) = match &cli.cmd {
        Cmd::Design(c) => (c, design::run),
        Cmd::Verify(c) => (c, verify::run),
        Cmd::Evaluate(c) => (c, evaluate::run),
        Cmd::Estimate(c) => (c, estimate::run),
        Cmd::Bench(c) => (c, bench::run),
    };
    if let Some(t) = c.threads {
        if t == 0 {
            eprintln!("{}", CliError::Usage("--threads must be positive".into()));
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("warning: thread pool already initialized: {e}");
        }
    }
    match f(c) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.code())
        }
    }
}
