use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ris_harq::TruncationPolicy;
use ris_harq_cli::{
    load_scenario, rerun, run, CliError, CliResult, Command, Overrides, RunOutcome,
};

#[derive(Parser)]
#[command(
    name = "ris-harq",
    version,
    about = "Outage analysis for HARQ over multi-RIS links"
)]
struct Cli {
    /// Worker threads (default: one per core).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Exact outage over the SNR grid.
    OpCurve(RunArgs),
    /// Exact and high-SNR asymptotic outage.
    Asymptote(RunArgs),
    /// Monte-Carlo outage with standard errors, next to the exact value.
    Mc(RunArgs),
    /// Optimal phase shifts compared with fixed and random settings.
    OptimizePhase(RunArgs),
    /// Diversity order fitted over the high-SNR window.
    Diversity(RunArgs),
    /// Repeat a run from its manifest.
    Rerun {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Scenario file (TOML, or JSON by extension).
    #[arg(long)]
    scenario: PathBuf,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    trials: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    /// `fixed:<order>` or `adaptive:<tolerance>`.
    #[arg(long)]
    trunc: Option<TruncationPolicy>,
}

fn execute(cmd: Command, args: RunArgs) -> CliResult<RunOutcome> {
    let overrides = Overrides {
        trials: args.trials,
        seed: args.seed,
        truncation: args.trunc,
    };
    let (raw, _) = load_scenario(&args.scenario, &overrides)?;
    run(cmd, raw, &args.out)
}

fn dispatch(sub: Sub) -> CliResult<RunOutcome> {
    match sub {
        Sub::OpCurve(a) => execute(Command::OpCurve, a),
        Sub::Asymptote(a) => execute(Command::Asymptote, a),
        Sub::Mc(a) => execute(Command::Mc, a),
        Sub::OptimizePhase(a) => execute(Command::OptimizePhase, a),
        Sub::Diversity(a) => execute(Command::Diversity, a),
        Sub::Rerun { manifest, out } => rerun(&manifest, &out),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("error: cannot start {n} worker threads: {e}");
            return ExitCode::from(1);
        }
    }
    match dispatch(cli.command) {
        Ok(out) => {
            println!("{}", out.csv_path.display());
            println!("{}", out.manifest_path.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_status(&e))
        }
    }
}

fn exit_status(e: &CliError) -> u8 {
    e.exit_code() as u8
}
