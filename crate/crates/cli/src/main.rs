use std::path::PathBuf;
use std::process::ExitCode;

use adabias_cli::{run, Command, Overrides};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "adabias",
    version,
    about = "Bias of sample means under adaptive sampling"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
    #[command(flatten)]
    global: Global,
}

#[derive(Args)]
struct Global {
    /// Experiment spec, TOML or JSON.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the spec's master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides the spec's trial count.
    #[arg(long, global = true)]
    trials: Option<usize>,
    /// Worker threads; defaults to the available cores.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
}

#[derive(Subcommand, Clone, Copy)]
enum Cmd {
    /// Per-round bias of each arm's sample mean.
    BiasCurves,
    /// Distribution of the number of negatively biased arms.
    JointBias,
    /// Compare the naive, held-out, propensity and cMLE estimators.
    Debias,
    /// Exact two-arm Bernoulli bias by enumeration.
    AnalyticCheck,
    /// Bias at a snapshot against later sample counts.
    Scatter,
}

impl From<Cmd> for Command {
    fn from(c: Cmd) -> Self {
        match c {
            Cmd::BiasCurves => Command::BiasCurves,
            Cmd::JointBias => Command::JointBias,
            Cmd::Debias => Command::Debias,
            Cmd::AnalyticCheck => Command::AnalyticCheck,
            Cmd::Scatter => Command::Scatter,
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let Some(config) = cli.global.config else {
        eprintln!("invalid configuration: --config is required");
        return ExitCode::from(2);
    };
    let threads = cli
        .global
        .threads
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let overrides = Overrides {
        seed: cli.global.seed,
        trials: cli.global.trials,
        out_dir: cli.global.out_dir,
    };
    match run(cli.command.into(), &config, &overrides, threads) {
        Ok(summary) => {
            print!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
