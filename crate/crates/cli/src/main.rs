use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use evlhts_cli::{run_with_threads, CliError, Config};

#[derive(Parser)]
#[command(name = "evlhts", version, about = "Extreme value laws and hitting time statistics experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// List the supported systems with their backends and measures.
    ListSystems,
    /// Check a configuration file without running anything.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run a named experiment.
    #[command(external_subcommand)]
    Experiment(Vec<String>),
}

#[derive(Parser)]
#[command(no_binary_name = true)]
struct ExperimentArgs {
    experiment: String,
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn experiment(args: Vec<String>) -> Result<bool, CliError> {
    let args = ExperimentArgs::try_parse_from(args).map_err(|e| CliError::Config(e.to_string()))?;
    let mut cfg = Config::from_path(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.master_seed = seed;
    }
    if let Some(threads) = args.threads {
        cfg.threads = threads;
    }
    let out = args.out.unwrap_or_else(|| PathBuf::from(&cfg.out_dir));
    let report = run_with_threads(&args.experiment, &cfg, cfg.threads)?;
    report.write(&out)?;
    for c in &report.checks {
        println!("{} {}: {} (bound {})", if c.pass { "PASS" } else { "FAIL" }, c.name, c.value, c.bound);
    }
    println!("{}: {} ({})", report.experiment, report.verdict, out.display());
    Ok(report.passed())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let result = match cli.command {
        Command::ListSystems => {
            println!("{:<20} {:<22} measures", "system", "backends");
            for (s, b, m) in evlhts_cli::runner::list_systems() {
                println!("{s:<20} {b:<22} {m}");
            }
            Ok(true)
        }
        Command::Validate { config } => Config::from_path(&config)
            .and_then(|c| evlhts_cli::runner::setup(&c).map(|_| ()))
            .map(|_| {
                println!("config ok");
                true
            }),
        Command::Experiment(args) => experiment(args),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
