use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use temporal_im_cli::runner::format_checks;
use temporal_im_cli::{entropy, oracle_check, run, CliError, CliResult, ExperimentConfig, RunOptions, RunReport};

#[derive(Parser)]
#[command(name = "temporal-im", version, about = "Influence-matrix experiments for kicked and Trotterized spin chains")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file.
    Run {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, env = "TEMPORAL_IM_THREADS")]
        threads: Option<usize>,
    },
    /// Compare the engine against dense and exact-diagonalization oracles.
    OracleCheck {
        #[arg(long, default_value_t = 4)]
        tmax: usize,
    },
    /// Write IM entropy diagnostics for a config.
    Entropy {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, env = "TEMPORAL_IM_THREADS")]
        threads: Option<usize>,
    },
}

fn load(path: &PathBuf, seed: Option<u64>) -> CliResult<ExperimentConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
    ExperimentConfig::parse_with_seed(&text, seed)
}

fn report(r: &RunReport) {
    for f in &r.files {
        println!("wrote {}", f.display());
    }
    for n in &r.notes {
        println!("note: {n}");
    }
    println!("wall time {:.3} s", r.wall_time);
}

fn dispatch(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Run { config, out, seed, threads } => {
            let cfg = load(&config, seed)?;
            report(&run(&cfg, &RunOptions { out_dir: out, seed, threads })?);
        }
        Command::Entropy { config, out, seed, threads } => {
            let cfg = load(&config, seed)?;
            report(&entropy(&cfg, &RunOptions { out_dir: out, seed, threads })?);
        }
        Command::OracleCheck { tmax } => {
            print!("{}", format_checks(&oracle_check(tmax)?));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
