use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rendezvous::{emit_report, parse_scenario, run_experiment, CliError, Format, RunOptions, TraceMode};

#[derive(Parser)]
#[command(name = "rendezvous", version, about = "Run gathering experiments from scenario files")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every trial of a scenario and write the reports.
    Run {
        scenario: PathBuf,
        /// Override the number of trials.
        #[arg(long)]
        trials: Option<u64>,
        /// Override the master seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory (default: `rendezvous-out/<scenario name>`).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Both)]
        format: Format,
        #[arg(long, value_enum, default_value_t = TraceMode::None)]
        traces: TraceMode,
        /// Worker threads (default: all cores).
        #[arg(long)]
        workers: Option<usize>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn execute(command: Command) -> Result<(), CliError> {
    let Command::Run { scenario, trials, seed, out, format, traces, workers } = command;
    let text = std::fs::read_to_string(&scenario)
        .map_err(|e| CliError::Validation(format!("{}: {e}", scenario.display())))?;
    let mut s = parse_scenario(&text)?;
    if let Some(t) = trials {
        s.trials = t;
    }
    if let Some(seed) = seed {
        s.master_seed = seed;
    }
    s.validate()?;
    let outcome = run_experiment(&s, &RunOptions { workers, traces })?;
    let dir = out.unwrap_or_else(|| PathBuf::from("rendezvous-out").join(&s.name));
    let written = emit_report(&outcome, &dir, format)?;
    let st = &outcome.report.stats;
    println!(
        "{}: {} trials, {} gathered, mean looks {}",
        s.name, st.trials, st.gathered, st.mean_total_looks
    );
    for w in written.iter().filter(|w| !w.contains("traces")) {
        println!("wrote {w}");
    }
    Ok(())
}
