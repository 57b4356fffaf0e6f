//! `flowseal` command-line driver.
//!
//! Exit codes: 0 when the dataflow is safe (or every guarantee held),
//! 1 on input errors, 2 when analysis finds an anomaly or a simulation
//! contradicts the plan.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use flowseal::config::load_config;
use flowseal::report::{run, Command, Report, RunOptions};
use flowseal::sim::SimOverrides;

#[derive(Parser)]
#[command(name = "flowseal", version, about = "Dataflow consistency analysis and coordination synthesis")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Label every stream and print the derivations.
    Analyze(Common),
    /// Synthesize a coordination plan.
    Plan(Common),
    /// Run the config's fixtures in the simulator.
    Simulate(Common),
    /// Analyze, plan and simulate, checking that they agree.
    Check(Common),
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Args)]
struct Common {
    /// Configuration file.
    config: PathBuf,
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
    /// Query variant to apply; every variant is analyzed when omitted.
    #[arg(long)]
    query: Option<String>,
    /// Largest number of deliveries explored exhaustively.
    #[arg(long)]
    exhaustive_bound: Option<usize>,
    /// Sample this many schedules instead of enumerating.
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, args) = match cli.command {
        Cmd::Analyze(a) => (Command::Analyze, a),
        Cmd::Plan(a) => (Command::Plan, a),
        Cmd::Simulate(a) => (Command::Simulate, a),
        Cmd::Check(a) => (Command::Check, a),
    };
    let name = args.config.display().to_string();
    let opts = RunOptions {
        query: args.query.clone(),
        overrides: SimOverrides { exhaustive_bound: args.exhaustive_bound, samples: args.samples, seed: args.seed },
    };
    let report = load_config(&args.config)
        .and_then(|doc| run(command, &name, &doc, &opts))
        .unwrap_or_else(|e| Report::failure(command, &name, e));
    match args.format {
        Format::Text => {
            let text = report.to_text();
            if report.error.is_some() {
                eprint!("{text}");
            } else {
                print!("{text}");
            }
        }
        Format::Json => println!("{}", report.to_json()),
    }
    ExitCode::from(report.exit_code() as u8)
}
