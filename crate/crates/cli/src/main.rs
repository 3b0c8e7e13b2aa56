use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};

use snswitch_cli::{load_config, run, Command, Flags, RunOptions};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Sub {
    Simulate,
    Moments,
    Energy,
    MartingaleTest,
    Continuity,
    EpsStudy,
    Refine,
    ChainTest,
    AuditHypotheses,
}

impl From<Sub> for Command {
    fn from(s: Sub) -> Self {
        match s {
            Sub::Simulate => Command::Simulate,
            Sub::Moments => Command::Moments,
            Sub::Energy => Command::Energy,
            Sub::MartingaleTest => Command::MartingaleTest,
            Sub::Continuity => Command::Continuity,
            Sub::EpsStudy => Command::EpsStudy,
            Sub::Refine => Command::Refine,
            Sub::ChainTest => Command::ChainTest,
            Sub::AuditHypotheses => Command::AuditHypotheses,
        }
    }
}

/// Stochastic Navier-Stokes with Markov switching: simulation and checks.
#[derive(Debug, Parser)]
#[command(version, about)]
struct Args {
    #[arg(value_enum)]
    command: Sub,
    /// TOML configuration; every key is optional.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Master seed (overrides the config).
    #[arg(long)]
    seed: Option<u64>,
    /// Path count (or audit sample count) for this subcommand.
    #[arg(long)]
    paths: Option<u64>,
    #[arg(long)]
    threads: Option<usize>,
    /// Also write the switch/jump event log (simulate).
    #[arg(long)]
    emit_events: bool,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let opts = RunOptions {
        seed: args.seed,
        paths: args.paths,
        threads: args.threads,
        flags: Flags {
            emit_events: args.emit_events,
        },
    };
    let result = load_config(args.config.as_deref()).and_then(|cfg| run(args.command.into(), cfg, opts, &args.out));
    match result {
        Ok(m) => {
            println!(
                "{} {}: {} ({} files in {})",
                m.subcommand,
                m.config_hash.get(..12).unwrap_or(""),
                if m.pass { "pass" } else { "FAIL" },
                m.outputs.len() + 1,
                args.out.display()
            );
            if m.pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
