use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use spindyn_harness::run::{compare, converge, format_deviations, init_workers, run};
use spindyn_harness::{presets, HarnessError, RunConfig};

/// Quench dynamics of long-range spin models: ML-MCTDH, DTWA, exact
/// diagonalization and the Ising closed forms.
///
/// Worker threads: SPINDYN_WORKERS. Exit codes: 0 ok, 1 i/o error,
/// 2 config error, 3 numerical failure.
#[derive(Parser)]
#[command(name = "spindyn", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every backend of a config; writes one CSV per backend and summary.json.
    Run { config: PathBuf },
    /// Scan the top-layer SPF count of the ML-MCTDH tree against a reference backend.
    Converge {
        config: PathBuf,
        /// Ascending SPF counts.
        #[arg(long = "m", num_args = 1.., required = true)]
        m: Vec<usize>,
    },
    /// Run (or print) a figure preset such as fig2a.
    Preset {
        /// Preset id; omit with --list.
        id: Option<String>,
        /// Print the preset's config instead of running it.
        #[arg(long)]
        print: bool,
        #[arg(long)]
        list: bool,
        /// Override the output directory.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Print pairwise maximum deviations between CSV series.
    Compare {
        #[arg(num_args = 2.., required = true)]
        files: Vec<PathBuf>,
    },
}

fn run_and_report(cfg: &RunConfig) -> Result<(), HarnessError> {
    let out = run(cfg)?;
    println!("wrote {} backend(s) to {}", out.series.len(), cfg.run.output.display());
    print!("{}", format_deviations(&out.summary.deviations));
    Ok(())
}

fn dispatch(cli: Cli) -> Result<(), HarnessError> {
    init_workers()?;
    match cli.command {
        Command::Run { config } => run_and_report(&RunConfig::load(&config)?),
        Command::Converge { config, m } => {
            let report = converge(&RunConfig::load(&config)?, &m)?;
            println!("reference: {}", report.reference);
            println!("{:>5} {:>14} {:>14}  tree", "m", "max dSx", "max ddSx");
            for r in &report.rows {
                let flag = if r.non_monotone { "  (non-monotone)" } else { "" };
                println!(
                    "{:>5} {:>14.6e} {:>14.6e}  {}{flag}",
                    r.m, r.max_dev_sx, r.max_dev_dsx, r.tree
                );
            }
            Ok(())
        }
        Command::Preset {
            id,
            print,
            list,
            output,
        } => {
            if list {
                for p in presets::all() {
                    println!("{:<6} {:<5} {}", p.id, p.column, p.description);
                }
                return Ok(());
            }
            let id = id.ok_or_else(|| HarnessError::Config("preset id required (or --list)".into()))?;
            let mut p = presets::find(&id).ok_or_else(|| HarnessError::Config(format!("unknown preset {id:?}")))?;
            if let Some(dir) = output {
                p.config.run.output = dir;
            }
            if print {
                println!("# {}: {} (plots {})", p.id, p.description, p.column);
                print!("{}", p.config.to_toml());
                return Ok(());
            }
            run_and_report(&p.config)
        }
        Command::Compare { files } => {
            print!("{}", format_deviations(&compare(&files)?));
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("spindyn: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
