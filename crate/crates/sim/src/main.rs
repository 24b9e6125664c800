use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Result};
use clap::{Parser, Subcommand};

use scc_core::objectives::Family;
use scc_core::AgentId;
use scc_sim::config::{self, Experiment};
use scc_sim::{is_config_error, privacy_trace, report, run_dir, run_experiment, OUTPUT_ROOT_VAR};

#[derive(Parser)]
#[command(
    name = "scc-sim",
    version,
    about = "Byzantine-resilient, privacy-masked decentralized SGD simulator"
)]
struct Cli {
    /// Directory under which run directories are created.
    #[arg(long, global = true, env = OUTPUT_ROOT_VAR, default_value = "runs")]
    output_root: PathBuf,

    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Source {
    /// Config file, or `recipe:<name>` for a built-in recipe.
    config: String,

    /// Dotted `key=value` override, repeatable (e.g. `run.horizon=500`).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,

    /// Write here instead of under the output root.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Source {
    fn load(&self) -> Result<Experiment> {
        config::load(&self.config, &self.overrides)
    }

    fn dir(&self, root: &std::path::Path, exp: &Experiment) -> PathBuf {
        self.out.clone().unwrap_or_else(|| run_dir(root, exp))
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run a single configuration (one cell) over its seeds.
    Run {
        #[command(flatten)]
        source: Source,
        /// Pick one cell of a config that declares sweep axes.
        #[arg(long)]
        cell: Option<usize>,
    },
    /// Run every cell of the sweep grid over its seeds.
    Sweep {
        #[command(flatten)]
        source: Source,
    },
    /// Run the first cell on two adjacent function sets and compare traces.
    PrivacyTrace {
        #[command(flatten)]
        source: Source,
        /// Reliable agent whose objective is replaced.
        #[arg(long)]
        swap: usize,
        /// Replacement family, 1 to 10; drawn at random when omitted.
        #[arg(long, value_parser = clap::value_parser!(u8).range(1..=10))]
        family: Option<u8>,
    },
    /// Print the tables of an existing run directory.
    Report { dir: PathBuf },
    /// List the built-in recipes.
    Recipes,
}

fn select_cell(exp: &mut Experiment, cell: Option<usize>) -> Result<()> {
    match cell {
        Some(i) => {
            if i >= exp.cells.len() {
                bail!(config::ConfigError(format!(
                    "--cell {i} out of range; the config has {} cell(s)",
                    exp.cells.len()
                )));
            }
            exp.retain(|c| c.index == i);
        }
        None if exp.cells.len() > 1 => bail!(config::ConfigError(format!(
            "config declares {} sweep cells; use `sweep` or pick one with --cell",
            exp.cells.len()
        ))),
        None => {}
    }
    Ok(())
}

fn execute(cli: Cli) -> Result<()> {
    let root = cli.output_root;
    match cli.command {
        Command::Run { source, cell } => {
            let mut exp = source.load()?;
            select_cell(&mut exp, cell)?;
            let dir = source.dir(&root, &exp);
            eprintln!("running {exp}");
            run_experiment(&exp, &dir)?;
            print!("{}", std::fs::read_to_string(dir.join("summary.txt"))?);
            println!("wrote {}", dir.display());
        }
        Command::Sweep { source } => {
            let exp = source.load()?;
            let dir = source.dir(&root, &exp);
            eprintln!("sweeping {exp}");
            run_experiment(&exp, &dir)?;
            print!("{}", report::report(&dir)?);
            println!("wrote {}", dir.display());
        }
        Command::PrivacyTrace {
            source,
            swap,
            family,
        } => {
            let exp = source.load()?;
            let dir = source.dir(&root, &exp).join("privacy_trace");
            let family = family.and_then(|f| Family::from_index(f as usize - 1));
            let trace = privacy_trace::privacy_trace(&exp, AgentId(swap), family)?;
            privacy_trace::write(&dir, &exp, &trace)?;
            print!("{}", std::fs::read_to_string(dir.join("summary.txt"))?);
            println!("wrote {}", dir.display());
        }
        Command::Report { dir } => print!("{}", report::report(&dir)?),
        Command::Recipes => {
            for name in scc_sim::recipes::names() {
                println!("{name}");
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if is_config_error(&e) {
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
