//! Experiment runner for `scc-core`: TOML configurations, sweeps over
//! seeds and parameters, CSV artifacts and the built-in recipes.

pub mod config;
pub mod output;
pub mod privacy_trace;
pub mod recipes;
pub mod report;
pub mod runner;
pub mod stats;

use std::path::{Path, PathBuf};

use anyhow::Result;

use config::Experiment;
use output::Digest;
use runner::CellResult;

/// Environment variable naming the directory under which runs are written.
pub const OUTPUT_ROOT_VAR: &str = "SCC_SIM_OUTPUT_ROOT";

/// Directory for an experiment: `run.output_dir` if absolute, otherwise
/// under `root`, defaulting to the experiment name.
pub fn run_dir(root: &Path, exp: &Experiment) -> PathBuf {
    let sub = exp
        .cells
        .first()
        .and_then(|c| c.config.run.output_dir.clone())
        .unwrap_or_else(|| exp.name.clone());
    root.join(sub)
}

/// Runs every cell and seed, then writes the run directory.
pub fn run_experiment(exp: &Experiment, dir: &Path) -> Result<(Vec<CellResult>, Digest)> {
    let results = runner::execute(exp)?;
    let digest = output::write_all(dir, exp, &results)?;
    Ok((results, digest))
}

/// Whether an error stems from the configuration rather than the runtime.
pub fn is_config_error(err: &anyhow::Error) -> bool {
    err.chain().any(|e| {
        e.downcast_ref::<config::ConfigError>().is_some()
            || matches!(
                e.downcast_ref::<scc_core::Error>(),
                Some(
                    scc_core::Error::InvalidConfig(_)
                        | scc_core::Error::InvalidParameter { .. }
                        | scc_core::Error::TopologyInfeasible(_)
                        | scc_core::Error::RegimeInvalid(_)
                )
            )
    })
}
