//! Run orchestration for the `rydberg` binary.
//!
//! Every mode reads a [`config::RunConfig`], writes tables into its output
//! directory and finishes with a `manifest.json` recording inputs, seeds and
//! diagnostics.

pub mod config;
pub mod error;
pub mod exact;
pub mod modes;
pub mod output;
pub mod pool;
pub mod sweep;

use serde_json::Value;

use config::{Mode, RunConfig};
use error::CliResult;

/// Validates `cfg` and runs its mode; returns the written manifest.
pub fn run(cfg: &RunConfig) -> CliResult<Value> {
    cfg.validate()?;
    std::fs::create_dir_all(&cfg.output).map_err(|e| error::CliError::io(&cfg.output, e))?;
    match cfg.mode {
        Mode::Exact => exact::run_exact(cfg),
        Mode::MeanField => modes::run_meanfield(cfg),
        Mode::Master => modes::run_master(cfg),
        Mode::Sweep => sweep::run_sweep(cfg),
        Mode::Fit => sweep::run_fit(cfg),
        Mode::Replay => exact::run_replay(cfg),
    }
}
