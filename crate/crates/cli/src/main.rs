use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use rydberg_cli::config::{parse_override, RunConfig};
use rydberg_cli::error::{CliError, CliResult};

#[derive(Parser, Debug)]
#[command(name = "rydberg", version, about = "Quantum-critical scaling of driven Rydberg gases")]
struct Cli {
    #[command(subcommand)]
    mode: ModeArg,

    /// `key = value` config file; flags below override it.
    #[arg(short, long, global = true)]
    config: Option<PathBuf>,

    /// Override any config key, e.g. `--set N=12 --set C6=0.02,0.04`.
    #[arg(short = 's', long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,

    #[arg(short, long, global = true)]
    output: Option<PathBuf>,

    /// Worker threads for independent realizations.
    #[arg(short = 'j', long, global = true)]
    threads: Option<usize>,

    #[arg(long, global = true)]
    seed: Option<u64>,

    #[arg(long, global = true)]
    realizations: Option<usize>,

    /// Exact `average.csv` to overlay in `master` mode.
    #[arg(long, global = true)]
    reference: Option<PathBuf>,

    /// Sweep table to refit in `fit` mode.
    #[arg(long, global = true)]
    table: Option<PathBuf>,

    /// Ensemble record to rerun in `replay` mode.
    #[arg(long, global = true)]
    ensemble: Option<PathBuf>,

    /// Switch the bath off (unitary single-site dynamics).
    #[arg(long, global = true)]
    zero_rates: bool,

    /// More log output; repeat for debug.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,

    /// Errors only.
    #[arg(short, long, global = true)]
    quiet: bool,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum ModeArg {
    /// Disorder-averaged exact dynamics at one (N, C6) point.
    Exact,
    /// Self-consistent mean-field solution for one alpha or a grid.
    Meanfield,
    /// Single-site master equation, optionally fitted to an exact reference.
    Master,
    /// Grid of points with cutoff ladder and power-law fit.
    Sweep,
    /// Refit an existing sweep table.
    Fit,
    /// Rerun one stored ensemble.
    Replay,
}

impl ModeArg {
    fn key(self) -> &'static str {
        match self {
            ModeArg::Exact => "exact",
            ModeArg::Meanfield => "meanfield",
            ModeArg::Master => "master",
            ModeArg::Sweep => "sweep",
            ModeArg::Fit => "fit",
            ModeArg::Replay => "replay",
        }
    }
}

fn build_config(cli: &Cli) -> CliResult<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let mut pairs = vec![("mode".to_string(), cli.mode.key().to_string())];
    for s in &cli.overrides {
        pairs.push(parse_override(s)?);
    }
    let path = |p: &PathBuf| p.display().to_string();
    let flags = [
        ("output", cli.output.as_ref().map(path)),
        ("threads", cli.threads.map(|v| v.to_string())),
        ("seed", cli.seed.map(|v| v.to_string())),
        ("realizations", cli.realizations.map(|v| v.to_string())),
        ("reference", cli.reference.as_ref().map(path)),
        ("table", cli.table.as_ref().map(path)),
        ("ensemble", cli.ensemble.as_ref().map(path)),
        ("rate_scale", cli.zero_rates.then(|| "0".to_string())),
    ];
    pairs.extend(flags.into_iter().filter_map(|(k, v)| Some((k.to_string(), v?))));
    cfg.apply_all(&pairs)?;
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match (cli.quiet, cli.verbose) {
        (true, _) => "error",
        (false, 0) => "warn",
        (false, 1) => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let result = build_config(&cli).and_then(|cfg| rydberg_cli::run(&cfg).map(|m| (cfg, m)));
    match result {
        Ok((cfg, _)) => {
            log::info!("results written to {}", cfg.output.display());
            ExitCode::SUCCESS
        }
        Err(e) => report(&e),
    }
}

fn report(e: &CliError) -> ExitCode {
    eprintln!("error: {e}");
    if let Some(hint) = e.hint() {
        eprintln!("hint: {hint}");
    }
    ExitCode::from(e.exit_code() as u8)
}
