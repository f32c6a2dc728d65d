//! `lattice-pdo`: run experiments and the regression corpus, write reports.
//!
//! Exit status: 0 when every verdict passes, 1 when a verdict fails, 2 on a
//! configuration or input error.

mod commands;
mod config;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use lattice_pdo::symbol::SymbolSpec;

use crate::config::ExperimentConfig;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] lattice_pdo::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Parser)]
#[command(
    name = "lattice-pdo",
    version,
    about = "Discrete pseudo-differential experiments on ℤⁿ×𝕋ⁿ"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Seminorm growth scans and the ellipticity certificate.
    SymbolCheck(Common),
    /// Finite section, applier cross-check and operator norm.
    Quantize(Common),
    /// Composition expansion against the exact product of sections.
    Compose(Common),
    /// Adjoint expansion against the conjugate transpose.
    Adjoint(Common),
    /// Asymptotic sum with excision radii.
    AsymSum(Common),
    /// Parametrix construction and residual norms.
    Parametrix(Common),
    /// Elliptic regularity solve scan with `f = δ₀`.
    Regularity(Common),
    /// Block operator, deficiency scan, duality and `PQ + I` ellipticity.
    Adjointness(Common),
    /// The full regression suite.
    Corpus(Common),
    /// Print the resolved configuration as TOML.
    ShowConfig(Common),
}

#[derive(Debug, Args)]
struct Common {
    /// TOML experiment configuration.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Dotted override, e.g. `sobolev.s1=0.5`; repeatable.
    #[arg(short = 's', long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Symbol description: inline JSON or a `.json`/`.toml` file.
    #[arg(long)]
    symbol: Option<String>,
    /// Right factor for `compose`, same forms as `--symbol`.
    #[arg(long)]
    second: Option<String>,
    /// Report directory (default: `$LATTICE_PDO_OUT`, then `lattice-pdo-out`).
    #[arg(short, long)]
    out: Option<PathBuf>,
}

fn parse_symbol(raw: &str) -> Result<SymbolSpec, CliError> {
    let bad = |e: String| CliError::Config(format!("symbol description: {e}"));
    let trimmed = raw.trim_start();
    if trimmed.starts_with('{') {
        return serde_json::from_str(raw).map_err(|e| bad(e.to_string()));
    }
    let text = std::fs::read_to_string(raw).map_err(|e| bad(format!("{raw}: {e}")))?;
    if raw.ends_with(".toml") {
        toml::from_str(&text).map_err(|e| bad(e.to_string()))
    } else {
        serde_json::from_str(&text).map_err(|e| bad(e.to_string()))
    }
}

fn resolve(common: &Common) -> Result<ExperimentConfig, CliError> {
    let mut cfg = ExperimentConfig::load(common.config.as_deref(), &common.overrides)?;
    if let Some(s) = &common.symbol {
        cfg.symbol = parse_symbol(s)?;
    }
    if let Some(s) = &common.second {
        cfg.second = parse_symbol(s)?;
    }
    if let Some(o) = &common.out {
        cfg.output.dir = Some(o.clone());
    }
    cfg.validate()?;
    Ok(cfg)
}

type Runner = fn(&ExperimentConfig) -> Result<report::Outcome, CliError>;

fn run(cli: Cli) -> Result<bool, CliError> {
    let (name, common, f): (&str, &Common, Runner) = match &cli.command {
        Command::SymbolCheck(c) => ("symbol-check", c, commands::symbol_check),
        Command::Quantize(c) => ("quantize", c, commands::quantize),
        Command::Compose(c) => ("compose", c, commands::compose),
        Command::Adjoint(c) => ("adjoint", c, commands::adjoint),
        Command::AsymSum(c) => ("asym-sum", c, commands::asym_sum),
        Command::Parametrix(c) => ("parametrix", c, commands::parametrix),
        Command::Regularity(c) => ("regularity", c, commands::regularity),
        Command::Adjointness(c) => ("adjointness", c, commands::adjointness),
        Command::Corpus(c) => ("corpus", c, commands::corpus),
        Command::ShowConfig(c) => {
            let cfg = resolve(c)?;
            let text = toml::to_string_pretty(&cfg).map_err(|e| CliError::Config(e.to_string()))?;
            print!("{text}");
            return Ok(true);
        }
    };
    let cfg = resolve(common)?;
    let start = Instant::now();
    let outcome = f(&cfg)?;
    let elapsed = start.elapsed().as_secs_f64();
    let path = report::write(&cfg.out_dir(), name, &cfg, &outcome, elapsed)?;
    for note in &outcome.notes {
        println!("note: {note}");
    }
    for c in &outcome.verdicts {
        let mark = if c.passed { "PASS" } else { "FAIL" };
        println!(
            "[{mark}] {} = {:.3e} (tol {:.3e})",
            c.what, c.measured, c.tolerance
        );
    }
    for c in &outcome.exploratory {
        println!(
            "[info] {} = {:.3e} (ref {:.3e})",
            c.what, c.measured, c.tolerance
        );
    }
    println!("report: {}", path.display());
    Ok(outcome.passed())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
