//! `shear`: batch experiments over strips, train tracks and punctured
//! surfaces. Each subcommand reads an optional JSON config (`"schema": 1`),
//! writes one table (CSV with a sibling `.summary.json`, or a single JSON
//! document) and exits 0 on success, 1 when a checked property fails and 2 on
//! usage errors. Nothing is written on exit 2.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;
use thiserror::Error;

mod output;
mod strip_cmds;
mod surface_cmds;
mod track_cmds;

use output::{load_config, Format, Outcome, SCHEMA};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("cannot write output: {0}")]
    Io(String),
    /// A computation failed outright; reported as a failed property.
    #[error("{0}")]
    Failed(String),
}

#[derive(Parser)]
#[command(name = "shear", version, about = "Shear-coordinate length experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON config; subcommand defaults are used when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output table path.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
}

#[derive(Subcommand)]
enum Command {
    /// Variational geodesic length across a strip vs. the developed distance.
    StripGeodesic(Common),
    /// Core length vs. the gap between the boundary geodesics.
    StripCore(Common),
    /// Midpoint probes of the strip length functionals.
    StripConvexity(Common),
    /// Shear transport along two split sequences to the same track.
    TrackTransport(Common),
    /// Traces and lengths of curves on a punctured surface.
    SurfaceLengths(Common),
    /// Curve lengths along a stretch line.
    StretchScan(Common),
    /// Curve lengths along an earthquake line.
    EarthquakeScan(Common),
    /// Lower bound for the Thurston distance from length ratios.
    ThurstonEstimate(Common),
}

impl Command {
    fn parts(&self) -> (&'static str, &Common) {
        match self {
            Command::StripGeodesic(c) => ("strip-geodesic", c),
            Command::StripCore(c) => ("strip-core", c),
            Command::StripConvexity(c) => ("strip-convexity", c),
            Command::TrackTransport(c) => ("track-transport", c),
            Command::SurfaceLengths(c) => ("surface-lengths", c),
            Command::StretchScan(c) => ("stretch-scan", c),
            Command::EarthquakeScan(c) => ("earthquake-scan", c),
            Command::ThurstonEstimate(c) => ("thurston-estimate", c),
        }
    }
}

fn execute(cmd: &Command) -> Result<Outcome, CliError> {
    let (_, c) = cmd.parts();
    let cfg = c.config.as_deref();
    match cmd {
        Command::StripGeodesic(_) => strip_cmds::geodesic(load_config(cfg)?),
        Command::StripCore(_) => strip_cmds::core(load_config(cfg)?),
        Command::StripConvexity(_) => strip_cmds::convexity(load_config(cfg)?, c.seed),
        Command::TrackTransport(_) => track_cmds::transport_cmd(load_config(cfg)?, c.seed),
        Command::SurfaceLengths(_) => surface_cmds::lengths(load_config(cfg)?),
        Command::StretchScan(_) => surface_cmds::stretch(load_config(cfg)?),
        Command::EarthquakeScan(_) => surface_cmds::earthquake(load_config(cfg)?),
        Command::ThurstonEstimate(_) => surface_cmds::thurston(load_config(cfg)?, c.seed),
    }
}

fn run(cmd: &Command) -> Result<bool, CliError> {
    let (name, c) = cmd.parts();
    let outcome = match execute(cmd) {
        Ok(o) => o,
        Err(CliError::Failed(msg)) => {
            eprintln!("shear {name}: {msg}");
            return Ok(false);
        }
        Err(e) => return Err(e),
    };
    let header = json!({
        "schema": SCHEMA,
        "subcommand": name,
        "seed": c.seed,
        "config": c.config.as_deref().map(Path::to_string_lossy),
        "rows": outcome.table.rows.len(),
    });
    output::write(&outcome, header, &c.out, c.format)?;
    Ok(outcome.passed)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("shear {}: property check failed", cli.command.parts().0);
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("shear {}: {e}", cli.command.parts().0);
            ExitCode::from(2)
        }
    }
}
