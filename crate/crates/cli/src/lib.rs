//! Command-line driver: instance generation, exact and heuristic solves,
//! sensitivity sweeps, frame error curves, method comparison, energy
//! calibration and round traces. Every command writes CSV or JSON files into
//! `--out` and returns a short text summary.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
pub mod settings;

use std::ffi::OsString;

use clap::{Arg, ArgAction, Command};
use thiserror::Error;

pub use settings::{Settings, SEED_ENV};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("infeasible: node {node} cannot be covered by any eligible master")]
    Infeasible { node: usize },
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Infeasible { .. } => 3,
            CliError::Runtime(_) => 1,
        }
    }
}

impl From<piconet_core::Error> for CliError {
    fn from(e: piconet_core::Error) -> Self {
        use piconet_core::Error as E;
        match e {
            E::Infeasible { node } => CliError::Infeasible { node },
            E::Io(_) | E::UndefinedRatio(_) => CliError::Runtime(e.to_string()),
            other => CliError::Config(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

fn opt(id: &'static str, value: &'static str, help: &'static str) -> Arg {
    Arg::new(id).long(id).value_name(value).help(help)
}

fn switch(id: &'static str, help: &'static str) -> Arg {
    Arg::new(id).long(id).action(ArgAction::SetTrue).help(help)
}

fn common(cmd: Command) -> Command {
    cmd.arg(opt("config", "FILE", "key = value file; flags override it"))
        .arg(opt("out", "DIR", "output directory [default: .]"))
}

fn generation(cmd: Command, n_help: &'static str) -> Command {
    cmd.arg(opt("n", "N", n_help))
        .arg(opt("area", "WxH", "field size in meters [default: 10x20]"))
        .arg(opt("seed", "SEED", "random seed [default: 1]; PICONET_SEED overrides"))
        .arg(opt("wifi-prob", "P", "probability a node has Wi-Fi [default: 1]"))
        .arg(opt("battery-low", "PCT", "lowest battery [default: 50]"))
        .arg(opt("battery-high", "PCT", "highest battery [default: 100]"))
}

fn model_args(cmd: Command) -> Command {
    cmd.arg(opt("f-cost", "F", "fixed cost per master [default: 100]"))
        .arg(opt("d-max", "M", "master range in meters [default: 10]"))
        .arg(opt("threshold", "PCT", "master battery threshold [default: 50]"))
}

fn fer_args(cmd: Command) -> Command {
    cmd.arg(opt("radius", "M", "interference radius [default: 3.25]"))
        .arg(opt("slots", "K", "slots per placement [default: 10000]"))
        .arg(opt("placements", "K", "random placements [default: 20]"))
}

pub fn command() -> Command {
    Command::new("piconet")
        .about("Cluster formation, interference and energy studies for Bluetooth/Wi-Fi tracking networks")
        .subcommand_required(true)
        .arg_required_else_help(true)
        .subcommand(common(generation(Command::new("gen").about("Generate a random instance file"), "node count [default: 100]")))
        .subcommand(common(model_args(
            Command::new("solve")
                .about("Solve one scenario on an instance file")
                .arg(opt("instance", "FILE", "instance JSON"))
                .arg(opt("scenario", "1|2|3", "1 distance, 2 cluster count, 3 combined [default: 3]"))
                .arg(opt("method", "METHOD", "exact, heuristic or export-lp [default: exact]"))
                .arg(opt("time-limit", "SECS", "exact solver budget [default: 60]")),
        )))
        .subcommand(common(model_args(generation(
            Command::new("sweep")
                .about("Sweep d_max or F = 10^E with the combined objective")
                .arg(opt("instance", "FILE", "instance JSON; generated from --n/--seed otherwise"))
                .arg(opt("sweep", "dmax|fexp", "swept quantity [default: dmax]"))
                .arg(opt("values", "LIST", "comma-separated values [default: 2..10 or 0..10]"))
                .arg(opt("time-limit", "SECS", "per-point solver budget [default: 60]")),
            "node count [default: 60]",
        ))))
        .subcommand(common(fer_args(
            Command::new("fer")
                .about("Frame error rate curve over piconet counts")
                .arg(opt("n-clusters", "RANGE", "piconet counts: A..B, A,B,C or N [default: 2..30]"))
                .arg(switch("no-wifi", "disable the Wi-Fi interferer"))
                .arg(opt("wifi-activity", "P", "Wi-Fi slot occupancy [default: 0.2]"))
                .arg(opt("wifi-width", "K", "Wi-Fi band width in channels [default: 22]"))
                .arg(switch("forced", "count every interferer regardless of distance, no Wi-Fi"))
                .arg(opt("channels", "K", "hop channels [default: 79]"))
                .arg(opt("seed", "SEED", "path seed [default: 1]; PICONET_SEED overrides")),
        )))
        .subcommand(common(fer_args(model_args(generation(
            Command::new("compare")
                .about("Direct vs heuristic vs exact energy, throughput and efficiency")
                .arg(opt("reps", "K", "seeds per node count [default: 10]"))
                .arg(opt("rounds", "R", "rounds [default: 1]"))
                .arg(opt("exact-limit", "N", "largest n solved exactly [default: 60]"))
                .arg(opt("time-limit", "SECS", "exact solver budget [default: 60]"))
                .arg(opt("energy", "FILE", "energy parameters JSON [default: built-in calibration]")),
            "node counts: A..B, A,B,C or N [default: 25,50,75,100]",
        )))))
        .subcommand(common(
            Command::new("calibrate")
                .about("Fit energy rates to an energy comparison table")
                .arg(opt("table", "FILE", "CSV n,te_heuristic,te_direct,te_optimal[,clusters] [default: built-in]")),
        ))
        .subcommand(common(model_args(generation(
            Command::new("trace")
                .about("Re-cluster over rounds with mobility and battery drain")
                .arg(opt("instance", "FILE", "instance JSON; generated from --n/--seed otherwise"))
                .arg(opt("rounds", "R", "rounds [default: 10]"))
                .arg(opt("mobility", "static|waypoint", "movement model [default: static]"))
                .arg(opt("speed-min", "M", "slowest speed per round [default: 0]"))
                .arg(opt("speed-max", "M", "fastest speed per round [default: 1]"))
                .arg(opt("pause-prob", "P", "chance to stay put in a round [default: 0]"))
                .arg(opt("drain-master", "PCT", "battery points per round as master"))
                .arg(opt("drain-member", "PCT", "battery points per round as member"))
                .arg(opt("drain-idle", "PCT", "battery points per round when uncovered"))
                .arg(opt("battery-capacity", "J", "capacity behind default drain rates [default: 100]"))
                .arg(opt("energy", "FILE", "energy parameters JSON [default: built-in calibration]")),
            "node count [default: 60]",
        ))))
}

/// Parses `args` (program name first) and runs the chosen command. Returns
/// the text to print on success.
pub fn run<I, T>(args: I, env_seed: Option<&str>) -> Result<String, CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let mut cmd = command();
    let matches = match cmd.try_get_matches_from_mut(args) {
        Ok(m) => m,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => Ok(e.to_string()),
                _ => Err(CliError::Config(e.to_string())),
            };
        }
    };
    let (name, sub_matches) = matches.subcommand().expect("subcommand is required");
    let sub = cmd.find_subcommand(name).expect("matched subcommand exists");
    let settings = Settings::from_matches(sub, sub_matches, env_seed)?;
    match name {
        "gen" => commands::generate(&settings),
        "solve" => commands::solve(&settings),
        "sweep" => commands::sweep(&settings),
        "fer" => commands::fer(&settings),
        "compare" => commands::compare(&settings),
        "calibrate" => commands::calibrate(&settings),
        "trace" => commands::trace(&settings),
        _ => unreachable!("unknown subcommand {name}"),
    }
}
