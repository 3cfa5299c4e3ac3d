//! `nsgame`: no-signalling checks, hat-game simulations and reports.
//!
//! Exit codes: 0 pass, 1 fail or violation, 2 usage or validation error.

mod net;
mod simulate;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use nsgame_core::concentration::{exact_expected_wins, verify_concentration, win_set, Verdict};
use nsgame_core::modelfile::{measure_json, parse_model, witness_json};
use nsgame_core::{is_local, is_no_signalling, is_no_signalling_fast, LocalVerdict, NsVerdict, StrategySpec};
use num_rational::Ratio;
use serde_json::json;

#[derive(Parser)]
#[command(name = "nsgame", version, about = "No-signalling models and the infinite hat game")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a model file for no-signalling.
    CheckNs {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
        /// Compare only inputs differing in one party.
        #[arg(long)]
        fast: bool,
    },
    /// Decide whether a model has a local hidden-variable explanation.
    CheckLocal {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
    },
    /// Play the hat game and write summary.json and trajectories.csv.
    Simulate(simulate::SimulateArgs),
    /// Compare |S_n| exceedances with the Azuma bound under fair hats.
    VerifyAzuma {
        #[arg(long)]
        strategy: StrategySpec,
        #[arg(long)]
        players: usize,
        #[arg(long, default_value_t = 1000)]
        trials: usize,
        #[arg(long, default_value_t = 0.05)]
        delta: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Exact expected wins of a deterministic strategy by enumeration.
    Oracle {
        #[arg(long)]
        strategy: StrategySpec,
        #[arg(long)]
        players: usize,
    },
    /// Serve one networked run and print its statistics.
    Referee(net::RefereeArgs),
    /// Play a block of players for a networked run.
    Worker(net::WorkerArgs),
    /// Run a referee here with one worker process per block.
    Harness(net::HarnessArgs),
}

/// Common failure for a command: exit 1 for violations, 2 for bad input.
pub enum Failure {
    Violation(String),
    Usage(String),
}

impl From<nsgame_core::Error> for Failure {
    fn from(e: nsgame_core::Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

pub type Outcome = Result<bool, Failure>;

fn print_json(v: &serde_json::Value) {
    use std::io::Write;
    // a closed stdout (e.g. piped into `head`) is not an error of the command
    let _ = writeln!(
        std::io::stdout().lock(),
        "{}",
        serde_json::to_string_pretty(v).expect("json values serialize")
    );
}

fn read_model(path: &PathBuf) -> Result<nsgame_core::EmpiricalModel, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    parse_model(&text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn check_ns(model: PathBuf, tol: f64, fast: bool) -> Outcome {
    let m = read_model(&model)?;
    let verdict = if fast {
        is_no_signalling_fast(&m, tol)?
    } else {
        is_no_signalling(&m, tol)?
    };
    let checker = if fast { "fast" } else { "full" };
    match &verdict {
        NsVerdict::Pass => print_json(&json!({"verdict": "pass", "checker": checker, "tol": tol})),
        NsVerdict::Fail(w) => print_json(&json!({
            "verdict": "fail",
            "checker": checker,
            "tol": tol,
            "witness": witness_json(m.scenario(), w),
        })),
    }
    Ok(verdict.passed())
}

fn check_local(model: PathBuf, tol: f64) -> Outcome {
    let m = read_model(&model)?;
    match is_local(&m, tol)? {
        LocalVerdict::Local(mu) => {
            print_json(&json!({
                "verdict": "pass",
                "tol": tol,
                "certificate": measure_json(m.scenario(), &mu),
            }));
            Ok(true)
        }
        LocalVerdict::NonLocal { deviation } => {
            print_json(&json!({"verdict": "fail", "tol": tol, "deviation": deviation}));
            Ok(false)
        }
    }
}

fn verify_azuma(strategy: StrategySpec, players: usize, trials: usize, delta: f64, seed: u64) -> Outcome {
    let report = verify_concentration(strategy, players, trials, delta, seed)?;
    print_json(&serde_json::to_value(&report).expect("reports serialize"));
    Ok(report.verdict == Verdict::Pass)
}

fn oracle(strategy: StrategySpec, players: usize) -> Outcome {
    let exact = exact_expected_wins(strategy, players)?;
    let half = Ratio::new(1u64, 2);
    let mut per_player = Vec::with_capacity(players);
    let mut all_half = true;
    for j in 0..players {
        let g = win_set(strategy, j, players)?;
        all_half &= g.measure() == half;
        per_player.push(json!({"player": j, "wins": g.len(), "measure": g.measure().to_string()}));
    }
    let expected = exact.expected();
    let is_half_n = expected == Ratio::new(players as u64, 2);
    print_json(&json!({
        "strategy": strategy.to_string(),
        "players": players,
        "expected_wins": expected.to_string(),
        "expected_is_half_n": is_half_n,
        "win_sets": per_player,
    }));
    Ok(is_half_n && all_half)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::CheckNs { model, tol, fast } => check_ns(model, tol, fast),
        Command::CheckLocal { model, tol } => check_local(model, tol),
        Command::Simulate(args) => simulate::run(args),
        Command::VerifyAzuma { strategy, players, trials, delta, seed } => {
            verify_azuma(strategy, players, trials, delta, seed)
        }
        Command::Oracle { strategy, players } => oracle(strategy, players),
        Command::Referee(args) => net::referee(args),
        Command::Worker(args) => net::worker(args),
        Command::Harness(args) => net::harness(args),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Failure::Violation(msg)) => {
            eprintln!("nsgame: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("nsgame: {msg}");
            ExitCode::from(2)
        }
    }
}
