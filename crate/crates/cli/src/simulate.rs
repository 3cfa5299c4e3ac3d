use std::fmt::Write as _;
use std::path::PathBuf;

use clap::Args;
use nsgame_core::concentration::LossCensus;
use nsgame_core::hatgame::{repeat_runs, trial_seed};
use nsgame_core::{GameConfig, InputLaw, RunStats, StrategySpec};
use serde::Serialize;
use serde_json::json;

use crate::{Failure, Outcome};

#[derive(Args)]
pub struct SimulateArgs {
    /// g | gj:J | d | e | random | majority | const:B
    #[arg(long)]
    strategy: StrategySpec,
    /// uniform[:p] | evzero:M[:p]
    #[arg(long, default_value = "uniform")]
    input: InputLaw,
    #[arg(long)]
    players: usize,
    /// Defaults to the player count.
    #[arg(long)]
    horizon: Option<usize>,
    #[arg(long, default_value_t = 1)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Comma-separated k at which S_k is recorded; defaults to 1, 10, 100, ... and n.
    #[arg(long, value_delimiter = ',')]
    checkpoints: Option<Vec<usize>>,
    #[arg(long)]
    out: PathBuf,
    /// Overwrite existing outputs.
    #[arg(long)]
    force: bool,
    /// Also write a last_loss.csv histogram.
    #[arg(long)]
    histogram: bool,
}

#[derive(Serialize)]
struct TrialSummary {
    trial: usize,
    n: usize,
    #[serde(rename = "W_n")]
    win_ratio: f64,
    #[serde(rename = "S_n")]
    sum: i64,
    last_loss: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    latent_index: Option<u64>,
}

fn default_checkpoints(n: usize) -> Vec<usize> {
    let mut ks: Vec<usize> = std::iter::successors(Some(1usize), |k| k.checked_mul(10))
        .take_while(|&k| k < n)
        .collect();
    ks.push(n);
    ks
}

fn trajectories(runs: &[RunStats]) -> String {
    let mut csv = String::from("trial,k,S_k,W_k\n");
    for (t, r) in runs.iter().enumerate() {
        for c in &r.checkpoints {
            writeln!(csv, "{t},{},{},{}", c.k, c.sum, c.win_ratio()).unwrap();
        }
    }
    csv
}

pub fn run(args: SimulateArgs) -> Outcome {
    let horizon = args.horizon.unwrap_or(args.players);
    if args.players == 0 {
        return Err(Failure::Usage("--players must be positive".into()));
    }
    if args.players > horizon {
        return Err(Failure::Usage(format!(
            "--players {} exceeds --horizon {horizon}",
            args.players
        )));
    }
    if let InputLaw::EventuallyZero { m, .. } = args.input {
        if m > horizon {
            return Err(Failure::Usage(format!("evzero:{m} exceeds the horizon {horizon}")));
        }
    }
    let outputs = ["summary.json", "trajectories.csv", "last_loss.csv"].map(|f| args.out.join(f));
    if !args.force {
        if let Some(existing) = outputs.iter().find(|p| p.exists()) {
            return Err(Failure::Usage(format!(
                "{} exists; pass --force to overwrite",
                existing.display()
            )));
        }
    }

    let config = GameConfig {
        strategy: args.strategy,
        law: args.input,
        horizon,
        players: args.players,
        checkpoints: args.checkpoints.clone().unwrap_or_else(|| default_checkpoints(args.players)),
        retain: false,
    };
    let runs = repeat_runs(&config, args.trials, args.seed)?;

    let trials: Vec<TrialSummary> = runs
        .iter()
        .enumerate()
        .map(|(t, r)| TrialSummary {
            trial: t,
            n: r.players,
            win_ratio: r.win_ratio(),
            sum: r.sum,
            last_loss: r.last_loss,
            latent_index: r.latent_index,
        })
        .collect();
    let mean = trials.iter().map(|t| t.win_ratio).sum::<f64>() / trials.len() as f64;
    let aggregate = json!({
        "trials": trials.len(),
        "mean_W_n": mean,
        "min_W_n": trials.iter().map(|t| t.win_ratio).fold(f64::INFINITY, f64::min),
        "max_last_loss": trials.iter().filter_map(|t| t.last_loss).max(),
    });
    let summary = json!({
        "strategy": args.strategy.to_string(),
        "input": args.input.to_string(),
        "players": args.players,
        "horizon": horizon,
        "seed": args.seed,
        "trial_seeds": (0..args.trials as u64).map(|t| trial_seed(args.seed, t)).collect::<Vec<_>>(),
        "aggregate": aggregate,
        "runs": trials,
    });

    std::fs::create_dir_all(&args.out)?;
    let mut text = serde_json::to_string_pretty(&summary).expect("json values serialize");
    text.push('\n');
    std::fs::write(&outputs[0], text)?;
    std::fs::write(&outputs[1], trajectories(&runs))?;
    if args.histogram {
        let census = LossCensus::from_losses(runs.iter().map(|r| r.last_loss));
        std::fs::write(&outputs[2], census.to_csv())?;
    }
    crate::print_json(&aggregate);
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_grid_ends_at_n() {
        assert_eq!(default_checkpoints(1), vec![1]);
        assert_eq!(default_checkpoints(10), vec![1, 10]);
        assert_eq!(default_checkpoints(250), vec![1, 10, 100, 250]);
    }
}
