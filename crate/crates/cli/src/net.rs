use std::net::TcpListener;
use std::process::{Child, Command, Stdio};
use std::time::Duration;

use clap::Args;
use nsgame_core::{InputLaw, StrategySpec};
use nsgame_harness::{referee_serve, worker_run, HarnessError, RefereeConfig, WorkerConfig};

use crate::{Failure, Outcome};

#[derive(Args, Clone)]
pub struct RunArgs {
    #[arg(long)]
    players: usize,
    /// Defaults to the player count.
    #[arg(long)]
    horizon: Option<usize>,
    #[arg(long, default_value = "uniform")]
    input: InputLaw,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Players per worker.
    #[arg(long, default_value_t = 250)]
    block_size: usize,
    /// Seconds to wait for any single message.
    #[arg(long, default_value_t = 10.0)]
    timeout: f64,
    #[arg(long, value_delimiter = ',')]
    checkpoints: Vec<usize>,
    /// Include per-player guesses and results in the output.
    #[arg(long)]
    retain: bool,
}

#[derive(Args)]
pub struct RefereeArgs {
    #[arg(long, default_value = "127.0.0.1:0")]
    listen: String,
    #[command(flatten)]
    run: RunArgs,
}

#[derive(Args)]
pub struct WorkerArgs {
    /// Referee address, host:port.
    #[arg(long)]
    connect: String,
    #[arg(long)]
    strategy: StrategySpec,
    /// Run seed shared with the referee.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0)]
    id: usize,
    #[arg(long, default_value_t = 10.0)]
    timeout: f64,
}

#[derive(Args)]
pub struct HarnessArgs {
    #[arg(long)]
    strategy: StrategySpec,
    #[command(flatten)]
    run: RunArgs,
}

fn timeout(secs: f64) -> Result<Duration, Failure> {
    Duration::try_from_secs_f64(secs)
        .ok()
        .filter(|d| !d.is_zero())
        .ok_or_else(|| Failure::Usage(format!("invalid timeout {secs}")))
}

impl RunArgs {
    fn config(&self) -> Result<RefereeConfig, Failure> {
        Ok(RefereeConfig {
            players: self.players,
            horizon: self.horizon.unwrap_or(self.players),
            law: self.input,
            block_size: self.block_size,
            seed: self.seed,
            timeout: timeout(self.timeout)?,
            checkpoints: self.checkpoints.clone(),
            retain: self.retain,
        })
    }
}

fn harness_failure(e: HarnessError) -> Failure {
    match e.root() {
        HarnessError::Core(c) => Failure::Usage(c.to_string()),
        _ => Failure::Violation(e.to_string()),
    }
}

fn serve(listener: &TcpListener, config: &RefereeConfig) -> Outcome {
    let stats = referee_serve(listener, config).map_err(harness_failure)?;
    crate::print_json(&serde_json::to_value(&stats).expect("stats serialize"));
    Ok(true)
}

pub fn referee(args: RefereeArgs) -> Outcome {
    let config = args.run.config()?;
    let listener = TcpListener::bind(&args.listen)?;
    eprintln!(
        "listening on {} for {} workers",
        listener.local_addr()?,
        config.workers()
    );
    serve(&listener, &config)
}

pub fn worker(args: WorkerArgs) -> Outcome {
    let config = WorkerConfig {
        strategy: args.strategy,
        endpoint: args.connect,
        seed: args.seed,
        id: args.id,
        timeout: timeout(args.timeout)?,
    };
    worker_run(&config).map_err(|e| Failure::Violation(format!("worker {}: {e}", config.id)))?;
    Ok(true)
}

pub fn harness(args: HarnessArgs) -> Outcome {
    let config = args.run.config()?;
    if config.players == 0 || config.block_size == 0 {
        return Err(Failure::Usage("--players and --block-size must be positive".into()));
    }
    let listener = TcpListener::bind("127.0.0.1:0")?;
    let addr = listener.local_addr()?.to_string();
    let exe = std::env::current_exe()?;
    let mut children: Vec<Child> = Vec::new();
    for id in 0..config.workers() {
        let child = Command::new(&exe)
            .arg("worker")
            .args(["--connect", &addr])
            .args(["--strategy", &args.strategy.to_string()])
            .args(["--seed", &config.seed.to_string()])
            .args(["--id", &id.to_string()])
            .args(["--timeout", &args.run.timeout.to_string()])
            .stdin(Stdio::null())
            .stdout(Stdio::null())
            .spawn();
        match child {
            Ok(c) => children.push(c),
            Err(e) => {
                for c in &mut children {
                    let _ = c.kill();
                    let _ = c.wait();
                }
                return Err(e.into());
            }
        }
    }
    let outcome = serve(&listener, &config);
    let mut workers_ok = true;
    for mut c in children {
        if outcome.is_err() {
            let _ = c.kill();
        }
        workers_ok &= c.wait().map(|s| s.success()).unwrap_or(false);
    }
    match outcome {
        Ok(_) if !workers_ok => Err(Failure::Violation("a worker process failed".into())),
        other => other,
    }
}
