//! A worker: answers the referee's assignments for one block of players.

use std::net::TcpStream;
use std::time::{Duration, Instant};

use nsgame_core::hatgame::{parse_bitstring, strategy_seed, Visible};
use nsgame_core::{RunStats, StrategySpec};

use crate::error::{HarnessError, Result};
use crate::protocol::{Connection, WireMessage, PROTOCOL_VERSION};
use crate::referee::DEFAULT_TIMEOUT;

#[derive(Debug, Clone, PartialEq)]
pub struct WorkerConfig {
    pub strategy: StrategySpec,
    /// `host:port` of the referee.
    pub endpoint: String,
    /// Run seed; the latent state is drawn from it exactly as in-process.
    pub seed: u64,
    pub id: usize,
    pub timeout: Duration,
}

impl WorkerConfig {
    pub fn new(strategy: StrategySpec, endpoint: impl Into<String>, seed: u64, id: usize) -> Self {
        Self {
            strategy,
            endpoint: endpoint.into(),
            seed,
            id,
            timeout: DEFAULT_TIMEOUT,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorkerReport {
    pub first: usize,
    pub last: usize,
    /// `(player, r)` as released by the referee.
    pub results: Vec<(usize, u8)>,
    pub summary: RunStats,
}

fn connect(endpoint: &str, timeout: Duration) -> Result<TcpStream> {
    let deadline = Instant::now() + timeout;
    loop {
        match TcpStream::connect(endpoint) {
            Ok(s) => return Ok(s),
            Err(e) if Instant::now() >= deadline => {
                return Err(HarnessError::ConnectionLost(format!(
                    "cannot reach referee at {endpoint}: {e}"
                )))
            }
            Err(_) => std::thread::sleep(Duration::from_millis(20)),
        }
    }
}

pub fn worker_run(config: &WorkerConfig) -> Result<WorkerReport> {
    let strategy = config.strategy.instantiate(strategy_seed(config.seed));
    let mut conn = Connection::new(connect(&config.endpoint, config.timeout)?, config.timeout)?;
    conn.send(&WireMessage::Hello {
        version: PROTOCOL_VERSION,
        worker: config.id,
        latent: strategy.latent_index(),
    })?;
    let (first, last) = match conn.recv()? {
        WireMessage::Welcome { version, first, last } if version == PROTOCOL_VERSION && first <= last => {
            (first, last)
        }
        WireMessage::Error { message } => return Err(HarnessError::Remote(message)),
        other => {
            let e = HarnessError::Protocol(format!("expected welcome, got {}", other.to_line()));
            conn.send_error(e.to_string());
            return Err(e);
        }
    };

    let mut answered = vec![false; last - first];
    let mut results = Vec::with_capacity(last - first);
    let outcome = (|| loop {
        match conn.recv()? {
            WireMessage::Assign { player, visible } => {
                if !(first..last).contains(&player) || answered[player - first] {
                    return Err(HarnessError::Protocol(format!(
                        "unexpected assignment of player {player} to block {first}..{last}"
                    )));
                }
                let bits = parse_bitstring(&visible)
                    .map_err(|e| HarnessError::Protocol(format!("bad window: {e}")))?;
                let bit = strategy.guess(player, &Visible::new(player + 1, &bits))?;
                answered[player - first] = true;
                conn.send(&WireMessage::Guess { player, bit })?;
            }
            WireMessage::Result { player, r } => results.push((player, r)),
            WireMessage::Done { summary } => {
                if answered.iter().any(|a| !a) {
                    return Err(HarnessError::Protocol("done before every player was assigned".into()));
                }
                return Ok(summary);
            }
            WireMessage::Error { message } => return Err(HarnessError::Remote(message)),
            other => {
                return Err(HarnessError::Protocol(format!(
                    "unexpected {} message",
                    other.kind()
                )))
            }
        }
    })();
    match outcome {
        Ok(summary) => Ok(WorkerReport {
            first,
            last,
            results,
            summary,
        }),
        Err(e) => {
            if matches!(e, HarnessError::Protocol(_) | HarnessError::Core(_)) {
                conn.send_error(e.to_string());
            }
            Err(e)
        }
    }
}
