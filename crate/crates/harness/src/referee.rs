//! The referee: samples the hats, hands each worker its players' windows and
//! scores the guesses.

use std::net::TcpListener;
use std::sync::atomic::{AtomicBool, Ordering};
use std::time::{Duration, Instant};

use nsgame_core::hatgame::{input_seed, sample_input, to_bitstring, ScoreKeeper};
use nsgame_core::{HatInput, InputLaw, RunStats};

use crate::error::{HarnessError, Result};
use crate::protocol::{Connection, WireMessage, PROTOCOL_VERSION};

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(10);

#[derive(Debug, Clone, PartialEq)]
pub struct RefereeConfig {
    pub players: usize,
    pub horizon: usize,
    pub law: InputLaw,
    /// Players per worker; worker `w` serves `w*block_size .. (w+1)*block_size`.
    pub block_size: usize,
    /// Run seed, as for an in-process run.
    pub seed: u64,
    pub timeout: Duration,
    pub checkpoints: Vec<usize>,
    pub retain: bool,
}

impl RefereeConfig {
    pub fn new(players: usize, law: InputLaw, block_size: usize, seed: u64) -> Self {
        Self {
            players,
            horizon: players,
            law,
            block_size,
            seed,
            timeout: DEFAULT_TIMEOUT,
            checkpoints: Vec::new(),
            retain: false,
        }
    }

    pub fn workers(&self) -> usize {
        self.players.div_ceil(self.block_size.max(1))
    }

    pub fn block(&self, worker: usize) -> (usize, usize) {
        let first = worker * self.block_size;
        (first, (first + self.block_size).min(self.players))
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(HarnessError::Core(nsgame_core::Error::Config(m)));
        if self.players == 0 {
            return bad("at least one player is required".into());
        }
        if self.block_size == 0 {
            return bad("block size must be positive".into());
        }
        if self.players > self.horizon {
            return bad(format!(
                "{} players exceed horizon {}",
                self.players, self.horizon
            ));
        }
        Ok(())
    }
}

struct Session {
    worker: usize,
    conn: Connection,
}

enum SessionEnd {
    Completed,
    Cancelled,
    Failed(HarnessError),
}

/// Runs one game over `listener`, returning the same statistics as
/// [`nsgame_core::hatgame::run_game`] with the workers' strategy and this seed.
pub fn referee_serve(listener: &TcpListener, config: &RefereeConfig) -> Result<RunStats> {
    config.validate()?;
    let input = sample_input(config.law, config.horizon, input_seed(config.seed))?;
    let no_guesses = || vec![None; config.players];
    let (mut sessions, latent) = match handshake(listener, config) {
        Ok(v) => v,
        Err(e) => {
            return Err(HarnessError::Aborted {
                cause: Box::new(e),
                guesses: no_guesses(),
            })
        }
    };

    let abort = AtomicBool::new(false);
    let mut guesses = no_guesses();
    let mut failure = None;
    std::thread::scope(|scope| {
        let handles: Vec<_> = sessions
            .iter_mut()
            .map(|s| {
                let (first, last) = config.block(s.worker);
                let (input, abort) = (&input, &abort);
                scope.spawn(move || {
                    let mut answers = vec![None; last - first];
                    let end = match serve_block(&mut s.conn, first, last, input, abort, &mut answers)
                    {
                        Ok(true) => SessionEnd::Completed,
                        Ok(false) => SessionEnd::Cancelled,
                        Err(e) => {
                            abort.store(true, Ordering::SeqCst);
                            s.conn.send_error(e.to_string());
                            SessionEnd::Failed(e)
                        }
                    };
                    (first, answers, end)
                })
            })
            .collect();
        for h in handles {
            let (first, answers, end) = h.join().expect("session thread panicked");
            guesses[first..first + answers.len()].copy_from_slice(&answers);
            if let SessionEnd::Failed(e) = end {
                failure.get_or_insert(e);
            }
        }
    });
    if abort.load(Ordering::SeqCst) {
        for s in &mut sessions {
            s.conn.send_error("run aborted");
        }
        let cause = failure.unwrap_or_else(|| HarnessError::Protocol("run cancelled".into()));
        return Err(HarnessError::Aborted {
            cause: Box::new(cause),
            guesses,
        });
    }

    let mut keeper = ScoreKeeper::new(config.players, &config.checkpoints, config.retain)?;
    for (j, g) in guesses.iter().enumerate() {
        keeper.record(g.expect("completed sessions answer every player"), input.bit(j));
    }
    let summary = keeper.finish(latent);
    for s in &mut sessions {
        let (first, last) = config.block(s.worker);
        let _ = (first..last)
            .try_for_each(|j| {
                s.conn.send(&WireMessage::Result {
                    player: j,
                    r: u8::from(guesses[j] == Some(input.bit(j))),
                })
            })
            .and_then(|_| s.conn.send(&WireMessage::Done { summary: summary.clone() }));
    }
    Ok(summary)
}

/// Accepts one connection per worker id and agrees on the shared latent state.
fn handshake(listener: &TcpListener, config: &RefereeConfig) -> Result<(Vec<Session>, Option<u64>)> {
    let workers = config.workers();
    let deadline = Instant::now() + config.timeout;
    let mut slots: Vec<Option<(Session, Option<u64>)>> = (0..workers).map(|_| None).collect();
    let mut joined = 0;
    listener.set_nonblocking(true)?;
    let result = (|| {
        while joined < workers {
            let stream = match listener.accept() {
                Ok((stream, _)) => stream,
                Err(e) if e.kind() == std::io::ErrorKind::WouldBlock => {
                    if Instant::now() >= deadline {
                        return Err(HarnessError::Timeout(format!(
                            "{joined} of {workers} workers connected"
                        )));
                    }
                    std::thread::sleep(Duration::from_millis(5));
                    continue;
                }
                Err(e) => return Err(e.into()),
            };
            stream.set_nonblocking(false)?;
            let mut conn = Connection::new(stream, config.timeout)?;
            // a bad hello costs that connection only
            match conn.recv() {
                Ok(WireMessage::Hello { version, worker, latent }) => {
                    if version != PROTOCOL_VERSION {
                        conn.send_error(format!(
                            "protocol version {version} unsupported, expected {PROTOCOL_VERSION}"
                        ));
                    } else if worker >= workers {
                        conn.send_error(format!("worker id {worker} outside 0..{workers}"));
                    } else if slots[worker].is_some() {
                        conn.send_error(format!("worker id {worker} already connected"));
                    } else {
                        let (first, last) = config.block(worker);
                        conn.send(&WireMessage::Welcome {
                            version: PROTOCOL_VERSION,
                            first,
                            last,
                        })?;
                        slots[worker] = Some((Session { worker, conn }, latent));
                        joined += 1;
                    }
                }
                Ok(other) => conn.send_error(format!("expected hello, got {}", other.kind())),
                Err(e) => conn.send_error(e.to_string()),
            }
        }
        Ok(())
    })();
    listener.set_nonblocking(false)?;
    result?;

    let mut sessions = Vec::with_capacity(workers);
    let mut latent = None;
    for (w, slot) in slots.into_iter().enumerate() {
        let (mut session, l) = slot.expect("every worker joined");
        if w == 0 {
            latent = l;
        } else if l != latent {
            session
                .conn
                .send_error("workers disagree on the run's latent state");
            return Err(HarnessError::Protocol(format!(
                "worker {w} reports latent state {l:?}, worker 0 reports {latent:?}"
            )));
        }
        sessions.push(session);
    }
    Ok((sessions, latent))
}

/// Assigns `last-1` down to `first`, one at a time. `Ok(false)` if another
/// session aborted the run first.
fn serve_block(
    conn: &mut Connection,
    first: usize,
    last: usize,
    input: &HatInput,
    abort: &AtomicBool,
    answers: &mut [Option<u8>],
) -> Result<bool> {
    let horizon = input.horizon();
    for player in (first..last).rev() {
        if abort.load(Ordering::SeqCst) {
            return Ok(false);
        }
        conn.send(&WireMessage::Assign {
            player,
            visible: to_bitstring(&input.bits()[player + 1..]),
        })?;
        loop {
            match conn.recv()? {
                WireMessage::Guess { player: p, bit } if p == player => {
                    if bit > 1 {
                        return Err(HarnessError::Protocol(format!(
                            "player {p} guessed {bit}, not a bit"
                        )));
                    }
                    answers[player - first] = Some(bit);
                    break;
                }
                WireMessage::Request { player: p, index } if p == player => {
                    if index <= player {
                        return Err(HarnessError::Isolation { player, index });
                    }
                    if index >= horizon {
                        return Err(HarnessError::Protocol(format!(
                            "x_{index} is beyond the horizon {horizon}"
                        )));
                    }
                    conn.send(&WireMessage::Reveal {
                        index,
                        bit: input.bit(index),
                    })?;
                }
                other => {
                    return Err(HarnessError::Protocol(format!(
                        "expected guess for player {player}, got {}",
                        other.to_line()
                    )))
                }
            }
        }
    }
    Ok(true)
}
