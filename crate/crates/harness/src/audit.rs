//! Transcript recording and the isolation audit.
//!
//! [`TranscriptProxy`] sits between workers and the referee and logs every
//! line in both directions, in forwarding order. [`audit_transcript`] replays
//! one connection's log and counts hat bits that reached the worker while it
//! still owed a guess for a player at or above that bit's index.

use std::io::{BufRead, BufReader, Write};
use std::net::{Shutdown, SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::Duration;

use nsgame_core::HatInput;
use serde::Serialize;

use crate::error::Result;
use crate::protocol::WireMessage;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Direction {
    ToWorker,
    ToReferee,
}

pub type Transcript = Vec<(Direction, String)>;

type Log = Arc<Mutex<Vec<Arc<Mutex<Transcript>>>>>;

pub struct TranscriptProxy {
    addr: SocketAddr,
    log: Log,
    stop: Arc<AtomicBool>,
    acceptor: Option<JoinHandle<()>>,
}

impl TranscriptProxy {
    /// Listens on an ephemeral local port and forwards to `upstream`.
    pub fn start(upstream: SocketAddr) -> Result<Self> {
        let listener = TcpListener::bind("127.0.0.1:0")?;
        listener.set_nonblocking(true)?;
        let addr = listener.local_addr()?;
        let log: Log = Arc::default();
        let stop = Arc::new(AtomicBool::new(false));
        let acceptor = {
            let (log, stop) = (log.clone(), stop.clone());
            std::thread::spawn(move || {
                while !stop.load(Ordering::SeqCst) {
                    match listener.accept() {
                        Ok((client, _)) => {
                            let _ = client.set_nonblocking(false);
                            if let Ok(server) = TcpStream::connect(upstream) {
                                let conv: Arc<Mutex<Transcript>> = Arc::default();
                                log.lock().unwrap().push(conv.clone());
                                splice(client, server, conv);
                            }
                        }
                        Err(_) => std::thread::sleep(Duration::from_millis(2)),
                    }
                }
            })
        };
        Ok(Self {
            addr,
            log,
            stop,
            acceptor: Some(acceptor),
        })
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    /// One transcript per proxied connection, in accept order.
    pub fn transcripts(&self) -> Vec<Transcript> {
        self.log
            .lock()
            .unwrap()
            .iter()
            .map(|c| c.lock().unwrap().clone())
            .collect()
    }
}

impl Drop for TranscriptProxy {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        if let Some(h) = self.acceptor.take() {
            let _ = h.join();
        }
    }
}

fn splice(client: TcpStream, server: TcpStream, conv: Arc<Mutex<Transcript>>) {
    let pump = |from: TcpStream, mut to: TcpStream, dir: Direction, conv: Arc<Mutex<Transcript>>| {
        std::thread::spawn(move || {
            let mut reader = BufReader::new(from);
            let mut line = String::new();
            while matches!(reader.read_line(&mut line), Ok(n) if n > 0) {
                // logged before forwarding, so the log respects causality
                conv.lock()
                    .unwrap()
                    .push((dir, line.trim_end_matches('\n').to_string()));
                if to.write_all(line.as_bytes()).is_err() {
                    break;
                }
                line.clear();
            }
            let _ = to.shutdown(Shutdown::Write);
        });
    };
    let (c2, s2) = match (client.try_clone(), server.try_clone()) {
        (Ok(c), Ok(s)) => (c, s),
        _ => return,
    };
    pump(server, c2, Direction::ToWorker, conv.clone());
    pump(client, s2, Direction::ToReferee, conv);
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct AuditReport {
    pub connections: usize,
    pub messages: usize,
    /// Hat bits carried by referee-to-worker messages.
    pub bits_sent: usize,
    /// Bits `x_k` sent while the worker still owed a guess for some player `j ≥ k`.
    pub out_of_window: usize,
    /// Window bits that differ from the true input, when it is supplied.
    pub mismatched: usize,
    pub violations: Vec<String>,
}

impl AuditReport {
    pub fn is_clean(&self) -> bool {
        self.out_of_window == 0 && self.mismatched == 0 && self.violations.is_empty()
    }

    pub fn merge(mut self, other: AuditReport) -> AuditReport {
        self.connections += other.connections;
        self.messages += other.messages;
        self.bits_sent += other.bits_sent;
        self.out_of_window += other.out_of_window;
        self.mismatched += other.mismatched;
        self.violations.extend(other.violations);
        self
    }
}

/// Audits one connection. `input`, when known, is also checked bit by bit.
pub fn audit_transcript(transcript: &[(Direction, String)], horizon: usize, input: Option<&HatInput>) -> AuditReport {
    let mut report = AuditReport {
        connections: 1,
        ..AuditReport::default()
    };
    let mut block: Option<(usize, usize)> = None;
    let mut answered: Vec<bool> = Vec::new();
    // highest player of the block not yet answered
    let pending = |block: Option<(usize, usize)>, answered: &[bool]| -> Option<usize> {
        let (first, _) = block?;
        answered.iter().rposition(|a| !a).map(|i| first + i)
    };
    for (dir, line) in transcript {
        report.messages += 1;
        let msg = match WireMessage::from_line(line) {
            Ok(m) => m,
            Err(e) => {
                report.violations.push(e.to_string());
                continue;
            }
        };
        let owed = pending(block, &answered);
        let leaks = |k: usize| owed.is_some_and(|j| k <= j);
        match (dir, msg) {
            (Direction::ToWorker, WireMessage::Welcome { first, last, .. }) => {
                block = Some((first, last));
                answered = vec![false; last.saturating_sub(first)];
            }
            (Direction::ToWorker, WireMessage::Assign { player, visible }) => {
                if block.is_none() {
                    report.violations.push(format!("assign for player {player} before welcome"));
                }
                report.bits_sent += visible.len();
                report.out_of_window += (player + 1..player + 1 + visible.len())
                    .filter(|&k| leaks(k) || k <= player)
                    .count();
                if player + 1 + visible.len() != horizon.max(player + 1) {
                    report.violations.push(format!(
                        "window for player {player} has {} bits, expected {}",
                        visible.len(),
                        horizon.saturating_sub(player + 1)
                    ));
                }
                if let Some(x) = input {
                    report.mismatched += visible
                        .bytes()
                        .enumerate()
                        .filter(|&(i, c)| {
                            let k = player + 1 + i;
                            k >= x.horizon() || x.bit(k) != c.wrapping_sub(b'0')
                        })
                        .count();
                }
            }
            (Direction::ToWorker, WireMessage::Reveal { index, .. }) => {
                report.bits_sent += 1;
                report.out_of_window += usize::from(leaks(index));
            }
            (Direction::ToWorker, WireMessage::Result { player, .. }) => {
                report.bits_sent += 1;
                report.out_of_window += usize::from(leaks(player));
            }
            (Direction::ToWorker, WireMessage::Done { .. }) => {
                if let Some(j) = owed {
                    report.out_of_window += 1;
                    report.violations.push(format!("done sent while player {j} was owed"));
                }
            }
            (Direction::ToReferee, WireMessage::Guess { player, .. }) => {
                if let Some((first, last)) = block {
                    if (first..last).contains(&player) {
                        answered[player - first] = true;
                    }
                }
            }
            _ => {}
        }
    }
    report
}

/// Audits every connection and sums the reports.
pub fn audit_all(transcripts: &[Transcript], horizon: usize, input: Option<&HatInput>) -> AuditReport {
    transcripts
        .iter()
        .map(|t| audit_transcript(t, horizon, input))
        .fold(AuditReport::default(), AuditReport::merge)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn to_worker(m: WireMessage) -> (Direction, String) {
        (Direction::ToWorker, m.to_line())
    }

    fn to_referee(m: WireMessage) -> (Direction, String) {
        (Direction::ToReferee, m.to_line())
    }

    #[test]
    fn descending_assignment_is_clean() {
        let t = vec![
            to_worker(WireMessage::Welcome { version: 1, first: 0, last: 2 }),
            to_worker(WireMessage::Assign { player: 1, visible: "01".into() }),
            to_referee(WireMessage::Guess { player: 1, bit: 0 }),
            to_worker(WireMessage::Assign { player: 0, visible: "101".into() }),
            to_referee(WireMessage::Guess { player: 0, bit: 0 }),
            to_worker(WireMessage::Result { player: 0, r: 1 }),
        ];
        let x = HatInput::from_bitstring("0101").unwrap();
        let r = audit_transcript(&t, 4, Some(&x));
        assert!(r.is_clean(), "{r:?}");
        assert_eq!(r.bits_sent, 6);
    }

    #[test]
    fn ascending_assignment_leaks() {
        let t = vec![
            to_worker(WireMessage::Welcome { version: 1, first: 0, last: 2 }),
            to_worker(WireMessage::Assign { player: 0, visible: "101".into() }),
            to_referee(WireMessage::Guess { player: 0, bit: 0 }),
        ];
        // x_1 reaches the worker before player 1 has answered
        assert_eq!(audit_transcript(&t, 4, None).out_of_window, 1);
    }

    #[test]
    fn early_results_and_shifted_windows_are_flagged() {
        let t = vec![
            to_worker(WireMessage::Welcome { version: 1, first: 2, last: 3 }),
            to_worker(WireMessage::Result { player: 2, r: 0 }),
            to_worker(WireMessage::Assign { player: 2, visible: "00".into() }),
        ];
        let r = audit_transcript(&t, 4, None);
        assert_eq!(r.out_of_window, 1);
        assert_eq!(r.violations.len(), 1);
        let x = HatInput::from_bitstring("0001").unwrap();
        assert_eq!(audit_transcript(&t, 4, Some(&x)).mismatched, 2);
    }
}
