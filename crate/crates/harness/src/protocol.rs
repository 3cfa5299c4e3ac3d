//! Wire format: one JSON object per `'\n'`-terminated line, tagged by `"type"`.
//!
//! ```text
//! worker  -> referee  {"type":"hello","version":1,"worker":0,"latent":null}
//! referee -> worker   {"type":"welcome","version":1,"first":0,"last":250}
//! referee -> worker   {"type":"assign","player":249,"visible":"0110..."}
//! worker  -> referee  {"type":"guess","player":249,"bit":0}
//! referee -> worker   {"type":"result","player":0,"r":1}
//! referee -> worker   {"type":"done","summary":{...}}
//! ```
//!
//! `visible` holds `x_{player+1} .. x_{H-1}`. `request`/`reveal` let a worker
//! ask for a single hat; the referee only answers for indices above the player.

use std::io::{BufRead, BufReader, ErrorKind, Write};
use std::net::TcpStream;
use std::time::Duration;

use nsgame_core::RunStats;
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

pub const PROTOCOL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum WireMessage {
    Hello {
        version: u32,
        worker: usize,
        latent: Option<u64>,
    },
    Welcome {
        version: u32,
        first: usize,
        last: usize,
    },
    Assign {
        player: usize,
        visible: String,
    },
    Guess {
        player: usize,
        bit: u8,
    },
    Request {
        player: usize,
        index: usize,
    },
    Reveal {
        index: usize,
        bit: u8,
    },
    Result {
        player: usize,
        r: u8,
    },
    Done {
        summary: RunStats,
    },
    Error {
        message: String,
    },
}

impl WireMessage {
    pub fn kind(&self) -> &'static str {
        match self {
            WireMessage::Hello { .. } => "hello",
            WireMessage::Welcome { .. } => "welcome",
            WireMessage::Assign { .. } => "assign",
            WireMessage::Guess { .. } => "guess",
            WireMessage::Request { .. } => "request",
            WireMessage::Reveal { .. } => "reveal",
            WireMessage::Result { .. } => "result",
            WireMessage::Done { .. } => "done",
            WireMessage::Error { .. } => "error",
        }
    }

    /// Serialized form without the trailing newline.
    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("wire messages serialize")
    }

    pub fn from_line(line: &str) -> Result<Self> {
        serde_json::from_str(line)
            .map_err(|e| HarnessError::Protocol(format!("malformed line {:?}: {e}", clip(line))))
    }
}

fn clip(line: &str) -> String {
    const MAX: usize = 80;
    if line.len() <= MAX {
        line.to_string()
    } else {
        let mut end = MAX;
        while !line.is_char_boundary(end) {
            end -= 1;
        }
        format!("{}...", &line[..end])
    }
}

/// A line-framed connection with a per-read timeout.
pub struct Connection {
    reader: BufReader<TcpStream>,
    writer: TcpStream,
    peer: String,
}

impl Connection {
    pub fn new(stream: TcpStream, timeout: Duration) -> Result<Self> {
        stream.set_read_timeout(Some(timeout))?;
        stream.set_write_timeout(Some(timeout))?;
        stream.set_nodelay(true)?;
        let peer = stream
            .peer_addr()
            .map(|a| a.to_string())
            .unwrap_or_else(|_| "?".into());
        Ok(Self {
            reader: BufReader::new(stream.try_clone()?),
            writer: stream,
            peer,
        })
    }

    pub fn peer(&self) -> &str {
        &self.peer
    }

    pub fn send(&mut self, msg: &WireMessage) -> Result<()> {
        let mut line = msg.to_line();
        line.push('\n');
        self.writer.write_all(line.as_bytes()).map_err(|e| self.io_error(e))
    }

    pub fn recv(&mut self) -> Result<WireMessage> {
        let mut line = String::new();
        match self.reader.read_line(&mut line) {
            Ok(0) => Err(HarnessError::ConnectionLost(format!("{} closed the connection", self.peer))),
            Ok(_) => {
                if !line.ends_with('\n') {
                    return Err(HarnessError::ConnectionLost(format!(
                        "{} closed the connection mid-line",
                        self.peer
                    )));
                }
                WireMessage::from_line(line.trim_end_matches(['\n', '\r']))
            }
            Err(e) if e.kind() == ErrorKind::InvalidData => {
                Err(HarnessError::Protocol(format!("non-UTF-8 line from {}", self.peer)))
            }
            Err(e) => Err(self.io_error(e)),
        }
    }

    /// Best effort: tells the peer why the connection is being dropped.
    pub fn send_error(&mut self, message: impl Into<String>) {
        let _ = self.send(&WireMessage::Error {
            message: message.into(),
        });
    }

    fn io_error(&self, e: std::io::Error) -> HarnessError {
        match e.kind() {
            ErrorKind::WouldBlock | ErrorKind::TimedOut => {
                HarnessError::Timeout(format!("no message from {}", self.peer))
            }
            ErrorKind::BrokenPipe | ErrorKind::ConnectionReset | ErrorKind::ConnectionAborted => {
                HarnessError::ConnectionLost(format!("{}: {e}", self.peer))
            }
            _ => HarnessError::Io(e),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lines_are_tagged_json() {
        let m = WireMessage::Assign {
            player: 3,
            visible: "0000".into(),
        };
        assert_eq!(m.to_line(), r#"{"type":"assign","player":3,"visible":"0000"}"#);
        let g: WireMessage = WireMessage::from_line(r#"{"type":"guess","player":3,"bit":0}"#).unwrap();
        assert_eq!(g, WireMessage::Guess { player: 3, bit: 0 });
        assert_eq!(
            WireMessage::from_line(r#"{"type":"result","player":1,"r":1}"#).unwrap(),
            WireMessage::Result { player: 1, r: 1 }
        );
    }

    #[test]
    fn rejects_unknown_types_and_fields() {
        assert!(WireMessage::from_line(r#"{"type":"shout"}"#).is_err());
        assert!(WireMessage::from_line(r#"{"type":"guess","player":1,"bit":0,"x":1}"#).is_err());
        assert!(WireMessage::from_line("not json").is_err());
    }

    #[test]
    fn every_kind_round_trips() {
        let summary = RunStats {
            players: 2,
            wins: 1,
            sum: 0,
            last_loss: Some(1),
            checkpoints: vec![],
            latent_index: Some(4),
            guesses: None,
            results: None,
        };
        let all = [
            WireMessage::Hello { version: 1, worker: 2, latent: None },
            WireMessage::Welcome { version: 1, first: 0, last: 5 },
            WireMessage::Assign { player: 0, visible: String::new() },
            WireMessage::Guess { player: 0, bit: 1 },
            WireMessage::Request { player: 0, index: 3 },
            WireMessage::Reveal { index: 3, bit: 1 },
            WireMessage::Result { player: 0, r: 0 },
            WireMessage::Done { summary },
            WireMessage::Error { message: "x".into() },
        ];
        for m in all {
            let line = m.to_line();
            assert!(!line.contains('\n'));
            assert!(line.contains(&format!(r#""type":"{}""#, m.kind())));
            assert_eq!(WireMessage::from_line(&line).unwrap(), m);
        }
    }
}
