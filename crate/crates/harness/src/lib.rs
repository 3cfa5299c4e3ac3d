//! Networked hat game: a referee process and worker processes that only ever
//! see the hats strictly after the players they serve.
//!
//! Messages are newline-delimited JSON over TCP (see [`protocol`]). Each worker
//! serves a contiguous block of players; within a block the referee assigns
//! players from the highest index down, so a worker never holds a hat of a
//! player it has not yet answered for. Results are released only after every
//! guess of the run is in.

pub mod audit;
pub mod error;
pub mod protocol;
pub mod referee;
pub mod worker;

pub use audit::{audit_transcript, AuditReport, Direction, TranscriptProxy};
pub use error::{HarnessError, Result};
pub use protocol::{WireMessage, PROTOCOL_VERSION};
pub use referee::{referee_serve, RefereeConfig};
pub use worker::{worker_run, WorkerConfig, WorkerReport};
