//! Mock LoRaWAN network server.
//!
//! Packets are kept in a [`PacketStore`] fed from base-station log lines
//! (`ts<TAB>dev_eui<TAB>fcnt<TAB>sf`). Clients connect over TCP, authenticate
//! with a shared token and then issue per-device time-windowed queries, one
//! JSON object per line in each direction.

mod client;
mod protocol;
mod record;
mod server;
mod store;

use std::io;

use thiserror::Error;

pub use client::{NetClient, PacketSource};
pub use protocol::{Message, PacketEntry};
pub use record::{PacketRecord, RecordParseError};
pub use server::{serve, ServerHandle};
pub use store::{IngestReport, PacketStore};

#[derive(Debug, Error)]
pub enum NetServerError {
    #[error("auth token must not be empty")]
    EmptyToken,
    #[error("cannot bind: {0}")]
    Bind(#[source] io::Error),
    #[error("cannot reach server: {0}")]
    Connect(#[source] io::Error),
    #[error("authentication rejected: {0}")]
    AuthFailed(String),
    #[error("server error: {0}")]
    Remote(String),
    #[error("protocol violation: {0}")]
    Protocol(String),
    #[error(transparent)]
    Io(io::Error),
}
