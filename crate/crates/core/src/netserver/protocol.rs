//! Newline-delimited JSON messages exchanged with the network server.

use serde::{Deserialize, Serialize};

use super::record::PacketRecord;
use crate::eui::DevEui;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PacketEntry {
    pub fcnt: u32,
    pub ts: f64,
    pub sf: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Message {
    Auth {
        token: String,
    },
    AuthOk,
    AuthFail {
        reason: String,
    },
    Query {
        dev_eui: DevEui,
        from: f64,
        to: f64,
    },
    Packets {
        dev_eui: DevEui,
        packets: Vec<PacketEntry>,
    },
    Error {
        reason: String,
    },
}

impl Message {
    /// One JSON object followed by `\n`.
    pub fn to_line(&self) -> String {
        let mut line = serde_json::to_string(self).expect("message serialisation is infallible");
        line.push('\n');
        line
    }

    pub fn from_line(line: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(line.trim_end())
    }

    pub fn packets(dev_eui: DevEui, records: &[PacketRecord]) -> Self {
        Message::Packets {
            dev_eui,
            packets: records
                .iter()
                .map(|r| PacketEntry {
                    fcnt: r.fcnt,
                    ts: r.received_ts,
                    sf: r.sf,
                })
                .collect(),
        }
    }
}
