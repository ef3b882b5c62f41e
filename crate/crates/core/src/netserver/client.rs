use std::io::{BufRead, BufReader, Write};
use std::net::{TcpStream, ToSocketAddrs};

use super::protocol::Message;
use super::record::PacketRecord;
use super::NetServerError;
use crate::eui::DevEui;

/// Anything that can answer per-device windowed packet queries.
pub trait PacketSource {
    fn query(&mut self, dev_eui: DevEui, from: f64, to: f64) -> Result<Vec<PacketRecord>, NetServerError>;
}

/// Authenticated connection to a network server.
pub struct NetClient {
    reader: BufReader<TcpStream>,
    writer: TcpStream,
}

impl NetClient {
    pub fn connect(addr: impl ToSocketAddrs, token: &str) -> Result<Self, NetServerError> {
        let stream = TcpStream::connect(addr).map_err(NetServerError::Connect)?;
        stream.set_nodelay(true).map_err(NetServerError::Connect)?;
        let writer = stream.try_clone().map_err(NetServerError::Connect)?;
        let mut client = Self {
            reader: BufReader::new(stream),
            writer,
        };
        match client.round_trip(&Message::Auth {
            token: token.to_string(),
        })? {
            Message::AuthOk => Ok(client),
            Message::AuthFail { reason } => Err(NetServerError::AuthFailed(reason)),
            other => Err(NetServerError::Protocol(format!("unexpected auth reply {other:?}"))),
        }
    }

    fn round_trip(&mut self, msg: &Message) -> Result<Message, NetServerError> {
        self.writer
            .write_all(msg.to_line().as_bytes())
            .map_err(NetServerError::Io)?;
        self.writer.flush().map_err(NetServerError::Io)?;
        let mut line = String::new();
        let n = self.reader.read_line(&mut line).map_err(NetServerError::Io)?;
        if n == 0 {
            return Err(NetServerError::Protocol("connection closed by server".into()));
        }
        Message::from_line(&line).map_err(|e| NetServerError::Protocol(format!("unparseable reply: {e}")))
    }
}

impl PacketSource for NetClient {
    fn query(&mut self, dev_eui: DevEui, from: f64, to: f64) -> Result<Vec<PacketRecord>, NetServerError> {
        match self.round_trip(&Message::Query { dev_eui, from, to })? {
            Message::Packets {
                dev_eui: answered,
                packets,
            } if answered == dev_eui => Ok(packets
                .into_iter()
                .map(|p| PacketRecord {
                    dev_eui,
                    fcnt: p.fcnt,
                    received_ts: p.ts,
                    sf: p.sf,
                })
                .collect()),
            Message::Error { reason } => Err(NetServerError::Remote(reason)),
            other => Err(NetServerError::Protocol(format!("unexpected reply {other:?}"))),
        }
    }
}

/// Queries served straight from an in-process store.
impl PacketSource for &crate::netserver::PacketStore {
    fn query(&mut self, dev_eui: DevEui, from: f64, to: f64) -> Result<Vec<PacketRecord>, NetServerError> {
        Ok(crate::netserver::PacketStore::query(self, dev_eui, from, to))
    }
}
