use std::io::{self, BufRead, BufReader, Write};
use std::net::{Shutdown, SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread::{self, JoinHandle};

use super::protocol::Message;
use super::store::PacketStore;
use super::NetServerError;

/// A running server. Dropping the handle stops accepting new clients.
pub struct ServerHandle {
    addr: SocketAddr,
    stop: Arc<AtomicBool>,
    acceptor: Option<JoinHandle<()>>,
}

impl ServerHandle {
    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    /// Blocks until the accept loop exits (i.e. forever unless stopped).
    pub fn join(mut self) {
        if let Some(h) = self.acceptor.take() {
            let _ = h.join();
        }
    }

    pub fn stop(mut self) {
        self.shutdown();
    }

    fn shutdown(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        // wake the blocking accept
        let _ = TcpStream::connect(self.addr);
        if let Some(h) = self.acceptor.take() {
            let _ = h.join();
        }
    }
}

impl Drop for ServerHandle {
    fn drop(&mut self) {
        if self.acceptor.is_some() {
            self.shutdown();
        }
    }
}

/// Binds `addr` and serves queries against `store`, one thread per client.
pub fn serve(
    addr: impl ToSocketAddrs,
    token: &str,
    store: Arc<PacketStore>,
) -> Result<ServerHandle, NetServerError> {
    if token.is_empty() {
        return Err(NetServerError::EmptyToken);
    }
    let listener = TcpListener::bind(addr).map_err(NetServerError::Bind)?;
    let local = listener.local_addr().map_err(NetServerError::Bind)?;
    let stop = Arc::new(AtomicBool::new(false));
    let token: Arc<str> = Arc::from(token);

    let acceptor = {
        let stop = Arc::clone(&stop);
        thread::spawn(move || {
            for conn in listener.incoming() {
                if stop.load(Ordering::SeqCst) {
                    break;
                }
                let Ok(stream) = conn else { continue };
                let store = Arc::clone(&store);
                let token = Arc::clone(&token);
                thread::spawn(move || {
                    let _ = handle_client(stream, &token, &store);
                });
            }
        })
    };

    Ok(ServerHandle {
        addr: local,
        stop,
        acceptor: Some(acceptor),
    })
}

fn send(stream: &mut TcpStream, msg: &Message) -> io::Result<()> {
    stream.write_all(msg.to_line().as_bytes())?;
    stream.flush()
}

fn error(reason: impl Into<String>) -> Message {
    Message::Error {
        reason: reason.into(),
    }
}

fn handle_client(stream: TcpStream, token: &str, store: &PacketStore) -> io::Result<()> {
    let mut writer = stream.try_clone()?;
    let mut lines = BufReader::new(stream).lines();

    let first = match lines.next() {
        Some(line) => line?,
        None => return Ok(()),
    };
    match Message::from_line(&first) {
        Ok(Message::Auth { token: offered }) if offered == token => {
            send(&mut writer, &Message::AuthOk)?;
        }
        Ok(Message::Auth { .. }) => {
            send(
                &mut writer,
                &Message::AuthFail {
                    reason: "invalid token".into(),
                },
            )?;
            return writer.shutdown(Shutdown::Both);
        }
        Ok(_) => {
            send(&mut writer, &error("authentication required"))?;
            return writer.shutdown(Shutdown::Both);
        }
        Err(e) => {
            send(&mut writer, &error(format!("malformed message: {e}")))?;
            return writer.shutdown(Shutdown::Both);
        }
    }

    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let reply = match Message::from_line(&line) {
            Ok(Message::Query { dev_eui, from, to }) => {
                if !(from <= to) {
                    error(format!("empty window: from {from} > to {to}"))
                } else {
                    if let Err(e) = store.refresh() {
                        eprintln!("log refresh failed: {e}");
                    }
                    Message::packets(dev_eui, &store.query(dev_eui, from, to))
                }
            }
            Ok(Message::Auth { .. }) => error("already authenticated"),
            Ok(other) => error(format!("unexpected message from client: {other:?}")),
            Err(e) => error(format!("malformed message: {e}")),
        };
        send(&mut writer, &reply)?;
    }
    Ok(())
}
