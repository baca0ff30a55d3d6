//! How the resolver reaches the authoritative: an in-process channel for
//! deterministic runs, or real UDP on loopback for harness tests.

use std::net::{IpAddr, SocketAddr, UdpSocket};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::Duration;

use crate::dns_wire::{decode_message, encode_message, DnsMessage};

use super::{AuthoritativeServer, SimError};

pub trait Upstream {
    /// Send `query` as if from `source` and wait for the answer.
    fn exchange(&mut self, query: &DnsMessage, source: IpAddr) -> Result<DnsMessage, SimError>;
}

/// Passes wire bytes straight to an [`AuthoritativeServer`] and records every
/// query exactly as the server received it.
#[derive(Debug)]
pub struct InProcess<'a> {
    server: &'a AuthoritativeServer,
    received: Vec<Vec<u8>>,
}

impl<'a> InProcess<'a> {
    pub fn new(server: &'a AuthoritativeServer) -> InProcess<'a> {
        InProcess {
            server,
            received: Vec::new(),
        }
    }

    /// Raw queries seen by the server, oldest first.
    pub fn received(&self) -> &[Vec<u8>] {
        &self.received
    }
}

impl Upstream for InProcess<'_> {
    fn exchange(&mut self, query: &DnsMessage, source: IpAddr) -> Result<DnsMessage, SimError> {
        let bytes = encode_message(query)?;
        self.received.push(bytes.clone());
        let reply = self
            .server
            .handle_wire(&bytes, source)
            .ok_or_else(|| SimError::Transport("server dropped the query".into()))?;
        Ok(decode_message(&reply)?)
    }
}

/// An authoritative server answering on a loopback UDP socket in a background
/// thread. Requests are handled one at a time.
pub struct UdpAuthoritative {
    addr: SocketAddr,
    stop: Arc<AtomicBool>,
    thread: Option<JoinHandle<()>>,
}

impl UdpAuthoritative {
    pub fn spawn(server: AuthoritativeServer) -> std::io::Result<UdpAuthoritative> {
        let socket = UdpSocket::bind("127.0.0.1:0")?;
        socket.set_read_timeout(Some(Duration::from_millis(50)))?;
        let addr = socket.local_addr()?;
        let stop = Arc::new(AtomicBool::new(false));
        let flag = stop.clone();
        let thread = std::thread::spawn(move || {
            let mut buf = [0u8; 4096];
            while !flag.load(Ordering::Relaxed) {
                let Ok((n, peer)) = socket.recv_from(&mut buf) else {
                    continue;
                };
                if let Some(reply) = server.handle_wire(&buf[..n], peer.ip()) {
                    let _ = socket.send_to(&reply, peer);
                }
            }
        });
        Ok(UdpAuthoritative {
            addr,
            stop,
            thread: Some(thread),
        })
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }
}

impl Drop for UdpAuthoritative {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::Relaxed);
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

/// Client side of [`UdpAuthoritative`]. The server sees the loopback address as
/// the source, so legacy source-based answering is not meaningful over UDP.
pub struct UdpUpstream {
    socket: UdpSocket,
    server: SocketAddr,
}

impl UdpUpstream {
    pub fn connect(server: SocketAddr) -> std::io::Result<UdpUpstream> {
        let socket = UdpSocket::bind("127.0.0.1:0")?;
        socket.set_read_timeout(Some(Duration::from_secs(2)))?;
        Ok(UdpUpstream { socket, server })
    }
}

impl Upstream for UdpUpstream {
    fn exchange(&mut self, query: &DnsMessage, _source: IpAddr) -> Result<DnsMessage, SimError> {
        let bytes = encode_message(query)?;
        self.socket
            .send_to(&bytes, self.server)
            .map_err(|e| SimError::Transport(e.to_string()))?;
        let mut buf = [0u8; 4096];
        loop {
            let (n, peer) = self
                .socket
                .recv_from(&mut buf)
                .map_err(|e| SimError::Transport(e.to_string()))?;
            if peer != self.server {
                continue;
            }
            let reply = decode_message(&buf[..n])?;
            if reply.id == query.id {
                return Ok(reply);
            }
        }
    }
}
