//! TCP listener serving WebSocket sessions and static assets on one port.

use std::io::{self, Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::path::PathBuf;
use std::thread::{self, JoinHandle};
use std::time::Duration;

use proofpad_core::session::SessionConfig;
use tungstenite::Message;

use crate::assets;
use crate::controller::{BackendChoice, Controller, Registry};
use crate::protocol::ServerMessage;

pub const DEFAULT_PORT: u16 = 7311;
const HEADER_LIMIT: usize = 16 * 1024;

#[derive(Debug, Clone)]
pub struct ServeConfig {
    pub host: String,
    /// 0 picks a free port.
    pub port: u16,
    pub backend: BackendChoice,
    pub session: SessionConfig,
    pub static_dir: Option<PathBuf>,
}

impl Default for ServeConfig {
    fn default() -> Self {
        ServeConfig {
            host: "127.0.0.1".into(),
            port: DEFAULT_PORT,
            backend: BackendChoice::Fake,
            session: SessionConfig::default(),
            static_dir: None,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ServeError {
    #[error("port {0} is already in use")]
    PortInUse(u16),
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl ServeError {
    pub fn code(&self) -> &'static str {
        match self {
            ServeError::PortInUse(_) => "port-in-use",
            ServeError::Io(_) => "io-error",
        }
    }
}

pub struct Server {
    listener: TcpListener,
    config: ServeConfig,
    registry: Registry,
}

impl Server {
    pub fn bind(config: ServeConfig) -> Result<Server, ServeError> {
        let listener = TcpListener::bind((config.host.as_str(), config.port)).map_err(|e| match e.kind() {
            io::ErrorKind::AddrInUse => ServeError::PortInUse(config.port),
            _ => ServeError::Io(e),
        })?;
        Ok(Server { listener, config, registry: Registry::default() })
    }

    pub fn local_addr(&self) -> io::Result<SocketAddr> {
        self.listener.local_addr()
    }

    /// Accepts connections until the listener fails. Each connection gets
    /// its own thread and controller.
    pub fn run(self) -> io::Result<()> {
        for stream in self.listener.incoming() {
            let stream = stream?;
            let config = self.config.clone();
            let registry = self.registry.clone();
            thread::spawn(move || {
                let _ = handle_connection(stream, &config, registry);
            });
        }
        Ok(())
    }

    pub fn spawn(self) -> JoinHandle<io::Result<()>> {
        thread::spawn(move || self.run())
    }
}

/// Reads the request head without consuming it, so the WebSocket handshake
/// can still see it.
fn peek_head(stream: &TcpStream) -> io::Result<String> {
    let mut buf = vec![0u8; HEADER_LIMIT];
    stream.set_read_timeout(Some(Duration::from_secs(10)))?;
    for _ in 0..200 {
        let n = stream.peek(&mut buf)?;
        let head = &buf[..n];
        if head.windows(4).any(|w| w == b"\r\n\r\n") || n == buf.len() {
            return Ok(String::from_utf8_lossy(head).into_owned());
        }
        if n == 0 {
            break;
        }
        thread::sleep(Duration::from_millis(5));
    }
    Err(io::Error::new(io::ErrorKind::InvalidData, "incomplete request head"))
}

fn is_websocket(head: &str) -> bool {
    head.lines().any(|l| {
        let l = l.to_ascii_lowercase();
        l.starts_with("upgrade:") && l.contains("websocket")
    })
}

fn handle_connection(mut stream: TcpStream, config: &ServeConfig, registry: Registry) -> io::Result<()> {
    let head = peek_head(&stream)?;
    if !is_websocket(&head) {
        return serve_static(&mut stream, &head, config);
    }
    stream.set_read_timeout(None)?;
    let mut ws = tungstenite::accept(stream).map_err(|e| io::Error::other(e.to_string()))?;
    let mut controller = Controller::new(config.backend.clone(), config.session, registry);
    let snapshot = ServerMessage::Snapshot { snapshot: controller.snapshot() };
    ws.send(Message::Text(snapshot.to_json())).map_err(io::Error::other)?;
    loop {
        let frame = match ws.read() {
            Ok(Message::Text(t)) => t,
            Ok(Message::Binary(b)) => String::from_utf8_lossy(&b).into_owned(),
            Ok(Message::Close(_)) | Err(_) => break,
            Ok(_) => continue,
        };
        let mut outgoing = Vec::new();
        controller.handle(&frame, &mut |m| outgoing.push(m));
        for m in outgoing {
            if ws.send(Message::Text(m.to_json())).is_err() {
                return Ok(());
            }
        }
    }
    Ok(())
}

fn serve_static(stream: &mut TcpStream, head: &str, config: &ServeConfig) -> io::Result<()> {
    let mut sink = vec![0u8; head.len()];
    stream.read_exact(&mut sink)?;
    let mut parts = head.lines().next().unwrap_or("").split_whitespace();
    let (method, path) = (parts.next().unwrap_or(""), parts.next().unwrap_or("/"));
    let response = match (method, assets::load(config.static_dir.as_deref(), path)) {
        ("GET" | "HEAD", Some(asset)) => {
            let mut r = format!(
                "HTTP/1.1 200 OK\r\nContent-Type: {}\r\nContent-Length: {}\r\nConnection: close\r\n\r\n",
                asset.content_type,
                asset.body.len()
            )
            .into_bytes();
            if method == "GET" {
                r.extend(asset.body);
            }
            r
        }
        ("GET" | "HEAD", None) => {
            b"HTTP/1.1 404 Not Found\r\nContent-Length: 9\r\nConnection: close\r\n\r\nnot found".to_vec()
        }
        _ => b"HTTP/1.1 405 Method Not Allowed\r\nContent-Length: 0\r\nConnection: close\r\n\r\n".to_vec(),
    };
    stream.write_all(&response)?;
    stream.flush()
}
