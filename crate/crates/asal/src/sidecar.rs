//! Client for an external embedding service speaking newline-delimited
//! JSON over TCP or a child process's stdio.
//!
//! Requests:
//! `{"id":u64,"op":"embed_image","png_b64":"..."}`,
//! `{"id":u64,"op":"embed_text","text":"..."}`.
//! Responses: `{"id":u64,"embedding":[...]}` or `{"id":u64,"error":"..."}`.
//! Handshake: `{"op":"describe"}` answered by
//! `{"name":...,"dim":...,"supports_text":...}`.
//!
//! Responses are matched to requests by id, so a server may answer a
//! pipelined batch in any order.

use std::collections::HashMap;
use std::fmt;
use std::io::{BufRead, BufReader, Write};
use std::net::TcpStream;
use std::process::{Child, Command, Stdio};
use std::str::FromStr;
use std::sync::Mutex;
use std::time::Duration;

use asal_core::{Embedder, EmbedderDescriptor, EmbeddingVector, Error, Frame};
use base64::Engine;
use serde::{Deserialize, Serialize};

use crate::error::AppError;
use crate::imageio::encode_png;

/// Environment variable holding the default sidecar address.
pub const ENV_VAR: &str = "ASAL_SIDECAR";

/// Requests written before their responses are read.
const PIPELINE: usize = 16;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SidecarAddress {
    /// `host:port`, optionally prefixed with `tcp://`.
    Tcp(String),
    /// `stdio:<program> <args...>`.
    Stdio(Vec<String>),
}

impl FromStr for SidecarAddress {
    type Err = AppError;

    fn from_str(s: &str) -> Result<Self, AppError> {
        let s = s.trim();
        if let Some(cmd) = s.strip_prefix("stdio:") {
            let argv: Vec<String> = cmd.split_whitespace().map(str::to_string).collect();
            if argv.is_empty() {
                return Err(AppError::Sidecar("stdio address needs a command".into()));
            }
            return Ok(SidecarAddress::Stdio(argv));
        }
        let hostport = s.strip_prefix("tcp://").unwrap_or(s);
        if hostport.rsplit_once(':').is_none_or(|(h, p)| h.is_empty() || p.parse::<u16>().is_err()) {
            return Err(AppError::Sidecar(format!("bad address `{s}`, expected host:port or stdio:<cmd>")));
        }
        Ok(SidecarAddress::Tcp(hostport.to_string()))
    }
}

impl fmt::Display for SidecarAddress {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SidecarAddress::Tcp(a) => write!(f, "tcp://{a}"),
            SidecarAddress::Stdio(argv) => write!(f, "stdio:{}", argv.join(" ")),
        }
    }
}

#[derive(Serialize)]
struct DescribeRequest {
    op: &'static str,
}

#[derive(Serialize)]
struct ImageRequest<'a> {
    id: u64,
    op: &'static str,
    png_b64: &'a str,
}

#[derive(Serialize)]
struct TextRequest<'a> {
    id: u64,
    op: &'static str,
    text: &'a str,
}

#[derive(Debug, Deserialize)]
struct Response {
    id: u64,
    #[serde(default)]
    embedding: Option<Vec<f32>>,
    #[serde(default)]
    error: Option<String>,
}

struct Connection {
    reader: Box<dyn BufRead + Send>,
    writer: Box<dyn Write + Send>,
    next_id: u64,
    child: Option<Child>,
}

impl Connection {
    fn send(&mut self, line: &str) -> std::io::Result<()> {
        self.writer.write_all(line.as_bytes())?;
        self.writer.write_all(b"\n")
    }

    fn recv(&mut self) -> Result<String, Error> {
        let mut line = String::new();
        match self.reader.read_line(&mut line) {
            Ok(0) => Err(unavailable("connection closed")),
            Ok(_) => Ok(line),
            Err(e) => Err(unavailable(e)),
        }
    }
}

impl Drop for Connection {
    fn drop(&mut self) {
        if let Some(child) = &mut self.child {
            let _ = child.kill();
            let _ = child.wait();
        }
    }
}

fn unavailable(why: impl fmt::Display) -> Error {
    Error::BackendUnavailable(why.to_string())
}

/// One connection to the sidecar, shared between threads. Calls are
/// serialized on the connection.
pub struct SidecarClient {
    conn: Mutex<Connection>,
    descriptor: EmbedderDescriptor,
}

impl SidecarClient {
    pub fn connect(address: &SidecarAddress) -> Result<Self, AppError> {
        match address {
            SidecarAddress::Tcp(a) => {
                let stream = TcpStream::connect(a)
                    .map_err(|e| AppError::Sidecar(format!("connect {a}: {e}")))?;
                stream
                    .set_read_timeout(Some(Duration::from_secs(300)))
                    .map_err(|e| AppError::Sidecar(e.to_string()))?;
                let reader = stream.try_clone().map_err(|e| AppError::Sidecar(e.to_string()))?;
                Self::from_streams(Box::new(BufReader::new(reader)), Box::new(stream), None)
            }
            SidecarAddress::Stdio(argv) => {
                let mut child = Command::new(&argv[0])
                    .args(&argv[1..])
                    .stdin(Stdio::piped())
                    .stdout(Stdio::piped())
                    .stderr(Stdio::inherit())
                    .spawn()
                    .map_err(|e| AppError::Sidecar(format!("spawn {}: {e}", argv[0])))?;
                let stdin = child.stdin.take().expect("piped");
                let stdout = child.stdout.take().expect("piped");
                Self::from_streams(Box::new(BufReader::new(stdout)), Box::new(stdin), Some(child))
            }
        }
    }

    /// Address from the environment, if set.
    pub fn address_from_env() -> Option<Result<SidecarAddress, AppError>> {
        std::env::var(ENV_VAR).ok().map(|s| s.parse())
    }

    fn from_streams(
        reader: Box<dyn BufRead + Send>,
        writer: Box<dyn Write + Send>,
        child: Option<Child>,
    ) -> Result<Self, AppError> {
        let mut conn = Connection { reader, writer, next_id: 0, child };
        let req = serde_json::to_string(&DescribeRequest { op: "describe" }).expect("serializable");
        conn.send(&req)
            .and_then(|_| conn.writer.flush())
            .map_err(|e| AppError::Sidecar(format!("describe: {e}")))?;
        let line = conn.recv().map_err(|e| AppError::Sidecar(format!("describe: {e}")))?;
        let descriptor: EmbedderDescriptor = serde_json::from_str(&line)
            .map_err(|e| AppError::Sidecar(format!("bad describe response: {e}")))?;
        if descriptor.dim == 0 {
            return Err(AppError::Sidecar("describe reported dim 0".into()));
        }
        Ok(SidecarClient { conn: Mutex::new(conn), descriptor })
    }

    /// Sends each request line (built from its id) and returns the vectors
    /// in request order.
    fn call<F>(&self, count: usize, make: F) -> Result<Vec<EmbeddingVector>, Error>
    where
        F: Fn(usize, u64) -> String,
    {
        let mut conn = self.conn.lock().map_err(|_| unavailable("connection poisoned"))?;
        let mut out = Vec::with_capacity(count);
        let mut start = 0;
        while start < count {
            let end = (start + PIPELINE).min(count);
            let base = conn.next_id;
            conn.next_id += (end - start) as u64;
            for i in start..end {
                let line = make(i, base + (i - start) as u64);
                conn.send(&line).map_err(unavailable)?;
            }
            conn.writer.flush().map_err(unavailable)?;
            let mut got: HashMap<u64, Response> = HashMap::new();
            while got.len() < end - start {
                let line = conn.recv()?;
                let r: Response = serde_json::from_str(&line)
                    .map_err(|e| unavailable(format!("bad response: {e}")))?;
                if r.id < base || r.id >= conn.next_id || got.contains_key(&r.id) {
                    return Err(unavailable(format!("unexpected response id {}", r.id)));
                }
                got.insert(r.id, r);
            }
            for id in base..conn.next_id {
                out.push(self.vector(got.remove(&id).expect("collected"))?);
            }
            start = end;
        }
        Ok(out)
    }

    fn vector(&self, r: Response) -> Result<EmbeddingVector, Error> {
        if let Some(e) = r.error {
            return Err(unavailable(format!("request {} failed: {e}", r.id)));
        }
        let v = r.embedding.ok_or_else(|| unavailable(format!("request {} has no embedding", r.id)))?;
        if v.len() != self.descriptor.dim {
            return Err(Error::DimMismatch { left: self.descriptor.dim, right: v.len() });
        }
        // Unit norm is checked at f32 tolerance, then renormalized in f64.
        let v: Vec<f64> = v.into_iter().map(f64::from).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if !norm.is_finite() || (norm - 1.0).abs() > 1e-5 {
            return Err(unavailable(format!("embedding norm {norm} is not 1")));
        }
        Ok(EmbeddingVector::normalize(v).expect("nonzero norm"))
    }
}

impl Embedder for SidecarClient {
    fn descriptor(&self) -> EmbedderDescriptor {
        self.descriptor.clone()
    }

    fn embed_images(&self, frames: &[&Frame]) -> Result<Vec<EmbeddingVector>, Error> {
        let engine = base64::engine::general_purpose::STANDARD;
        let encoded: Vec<String> = frames.iter().map(|f| engine.encode(encode_png(f))).collect();
        self.call(frames.len(), |i, id| {
            serde_json::to_string(&ImageRequest { id, op: "embed_image", png_b64: &encoded[i] })
                .expect("serializable")
        })
    }

    fn embed_text(&self, prompt: &str) -> Result<EmbeddingVector, Error> {
        if prompt.is_empty() {
            return Err(Error::EmptyPrompt);
        }
        if !self.descriptor.supports_text {
            return Err(Error::CapabilityMissing {
                backend: self.descriptor.name.clone(),
                capability: "text",
            });
        }
        let mut v = self.call(1, |_, id| {
            serde_json::to_string(&TextRequest { id, op: "embed_text", text: prompt })
                .expect("serializable")
        })?;
        Ok(v.pop().expect("one response"))
    }
}
