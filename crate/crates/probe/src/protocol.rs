//! Client side of the model wire protocol over TCP or a child process.
//!
//! A connection performs the `hello` handshake once, then serves strictly
//! serial `infer` calls: one request, then one `scores` message and one
//! `feature` message per requested tag. Model-side `error` messages are
//! relayed verbatim.

use std::collections::BTreeMap;
use std::io::{self, Read, Write};
use std::net::{TcpStream, ToSocketAddrs};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::thread;
use std::time::Duration;

use ipt_core::framing::{decode_message, encode_message, le_to_f32s, ByteSource, DecodeError, Message, PROTOCOL_VERSION};
use ipt_core::{FactorVector, FeatureTensor, LabelSpace, ScoreVector, Video};
use serde_json::{json, Value};

#[derive(Debug, thiserror::Error)]
pub enum ProtocolError {
    #[error("bad endpoint '{0}': expected tcp:HOST:PORT or exec:COMMAND ...")]
    Endpoint(String),
    #[error("cannot reach {endpoint}: {source}")]
    Connect {
        endpoint: String,
        #[source]
        source: io::Error,
    },
    #[error("transport: {0}")]
    Io(#[from] io::Error),
    #[error("malformed frame from model: {0}")]
    Decode(String),
    #[error("model closed the connection")]
    Closed,
    #[error("no reply within {0:?}")]
    Timeout(Duration),
    #[error("model error: {0}")]
    Model(String),
    #[error("expected a '{expected}' message, got {got}")]
    Unexpected { expected: &'static str, got: String },
    #[error("invalid '{msg}' message: {detail}")]
    Invalid { msg: &'static str, detail: String },
    #[error("model speaks protocol version {0}, expected 1")]
    Version(String),
    #[error("model does not offer feature '{0}'")]
    UnknownFeature(String),
}

/// Where the model under test lives.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Endpoint {
    Tcp { host: String, port: u16 },
    Exec { argv: Vec<String> },
}

impl Endpoint {
    /// `tcp:HOST:PORT` or `exec:COMMAND ARGS...` (shell-style quoting).
    pub fn parse(spec: &str) -> Result<Self, ProtocolError> {
        let bad = || ProtocolError::Endpoint(spec.to_string());
        if let Some(rest) = spec.strip_prefix("tcp:") {
            let (host, port) = rest.rsplit_once(':').ok_or_else(bad)?;
            let host = host.trim_start_matches('[').trim_end_matches(']');
            if host.is_empty() {
                return Err(bad());
            }
            let port = port.parse().map_err(|_| bad())?;
            Ok(Endpoint::Tcp {
                host: host.to_string(),
                port,
            })
        } else if let Some(rest) = spec.strip_prefix("exec:") {
            let argv = shlex::split(rest).ok_or_else(bad)?;
            if argv.is_empty() {
                return Err(bad());
            }
            Ok(Endpoint::Exec { argv })
        } else {
            Err(bad())
        }
    }
}

impl std::fmt::Display for Endpoint {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Endpoint::Tcp { host, port } => write!(f, "tcp:{host}:{port}"),
            Endpoint::Exec { argv } => write!(f, "exec:{}", shlex::try_join(argv.iter().map(String::as_str)).unwrap_or_default()),
        }
    }
}

/// Adapts any `Read` to the framing decoder.
pub struct ReadSource<R>(pub R);

impl<R: Read> ByteSource for ReadSource<R> {
    type Error = io::Error;

    fn read_some(&mut self, buf: &mut [u8]) -> Result<usize, io::Error> {
        loop {
            match self.0.read(buf) {
                Err(e) if e.kind() == io::ErrorKind::Interrupted => continue,
                other => return other,
            }
        }
    }
}

/// Reads one frame, mapping a clean end of stream to `Ok(None)`.
pub fn read_frame<R: Read>(reader: &mut R) -> Result<Option<Message>, ProtocolError> {
    match decode_message(&mut ReadSource(reader)) {
        Ok(m) => Ok(Some(m)),
        Err(DecodeError::Eof) => Ok(None),
        Err(DecodeError::Source(e)) => Err(ProtocolError::Io(e)),
        Err(e) => Err(ProtocolError::Decode(e.to_string())),
    }
}

pub fn write_frame<W: Write>(writer: &mut W, header: &Value, payload: &[u8]) -> Result<(), ProtocolError> {
    let bytes = encode_message(header, payload).map_err(|e| ProtocolError::Decode(e.to_string()))?;
    writer.write_all(&bytes)?;
    writer.flush()?;
    Ok(())
}

/// One video to score.
#[derive(Debug, Clone, PartialEq)]
pub struct InferRequest {
    pub video_id: String,
    pub width: u32,
    pub height: u32,
    pub frame_count: usize,
    pub fps: f64,
    pub want_features: Vec<String>,
    /// Passed along for models that can use scene metadata.
    pub factors: Option<FactorVector>,
    pub payload: Vec<u8>,
}

impl InferRequest {
    pub fn from_video(video: &Video, want_features: &[String], factors: Option<FactorVector>) -> Self {
        let (width, height) = video.size();
        Self {
            video_id: video.video_id().to_string(),
            width,
            height,
            frame_count: video.frame_count(),
            fps: video.fps(),
            want_features: want_features.to_vec(),
            factors,
            payload: video.to_rgb_payload(),
        }
    }

    pub fn header(&self) -> Value {
        let mut h = json!({
            "msg": "infer",
            "v": PROTOCOL_VERSION,
            "id": self.video_id,
            "w": self.width,
            "h": self.height,
            "n": self.frame_count,
            "fps": self.fps,
            "want": self.want_features,
        });
        if let Some(f) = &self.factors {
            h["factors"] = serde_json::to_value(f).expect("factors serialize");
        }
        h
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InferResponse {
    pub video_id: String,
    pub scores: ScoreVector,
    pub features: BTreeMap<String, FeatureTensor>,
}

pub fn hello_request() -> Value {
    json!({"msg": "hello", "v": PROTOCOL_VERSION})
}

pub fn error_message(detail: &str) -> Value {
    json!({"msg": "error", "v": PROTOCOL_VERSION, "detail": detail})
}

fn describe(msg: &Message) -> String {
    match msg.kind() {
        Some(k) => format!("'{k}'"),
        None => "a header without \"msg\"".into(),
    }
}

/// Turns `error` messages into [`ProtocolError::Model`] and checks the kind.
fn expect_kind(msg: &Message, expected: &'static str) -> Result<(), ProtocolError> {
    if msg.kind() == Some("error") {
        let detail = match msg.header.get("detail") {
            Some(Value::String(s)) => s.clone(),
            Some(other) => other.to_string(),
            None => String::new(),
        };
        return Err(ProtocolError::Model(detail));
    }
    if msg.kind() != Some(expected) {
        return Err(ProtocolError::Unexpected {
            expected,
            got: describe(msg),
        });
    }
    match msg.header.get("v") {
        None => Ok(()),
        Some(v) if v.as_u64() == Some(PROTOCOL_VERSION) => Ok(()),
        Some(v) => Err(ProtocolError::Version(v.to_string())),
    }
}

fn string_list(header: &Value, key: &str, msg: &'static str) -> Result<Vec<String>, ProtocolError> {
    let invalid = |detail: String| ProtocolError::Invalid { msg, detail };
    match header.get(key) {
        None => Ok(Vec::new()),
        Some(Value::Array(items)) => items
            .iter()
            .map(|v| v.as_str().map(String::from).ok_or_else(|| invalid(format!("\"{key}\" must hold strings"))))
            .collect(),
        Some(_) => Err(invalid(format!("\"{key}\" must be a list"))),
    }
}

fn f32_payload(msg: &Message, what: &'static str) -> Result<Vec<f32>, ProtocolError> {
    le_to_f32s(&msg.payload).ok_or_else(|| ProtocolError::Invalid {
        msg: what,
        detail: format!("payload of {} bytes is not a whole number of f32 values", msg.payload.len()),
    })
}

enum Transport {
    Tcp(TcpStream),
    Exec(Child),
}

/// A handshaken connection to one model endpoint.
pub struct Connection {
    writer: Box<dyn Write + Send>,
    incoming: Receiver<Result<Message, ProtocolError>>,
    transport: Transport,
    timeout: Duration,
    labels: LabelSpace,
    features: Vec<String>,
}

impl Connection {
    pub fn open(endpoint: &Endpoint, timeout: Duration) -> Result<Self, ProtocolError> {
        let connect_err = |source| ProtocolError::Connect {
            endpoint: endpoint.to_string(),
            source,
        };
        let (reader, writer, transport): (Box<dyn Read + Send>, Box<dyn Write + Send>, Transport) = match endpoint {
            Endpoint::Tcp { host, port } => {
                let addrs: Vec<_> = (host.as_str(), *port).to_socket_addrs().map_err(connect_err)?.collect();
                let mut last = io::Error::new(io::ErrorKind::NotFound, "no address");
                let mut stream = None;
                for a in addrs {
                    match TcpStream::connect_timeout(&a, timeout) {
                        Ok(s) => {
                            stream = Some(s);
                            break;
                        }
                        Err(e) => last = e,
                    }
                }
                let stream = stream.ok_or_else(|| connect_err(last))?;
                stream.set_nodelay(true).map_err(connect_err)?;
                let reader = stream.try_clone().map_err(connect_err)?;
                let writer = stream.try_clone().map_err(connect_err)?;
                (Box::new(reader), Box::new(writer), Transport::Tcp(stream))
            }
            Endpoint::Exec { argv } => {
                let mut child = Command::new(&argv[0])
                    .args(&argv[1..])
                    .stdin(Stdio::piped())
                    .stdout(Stdio::piped())
                    .stderr(Stdio::inherit())
                    .spawn()
                    .map_err(connect_err)?;
                let stdout = child.stdout.take().expect("piped stdout");
                let stdin: ChildStdin = child.stdin.take().expect("piped stdin");
                (Box::new(stdout), Box::new(io::BufWriter::new(stdin)), Transport::Exec(child))
            }
        };

        let (tx, incoming) = mpsc::channel();
        thread::spawn(move || {
            let mut reader = io::BufReader::new(reader);
            loop {
                let item = match read_frame(&mut reader) {
                    Ok(Some(m)) => Ok(m),
                    Ok(None) => Err(ProtocolError::Closed),
                    Err(e) => Err(e),
                };
                let stop = item.is_err();
                if tx.send(item).is_err() || stop {
                    break;
                }
            }
        });

        let mut conn = Connection {
            writer,
            incoming,
            transport,
            timeout,
            labels: LabelSpace::new(vec![String::from("?")]).expect("placeholder"),
            features: Vec::new(),
        };
        conn.handshake()?;
        Ok(conn)
    }

    fn recv(&mut self) -> Result<Message, ProtocolError> {
        match self.incoming.recv_timeout(self.timeout) {
            Ok(item) => item,
            Err(RecvTimeoutError::Timeout) => Err(ProtocolError::Timeout(self.timeout)),
            Err(RecvTimeoutError::Disconnected) => Err(ProtocolError::Closed),
        }
    }

    fn send(&mut self, header: &Value, payload: &[u8]) -> Result<(), ProtocolError> {
        write_frame(&mut self.writer, header, payload)
    }

    fn handshake(&mut self) -> Result<(), ProtocolError> {
        self.send(&hello_request(), &[])?;
        let msg = self.recv()?;
        expect_kind(&msg, "hello")?;
        if msg.header.get("v").and_then(Value::as_u64) != Some(PROTOCOL_VERSION) {
            return Err(ProtocolError::Version(
                msg.header.get("v").map(Value::to_string).unwrap_or_else(|| "(missing)".into()),
            ));
        }
        let labels = string_list(&msg.header, "labels", "hello")?;
        self.labels = LabelSpace::new(labels).map_err(|e| ProtocolError::Invalid {
            msg: "hello",
            detail: e.to_string(),
        })?;
        self.features = string_list(&msg.header, "features", "hello")?;
        Ok(())
    }

    /// Label space announced at handshake.
    pub fn labels(&self) -> &LabelSpace {
        &self.labels
    }

    /// Feature tags announced at handshake.
    pub fn features(&self) -> &[String] {
        &self.features
    }

    pub fn infer(&mut self, req: &InferRequest) -> Result<InferResponse, ProtocolError> {
        if let Some(tag) = req.want_features.iter().find(|t| !self.features.contains(t)) {
            return Err(ProtocolError::UnknownFeature(tag.clone()));
        }
        self.send(&req.header(), &req.payload)?;

        let msg = self.recv()?;
        expect_kind(&msg, "scores")?;
        let invalid = |detail: String| ProtocolError::Invalid { msg: "scores", detail };
        let id = msg.header.get("id").and_then(Value::as_str).unwrap_or_default();
        if id != req.video_id {
            return Err(invalid(format!("answers '{id}' to a request for '{}'", req.video_id)));
        }
        let values = f32_payload(&msg, "scores")?;
        let k = msg.header.get("k").and_then(Value::as_u64);
        if k != Some(values.len() as u64) || values.len() != self.labels.len() {
            return Err(invalid(format!(
                "k={k:?} with {} values, but the model has {} labels",
                values.len(),
                self.labels.len()
            )));
        }
        let scores = ScoreVector::new(values.iter().map(|&v| f64::from(v)).collect())
            .map_err(|e| invalid(e.to_string()))?;

        let mut features = BTreeMap::new();
        for tag in &req.want_features {
            let msg = self.recv()?;
            expect_kind(&msg, "feature")?;
            let invalid = |detail: String| ProtocolError::Invalid { msg: "feature", detail };
            let got = msg.header.get("tag").and_then(Value::as_str).unwrap_or_default();
            if got != tag {
                return Err(invalid(format!("expected tag '{tag}', got '{got}'")));
            }
            let shape: Vec<usize> = msg
                .header
                .get("shape")
                .and_then(Value::as_array)
                .and_then(|a| a.iter().map(|v| v.as_u64().map(|n| n as usize)).collect())
                .ok_or_else(|| invalid("\"shape\" must be a list of integers".into()))?;
            let values = f32_payload(&msg, "feature")?;
            let n = values.len();
            let tensor = FeatureTensor::new(shape.clone(), values)
                .ok_or_else(|| invalid(format!("shape {shape:?} does not match {n} values")))?;
            features.insert(tag.clone(), tensor);
        }
        Ok(InferResponse {
            video_id: req.video_id.clone(),
            scores,
            features,
        })
    }
}

impl Drop for Connection {
    fn drop(&mut self) {
        let _ = self.writer.flush();
        match &mut self.transport {
            Transport::Tcp(s) => {
                let _ = s.shutdown(std::net::Shutdown::Both);
            }
            Transport::Exec(child) => {
                // closing stdin lets a well-behaved model exit on its own
                self.writer = Box::new(io::sink());
                for _ in 0..50 {
                    if let Ok(Some(_)) = child.try_wait() {
                        return;
                    }
                    thread::sleep(Duration::from_millis(10));
                }
                let _ = child.kill();
                let _ = child.wait();
            }
        }
    }
}
