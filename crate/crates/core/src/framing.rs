//! Length-prefixed message framing for the model wire protocol.
//!
//! ```text
//! "IPT1" | u32 LE header length | UTF-8 JSON header | u64 LE payload length | payload
//! ```
//!
//! Headers are serialized with sorted object keys, so equal headers always
//! produce equal bytes.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::convert::Infallible;
use core::fmt;

use serde_json::Value;

pub const MAGIC: [u8; 4] = *b"IPT1";
pub const MAX_HEADER_LEN: usize = 16 * 1024 * 1024;
pub const MAX_PAYLOAD_LEN: u64 = 1024 * 1024 * 1024;
pub const PROTOCOL_VERSION: u64 = 1;

const READ_CHUNK: usize = 64 * 1024;

#[derive(Debug, Clone, PartialEq)]
pub struct Message {
    pub header: Value,
    pub payload: Vec<u8>,
}

impl Message {
    pub fn new(header: Value, payload: Vec<u8>) -> Self {
        Self { header, payload }
    }

    /// The `"msg"` field of an object header.
    pub fn kind(&self) -> Option<&str> {
        self.header.get("msg").and_then(Value::as_str)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EncodeError {
    #[error("header is {0} bytes, limit is 16 MiB")]
    HeaderTooLarge(usize),
    #[error("payload is {0} bytes, limit is 1 GiB")]
    PayloadTooLarge(u64),
    #[error("header does not serialize: {0}")]
    Serialize(String),
}

/// Frames a pre-serialized header.
pub fn encode_raw(header_json: &[u8], payload: &[u8]) -> Result<Vec<u8>, EncodeError> {
    if header_json.len() > MAX_HEADER_LEN {
        return Err(EncodeError::HeaderTooLarge(header_json.len()));
    }
    if payload.len() as u64 > MAX_PAYLOAD_LEN {
        return Err(EncodeError::PayloadTooLarge(payload.len() as u64));
    }
    let mut out = Vec::with_capacity(4 + 4 + header_json.len() + 8 + payload.len());
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&(header_json.len() as u32).to_le_bytes());
    out.extend_from_slice(header_json);
    out.extend_from_slice(&(payload.len() as u64).to_le_bytes());
    out.extend_from_slice(payload);
    Ok(out)
}

pub fn encode_message(header: &Value, payload: &[u8]) -> Result<Vec<u8>, EncodeError> {
    let json = serde_json::to_vec(header).map_err(|e| EncodeError::Serialize(e.to_string()))?;
    encode_raw(&json, payload)
}

/// Anything bytes can be pulled from. `read_some` returns 0 only at end of input.
pub trait ByteSource {
    type Error;
    fn read_some(&mut self, buf: &mut [u8]) -> Result<usize, Self::Error>;
}

impl ByteSource for &[u8] {
    type Error = Infallible;

    fn read_some(&mut self, buf: &mut [u8]) -> Result<usize, Infallible> {
        let n = buf.len().min(self.len());
        buf[..n].copy_from_slice(&self[..n]);
        *self = &self[n..];
        Ok(n)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Section {
    Magic,
    HeaderLength,
    Header,
    PayloadLength,
    Payload,
}

impl fmt::Display for Section {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Section::Magic => "magic",
            Section::HeaderLength => "header length",
            Section::Header => "header",
            Section::PayloadLength => "payload length",
            Section::Payload => "payload",
        })
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DecodeError<E> {
    /// The source ended cleanly before the first byte of a frame.
    #[error("end of stream")]
    Eof,
    #[error("bad magic {0:02x?}, expected \"IPT1\"")]
    BadMagic([u8; 4]),
    #[error("truncated {section}: expected {expected} bytes, received {received}")]
    Truncated {
        section: Section,
        expected: u64,
        received: u64,
    },
    #[error("declared header length {0} exceeds 16 MiB")]
    HeaderTooLarge(u32),
    #[error("declared payload length {0} exceeds 1 GiB")]
    PayloadTooLarge(u64),
    #[error("header is not valid UTF-8 (at byte {0})")]
    InvalidUtf8(usize),
    #[error("header is not valid JSON: {0}")]
    InvalidJson(String),
    #[error("source error: {0:?}")]
    Source(E),
}

fn fill<S: ByteSource>(src: &mut S, buf: &mut [u8]) -> Result<usize, DecodeError<S::Error>> {
    let mut got = 0;
    while got < buf.len() {
        let n = src.read_some(&mut buf[got..]).map_err(DecodeError::Source)?;
        if n == 0 {
            break;
        }
        got += n;
    }
    Ok(got)
}

fn exact<S: ByteSource, const N: usize>(src: &mut S, section: Section) -> Result<[u8; N], DecodeError<S::Error>> {
    let mut buf = [0u8; N];
    let got = fill(src, &mut buf)?;
    if got < N {
        return Err(DecodeError::Truncated {
            section,
            expected: N as u64,
            received: got as u64,
        });
    }
    Ok(buf)
}

/// Reads `len` bytes without trusting `len` for the up-front allocation.
fn body<S: ByteSource>(src: &mut S, len: usize, section: Section) -> Result<Vec<u8>, DecodeError<S::Error>> {
    let mut out = Vec::with_capacity(len.min(READ_CHUNK));
    while out.len() < len {
        let start = out.len();
        let step = (len - start).min(READ_CHUNK);
        out.resize(start + step, 0);
        let got = fill(src, &mut out[start..])?;
        if got < step {
            return Err(DecodeError::Truncated {
                section,
                expected: len as u64,
                received: (start + got) as u64,
            });
        }
    }
    Ok(out)
}

/// Reads one frame. The source must be positioned at a frame boundary.
pub fn decode_message<S: ByteSource>(src: &mut S) -> Result<Message, DecodeError<S::Error>> {
    let mut magic = [0u8; 4];
    match fill(src, &mut magic)? {
        0 => return Err(DecodeError::Eof),
        4 => {}
        n => {
            return Err(DecodeError::Truncated {
                section: Section::Magic,
                expected: 4,
                received: n as u64,
            })
        }
    }
    if magic != MAGIC {
        return Err(DecodeError::BadMagic(magic));
    }
    let header_len = u32::from_le_bytes(exact::<_, 4>(src, Section::HeaderLength)?);
    if header_len as usize > MAX_HEADER_LEN {
        return Err(DecodeError::HeaderTooLarge(header_len));
    }
    let header_bytes = body(src, header_len as usize, Section::Header)?;
    let header_str = core::str::from_utf8(&header_bytes)
        .map_err(|e| DecodeError::InvalidUtf8(e.valid_up_to()))?;
    let header: Value =
        serde_json::from_str(header_str).map_err(|e| DecodeError::InvalidJson(e.to_string()))?;
    let payload_len = u64::from_le_bytes(exact::<_, 8>(src, Section::PayloadLength)?);
    if payload_len > MAX_PAYLOAD_LEN {
        return Err(DecodeError::PayloadTooLarge(payload_len));
    }
    let payload = body(src, payload_len as usize, Section::Payload)?;
    Ok(Message { header, payload })
}

/// Decodes one frame from the front of `bytes`, returning it and the number
/// of bytes consumed.
pub fn decode_slice(bytes: &[u8]) -> Result<(Message, usize), DecodeError<Infallible>> {
    let mut rest = bytes;
    let msg = decode_message(&mut rest)?;
    Ok((msg, bytes.len() - rest.len()))
}

/// Little-endian f32 payload helpers used by score and feature messages.
pub fn f32s_to_le(values: &[f32]) -> Vec<u8> {
    values.iter().flat_map(|v| v.to_le_bytes()).collect()
}

pub fn le_to_f32s(bytes: &[u8]) -> Option<Vec<f32>> {
    (bytes.len() % 4 == 0).then(|| {
        bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect()
    })
}
