//! Serves a [`MockModel`] over the wire protocol.
//!
//! Request-level problems (unknown feature, bad dimensions, missing factors)
//! are answered with an `error` message and the connection stays open;
//! framing errors are answered once and end the connection.

use std::io::{Read, Write};
use std::net::TcpListener;
use std::sync::Arc;

use ipt_core::framing::{f32s_to_le, Message, PROTOCOL_VERSION};
use ipt_core::mock::{MockModel, FEATURE_TAGS};
use ipt_core::{FactorVector, Frame, Video};
use serde_json::{json, Value};

use crate::protocol::{error_message, read_frame, write_frame, ProtocolError};

fn hello_response(model: &MockModel) -> Value {
    json!({
        "msg": "hello",
        "v": PROTOCOL_VERSION,
        "labels": model.labels().labels(),
        "features": FEATURE_TAGS,
    })
}

/// A reply is one or more frames.
type Reply = Vec<(Value, Vec<u8>)>;

fn field_u64(h: &Value, key: &str) -> Result<u64, String> {
    h.get(key)
        .and_then(Value::as_u64)
        .ok_or_else(|| format!("infer header needs a non-negative integer \"{key}\""))
}

fn answer_infer(model: &MockModel, msg: &Message) -> Result<Reply, String> {
    let h = &msg.header;
    let id = h
        .get("id")
        .and_then(Value::as_str)
        .ok_or("infer header needs a string \"id\"")?
        .to_string();
    let w = u32::try_from(field_u64(h, "w")?).map_err(|e| e.to_string())?;
    let ht = u32::try_from(field_u64(h, "h")?).map_err(|e| e.to_string())?;
    let n = usize::try_from(field_u64(h, "n")?).map_err(|e| e.to_string())?;
    let fps = match h.get("fps") {
        None | Some(Value::Null) => 25.0,
        Some(v) => v.as_f64().ok_or("\"fps\" must be a number")?,
    };
    let want: Vec<String> = match h.get("want") {
        None | Some(Value::Null) => Vec::new(),
        Some(v) => serde_json::from_value(v.clone()).map_err(|_| "\"want\" must be a list of strings")?,
    };
    let factors: Option<FactorVector> = match h.get("factors") {
        None | Some(Value::Null) => None,
        Some(v) => Some(serde_json::from_value(v.clone()).map_err(|e| format!("bad \"factors\": {e}"))?),
    };
    if let Some(tag) = want.iter().find(|t| !FEATURE_TAGS.contains(&t.as_str())) {
        return Err(format!("unknown feature tag '{tag}'"));
    }
    let frame_len = w as usize * ht as usize * 3;
    let expected = frame_len.checked_mul(n).ok_or("frame dimensions overflow")?;
    if msg.payload.len() != expected {
        return Err(format!(
            "payload is {} bytes, expected {expected} for {n} frames of {w}x{ht}",
            msg.payload.len()
        ));
    }
    let frames = msg
        .payload
        .chunks_exact(frame_len.max(1))
        .map(|c| Frame::new(w, ht, c.to_vec()))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| e.to_string())?;
    let video = Video::new(id.clone(), 0, fps, frames).map_err(|e| e.to_string())?;
    let scores = model.scores(&video, factors.as_ref()).map_err(|e| e.to_string())?;
    let values: Vec<f32> = scores.as_slice().iter().map(|&v| v as f32).collect();
    let mut reply = vec![(
        json!({"msg": "scores", "v": PROTOCOL_VERSION, "id": id, "k": values.len()}),
        f32s_to_le(&values),
    )];
    for tag in &want {
        let t = model.feature(tag, &video, &scores).map_err(|e| e.to_string())?;
        reply.push((
            json!({"msg": "feature", "v": PROTOCOL_VERSION, "id": id, "tag": tag, "shape": t.shape}),
            f32s_to_le(&t.values),
        ));
    }
    Ok(reply)
}

/// Answers one request.
pub fn respond(model: &MockModel, msg: &Message) -> Reply {
    let reply = match (msg.kind(), msg.header.get("v")) {
        (_, Some(v)) if v.as_u64() != Some(PROTOCOL_VERSION) => Err(format!("unsupported protocol version {v}")),
        (Some("hello"), _) => Ok(vec![(hello_response(model), Vec::new())]),
        (Some("infer"), _) => answer_infer(model, msg),
        (Some(other), _) => Err(format!("unknown message '{other}'")),
        (None, _) => Err("header has no \"msg\"".into()),
    };
    reply.unwrap_or_else(|detail| vec![(error_message(&detail), Vec::new())])
}

/// Serves requests until the input ends or a frame cannot be decoded.
pub fn serve<R: Read, W: Write>(model: &MockModel, input: R, mut output: W) -> Result<(), ProtocolError> {
    let mut input = std::io::BufReader::new(input);
    loop {
        let msg = match read_frame(&mut input) {
            Ok(Some(m)) => m,
            Ok(None) => return Ok(()),
            Err(e) => {
                let _ = write_frame(&mut output, &error_message(&e.to_string()), &[]);
                return Err(e);
            }
        };
        for (header, payload) in respond(model, &msg) {
            write_frame(&mut output, &header, &payload)?;
        }
    }
}

/// Accepts TCP connections forever, one thread per connection.
pub fn serve_tcp(model: MockModel, listener: TcpListener) -> std::io::Result<()> {
    let model = Arc::new(model);
    for stream in listener.incoming() {
        let stream = stream?;
        let model = Arc::clone(&model);
        std::thread::spawn(move || {
            let reader = match stream.try_clone() {
                Ok(r) => r,
                Err(e) => {
                    log::warn!("connection setup failed: {e}");
                    return;
                }
            };
            if let Err(e) = serve(&model, reader, std::io::BufWriter::new(stream)) {
                log::warn!("connection ended: {e}");
            }
        });
    }
    Ok(())
}
