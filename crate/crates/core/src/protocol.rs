//! Wire protocol.
//!
//! Devices talk to the server with newline-delimited JSON, one object per
//! line, tagged by a `"type"` field. The dashboard receives snapshot and
//! history objects and sends [`ControlMessage`]s back over a WebSocket.
//! The byte-level format is documented in `docs/protocol.md`.

use std::io;

use serde::{Deserialize, Serialize};
use serde_json::ser::{CompactFormatter, Formatter};
use serde_json::Value;
use thiserror::Error;

use crate::math::Pose;
use crate::session::TraceSample;
use crate::telemetry::{DeviceMetrics, HandFrame, Millis, Role};
use crate::viz::{SceneSnapshot, VizConfigPatch};

/// Frames longer than this (excluding the newline) are rejected.
pub const MAX_FRAME_BYTES: usize = 1 << 20;

pub const DEFAULT_INGEST_PORT: u16 = 7401;
pub const DEFAULT_DASH_PORT: u16 = 7402;
pub const DEFAULT_HEARTBEAT_MS: Millis = 500;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProtocolError {
    #[error("unknown message type `{0}`")]
    UnknownType(String),
    #[error("missing field `{0}`")]
    MissingField(String),
    #[error("bad value: {0}")]
    BadValue(String),
    #[error("frame of {0} bytes exceeds the {MAX_FRAME_BYTES} byte limit")]
    OversizeFrame(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Calibration,
    TrackingLost,
    TrackingRecovered,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FrameFormat {
    Rgb8,
    Stub,
}

/// Device → server message.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type")]
pub enum ClientMessage {
    #[serde(rename = "hello")]
    Hello { id: String, role: Role, model: String },
    #[serde(rename = "hb")]
    Heartbeat { t: Millis, id: String },
    #[serde(rename = "pose")]
    Pose {
        t: Millis,
        id: String,
        head: Pose,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        left: Option<HandFrame>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        right: Option<HandFrame>,
    },
    #[serde(rename = "metrics")]
    Metrics { t: Millis, id: String, metrics: DeviceMetrics },
    #[serde(rename = "event")]
    Event {
        t: Millis,
        id: String,
        kind: EventKind,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        station: Option<String>,
    },
    #[serde(rename = "view")]
    View {
        t: Millis,
        id: String,
        w: u32,
        h: u32,
        fmt: FrameFormat,
        #[serde(with = "base64_bytes")]
        data: Vec<u8>,
    },
}

const CLIENT_TYPES: &[&str] = &["hello", "hb", "pose", "metrics", "event", "view"];

impl ClientMessage {
    pub fn id(&self) -> &str {
        match self {
            ClientMessage::Hello { id, .. }
            | ClientMessage::Heartbeat { id, .. }
            | ClientMessage::Pose { id, .. }
            | ClientMessage::Metrics { id, .. }
            | ClientMessage::Event { id, .. }
            | ClientMessage::View { id, .. } => id,
        }
    }

    /// Sample time; `None` for `Hello`.
    pub fn t(&self) -> Option<Millis> {
        match self {
            ClientMessage::Hello { .. } => None,
            ClientMessage::Heartbeat { t, .. }
            | ClientMessage::Pose { t, .. }
            | ClientMessage::Metrics { t, .. }
            | ClientMessage::Event { t, .. }
            | ClientMessage::View { t, .. } => Some(*t),
        }
    }

    pub fn type_tag(&self) -> &'static str {
        match self {
            ClientMessage::Hello { .. } => "hello",
            ClientMessage::Heartbeat { .. } => "hb",
            ClientMessage::Pose { .. } => "pose",
            ClientMessage::Metrics { .. } => "metrics",
            ClientMessage::Event { .. } => "event",
            ClientMessage::View { .. } => "view",
        }
    }

    /// Checks the invariants the type system cannot express.
    pub fn validate(&self) -> Result<(), ProtocolError> {
        let bad = |m: String| Err(ProtocolError::BadValue(m));
        if self.id().is_empty() {
            return bad("empty id".into());
        }
        match self {
            ClientMessage::Hello { .. } | ClientMessage::Heartbeat { .. } => Ok(()),
            ClientMessage::Pose { head, left, right, .. } => {
                if !head.is_valid() {
                    return bad("head pose must be finite with a unit quaternion".into());
                }
                for (name, hand) in [("left", left), ("right", right)] {
                    if let Some(h) = hand {
                        if !h.is_valid() {
                            return bad(format!(
                                "{name} hand must carry 26 valid joints when tracked and none otherwise"
                            ));
                        }
                    }
                }
                Ok(())
            }
            ClientMessage::Metrics { metrics, .. } => match metrics.invalid_field() {
                Some(f) => bad(format!("metrics.{f} out of range")),
                None => Ok(()),
            },
            ClientMessage::Event { kind, station, .. } => {
                if *kind == EventKind::Calibration && station.as_deref().is_none_or(str::is_empty) {
                    return Err(ProtocolError::MissingField("station".into()));
                }
                Ok(())
            }
            ClientMessage::View { w, h, fmt, data, .. } => {
                if *fmt == FrameFormat::Rgb8 {
                    let expected = (*w as u64) * (*h as u64) * 3;
                    if expected != data.len() as u64 {
                        return bad(format!("rgb8 frame {w}x{h} needs {expected} bytes, got {}", data.len()));
                    }
                }
                Ok(())
            }
        }
    }
}

/// One JSON line, newline-terminated.
pub fn encode(msg: &ClientMessage) -> Vec<u8> {
    let mut out = serde_json::to_vec(msg).expect("client messages always serialize");
    out.push(b'\n');
    out
}

/// Decodes one line (a trailing `\n` / `\r\n` is allowed).
pub fn decode(line: &[u8]) -> Result<ClientMessage, ProtocolError> {
    let line = trim_line_end(line);
    if line.len() > MAX_FRAME_BYTES {
        return Err(ProtocolError::OversizeFrame(line.len()));
    }
    let value = parse_object(line)?;
    match value.get("type") {
        None => return Err(ProtocolError::MissingField("type".into())),
        Some(Value::String(s)) if CLIENT_TYPES.contains(&s.as_str()) => {}
        Some(Value::String(s)) => return Err(ProtocolError::UnknownType(s.clone())),
        Some(other) => return Err(ProtocolError::BadValue(format!("type must be a string, got {other}"))),
    }
    let msg: ClientMessage = serde_json::from_value(value).map_err(classify)?;
    msg.validate()?;
    Ok(msg)
}

fn trim_line_end(mut line: &[u8]) -> &[u8] {
    if let Some(rest) = line.strip_suffix(b"\n") {
        line = rest;
    }
    if let Some(rest) = line.strip_suffix(b"\r") {
        line = rest;
    }
    line
}

fn parse_object(bytes: &[u8]) -> Result<Value, ProtocolError> {
    let value: Value = serde_json::from_slice(bytes).map_err(|e| ProtocolError::BadValue(e.to_string()))?;
    if !value.is_object() {
        return Err(ProtocolError::BadValue("expected a JSON object".into()));
    }
    Ok(value)
}

fn classify(e: serde_json::Error) -> ProtocolError {
    let text = e.to_string();
    if let Some(rest) = text.strip_prefix("missing field `") {
        if let Some(end) = rest.find('`') {
            return ProtocolError::MissingField(rest[..end].to_string());
        }
    }
    ProtocolError::BadValue(text)
}

/// Splits a byte stream into lines and decodes them.
///
/// A malformed line yields one error and decoding resumes at the next
/// newline. A line growing past [`MAX_FRAME_BYTES`] yields a single
/// `OversizeFrame` and the rest of it is discarded.
#[derive(Debug, Default)]
pub struct LineDecoder {
    buf: Vec<u8>,
    discarding: bool,
}

impl LineDecoder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, mut bytes: &[u8]) -> Vec<Result<ClientMessage, ProtocolError>> {
        let mut out = Vec::new();
        while !bytes.is_empty() {
            match bytes.iter().position(|&b| b == b'\n') {
                Some(nl) => {
                    let (head, tail) = bytes.split_at(nl);
                    bytes = &tail[1..];
                    if self.discarding {
                        self.discarding = false;
                        self.buf.clear();
                        continue;
                    }
                    if self.buf.len() + head.len() > MAX_FRAME_BYTES {
                        out.push(Err(ProtocolError::OversizeFrame(self.buf.len() + head.len())));
                        self.buf.clear();
                        continue;
                    }
                    self.buf.extend_from_slice(head);
                    let line = std::mem::take(&mut self.buf);
                    if let Some(r) = decode_nonblank(&line) {
                        out.push(r);
                    }
                }
                None => {
                    if !self.discarding {
                        self.buf.extend_from_slice(bytes);
                        if self.buf.len() > MAX_FRAME_BYTES {
                            out.push(Err(ProtocolError::OversizeFrame(self.buf.len())));
                            self.buf.clear();
                            self.discarding = true;
                        }
                    }
                    bytes = &[];
                }
            }
        }
        out
    }

    /// Decodes whatever is left after the stream closed without a final newline.
    pub fn finish(&mut self) -> Option<Result<ClientMessage, ProtocolError>> {
        let line = std::mem::take(&mut self.buf);
        if std::mem::take(&mut self.discarding) {
            return None;
        }
        decode_nonblank(&line)
    }

    pub fn buffered(&self) -> usize {
        self.buf.len()
    }
}

fn decode_nonblank(line: &[u8]) -> Option<Result<ClientMessage, ProtocolError>> {
    let trimmed = trim_line_end(line);
    if trimmed.iter().all(u8::is_ascii_whitespace) {
        None
    } else {
        Some(decode(trimmed))
    }
}

/// Dashboard → server message.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
#[allow(clippy::large_enum_variant)]
pub enum ControlMessage {
    SetVizConfig {
        patch: VizConfigPatch,
    },
    RequestHistory {
        visitor_id: String,
        /// `None` requests everything recorded so far.
        #[serde(default)]
        up_to_t: Option<Millis>,
    },
    SetHostPose {
        pose: Pose,
    },
    /// Changes the length of the live trajectory trail, ms.
    SetTrailWindow {
        window_ms: Millis,
    },
}

pub fn encode_control(msg: &ControlMessage) -> String {
    serde_json::to_string(msg).expect("control messages always serialize")
}

pub fn decode_control(text: &str) -> Result<ControlMessage, ProtocolError> {
    if text.len() > MAX_FRAME_BYTES {
        return Err(ProtocolError::OversizeFrame(text.len()));
    }
    let value = parse_object(text.trim_end().as_bytes())?;
    match value.get("type") {
        None => return Err(ProtocolError::MissingField("type".into())),
        Some(Value::String(s))
            if ["set_viz_config", "request_history", "set_host_pose", "set_trail_window"].contains(&s.as_str()) => {}
        Some(Value::String(s)) => return Err(ProtocolError::UnknownType(s.clone())),
        Some(other) => return Err(ProtocolError::BadValue(format!("type must be a string, got {other}"))),
    }
    let msg: ControlMessage = serde_json::from_value(value).map_err(classify)?;
    match &msg {
        ControlMessage::SetHostPose { pose } if !pose.is_valid() => {
            return Err(ProtocolError::BadValue("host pose must be finite with a unit quaternion".into()));
        }
        ControlMessage::SetTrailWindow { window_ms: 0 } => {
            return Err(ProtocolError::BadValue("window_ms must be > 0".into()));
        }
        _ => {}
    }
    Ok(msg)
}

/// Number of decimals kept for every floating-point value in a snapshot.
pub const SNAPSHOT_DECIMALS: i32 = 4;

/// Serializes a snapshot as one JSON object. Floats are rounded to
/// [`SNAPSHOT_DECIMALS`] so equal pipelines produce equal bytes everywhere.
pub fn encode_snapshot(snap: &SceneSnapshot) -> String {
    to_quantized_json(snap)
}

fn quantize(f: f64) -> f64 {
    let scale = 10f64.powi(SNAPSHOT_DECIMALS);
    let q = (f * scale).round() / scale;
    if q == 0.0 {
        0.0
    } else {
        q
    }
}

/// Compact JSON with every float passed through [`quantize`].
struct QuantizingFormatter;

impl Formatter for QuantizingFormatter {
    fn write_f64<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        CompactFormatter.write_f64(writer, quantize(value))
    }
}

fn to_quantized_json<T: Serialize>(value: &T) -> String {
    let mut out = Vec::with_capacity(64 * 1024);
    let mut ser = serde_json::Serializer::with_formatter(&mut out, QuantizingFormatter);
    value.serialize(&mut ser).expect("in-memory serialization cannot fail");
    String::from_utf8(out).expect("serde_json emits UTF-8")
}

/// Reply to [`ControlMessage::RequestHistory`], sent only to the requester.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename = "history")]
pub struct HistoryReply {
    pub visitor: String,
    #[serde(default)]
    pub up_to_t: Option<Millis>,
    pub samples: Vec<TraceSample>,
}

pub fn encode_history(reply: &HistoryReply) -> String {
    to_quantized_json(reply)
}

/// Pixels behind a snapshot's view texture reference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViewFrame {
    pub id: String,
    pub w: u32,
    pub h: u32,
    pub fmt: FrameFormat,
    #[serde(with = "base64_bytes")]
    pub data: Vec<u8>,
}

pub fn encode_view(frame: &ViewFrame) -> String {
    serde_json::to_string(frame).expect("view frames always serialize")
}

/// Error notice sent back to a dashboard that sent a bad control message.
pub fn encode_error(message: &str) -> String {
    serde_json::json!({ "type": "error", "message": message }).to_string()
}

mod base64_bytes {
    use base64::engine::general_purpose::STANDARD;
    use base64::Engine;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(bytes: &[u8], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&STANDARD.encode(bytes))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<u8>, D::Error> {
        let text = String::deserialize(d)?;
        STANDARD.decode(text.as_bytes()).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::{Quat, Vec3};

    fn hb(t: Millis, id: &str) -> ClientMessage {
        ClientMessage::Heartbeat { t, id: id.into() }
    }

    #[test]
    fn heartbeat_encoding() {
        assert_eq!(encode(&hb(1000, "v01")), b"{\"type\":\"hb\",\"t\":1000,\"id\":\"v01\"}\n");
    }

    #[test]
    fn hello_encoding() {
        let m = ClientMessage::Hello { id: "h01".into(), role: Role::Host, model: "sim".into() };
        assert_eq!(
            String::from_utf8(encode(&m)).unwrap(),
            "{\"type\":\"hello\",\"id\":\"h01\",\"role\":\"host\",\"model\":\"sim\"}\n"
        );
    }

    #[test]
    fn calibration_event_encoding() {
        let m = ClientMessage::Event {
            t: 5000,
            id: "v03".into(),
            kind: EventKind::Calibration,
            station: Some("s02".into()),
        };
        assert_eq!(
            String::from_utf8(encode(&m)).unwrap(),
            "{\"type\":\"event\",\"t\":5000,\"id\":\"v03\",\"kind\":\"calibration\",\"station\":\"s02\"}\n"
        );
    }

    #[test]
    fn pose_encoding_uses_arrays() {
        let m = ClientMessage::Pose {
            t: 7,
            id: "v01".into(),
            head: Pose::new(Vec3::new(1.0, 1.5, -2.0), Quat::IDENTITY),
            left: None,
            right: None,
        };
        assert_eq!(
            String::from_utf8(encode(&m)).unwrap(),
            "{\"type\":\"pose\",\"t\":7,\"id\":\"v01\",\"head\":{\"p\":[1.0,1.5,-2.0],\"q\":[0.0,0.0,0.0,1.0]}}\n"
        );
    }

    #[test]
    fn view_payload_is_base64() {
        let m =
            ClientMessage::View { t: 1, id: "v01".into(), w: 1, h: 1, fmt: FrameFormat::Rgb8, data: vec![255, 0, 1] };
        let line = String::from_utf8(encode(&m)).unwrap();
        assert!(line.contains("\"data\":\"/wAB\""), "{line}");
        assert_eq!(decode(line.as_bytes()).unwrap(), m);
    }

    #[test]
    fn decode_heartbeat() {
        assert_eq!(decode(br#"{"type":"hb","t":1,"id":"v01"}"#).unwrap(), hb(1, "v01"));
    }

    #[test]
    fn decode_errors() {
        assert_eq!(decode(br#"{"type":"nope"}"#), Err(ProtocolError::UnknownType("nope".into())));
        assert_eq!(decode(br#"{"t":1}"#), Err(ProtocolError::MissingField("type".into())));
        assert_eq!(decode(br#"{"type":"hb","id":"v01"}"#), Err(ProtocolError::MissingField("t".into())));
        assert!(matches!(decode(br#"{"type":"pose","t":9"#), Err(ProtocolError::BadValue(_))));
        assert!(matches!(decode(b"[1,2]"), Err(ProtocolError::BadValue(_))));
        assert!(matches!(decode(b"\xff\xfe"), Err(ProtocolError::BadValue(_))));
        assert!(matches!(decode(br#"{"type":"hb","t":-1,"id":"v01"}"#), Err(ProtocolError::BadValue(_))));
    }

    #[test]
    fn decode_rejects_invariant_violations() {
        let calib_no_station = br#"{"type":"event","t":1,"id":"v01","kind":"calibration"}"#;
        assert_eq!(decode(calib_no_station), Err(ProtocolError::MissingField("station".into())));
        let bad_quat = br#"{"type":"pose","t":1,"id":"v01","head":{"p":[0,0,0],"q":[0,0,0,2]}}"#;
        assert!(matches!(decode(bad_quat), Err(ProtocolError::BadValue(_))));
        let short_frame = br#"{"type":"view","t":1,"id":"v01","w":2,"h":2,"fmt":"rgb8","data":"AAAA"}"#;
        assert!(matches!(decode(short_frame), Err(ProtocolError::BadValue(_))));
        let stub = br#"{"type":"view","t":1,"id":"v01","w":2,"h":2,"fmt":"stub","data":""}"#;
        assert!(decode(stub).is_ok());
        let battery = br#"{"type":"metrics","t":1,"id":"v01","metrics":{"fps":72,"battery":1.5,"cpu":0,"gpu":0,"net_in_bps":0,"net_out_bps":0,"latency_ms":0}}"#;
        assert!(matches!(decode(battery), Err(ProtocolError::BadValue(_))));
    }

    #[test]
    fn oversize_frame_rejected() {
        let mut line = br#"{"type":"hb","t":1,"id":""#.to_vec();
        line.extend(std::iter::repeat_n(b'a', MAX_FRAME_BYTES));
        line.extend_from_slice(b"\"}");
        assert!(matches!(decode(&line), Err(ProtocolError::OversizeFrame(_))));
    }

    #[test]
    fn stream_resynchronizes_after_truncated_line() {
        let mut dec = LineDecoder::new();
        let mut out = dec.push(b"{\"type\":\"pose\",\"t\":9\n{\"type\":\"hb\",\"t\":1");
        out.extend(dec.push(b"0,\"id\":\"v01\"}\n\n"));
        assert_eq!(out.len(), 2);
        assert!(matches!(out[0], Err(ProtocolError::BadValue(_))));
        assert_eq!(out[1], Ok(hb(10, "v01")));
        assert!(dec.finish().is_none());
    }

    #[test]
    fn stream_discards_oversize_line_and_recovers() {
        let mut dec = LineDecoder::new();
        let chunk = vec![b'x'; 64 * 1024];
        let mut errors = 0;
        for _ in 0..20 {
            errors += dec.push(&chunk).len();
        }
        assert_eq!(errors, 1);
        assert_eq!(dec.buffered(), 0);
        let out = dec.push(b"tail\n{\"type\":\"hb\",\"t\":2,\"id\":\"v02\"}\n");
        assert_eq!(out, vec![Ok(hb(2, "v02"))]);
    }

    #[test]
    fn finish_decodes_unterminated_tail() {
        let mut dec = LineDecoder::new();
        assert!(dec.push(br#"{"type":"hb","t":3,"id":"v01"}"#).is_empty());
        assert_eq!(dec.finish(), Some(Ok(hb(3, "v01"))));
    }

    #[test]
    fn control_messages() {
        let m = decode_control(r#"{"type":"set_viz_config","patch":{"area":false,"curve_w_max":0.2}}"#).unwrap();
        match m {
            ControlMessage::SetVizConfig { patch } => {
                assert_eq!(patch.area, Some(false));
                assert_eq!(patch.curve_w_max, Some(0.2));
                assert_eq!(patch.frustum, None);
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            decode_control(r#"{"type":"set_viz_config","patch":{"bogus":1}}"#),
            Err(ProtocolError::BadValue(_))
        ));
        assert_eq!(
            decode_control(r#"{"type":"request_history","visitor_id":"v01","up_to_t":5000}"#).unwrap(),
            ControlMessage::RequestHistory { visitor_id: "v01".into(), up_to_t: Some(5000) }
        );
        assert!(matches!(decode_control(r#"{"type":"x"}"#), Err(ProtocolError::UnknownType(_))));
        let pose = ControlMessage::SetHostPose { pose: Pose::at(Vec3::new(0.0, 1.7, 0.0)) };
        assert_eq!(decode_control(&encode_control(&pose)).unwrap(), pose);
        assert_eq!(
            decode_control(r#"{"type":"set_trail_window","window_ms":30000}"#).unwrap(),
            ControlMessage::SetTrailWindow { window_ms: 30_000 }
        );
        assert!(matches!(
            decode_control(r#"{"type":"set_trail_window","window_ms":0}"#),
            Err(ProtocolError::BadValue(_))
        ));
    }

    #[test]
    fn empty_snapshot_encoding() {
        assert_eq!(encode_snapshot(&SceneSnapshot::empty(0)), r#"{"t":0,"visitors":[],"primitives":[]}"#);
    }

    #[test]
    fn quantize_rounds_and_clears_negative_zero() {
        let v = serde_json::json!({"a": 0.123456789, "b": -0.00001, "c": 3, "d": [1.00006, f64::NAN]});
        assert_eq!(to_quantized_json(&v), r#"{"a":0.1235,"b":0.0,"c":3,"d":[1.0001,null]}"#);
    }
}
