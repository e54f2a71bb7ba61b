#![allow(dead_code)]

use std::net::SocketAddr;
use std::time::Duration;

use futures_util::{SinkExt, StreamExt};
use mrhost::{Server, ServerConfig};
use mrhost_core::protocol::{encode, ClientMessage};
use mrhost_core::telemetry::Role;
use serde_json::Value;
use tokio::io::AsyncWriteExt;
use tokio::net::TcpStream;
use tokio_tungstenite::tungstenite::Message;
use tokio_tungstenite::{MaybeTlsStream, WebSocketStream};

pub type Ws = WebSocketStream<MaybeTlsStream<TcpStream>>;

/// Config with OS-assigned ports.
pub fn test_config() -> ServerConfig {
    ServerConfig { ingest_port: 0, dash_port: 0, ..ServerConfig::default() }
}

pub async fn start(config: ServerConfig) -> Server {
    Server::start(config).await.expect("server starts")
}

pub fn local(addr: SocketAddr) -> SocketAddr {
    SocketAddr::from(([127, 0, 0, 1], addr.port()))
}

pub async fn dashboard(server: &Server) -> Ws {
    let url = format!("ws://{}/ws", local(server.dash_addr()));
    let (ws, _) = tokio_tungstenite::connect_async(url).await.expect("websocket connects");
    ws
}

/// Next text frame as JSON, failing the test after `timeout`.
pub async fn next_json(ws: &mut Ws, timeout: Duration) -> Value {
    loop {
        let msg = tokio::time::timeout(timeout, ws.next())
            .await
            .expect("message before timeout")
            .expect("stream open")
            .expect("valid frame");
        if let Message::Text(text) = msg {
            return serde_json::from_str(text.as_str()).expect("server sends JSON");
        }
    }
}

/// Next message that is not a snapshot (history or error reply).
pub async fn next_reply(ws: &mut Ws, timeout: Duration) -> Value {
    loop {
        let v = next_json(ws, timeout).await;
        if v.get("type").is_some() {
            return v;
        }
    }
}

pub async fn next_snapshot(ws: &mut Ws) -> Value {
    loop {
        let v = next_json(ws, Duration::from_secs(5)).await;
        if v.get("type").is_none() {
            return v;
        }
    }
}

pub async fn send_control(ws: &mut Ws, json: Value) {
    ws.send(Message::Text(json.to_string().into())).await.expect("control sent");
}

/// A device connection that has already said hello.
pub async fn device(server: &Server, id: &str) -> TcpStream {
    let mut s = TcpStream::connect(local(server.ingest_addr())).await.expect("ingest connects");
    let hello = ClientMessage::Hello { id: id.into(), role: Role::Visitor, model: "test".into() };
    s.write_all(&encode(&hello)).await.unwrap();
    s
}

pub async fn send(s: &mut TcpStream, msg: &ClientMessage) {
    s.write_all(&encode(msg)).await.unwrap();
}

pub fn schema(name: &str) -> jsonschema::Validator {
    let path = std::path::PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../schema").join(name);
    let text = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    jsonschema::validator_for(&serde_json::from_str(&text).unwrap()).unwrap()
}

pub fn schema_errors(v: &jsonschema::Validator, value: &Value) -> Vec<String> {
    v.iter_errors(value).map(|e| format!("{} at {}", e, e.instance_path)).collect()
}
