mod common;

use std::net::SocketAddr;
use std::time::Duration;

use common::fixture;
use futures::{SinkExt, StreamExt};
use serde_json::{json, Value};
use skini::server::{serve, ServeOptions, ServerHandle};
use skini::simulator::SimulatorConfig;
use tokio::io::{AsyncReadExt, AsyncWriteExt};
use tokio::net::TcpStream;
use tokio_tungstenite::tungstenite::Message;
use tokio_tungstenite::{connect_async, MaybeTlsStream, WebSocketStream};

type Ws = WebSocketStream<MaybeTlsStream<TcpStream>>;

async fn start(speed: f64, sim: Option<SimulatorConfig>) -> ServerHandle {
    let mut o = ServeOptions::new("127.0.0.1:0".parse().unwrap());
    o.speed = speed;
    o.sim = sim;
    serve(fixture("chromatic.json"), o).await.unwrap()
}

async fn http_get(addr: SocketAddr, path: &str) -> (u16, String) {
    let mut s = TcpStream::connect(addr).await.unwrap();
    let req = format!("GET {path} HTTP/1.1\r\nHost: {addr}\r\nConnection: close\r\n\r\n");
    s.write_all(req.as_bytes()).await.unwrap();
    let mut buf = String::new();
    s.read_to_string(&mut buf).await.unwrap();
    let status = buf[9..12].parse().unwrap();
    let body = buf.split_once("\r\n\r\n").unwrap().1.to_string();
    (status, body)
}

async fn connect(addr: SocketAddr, participant: Option<&str>) -> Ws {
    let url = match participant {
        Some(p) => format!("ws://{addr}/ws?participant={p}"),
        None => format!("ws://{addr}/ws"),
    };
    connect_async(url).await.unwrap().0
}

async fn send(ws: &mut Ws, v: Value) {
    ws.send(Message::Text(v.to_string().into())).await.unwrap();
}

/// Next JSON message, failing after two seconds.
async fn recv(ws: &mut Ws) -> Value {
    loop {
        let m = tokio::time::timeout(Duration::from_secs(2), ws.next())
            .await
            .expect("timed out waiting for a message")
            .expect("socket closed")
            .unwrap();
        if let Message::Text(t) = m {
            return serde_json::from_str(&t).unwrap();
        }
    }
}

/// Skips messages until one of the given type arrives.
async fn recv_type(ws: &mut Ws, ty: &str) -> Value {
    for _ in 0..200 {
        let m = recv(ws).await;
        if m["type"] == ty {
            return m;
        }
    }
    panic!("no `{ty}` message");
}

#[tokio::test]
async fn meta_and_client_page() {
    let server = start(1.0, None).await;
    let (status, body) = http_get(server.addr, "/meta").await;
    assert_eq!(status, 200);
    let meta: Value = serde_json::from_str(&body).unwrap();
    assert_eq!(meta["title"], "Chromatic session");
    assert_eq!(meta["tempoBpm"], 120.0);
    assert_eq!(meta["groups"].as_array().unwrap().len(), 7);
    assert_eq!(meta["groups"][1]["kind"], "tank");
    assert_eq!(meta["phase"], "running");

    let (status, body) = http_get(server.addr, "/").await;
    assert_eq!(status, 200);
    assert!(body.contains("<html") && body.contains("/ws"));
    server.shutdown().await;
}

#[tokio::test]
async fn select_ack_played_round_trip() {
    let server = start(1.0, None).await;
    let mut ws = connect(server.addr, None).await;
    let hello = recv(&mut ws).await;
    assert_eq!(hello["type"], "hello");
    let me = hello["participantId"].as_str().unwrap().to_string();
    let matrix = recv(&mut ws).await;
    assert_eq!(matrix["type"], "matrix");
    assert!(matrix["revision"].as_u64().unwrap() >= 1);
    let names: Vec<&str> = matrix["groups"]
        .as_array()
        .unwrap()
        .iter()
        .map(|g| g["name"].as_str().unwrap())
        .collect();
    assert_eq!(names, ["ChromBass", "ChromPercuTank"]);

    send(&mut ws, json!({"type": "select", "patternId": "ChromBass_1"})).await;
    let ack = recv(&mut ws).await;
    assert_eq!(ack["type"], "ack", "{ack}");
    assert_eq!(ack["patternId"], "ChromBass_1");
    assert_eq!(ack["pending"], 1);
    let delay = ack["delaySeconds"].as_f64().unwrap();
    assert!((0.0..=0.5).contains(&delay), "{delay}");

    let played = recv_type(&mut ws, "played").await;
    assert_eq!(played["patternId"], "ChromBass_1");
    assert_eq!(played["participantId"], me.as_str());
    server.shutdown().await;
}

#[tokio::test]
async fn cap_and_tank_rejections() {
    // A frozen clock: nothing after the first pattern on an instrument
    // ever starts.
    let server = start(0.0, None).await;
    let mut ws = connect(server.addr, None).await;
    recv_type(&mut ws, "matrix").await;

    let mut rejects = Vec::new();
    for _ in 0..6 {
        send(&mut ws, json!({"type": "select", "patternId": "ChromBass_2"})).await;
        let m = loop {
            let m = recv(&mut ws).await;
            if m["type"] == "ack" || m["type"] == "reject" {
                break m;
            }
        };
        if m["type"] == "reject" {
            rejects.push(m);
        }
    }
    assert!(!rejects.is_empty());
    for r in &rejects {
        assert_eq!(r["reason"], "PendingCapReached");
        assert_eq!(r["pending"], 3);
    }

    let mut other = connect(server.addr, None).await;
    recv_type(&mut other, "matrix").await;
    send(&mut other, json!({"type": "select", "patternId": "ChromPercuTank1"})).await;
    assert_eq!(recv_type(&mut other, "ack").await["patternId"], "ChromPercuTank1");
    send(&mut other, json!({"type": "select", "patternId": "ChromPercuTank1"})).await;
    let r = recv_type(&mut other, "reject").await;
    assert_eq!(r["reason"], "TankExhausted");
    let fresh = recv(&mut other).await;
    assert_eq!(fresh["type"], "matrix");
    let tank = fresh["groups"]
        .as_array()
        .unwrap()
        .iter()
        .find(|g| g["name"] == "ChromPercuTank")
        .unwrap();
    assert!(!tank["patterns"]
        .as_array()
        .unwrap()
        .contains(&json!("ChromPercuTank1")));
    server.shutdown().await;
}

#[tokio::test]
async fn ping_and_malformed_messages() {
    let server = start(1.0, None).await;
    let mut ws = connect(server.addr, None).await;
    recv_type(&mut ws, "matrix").await;
    ws.send(Message::Text("{not json".into())).await.unwrap();
    assert_eq!(recv_type(&mut ws, "error").await["type"], "error");
    send(&mut ws, json!({"type": "dance"})).await;
    recv_type(&mut ws, "error").await;
    send(&mut ws, json!({"type": "select", "patternId": "Nope"})).await;
    recv_type(&mut ws, "error").await;
    send(&mut ws, json!({"type": "ping", "extra": 1})).await;
    assert_eq!(recv_type(&mut ws, "pong").await["type"], "pong");
    server.shutdown().await;
}

#[tokio::test]
async fn reconnect_replaces_the_old_session() {
    let server = start(1.0, None).await;
    let mut first = connect(server.addr, Some("alice")).await;
    assert_eq!(recv(&mut first).await["participantId"], "alice");
    let mut second = connect(server.addr, Some("alice")).await;
    assert_eq!(recv(&mut second).await["participantId"], "alice");

    let closed = loop {
        match tokio::time::timeout(Duration::from_secs(2), first.next()).await {
            Ok(Some(Ok(Message::Close(frame)))) => break frame,
            Ok(Some(Ok(_))) => continue,
            other => panic!("{other:?}"),
        }
    };
    assert!(closed.unwrap().reason.contains("replaced"));
    send(&mut second, json!({"type": "ping"})).await;
    recv_type(&mut second, "pong").await;
    server.shutdown().await;
}

#[tokio::test]
async fn simulated_audience_feeds_the_room() {
    let sim = SimulatorConfig {
        audience_size: 10,
        min_response_s: 0.1,
        max_response_s: 0.5,
        max_wait_s: 30.0,
        seed: 3,
        run_length_s: 1e9,
    };
    let server = start(4.0, Some(sim)).await;
    let mut ws = connect(server.addr, None).await;
    let feed = recv_type(&mut ws, "feed").await;
    assert!(feed["text"].as_str().unwrap().starts_with("sim"), "{feed}");

    // Revisions only grow, up to the end of the piece.
    let mut last = 0;
    loop {
        let m = recv(&mut ws).await;
        match m["type"].as_str().unwrap() {
            "matrix" => {
                let r = m["revision"].as_u64().unwrap();
                assert!(r > last);
                last = r;
            }
            "feed" if m["text"] == "the score is over" => break,
            _ => {}
        }
    }
    assert!(last > 0);
    let (_, body) = http_get(server.addr, "/meta").await;
    assert!(body.contains("\"phase\":\"finished\""), "{body}");
    server.shutdown().await;
}
