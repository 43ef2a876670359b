//! Serve the chromatic score with a simulated room at four times speed and
//! follow it from a WebSocket client until the piece ends.

use std::sync::Arc;

use futures::StreamExt;
use skini::score::Score;
use skini::server::{serve, ServeOptions};
use skini::simulator::SimulatorConfig;
use tokio_tungstenite::connect_async;
use tokio_tungstenite::tungstenite::Message;

#[tokio::main]
async fn main() {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/chromatic.json");
    let score = Arc::new(Score::from_json(&std::fs::read_to_string(path).unwrap()).unwrap());
    let mut options = ServeOptions::new("127.0.0.1:0".parse().unwrap());
    options.speed = 4.0;
    options.sim = Some(SimulatorConfig {
        audience_size: 10,
        min_response_s: 0.5,
        max_response_s: 2.0,
        ..SimulatorConfig::default()
    });
    let server = serve(score, options).await.unwrap();
    println!("open http://{} in a browser to join", server.addr);

    let (mut ws, _) = connect_async(format!("ws://{}/ws?participant=watcher", server.addr)).await.unwrap();
    while let Some(Ok(msg)) = ws.next().await {
        if let Message::Text(text) = msg {
            println!("{text}");
            if text.contains("the score is over") {
                break;
            }
        }
    }
    server.shutdown().await;
}
