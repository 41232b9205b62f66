//! Starts the play service on a loopback port and plays one standard game
//! against it over plain HTTP, picking the first legal cell each turn.
//!
//! cargo run --release -p noughts-service --example http_session

use std::io::{Read, Write};
use std::net::TcpStream;

use noughts::drl::{train_policy, AgentConfig, Algorithm};
use noughts::env::DialogueKit;
use noughts::game::Variant;
use noughts_service::{router, AppState, ServiceConfig};
use serde_json::{json, Value};

fn request(addr: std::net::SocketAddr, method: &str, path: &str, body: Option<&Value>) -> std::io::Result<(u16, Value)> {
    let body = body.map(Value::to_string).unwrap_or_default();
    let mut s = TcpStream::connect(addr)?;
    write!(
        s,
        "{method} {path} HTTP/1.1\r\nHost: {addr}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
        body.len()
    )?;
    let mut raw = String::new();
    s.read_to_string(&mut raw)?;
    let status = raw.split_whitespace().nth(1).and_then(|c| c.parse().ok()).unwrap_or(0);
    let payload = raw.split_once("\r\n\r\n").map_or("", |(_, b)| b);
    Ok((status, serde_json::from_str(payload).unwrap_or(Value::Null)))
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let config = AgentConfig {
        algorithm: Algorithm::CompetitiveTemporal,
        learning_steps: 20_000,
        seed: 5,
        ..AgentConfig::default()
    };
    println!("training a small agent ...");
    let (policy, _) = train_policy(&config, DialogueKit::builtin(Variant::Standard))?;

    let rt = tokio::runtime::Runtime::new()?;
    let listener = rt.block_on(tokio::net::TcpListener::bind("127.0.0.1:0"))?;
    let addr = listener.local_addr()?;
    let app = router(AppState::new(ServiceConfig::new([policy])));
    rt.spawn(async move { axum::serve(listener, app).await });
    println!("serving on http://{addr}");

    let (code, health) = request(addr, "GET", "/healthz", None)?;
    println!("GET /healthz -> {code} {health}");

    let (code, created) = request(addr, "POST", "/games", Some(&json!({ "variant": "standard", "humanMark": "o" })))?;
    println!("POST /games -> {code}");
    let id = created["id"].as_str().ok_or("no game id")?.to_string();
    let mut state = created["state"].clone();
    while state["awaitingHumanMove"] == true {
        let cell = state["legalMoves"][0].as_str().ok_or("no legal move")?.to_string();
        let (code, reply) = request(addr, "POST", &format!("/games/{id}/moves"), Some(&json!({ "cell": cell })))?;
        println!("POST move {cell} -> {code}");
        for e in reply["agentActs"].as_array().into_iter().flatten() {
            println!("    agent {:<34} {}", e["act"].as_str().unwrap_or(""), e["text"].as_str().unwrap_or(""));
        }
        state = reply["state"].clone();
    }
    for row in state["board"].as_array().into_iter().flatten() {
        let cells: Vec<&str> = row.as_array().into_iter().flatten().map(|c| c.as_str().filter(|s| !s.is_empty()).unwrap_or(".")).collect();
        println!("  {}", cells.join(" "));
    }
    println!("status from the agent's side: {}", state["status"]);
    Ok(())
}
