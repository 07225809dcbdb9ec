use std::time::Duration;

use futures::StreamExt;
use serde_json::Value;
use shortserve::commands::{replay, ReplayOptions};
use shortserve::stream::{bind, serve, StreamHub};
use shortserve_core::config::EngineConfig;
use shortserve_core::mocap::synth::{synthesize_session, ServeParams, SessionParams};
use shortserve_core::mocap::{Handedness, Recording};
use shortserve_core::model::{builtin_model, ExpertModel, Pattern};
use shortserve_core::session::{evaluate_frames, MessageKind, StreamMessage};
use tokio::io::{AsyncReadExt, AsyncWriteExt};
use tokio_tungstenite::{connect_async, tungstenite::Message};

async fn collect(url: String) -> Vec<String> {
    let (mut ws, _) = connect_async(url).await.expect("connect");
    let mut lines = Vec::new();
    while let Some(msg) = ws.next().await {
        match msg.expect("stream error") {
            Message::Text(t) => lines.push(t.to_string()),
            Message::Close(_) => break,
            _ => {}
        }
    }
    lines
}

fn parse(lines: &[String]) -> Vec<StreamMessage> {
    lines
        .iter()
        .map(|l| {
            assert!(l.ends_with('\n'), "each message is one NDJSON line");
            assert_eq!(l.matches('\n').count(), 1);
            serde_json::from_str(l).unwrap()
        })
        .collect()
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn two_clients_see_identical_streams() {
    let rec = synthesize_session(&SessionParams::default(), &vec![ServeParams::default(); 3]).unwrap();
    let frames = rec.skeleton_frames().unwrap();
    let model = builtin_model(Pattern::WristOnly);
    let cfg = EngineConfig {
        stream: shortserve_core::config::StreamConfig {
            client_queue: 1 << 16,
            ..Default::default()
        },
        ..EngineConfig::default()
    };
    let (listener, addr) = bind("127.0.0.1", 0).await.unwrap();
    let opts = ReplayOptions {
        speed: 200.0,
        wait_clients: 2,
        wait_timeout: Duration::from_secs(10),
        linger: Duration::from_secs(10),
    };
    let server = tokio::spawn(replay(listener, rec, "s1".into(), model, cfg.clone(), opts));
    let url = format!("ws://{addr}/stream");
    let (a, b) = tokio::join!(collect(url.clone()), collect(url));
    let outcome = server.await.unwrap().unwrap();

    assert_eq!(a, b);
    let messages = parse(&a);
    assert_eq!(messages.len() as u64, outcome.messages);
    assert!(messages.iter().all(|m| m.v == 1));
    assert!(messages.windows(2).all(|w| w[0].seq < w[1].seq));

    let feedback: Vec<&StreamMessage> = messages.iter().filter(|m| m.kind == MessageKind::Feedback).collect();
    assert_eq!(feedback.len(), 3);
    assert_eq!(messages.last().unwrap().kind, MessageKind::SessionStats);
    assert_eq!(messages.last().unwrap().payload["n"], 3);

    let batch = evaluate_frames("s1", &frames, &model, &cfg);
    for (live, offline) in feedback.iter().zip(&batch) {
        assert_eq!(live.payload, serde_json::to_value(offline).unwrap());
    }
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn state_changes_follow_legal_transitions() {
    let rec = synthesize_session(&SessionParams::default(), &[ServeParams::default(); 2]).unwrap();
    let (listener, addr) = bind("127.0.0.1", 0).await.unwrap();
    let opts = ReplayOptions {
        speed: 500.0,
        wait_clients: 1,
        wait_timeout: Duration::from_secs(10),
        linger: Duration::from_secs(10),
    };
    let cfg = EngineConfig::default();
    let server = tokio::spawn(replay(listener, rec, "s1".into(), builtin_model(Pattern::WristOnly), cfg, opts));
    let messages = parse(&collect(format!("ws://{addr}/stream")).await);
    server.await.unwrap().unwrap();

    let legal = [
        ("idle", "ready"),
        ("ready", "idle"),
        ("ready", "backward_swing"),
        ("backward_swing", "forward_swing"),
        ("forward_swing", "contact"),
        ("contact", "idle"),
        ("backward_swing", "idle"),
        ("forward_swing", "idle"),
    ];
    let mut state = "idle".to_string();
    let mut in_swing = false;
    for m in &messages {
        match m.kind {
            MessageKind::StateChange => {
                let from = m.payload["from"].as_str().unwrap();
                let to = m.payload["to"].as_str().unwrap();
                assert_eq!(from, state);
                assert!(legal.contains(&(from, to)), "{from} -> {to}");
                state = to.to_string();
                in_swing = to.ends_with("swing");
            }
            MessageKind::Guidance => assert!(!in_swing && (state == "idle" || state == "ready")),
            _ => {}
        }
    }
}

#[tokio::test]
async fn slow_client_gets_a_gap_notice() {
    let hub = StreamHub::new(builtin_model(Pattern::WristOnly), 4);
    let (listener, addr) = bind("127.0.0.1", 0).await.unwrap();
    let server = tokio::spawn(serve(listener, hub.clone(), std::future::pending()));
    let client = tokio::spawn(collect(format!("ws://{addr}/stream")));
    while hub.clients() == 0 {
        tokio::time::sleep(Duration::from_millis(5)).await;
    }
    // No await between publishes: the forwarding task cannot run meanwhile.
    for seq in 1..=100 {
        hub.publish(StreamMessage::new(seq, MessageKind::Frame, Value::Null));
    }
    hub.close();
    let messages = parse(&client.await.unwrap());
    server.abort();

    assert_eq!(messages[0].kind, MessageKind::Gap);
    assert_eq!(messages[0].payload["dropped"], 96);
    assert_eq!(messages[0].seq, 96);
    let seqs: Vec<u64> = messages[1..].iter().map(|m| m.seq).collect();
    assert_eq!(seqs, [97, 98, 99, 100]);
}

#[tokio::test]
async fn model_endpoint_returns_the_active_model() {
    let model = builtin_model(Pattern::ElbowWrist);
    let hub = StreamHub::new(model, 16);
    let (listener, addr) = bind("127.0.0.1", 0).await.unwrap();
    let server = tokio::spawn(serve(listener, hub, std::future::pending()));

    let mut tcp = tokio::net::TcpStream::connect(addr).await.unwrap();
    tcp.write_all(b"GET /model HTTP/1.1\r\nHost: localhost\r\nConnection: close\r\n\r\n")
        .await
        .unwrap();
    let mut response = String::new();
    tcp.read_to_string(&mut response).await.unwrap();
    server.abort();

    assert!(response.starts_with("HTTP/1.1 200"), "{response}");
    assert!(response.to_ascii_lowercase().contains("content-type: application/json"));
    let body = response.split("\r\n\r\n").nth(1).unwrap();
    let served: ExpertModel = serde_json::from_str(body).unwrap();
    assert_eq!(served, model);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn empty_recording_streams_only_session_stats() {
    let rec = Recording::new(Vec::new(), 120.0, Handedness::Right).unwrap();
    let (listener, addr) = bind("127.0.0.1", 0).await.unwrap();
    let opts = ReplayOptions {
        speed: 1000.0,
        wait_clients: 1,
        wait_timeout: Duration::from_secs(10),
        linger: Duration::from_secs(10),
    };
    let server = tokio::spawn(replay(
        listener,
        rec,
        "empty".into(),
        builtin_model(Pattern::WristOnly),
        EngineConfig::default(),
        opts,
    ));
    let messages = parse(&collect(format!("ws://{addr}/stream")).await);
    server.await.unwrap().unwrap();
    assert!(messages.iter().all(|m| m.kind != MessageKind::Feedback));
    let stats: Vec<_> = messages.iter().filter(|m| m.kind == MessageKind::SessionStats).collect();
    assert_eq!(stats.len(), 1);
    assert_eq!(stats[0].payload["n"], 0);
}
