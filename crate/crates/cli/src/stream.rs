//! Live message stream: `/stream` WebSocket (one NDJSON message per text
//! frame) and `GET /model`.
//!
//! Messages fan out through a bounded broadcast ring. A client that falls
//! behind loses its oldest messages and receives a `gap` message counting
//! them; the publisher never waits on clients.

use std::net::SocketAddr;
use std::sync::Arc;

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use shortserve_core::model::ExpertModel;
use shortserve_core::session::StreamMessage;
use tokio::net::TcpListener;
use tokio::sync::broadcast::{self, error::RecvError};
use tokio::sync::watch;

#[derive(Clone)]
pub struct StreamHub {
    tx: broadcast::Sender<Arc<StreamMessage>>,
    done: Arc<watch::Sender<bool>>,
    model: Arc<ExpertModel>,
}

impl StreamHub {
    pub fn new(model: ExpertModel, client_queue: usize) -> Self {
        let (tx, _) = broadcast::channel(client_queue.max(1));
        Self {
            tx,
            done: Arc::new(watch::Sender::new(false)),
            model: Arc::new(model),
        }
    }

    /// Ends every stream once its client has received what was published.
    pub fn close(&self) {
        self.done.send_replace(true);
    }

    /// Hands a message to every connected client. Never blocks.
    pub fn publish(&self, message: StreamMessage) {
        let _ = self.tx.send(Arc::new(message));
    }

    pub fn clients(&self) -> usize {
        self.tx.receiver_count()
    }

    pub fn model(&self) -> &ExpertModel {
        &self.model
    }

    pub fn router(&self) -> Router {
        Router::new()
            .route("/stream", get(stream_handler))
            .route("/model", get(model_handler))
            .with_state(self.clone())
    }
}

async fn model_handler(State(hub): State<StreamHub>) -> Json<ExpertModel> {
    Json(*hub.model)
}

async fn stream_handler(ws: WebSocketUpgrade, State(hub): State<StreamHub>) -> Response {
    // Subscribe before the upgrade completes so the client sees every message
    // published after its request was accepted.
    let rx = hub.tx.subscribe();
    let done = hub.done.subscribe();
    ws.on_upgrade(move |socket| forward(socket, rx, done)).into_response()
}

fn frame(message: &StreamMessage) -> Message {
    let mut line = message.to_line();
    line.push('\n');
    Message::Text(line.into())
}

async fn forward(
    mut socket: WebSocket,
    mut rx: broadcast::Receiver<Arc<StreamMessage>>,
    mut done: watch::Receiver<bool>,
) {
    let mut dropped = 0u64;
    let mut closing = false;
    loop {
        let received = if closing {
            match rx.try_recv() {
                Ok(m) => Ok(m),
                Err(broadcast::error::TryRecvError::Lagged(n)) => Err(RecvError::Lagged(n)),
                Err(_) => break,
            }
        } else {
            tokio::select! {
                biased;
                r = rx.recv() => r,
                _ = done.wait_for(|d| *d) => {
                    closing = true;
                    continue;
                }
            }
        };
        let message = match received {
            Ok(m) => m,
            Err(RecvError::Lagged(n)) => {
                dropped += n;
                continue;
            }
            Err(RecvError::Closed) => break,
        };
        if dropped > 0 {
            // Engine seqs are contiguous, so the last dropped one is seq - 1.
            let gap = StreamMessage::gap(message.seq - 1, dropped);
            dropped = 0;
            if socket.send(frame(&gap)).await.is_err() {
                return;
            }
        }
        if socket.send(frame(&message)).await.is_err() {
            return;
        }
    }
    let _ = socket.send(Message::Close(None)).await;
}

/// Serves the hub until `shutdown` resolves.
pub async fn serve(
    listener: TcpListener,
    hub: StreamHub,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, hub.router())
        .with_graceful_shutdown(shutdown)
        .await
}

pub async fn bind(addr: &str, port: u16) -> std::io::Result<(TcpListener, SocketAddr)> {
    let listener = TcpListener::bind((addr, port)).await?;
    let local = listener.local_addr()?;
    Ok((listener, local))
}
