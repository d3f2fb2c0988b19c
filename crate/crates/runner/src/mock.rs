//! In-process chat-completions server with scripted replies.
//!
//! Records every request body and tracks how many requests are being served
//! at once, so tests can check wire format and the concurrency bound.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde_json::{json, Value};

/// What the server does for one request.
#[derive(Debug, Clone, PartialEq)]
pub struct MockReply {
    pub status: u16,
    /// Assistant content on 2xx; response body text otherwise.
    pub content: String,
    pub delay: Duration,
}

impl MockReply {
    pub fn ok(content: impl Into<String>) -> Self {
        MockReply {
            status: 200,
            content: content.into(),
            delay: Duration::ZERO,
        }
    }

    pub fn status(status: u16) -> Self {
        MockReply {
            status,
            content: format!("scripted status {status}"),
            delay: Duration::ZERO,
        }
    }

    pub fn delayed(mut self, delay: Duration) -> Self {
        self.delay = delay;
        self
    }
}

/// Called with the user message and the 1-based attempt number for that
/// message.
pub type Script = dyn Fn(&str, u32) -> MockReply + Send + Sync;

struct Shared {
    script: Box<Script>,
    requests: Mutex<Vec<Value>>,
    attempts: Mutex<HashMap<String, u32>>,
    in_flight: AtomicUsize,
    max_in_flight: AtomicUsize,
    probes: AtomicUsize,
}

pub struct MockServer {
    addr: SocketAddr,
    shared: Arc<Shared>,
    task: tokio::task::JoinHandle<()>,
}

impl MockServer {
    /// Bind to an ephemeral localhost port and start serving.
    pub async fn start(script: impl Fn(&str, u32) -> MockReply + Send + Sync + 'static) -> std::io::Result<Self> {
        let shared = Arc::new(Shared {
            script: Box::new(script),
            requests: Mutex::new(Vec::new()),
            attempts: Mutex::new(HashMap::new()),
            in_flight: AtomicUsize::new(0),
            max_in_flight: AtomicUsize::new(0),
            probes: AtomicUsize::new(0),
        });
        let app = Router::new()
            .route("/v1/models", get(models))
            .route("/v1/chat/completions", post(chat))
            .with_state(shared.clone());
        let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await?;
        let addr = listener.local_addr()?;
        let task = tokio::spawn(async move {
            let _ = axum::serve(listener, app).await;
        });
        Ok(MockServer { addr, shared, task })
    }

    /// Replies `"echo: <user message>"` to everything.
    pub async fn echo() -> std::io::Result<Self> {
        Self::start(|msg, _| MockReply::ok(format!("echo: {msg}"))).await
    }

    pub fn base_url(&self) -> String {
        format!("http://{}", self.addr)
    }

    /// Chat-completion request bodies in arrival order.
    pub fn requests(&self) -> Vec<Value> {
        self.shared.requests.lock().unwrap().clone()
    }

    /// Highest number of chat requests served concurrently so far.
    pub fn max_in_flight(&self) -> usize {
        self.shared.max_in_flight.load(Ordering::SeqCst)
    }

    pub fn probes(&self) -> usize {
        self.shared.probes.load(Ordering::SeqCst)
    }
}

impl Drop for MockServer {
    fn drop(&mut self) {
        self.task.abort();
    }
}

async fn models(State(shared): State<Arc<Shared>>) -> Json<Value> {
    shared.probes.fetch_add(1, Ordering::SeqCst);
    Json(json!({"object": "list", "data": [{"id": "mock", "object": "model"}]}))
}

struct InFlight<'a>(&'a Shared);

impl Drop for InFlight<'_> {
    fn drop(&mut self) {
        self.0.in_flight.fetch_sub(1, Ordering::SeqCst);
    }
}

async fn chat(State(shared): State<Arc<Shared>>, Json(body): Json<Value>) -> Response {
    let now = shared.in_flight.fetch_add(1, Ordering::SeqCst) + 1;
    shared.max_in_flight.fetch_max(now, Ordering::SeqCst);
    let _guard = InFlight(&shared);

    shared.requests.lock().unwrap().push(body.clone());
    let message = body["messages"][0]["content"].as_str().unwrap_or_default().to_string();
    let attempt = {
        let mut map = shared.attempts.lock().unwrap();
        let n = map.entry(message.clone()).or_insert(0);
        *n += 1;
        *n
    };
    let reply = (shared.script)(&message, attempt);
    if !reply.delay.is_zero() {
        tokio::time::sleep(reply.delay).await;
    }
    let status = StatusCode::from_u16(reply.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
    if status.is_success() {
        let model = body["model"].clone();
        (
            status,
            Json(json!({
                "id": "mock-completion",
                "object": "chat.completion",
                "model": model,
                "choices": [{
                    "index": 0,
                    "message": {"role": "assistant", "content": reply.content},
                    "finish_reason": "stop"
                }]
            })),
        )
            .into_response()
    } else {
        (status, reply.content).into_response()
    }
}
