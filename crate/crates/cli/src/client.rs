//! Type-2 client for the generic command operations.

use std::time::{Duration, Instant};

use aas_core::lifecycle::{CommandState, Details};
use serde_json::{json, Value};

use crate::failure::{Failure, VALIDATION};

pub struct Client {
    http: reqwest::Client,
    base: String,
}

/// Parses `key=value`; the value is JSON when it parses as JSON, a string otherwise.
pub fn parse_param(raw: &str) -> Result<(String, Value), String> {
    let (key, value) = raw.split_once('=').ok_or_else(|| format!("'{raw}' is not key=value"))?;
    if key.is_empty() {
        return Err(format!("'{raw}' has an empty key"));
    }
    let value = serde_json::from_str(value).unwrap_or_else(|_| Value::String(value.to_string()));
    Ok((key.to_string(), value))
}

impl Client {
    pub fn new(server: &str) -> Self {
        let base = if server.starts_with("http://") || server.starts_with("https://") {
            server.trim_end_matches('/').to_string()
        } else {
            format!("http://{server}")
        };
        Self { http: reqwest::Client::new(), base }
    }

    /// Invokes an operation. Non-2xx answers become validation failures
    /// carrying the server's error body.
    pub async fn operation(&self, name: &str, body: Value) -> Result<Value, Failure> {
        let url = format!("{}/submodels/Operations/{name}", self.base);
        let response = self
            .http
            .post(&url)
            .json(&body)
            .send()
            .await
            .map_err(|e| Failure::runtime("ConnectionError", format!("{url}: {e}")))?;
        let status = response.status();
        let body: Value = response
            .json()
            .await
            .map_err(|e| Failure::runtime("ProtocolError", format!("{url}: {e}")))?;
        if status.is_success() {
            return Ok(body);
        }
        let exit = if status.is_server_error() { crate::failure::RUNTIME } else { VALIDATION };
        let code = body["error"].as_str().unwrap_or("HttpError").to_string();
        let mut failure = Failure::new(exit, code, format!("{name} answered {status}")).with("status", status.as_u16());
        if let Value::Object(m) = body {
            failure.extra.extend(m.into_iter().filter(|(k, _)| k != "error"));
        }
        Err(failure)
    }

    pub async fn push(&self, capability: &str, params: Details) -> Result<Value, Failure> {
        self.operation("pushCapability", json!({"capability": capability, "params": params})).await
    }

    pub async fn status(&self, id: &str) -> Result<CommandState, Failure> {
        let body = self.operation("getStatus", json!({"commandId": id})).await?;
        state_of(&body)
    }

    pub async fn output(&self, id: &str) -> Result<Value, Failure> {
        self.operation("getOutput", json!({"commandId": id})).await
    }

    pub async fn delete(&self, id: &str) -> Result<Value, Failure> {
        self.operation("deleteCommand", json!({"commandId": id})).await
    }

    /// Polls until the command is final, calling `on_state` on every change.
    pub async fn watch(
        &self,
        id: &str,
        interval: Duration,
        timeout: Option<Duration>,
        mut on_state: impl FnMut(CommandState),
    ) -> Result<CommandState, Failure> {
        let started = Instant::now();
        let mut last = None;
        loop {
            let state = self.status(id).await?;
            if last != Some(state) {
                on_state(state);
                last = Some(state);
            }
            if matches!(state, CommandState::Success | CommandState::Error | CommandState::Deleted) {
                return Ok(state);
            }
            if timeout.is_some_and(|t| started.elapsed() >= t) {
                return Err(Failure::runtime("Timeout", format!("{id} still {state} after {:?}", started.elapsed()))
                    .with("commandId", id)
                    .with("state", state.as_str()));
            }
            tokio::time::sleep(interval).await;
        }
    }
}

pub fn state_of(body: &Value) -> Result<CommandState, Failure> {
    body["state"]
        .as_str()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Failure::runtime("ProtocolError", format!("no command state in {body}")))
}

