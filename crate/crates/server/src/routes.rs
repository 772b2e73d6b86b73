#![allow(clippy::result_large_err)] // handlers return ready-made responses as errors

use std::sync::Arc;

use aas_core::lifecycle::{CommandId, CommandState, Details, LifecycleError};
use aas_core::model::{resolve, Node, ResolveError};
use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::{json, Value};

use crate::AppState;

type Shared = State<Arc<AppState>>;

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/shells", get(list_shells))
        .route("/shells/{id_short}", get(get_shell))
        .route("/shells/{id_short}/submodels", get(shell_submodels))
        .route("/submodels/{id_short}", get(get_submodel))
        .route("/submodels/{id_short}/elements/{*path}", get(get_element))
        .route("/submodels/Operations/{operation}", post(invoke))
        .fallback(|| async { error(StatusCode::NOT_FOUND, "NotFound", json!({})) })
        .with_state(state)
}

fn error(status: StatusCode, code: &str, extra: Value) -> Response {
    let mut body = json!({ "error": code });
    if let (Value::Object(body), Value::Object(extra)) = (&mut body, extra) {
        body.extend(extra);
    }
    (status, Json(body)).into_response()
}

fn not_found(e: ResolveError) -> Response {
    let path = match &e {
        ResolveError::NotFound { segment, prefix } if prefix.is_empty() => segment.clone(),
        ResolveError::NotFound { segment, prefix } => format!("{prefix}/{segment}"),
        ResolveError::EmptyPath => String::new(),
    };
    error(StatusCode::NOT_FOUND, "NotFound", json!({ "path": path, "message": e.to_string() }))
}

async fn health(State(state): Shared) -> Json<Value> {
    Json(json!({ "status": "ok", "uptimeSeconds": state.started.elapsed().as_secs() }))
}

async fn list_shells(State(state): Shared) -> Json<Vec<String>> {
    Json(state.env.shells.iter().map(|s| s.id_short.clone()).collect())
}

async fn get_shell(State(state): Shared, Path(id_short): Path<String>) -> Response {
    let view = state.view();
    match resolve(&view, &id_short) {
        Ok(node) => Json(node).into_response(),
        Err(e) => not_found(e),
    }
}

async fn shell_submodels(State(state): Shared, Path(id_short): Path<String>) -> Response {
    let view = state.view();
    let Some(shell) = view.shell(&id_short) else {
        return not_found(ResolveError::NotFound {
            segment: id_short,
            prefix: String::new(),
        });
    };
    let list: Vec<Value> = view
        .submodels_of(shell)
        .map(|s| json!({ "id": s.id, "idShort": s.id_short, "semanticId": s.semantic_id }))
        .collect();
    Json(list).into_response()
}

fn resolve_in_primary(state: &AppState, rest: &str) -> Response {
    let Some(shell) = state.primary_shell() else {
        return error(StatusCode::NOT_FOUND, "NotFound", json!({ "path": rest }));
    };
    let view = state.view();
    match resolve(&view, &format!("{shell}/{rest}")) {
        Ok(node @ (Node::Submodel(_) | Node::Element(_))) => Json(node).into_response(),
        Ok(Node::Shell(_)) => unreachable!("paths below a shell never resolve to a shell"),
        Err(e) => not_found(e),
    }
}

async fn get_submodel(State(state): Shared, Path(id_short): Path<String>) -> Response {
    resolve_in_primary(&state, &id_short)
}

async fn get_element(State(state): Shared, Path((id_short, path)): Path<(String, String)>) -> Response {
    resolve_in_primary(&state, &format!("{id_short}/{path}"))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PushBody {
    capability: String,
    #[serde(default)]
    params: Details,
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct IdBody {
    command_id: String,
}

fn parse<T: DeserializeOwned>(body: &[u8]) -> Result<T, Response> {
    serde_json::from_slice(body)
        .map_err(|e| error(StatusCode::BAD_REQUEST, "MalformedBody", json!({ "message": e.to_string() })))
}

fn command_id(body: &[u8]) -> Result<CommandId, Response> {
    let IdBody { command_id } = parse(body)?;
    command_id
        .parse()
        .map_err(|e: String| error(StatusCode::BAD_REQUEST, "MalformedBody", json!({ "message": e })))
}

fn lifecycle_error(e: LifecycleError) -> Response {
    match e {
        LifecycleError::OutputNotAvailable(state) => {
            error(StatusCode::CONFLICT, e.code(), json!({ "state": state }))
        }
        LifecycleError::CannotDeleteExecuting => {
            error(StatusCode::CONFLICT, e.code(), json!({ "state": CommandState::Executing }))
        }
        LifecycleError::CommandUnknown => {
            error(StatusCode::NOT_FOUND, e.code(), json!({ "state": CommandState::Deleted }))
        }
        LifecycleError::IllegalTransition(state) => {
            error(StatusCode::CONFLICT, e.code(), json!({ "state": state }))
        }
    }
}

async fn invoke(State(state): Shared, Path(operation): Path<String>, body: Bytes) -> Response {
    let registry = &state.registry;
    let result = match operation.as_str() {
        "pushCapability" => parse::<PushBody>(&body).map(|b| {
            let id = registry.push(&b.capability, b.params);
            json!({ "commandId": id, "state": registry.get_status(id) })
        }),
        "getStatus" => command_id(&body).map(|id| json!({ "commandId": id, "state": registry.get_status(id) })),
        "getOutput" => command_id(&body).and_then(|id| {
            let out = registry.get_output(id).map_err(lifecycle_error)?;
            Ok(json!({
                "commandId": id,
                "state": registry.get_status(id),
                "outcome": out.outcome,
                "details": out.details,
            }))
        }),
        "deleteCommand" => command_id(&body).and_then(|id| {
            let state = registry.delete(id).map_err(lifecycle_error)?;
            Ok(json!({ "commandId": id, "state": state }))
        }),
        _ => Err(error(
            StatusCode::NOT_FOUND,
            "UnknownOperation",
            json!({ "operation": operation }),
        )),
    };
    match result {
        Ok(body) => Json(body).into_response(),
        Err(response) => response,
    }
}
