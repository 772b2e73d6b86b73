//! Random HTTP request sequences against the router, each mirrored onto a
//! plain command registry so responses can be checked one for one.

use std::collections::BTreeSet;
use std::path::Path;
use std::sync::Arc;

use aas_core::lifecycle::{CapabilityCatalog, CommandId, CommandRegistry, Details, LifecycleError, Outcome};
use aas_core::model::AasEnvironment;
use aas_server::{load_environment, router, AppState};
use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use rand::rngs::StdRng;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use serde_json::{json, Value};
use tower::ServiceExt;

pub const VOCABULARY: [&str; 5] = ["pending", "executing", "success", "error", "deleted"];

pub fn larry_environment() -> AasEnvironment {
    let models = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/models");
    load_environment(&models.join("Larry.system.json"), Some(&models)).expect("fixture environment loads")
}

#[derive(Debug, Default)]
pub struct FuzzReport {
    pub sequences: usize,
    pub requests: usize,
    pub states_seen: BTreeSet<String>,
    pub statuses_seen: BTreeSet<u16>,
    pub violations: Vec<String>,
}

enum Step {
    Http { method: Method, uri: String, body: Option<String>, expect: Expect },
    Robot { complete: Option<(Outcome, Details)> },
}

/// What the mirror registry says the response must be.
enum Expect {
    /// GET routes: only the status class is checked.
    Status(&'static [u16]),
    Exact(u16, Value),
}

fn collect_states(v: &Value, out: &mut Vec<String>) {
    match v {
        Value::Object(m) => {
            for (k, child) in m {
                if k == "state" {
                    out.push(child.as_str().map(str::to_string).unwrap_or_else(|| child.to_string()));
                }
                collect_states(child, out);
            }
        }
        Value::Array(items) => items.iter().for_each(|c| collect_states(c, out)),
        _ => {}
    }
}

fn lifecycle_expect(e: LifecycleError) -> Expect {
    match e {
        LifecycleError::OutputNotAvailable(s) | LifecycleError::IllegalTransition(s) => {
            Expect::Exact(409, json!({"error": e.code(), "state": s}))
        }
        LifecycleError::CannotDeleteExecuting => Expect::Exact(409, json!({"error": e.code(), "state": "executing"})),
        LifecycleError::CommandUnknown => Expect::Exact(404, json!({"error": e.code(), "state": "deleted"})),
    }
}

fn random_params(rng: &mut StdRng) -> Value {
    match rng.random_range(0..6) {
        0..=2 => json!({"x": rng.random_range(-150.0..150.0), "y": rng.random_range(-150i64..150)}),
        3 => {
            let location = *["shelf", "garage"].choose(rng).unwrap();
            json!({"object": "box", "location": location})
        }
        4 => json!({"x": "north"}),
        _ => json!({}),
    }
}

fn next_step(rng: &mut StdRng, mirror: &CommandRegistry, issued: &[CommandId]) -> Step {
    let post = |op: &str, body: String, expect: Expect| Step::Http {
        method: Method::POST,
        uri: format!("/submodels/Operations/{op}"),
        body: Some(body),
        expect,
    };
    let pick_id = |rng: &mut StdRng| -> CommandId {
        if !issued.is_empty() && rng.random_bool(0.8) {
            *issued.choose(rng).unwrap()
        } else {
            CommandId::new(rng.random_range(1..20))
        }
    };
    match rng.random_range(0..100) {
        0..=29 => {
            let capability = *["goto", "goto", "pick", "place", "orderPicking", "fly"].choose(rng).unwrap();
            let params = random_params(rng);
            let details: Details = serde_json::from_value(params.clone()).unwrap();
            let id = mirror.push(capability, details);
            let body = json!({"capability": capability, "params": params}).to_string();
            post("pushCapability", body, Expect::Exact(200, json!({"commandId": id, "state": mirror.get_status(id)})))
        }
        30..=41 => {
            let id = pick_id(rng);
            let expect = Expect::Exact(200, json!({"commandId": id, "state": mirror.get_status(id)}));
            post("getStatus", json!({"commandId": id}).to_string(), expect)
        }
        42..=51 => {
            let id = pick_id(rng);
            let expect = match mirror.get_output(id) {
                Ok(out) => Expect::Exact(
                    200,
                    json!({"commandId": id, "state": mirror.get_status(id), "outcome": out.outcome, "details": out.details}),
                ),
                Err(e) => lifecycle_expect(e),
            };
            post("getOutput", json!({"commandId": id}).to_string(), expect)
        }
        52..=59 => {
            let id = pick_id(rng);
            let expect = match mirror.delete(id) {
                Ok(state) => Expect::Exact(200, json!({"commandId": id, "state": state})),
                Err(e) => lifecycle_expect(e),
            };
            post("deleteCommand", json!({"commandId": id}).to_string(), expect)
        }
        60..=65 => {
            let (op, body) = [
                ("pushCapability", "{"),
                ("pushCapability", "{\"params\":{}}"),
                ("pushCapability", "{\"capability\":\"goto\",\"extra\":1}"),
                ("getStatus", "{\"commandId\":\"job-1\"}"),
                ("getStatus", "[]"),
                ("getOutput", ""),
                ("deleteCommand", "{\"commandId\":7}"),
            ]
            .choose(rng)
            .copied()
            .unwrap();
            post(op, body.to_string(), Expect::Status(&[400]))
        }
        66..=68 => {
            let op = *["launch", "GetStatus", "cancel", "pushcapability"].choose(rng).unwrap();
            post(op, "{}".to_string(), Expect::Status(&[404]))
        }
        69..=79 => {
            let (uri, expected): (&str, &'static [u16]) = *[
                ("/shells", &[200][..]),
                ("/shells/Larry", &[200]),
                ("/shells/Nope", &[404]),
                ("/shells/Larry/submodels", &[200]),
                ("/submodels/Capabilities", &[200]),
                ("/submodels/OperationalData", &[200]),
                ("/submodels/OperationalData/elements/skills", &[200]),
                ("/submodels/Capabilities/elements/goto", &[200]),
                ("/submodels/Capabilities/elements/goto/deeper", &[404]),
                ("/submodels/Nope", &[404]),
                ("/health", &[200]),
                ("/nothing/here", &[404]),
            ]
            .choose(rng)
            .unwrap();
            Step::Http { method: Method::GET, uri: uri.to_string(), body: None, expect: Expect::Status(expected) }
        }
        _ => {
            let complete = rng.random_bool(0.7).then(|| {
                if rng.random_bool(0.75) {
                    let d = json!({"distanceMeters": rng.random_range(0.0..10.0)});
                    (Outcome::Success, serde_json::from_value(d).unwrap())
                } else {
                    (Outcome::Error, serde_json::from_value(json!({"reason": "obstacle"})).unwrap())
                }
            });
            Step::Robot { complete }
        }
    }
}

/// Runs `sequences` random request sequences of 1 to 12 steps each.
pub fn run(sequences: usize, seed: u64) -> FuzzReport {
    let env = larry_environment();
    let catalog = CapabilityCatalog::from_environment(&env);
    let rt = tokio::runtime::Builder::new_current_thread().enable_all().build().unwrap();
    let mut rng = StdRng::seed_from_u64(seed);
    let mut report = FuzzReport::default();
    rt.block_on(async {
        for seq in 0..sequences {
            let state = Arc::new(AppState::for_environment(env.clone()));
            let app = router(state.clone());
            let mirror = CommandRegistry::new(catalog.clone());
            let mut issued: Vec<CommandId> = Vec::new();
            let len = rng.random_range(1..=12);
            for step_no in 0..len {
                match next_step(&mut rng, &mirror, &issued) {
                    Step::Robot { complete } => {
                        // the dispatcher's view: take the next command and maybe finish it
                        let real = state.registry().take_next().map(|c| c.id);
                        let twin = mirror.take_next().map(|c| c.id);
                        if real != twin {
                            report.violations.push(format!("seq {seq} step {step_no}: take_next {real:?} vs {twin:?}"));
                        }
                        if let (Some(id), Some((outcome, details))) = (real, complete) {
                            state.registry().complete(id, outcome, details.clone()).unwrap();
                            mirror.complete(id, outcome, details).unwrap();
                        }
                    }
                    Step::Http { method, uri, body, expect } => {
                        report.requests += 1;
                        let request = Request::builder()
                            .method(method)
                            .uri(&uri)
                            .header("content-type", "application/json")
                            .body(body.map(Body::from).unwrap_or_else(Body::empty))
                            .unwrap();
                        let response = app.clone().oneshot(request).await.unwrap();
                        let status = response.status();
                        let bytes = axum::body::to_bytes(response.into_body(), 1 << 24).await.unwrap();
                        report.statuses_seen.insert(status.as_u16());
                        let Ok(json) = serde_json::from_slice::<Value>(&bytes) else {
                            report.violations.push(format!("seq {seq} {uri}: non-JSON body"));
                            continue;
                        };
                        let mut states = Vec::new();
                        collect_states(&json, &mut states);
                        for s in states {
                            if !VOCABULARY.contains(&s.as_str()) {
                                report.violations.push(format!("seq {seq} {uri}: state '{s}' outside vocabulary"));
                            }
                            report.states_seen.insert(s);
                        }
                        if let Some(id) = json.get("commandId").and_then(Value::as_str).and_then(|s| s.parse().ok()) {
                            if !issued.contains(&id) && uri.ends_with("pushCapability") {
                                issued.push(id);
                            }
                        }
                        match expect {
                            Expect::Status(allowed) if !allowed.contains(&status.as_u16()) => report
                                .violations
                                .push(format!("seq {seq} {uri}: status {status}, expected {allowed:?}")),
                            Expect::Exact(code, body) if status != StatusCode::from_u16(code).unwrap() || json != body => {
                                report.violations.push(format!(
                                    "seq {seq} {uri}: got {status} {json}, expected {code} {body}"
                                ))
                            }
                            _ => {}
                        }
                    }
                }
            }
            report.sequences += 1;
        }
    });
    report
}
