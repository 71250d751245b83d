//! Drives the HTTP router in process: open a session, post evidence,
//! try a hypothetical, read beliefs back.

use std::sync::Arc;

use axum::body::Body;
use axum::http::Request;
use bart::compiler::{compile_source, CompileOptions};
use bart_service::server::{router, AppState};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

async fn call(app: &axum::Router, method: &str, uri: &str, body: Option<Value>) -> Value {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(body.map(|b| Body::from(b.to_string())).unwrap_or_else(Body::empty))
        .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let v: Value = serde_json::from_slice(&bytes).unwrap_or(Value::Null);
    println!("{method} {uri} -> {status}\n  {v}");
    v
}

#[tokio::main(flavor = "current_thread")]
async fn main() {
    let model = compile_source(include_str!("../../core/fixtures/chain2.bart"), &CompileOptions::default()).unwrap();
    let app = router(Arc::new(AppState::new(model)));

    let handle = call(&app, "POST", "/sessions", Some(json!({"model-kind": "network", "name": "chain2"}))).await;
    let id = handle["id"].as_str().unwrap();

    call(&app, "POST", &format!("/sessions/{id}/whatif"), Some(json!({"findings": [{"node": "B", "value": "f"}]}))).await;
    call(&app, "POST", &format!("/sessions/{id}/evidence"), Some(json!({"node": "B", "value": "t"}))).await;
    let b = call(&app, "GET", &format!("/sessions/{id}/beliefs"), None).await;
    println!("BEL(A=t | B=t) = {:.4}", b["beliefs"]["A"][0].as_f64().unwrap());

    // a conflicting instantiation is refused with 409
    call(&app, "POST", &format!("/sessions/{id}/evidence"), Some(json!({"node": "B", "value": "f"}))).await;
    call(&app, "GET", &format!("/sessions/{id}/impact?target=A"), None).await;
}
