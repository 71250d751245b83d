use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use bart::compiler::{compile_source, CompileOptions};
use bart_service::server::{router, AppState};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

fn fixture(name: &str) -> String {
    std::fs::read_to_string(format!("{}/../core/fixtures/{name}", env!("CARGO_MANIFEST_DIR"))).unwrap()
}

fn app() -> Router {
    let src = ["chain2.bart", "diamond.bart", "one_shot.bart", "ships.bart"].map(fixture).join("\n");
    let model = compile_source(&src, &CompileOptions::default()).unwrap();
    router(Arc::new(AppState::new(model)))
}

async fn call(app: &Router, method: &str, uri: &str, body: Option<&str>, if_match: Option<u64>) -> (StatusCode, Value) {
    let mut req = Request::builder().method(method).uri(uri);
    if let Some(r) = if_match {
        req = req.header("if-match", r.to_string());
    }
    let req = req
        .header("content-type", "application/json")
        .body(body.map(|b| Body::from(b.to_string())).unwrap_or_else(Body::empty))
        .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let value = if bytes.is_empty() { Value::Null } else { serde_json::from_slice(&bytes).unwrap() };
    (status, value)
}

async fn open(app: &Router, kind: &str, name: &str) -> String {
    let (status, v) = call(app, "POST", "/sessions", Some(&json!({"model-kind": kind, "name": name}).to_string()), None).await;
    assert_eq!(status, StatusCode::CREATED, "{v}");
    v["id"].as_str().unwrap().to_string()
}

#[tokio::test]
async fn evidence_and_beliefs() {
    let app = app();
    let id = open(&app, "network", "chain2").await;
    let (s, v) = call(&app, "POST", &format!("/sessions/{id}/evidence"), Some(r#"{"node":"B","value":"t"}"#), None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["revision"], 1);
    let a = v["changes"].as_array().unwrap().iter().find(|c| c["node"] == "A").unwrap();
    assert!((a["new"][0].as_f64().unwrap() - 27.0 / 41.0).abs() <= 1e-12);

    let (_, b) = call(&app, "GET", &format!("/sessions/{id}/beliefs"), None, None).await;
    assert!((b["beliefs"]["A"][0].as_f64().unwrap() - 27.0 / 41.0).abs() <= 1e-12);
    assert_eq!(b["beliefs"]["B"], json!([1.0, 0.0]));

    let (s, v) = call(&app, "DELETE", &format!("/sessions/{id}/evidence/B"), None, None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["revision"], 2);
    let (_, b) = call(&app, "GET", &format!("/sessions/{id}/beliefs"), None, None).await;
    assert!((b["beliefs"]["A"][0].as_f64().unwrap() - 0.3).abs() <= 1e-12);
}

#[tokio::test]
async fn whatif_rolls_back_exactly() {
    let app = app();
    let id = open(&app, "network", "diamond").await;
    call(&app, "POST", &format!("/sessions/{id}/evidence"), Some(r#"{"node":"D","likelihood":[1,3]}"#), None).await;
    let (_, before) = call(&app, "GET", &format!("/sessions/{id}/beliefs"), None, None).await;
    for body in [r#"{"findings":[{"node":"A","value":"t"}]}"#, r#"{"findings":[{"node":"B","likelihood":[5,1]},{"node":"C","value":"f"}]}"#] {
        let (s, w) = call(&app, "POST", &format!("/sessions/{id}/whatif"), Some(body), None).await;
        assert_eq!(s, StatusCode::OK);
        assert_ne!(w["beliefs"], before["beliefs"]);
    }
    let (_, after) = call(&app, "GET", &format!("/sessions/{id}/beliefs"), None, None).await;
    assert_eq!(after, before);
    assert_eq!(after["revision"], 1);
}

#[tokio::test]
async fn sessions_are_isolated() {
    let app = app();
    let a = open(&app, "network", "chain2").await;
    let b = open(&app, "network", "chain2").await;
    assert_ne!(a, b);
    let (_, before) = call(&app, "GET", &format!("/sessions/{b}/beliefs"), None, None).await;
    call(&app, "POST", &format!("/sessions/{a}/evidence"), Some(r#"{"node":"B","value":"f"}"#), None).await;
    let (_, after) = call(&app, "GET", &format!("/sessions/{b}/beliefs"), None, None).await;
    assert_eq!(before, after);
    let (_, list) = call(&app, "GET", "/sessions", None, None).await;
    assert_eq!(list.as_array().unwrap().len(), 2);
    assert_eq!(call(&app, "DELETE", &format!("/sessions/{a}"), None, None).await.0, StatusCode::NO_CONTENT);
    assert_eq!(call(&app, "GET", &format!("/sessions/{a}"), None, None).await.0, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn error_statuses() {
    let app = app();
    let (s, v) = call(&app, "GET", "/sessions/nope/beliefs", None, None).await;
    assert_eq!((s, v["error"].as_str()), (StatusCode::NOT_FOUND, Some("unknown-session")));
    let (s, _) = call(&app, "POST", "/sessions", Some(r#"{"model-kind":"network","name":"zzz"}"#), None).await;
    assert_eq!(s, StatusCode::NOT_FOUND);

    let id = open(&app, "network", "chain2").await;
    let ev = format!("/sessions/{id}/evidence");
    call(&app, "POST", &ev, Some(r#"{"node":"B","value":"t"}"#), None).await;
    let (s, v) = call(&app, "POST", &ev, Some(r#"{"node":"B","value":"f"}"#), None).await;
    assert_eq!((s, v["error"].as_str()), (StatusCode::CONFLICT, Some("conflicting-instantiation")));

    let (s, v) = call(&app, "POST", &ev, Some(r#"{"node":"A","value":"maybe"}"#), None).await;
    assert_eq!((s, v["error"].as_str()), (StatusCode::UNPROCESSABLE_ENTITY, Some("unknown-value")));
    let (s, v) = call(&app, "POST", &ev, Some(r#"{"node":"A","likelihood":[1,2,3]}"#), None).await;
    assert_eq!((s, v["error"].as_str()), (StatusCode::UNPROCESSABLE_ENTITY, Some("invalid-finding")));
    let (s, v) = call(&app, "POST", &ev, Some(r#"{"node":"A"}"#), None).await;
    assert_eq!((s, v["error"].as_str()), (StatusCode::UNPROCESSABLE_ENTITY, Some("invalid-finding")));
    let (s, _) = call(&app, "DELETE", &format!("/sessions/{id}/evidence/A"), None, None).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);

    // optimistic revision check
    let (s, v) = call(&app, "POST", &ev, Some(r#"{"node":"A","likelihood":[1,2]}"#), Some(0)).await;
    assert_eq!((s, v["error"].as_str()), (StatusCode::CONFLICT, Some("stale-revision")));
    let (s, _) = call(&app, "POST", &ev, Some(r#"{"node":"A","likelihood":[1,2]}"#), Some(1)).await;
    assert_eq!(s, StatusCode::OK);
}

#[tokio::test]
async fn malformed_bodies_get_4xx() {
    let app = app();
    let id = open(&app, "network", "chain2").await;
    let bodies = ["", "{", "[]", "null", "{\"node\":", "{\"node\":3}", "\u{0}", "{\"findings\":7}", "{\"node\":\"B\",\"likelihood\":\"x\"}"];
    for uri in ["/sessions".to_string(), format!("/sessions/{id}/evidence"), format!("/sessions/{id}/whatif"), "/diagrams/one_shot/solve".into()] {
        for b in bodies {
            if b.is_empty() && uri.starts_with("/diagrams") {
                // an empty body means default options
                continue;
            }
            let (s, _) = call(&app, "POST", &uri, Some(b), None).await;
            assert!(s.is_client_error(), "{uri} {b:?} -> {s}");
        }
    }
    // still serving
    assert_eq!(call(&app, "GET", &format!("/sessions/{id}/beliefs"), None, None).await.0, StatusCode::OK);
}

#[tokio::test]
async fn mpe_and_impact() {
    let app = app();
    let id = open(&app, "network", "chain2").await;
    let (_, m) = call(&app, "GET", &format!("/sessions/{id}/mpe"), None, None).await;
    assert_eq!(m["assignment"], json!({"A": "f", "B": "f"}));
    assert!((m["probability"].as_f64().unwrap() - 0.56).abs() <= 1e-12);
    let (_, i) = call(&app, "GET", &format!("/sessions/{id}/impact?target=A"), None, None).await;
    assert_eq!(i["target"], "A");
    assert_eq!(i["ranking"][0][0], "B");
    assert_eq!(call(&app, "GET", &format!("/sessions/{id}/impact"), None, None).await.0, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn diagram_solve() {
    let app = app();
    let (s, v) = call(&app, "POST", "/diagrams/one_shot/solve", Some(r#"{"evidence":[],"prune":true}"#), None).await;
    assert_eq!(s, StatusCode::OK);
    assert!((v["expected_utility"].as_f64().unwrap() - 6.0).abs() <= 1e-9);
    let (_, v) = call(&app, "POST", "/diagrams/one_shot/solve", Some(r#"{"evidence":[{"node":"C","value":"c2"}]}"#), None).await;
    assert!((v["expected_utility"].as_f64().unwrap() - 5.0).abs() <= 1e-9);
    assert_eq!(call(&app, "POST", "/diagrams/nope/solve", Some("{}"), None).await.0, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn classifier_session_reproduces_trace() {
    let app = app();
    let id = open(&app, "classifier", "ships").await;
    let (s, _) = call(&app, "POST", &format!("/sessions/{id}/evidence"), Some(r#"{"network":"destroyer_group","node":"report","likelihood":[3,1]}"#), None).await;
    assert_eq!(s, StatusCode::OK);
    let mut done = false;
    for _ in 0..20 {
        let (s, v) = call(&app, "POST", &format!("/sessions/{id}/step"), None, None).await;
        assert_eq!(s, StatusCode::OK);
        if v["done"] == true {
            assert_eq!(v["established"], json!(["Frigate"]));
            done = true;
            break;
        }
    }
    assert!(done);
    let (_, trace) = call(&app, "GET", &format!("/sessions/{id}/trace"), None, None).await;
    let golden: Value = serde_json::from_str(&fixture("ships_trace.json")).unwrap();
    assert_eq!(trace, golden);
    let (_, b) = call(&app, "GET", &format!("/sessions/{id}/beliefs"), None, None).await;
    assert_eq!(b["statuses"]["Merchant"], "rejected");
    let (s, _) = call(&app, "GET", &format!("/sessions/{id}/mpe"), None, None).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    let (s, _) = call(&app, "POST", &format!("/sessions/{id}/evidence"), Some(r#"{"network":"nowhere","node":"report","value":"yes"}"#), None).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn model_summary_lists_everything() {
    let app = app();
    let (_, m) = call(&app, "GET", "/model", None, None).await;
    let names: Vec<&str> = m["networks"].as_array().unwrap().iter().map(|n| n["name"].as_str().unwrap()).collect();
    assert!(names.contains(&"chain2") && names.contains(&"diamond"));
    assert_eq!(m["diagrams"][0]["name"], "one_shot");
    assert_eq!(m["taxonomies"][0]["name"], "ships");
}
