use std::path::PathBuf;
use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

use dashsnap_cli::api::{router, AppState, ClockMode};
use dashsnap_core::lifecycle::VirtualClock;
use dashsnap_core::spec_io::parse_dashboard;
use dashsnap_core::store::{SourceRef, Store};
use dashsnap_core::workspace::Workspace;

const SAMPLES: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/../../samples");

fn app_with(mode: ClockMode) -> Router {
    let mut ws = Workspace::from_store(Store::default(), PathBuf::from(SAMPLES));
    ws.add_source(
        "sales",
        SourceRef {
            path: "sales.csv".into(),
            schema: None,
        },
    );
    let dash = std::fs::read_to_string(format!("{SAMPLES}/dashboard.yaml")).unwrap();
    ws.add_dashboard(parse_dashboard(&dash).unwrap());
    ws.add_channel("sales", "#sales", vec![]).unwrap();
    router(AppState::new(ws, mode, None))
}

fn app() -> Router {
    let start = "2022-04-02T09:00:00".parse().unwrap();
    app_with(ClockMode::Virtual(Arc::new(VirtualClock::new(start))))
}

async fn call(app: &Router, method: &str, uri: &str, who: Option<(&str, &str)>, body: Option<Value>) -> (StatusCode, Value) {
    let mut req = Request::builder().method(method).uri(uri);
    if let Some((h, v)) = who {
        req = req.header(h, v);
    }
    let body = body.map_or(Body::empty(), |b| Body::from(b.to_string()));
    let resp = app.clone().oneshot(req.body(body).unwrap()).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let v = if bytes.is_empty() { Value::Null } else { serde_json::from_slice(&bytes).unwrap() };
    (status, v)
}

fn goal_component() -> Value {
    json!({
        "dashboard": "superstore-sales",
        "panel": "sales-by-category",
        "appearance": "both",
        "template-config": {
            "design": "breakdown-with-goal",
            "parameters": {"goal": {"Furniture": 5000, "Office Supplies": 400, "Technology": 8000}}
        },
        "annotations": [{"kind": "highlight", "category": "Technology", "text": "promo"}],
        "interactive-filters": [{"dropdown": {"column": "Region", "values": ["East", "West"]}}]
    })
}

async fn compose(app: &Router, policy: Value) -> Value {
    let (status, c) = call(app, "POST", "/components", None, Some(goal_component())).await;
    assert_eq!(status, StatusCode::CREATED, "{c}");
    let draft = json!({
        "id": "monthly", "title": "Monthly", "author": "analyst",
        "components": [c], "update-policy": policy
    });
    let (status, out) = call(app, "POST", "/snapshots", None, Some(draft)).await;
    assert_eq!(status, StatusCode::CREATED, "{out}");
    out
}

fn monthly() -> Value {
    json!({"auto-recur": {"period": "1 month", "until": "2022-12-31", "publish-time": "09:00"}})
}

#[tokio::test]
async fn dashboards_and_templates() {
    let app = app();
    let (s, v) = call(&app, "GET", "/dashboards", None, None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v[0]["panels"].as_array().unwrap().len(), 3);
    let (s, v) = call(&app, "GET", "/dashboards/superstore-sales/panels/sales-by-category/applicable-templates", None, None).await;
    assert_eq!(s, StatusCode::OK);
    let names: Vec<&str> = v.as_array().unwrap().iter().map(|a| a["template"].as_str().unwrap()).collect();
    assert_eq!(names, ["simple-breakdown", "breakdown-with-goal"]);
    assert_eq!(v[1]["missing"], json!(["goal"]));
    let (s, v) = call(&app, "GET", "/dashboards/superstore-sales/panels/nope/applicable-templates", None, None).await;
    assert_eq!((s, v["code"].as_str()), (StatusCode::NOT_FOUND, Some("UNKNOWN_PANEL")));
}

#[tokio::test]
async fn bad_bodies_are_422_with_spans() {
    let app = app();
    let body = json!({"dashboard": "superstore-sales", "panel": "sales-by-category", "colour": "red"});
    let (s, v) = call(&app, "POST", "/components", None, Some(body)).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(v["code"], "UNKNOWN_KEY");
    assert_eq!(v["span"]["line"], 1);

    let (_, c) = call(&app, "POST", "/components", None, Some(goal_component())).await;
    let draft = json!({
        "id": "x", "title": "x", "author": "a", "components": [c],
        "update-policy": {"auto-recur": {"period": "1 month", "until": "2022-01-01", "publish-time": "09:00"}}
    });
    let (s, v) = call(&app, "POST", "/snapshots", None, Some(draft)).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(v["code"], "RECURRENCE_HORIZON_INVALID");
    assert!(v["span"]["column"].as_u64().unwrap() > 1);
}

#[tokio::test]
async fn clock_advance_publishes_update_and_staleness() {
    let app = app();
    compose(&app, monthly()).await;
    let (s, m) = call(&app, "POST", "/snapshots/monthly/publish", Some(("author", "analyst")), Some(json!({"channel": "sales"}))).await;
    assert_eq!(s, StatusCode::CREATED, "{m}");
    let root = m["id"].as_u64().unwrap();

    let (s, v) = call(&app, "POST", "/clock/advance", None, Some(json!({"by": "1 month"}))).await;
    assert_eq!(s, StatusCode::OK, "{v}");
    assert_eq!(v["tick"]["posted"].as_array().unwrap().len(), 1);
    let (_, r) = call(&app, "GET", "/snapshots/monthly/render", None, None).await;
    assert_eq!(r["version"], 2);
    assert_eq!(r["freshness-badge"]["stale"], false);
    let (_, view) = call(&app, "GET", &format!("/messages/{root}"), Some(("viewer", "bo")), None).await;
    assert!(view["message"]["superseded-by"].is_u64());

    let (_, r1) = call(&app, "GET", "/snapshots/monthly/render?version=1", None, None).await;
    assert_eq!(r1["freshness-badge"]["stale"], false);
    let (_, v) = call(&app, "POST", "/clock/advance", None, Some(json!({"by": "1 day"}))).await;
    assert!(v["tick"]["posted"].as_array().unwrap().is_empty());
    let (_, r1) = call(&app, "GET", "/snapshots/monthly/render?version=1", None, None).await;
    assert_eq!(r1["freshness-badge"]["stale"], true);

    let (s, v) = call(&app, "GET", "/snapshots/monthly/dissemination", None, None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["monthly"].as_array().unwrap().len(), 2);

    let (s, v) = call(&app, "POST", "/clock/advance", None, Some(json!({"to": "2022-01-01T00:00:00"}))).await;
    assert_eq!((s, v["code"].as_str()), (StatusCode::CONFLICT, Some("CLOCK_BACKWARDS")));
}

#[tokio::test]
async fn viewer_filters_are_private_over_http() {
    let app = app();
    compose(&app, json!("manual-author")).await;
    let (_, m) = call(&app, "POST", "/snapshots/monthly/publish", Some(("author", "analyst")), Some(json!({"channel": "sales"}))).await;
    let id = m["id"].as_u64().unwrap();
    let uri = format!("/messages/{id}");
    let (_, before) = call(&app, "GET", &uri, Some(("viewer", "bo")), None).await;
    let filter = json!({"component": "sales-by-category", "request": {"dropdown": {"column": "Region", "value": "West"}}});
    let (s, state) = call(&app, "POST", &format!("{uri}/filters"), Some(("viewer", "ana")), Some(filter)).await;
    assert_eq!(s, StatusCode::OK, "{state}");
    let (_, ana) = call(&app, "GET", &uri, Some(("viewer", "ana")), None).await;
    let (_, bo) = call(&app, "GET", &uri, Some(("viewer", "bo")), None).await;
    assert_eq!(bo, before);
    assert_ne!(ana["render"], bo["render"]);
    assert_eq!(ana["filtered-components"], json!(["sales-by-category"]));

    let bad = json!({"component": "sales-by-category", "request": {"dropdown": {"column": "Region", "value": "North"}}});
    let (s, v) = call(&app, "POST", &format!("{uri}/filters"), Some(("viewer", "ana")), Some(bad)).await;
    assert_eq!((s, v["code"].as_str()), (StatusCode::UNPROCESSABLE_ENTITY, Some("FILTER_VALUE_NOT_ALLOWED")));
    let (s, _) = call(&app, "GET", &uri, None, None).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn conflicts_and_missing_ids() {
    let app = app_with(ClockMode::Wall);
    let (s, _) = call(&app, "POST", "/clock/advance", None, Some(json!({"by": "1 day"}))).await;
    assert_eq!(s, StatusCode::CONFLICT);
    let (s, _) = call(&app, "GET", "/snapshots/nope/render", None, None).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    let (s, v) = call(&app, "POST", "/snapshots/nope/publish", Some(("author", "a")), Some(json!({"channel": "sales"}))).await;
    assert_eq!((s, v["code"].as_str()), (StatusCode::NOT_FOUND, Some("UNKNOWN_SNAPSHOT")));
    let (s, _) = call(&app, "GET", "/messages/99", Some(("viewer", "a")), None).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    let (s, _) = call(&app, "POST", "/channels", None, Some(json!({"id": "sales"}))).await;
    assert_eq!(s, StatusCode::CONFLICT);

    let app = self::app();
    compose(&app, json!("manual-author")).await;
    let (_, c) = call(&app, "POST", "/components", None, Some(goal_component())).await;
    let again = json!({"id": "monthly", "title": "t", "author": "a", "components": [c]});
    let (s, _) = call(&app, "POST", "/snapshots", None, Some(again)).await;
    assert_eq!(s, StatusCode::CONFLICT);
    let (s, v) = call(&app, "POST", "/snapshots/monthly/update", Some(("author", "a")), Some(json!({"components": {"ghost": {"caption": "x"}}}))).await;
    assert_eq!((s, v["code"].as_str()), (StatusCode::NOT_FOUND, Some("UNKNOWN_COMPONENT")));
}

#[tokio::test]
async fn freshness_route_matches_inference() {
    let app = app();
    let (_, c) = call(&app, "POST", "/components", None, Some(goal_component())).await;
    let draft = json!({"id": "x", "title": "x", "author": "a", "components": [c]});
    let (s, v) = call(&app, "POST", "/freshness", None, Some(draft)).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["inferred"], "2022-05-02");
}
