#![allow(dead_code)]

use std::path::Path;
use std::time::{Duration, Instant};

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

use segprop_core::synth::{render_scene, RenderedScene, SceneSpec};
use segprop_service::{router, AppState, Store};

pub const SEQ: &str = "clip";

/// A rendered scene written as sequence `clip` under `root`, with every
/// keyframe label removed so annotations are the only label source.
pub fn write_sequence(root: &Path, frames: usize, seed: u64) -> RenderedScene {
    let spec = SceneSpec::translating_rectangles(48, 32, frames, 2, seed);
    let scene = render_scene(&spec).unwrap();
    let dir = root.join(SEQ);
    scene.write(&dir, frames).unwrap();
    std::fs::remove_dir_all(dir.join("labels")).unwrap();
    std::fs::create_dir(dir.join("labels")).unwrap();
    scene
}

pub fn app(root: &Path) -> Router {
    router(AppState::new(Store::open(root).unwrap(), 1))
}

pub async fn send(app: &Router, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, Vec<u8>) {
    let mut req = Request::builder().method(method).uri(uri);
    let body = match body {
        Some(v) => {
            req = req.header("content-type", "application/json");
            Body::from(serde_json::to_vec(&v).unwrap())
        }
        None => Body::empty(),
    };
    let resp = app.clone().oneshot(req.body(body).unwrap()).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes().to_vec();
    (status, bytes)
}

pub async fn get_json(app: &Router, uri: &str) -> (StatusCode, Value) {
    let (status, bytes) = send(app, Method::GET, uri, None).await;
    (status, serde_json::from_slice(&bytes).unwrap())
}

pub async fn put_json(app: &Router, uri: &str, body: Value) -> (StatusCode, Value) {
    let (status, bytes) = send(app, Method::PUT, uri, Some(body)).await;
    (status, serde_json::from_slice(&bytes).unwrap())
}

pub async fn post_json(app: &Router, uri: &str, body: Value) -> (StatusCode, Value) {
    let (status, bytes) = send(app, Method::POST, uri, Some(body)).await;
    (status, serde_json::from_slice(&bytes).unwrap())
}

/// Polygons reproducing the scene at frame `t`: a full-frame background
/// plus each sprite's moved outline, stacked in drawing order.
pub fn scene_polygons(scene: &RenderedScene, t: usize) -> Value {
    let spec = &scene.spec;
    let (w, h) = (spec.width as f64, spec.height as f64);
    let mut polys = vec![json!({
        "class": spec.background_class,
        "z": 0,
        "points": [[0.0, 0.0], [w, 0.0], [w, h], [0.0, h]],
    })];
    for (s, sprite) in spec.sprites.iter().enumerate() {
        let hom = sprite.motion.at(t).unwrap();
        let points: Vec<[f64; 2]> = sprite.polygon.iter().map(|&p| hom.apply(p).unwrap()).collect();
        polys.push(json!({ "class": sprite.class, "z": s + 1, "points": points }));
    }
    Value::Array(polys)
}

pub async fn annotate(app: &Router, frame: usize, polygons: Value) -> Value {
    let uri = format!("/api/sequences/{SEQ}/annotations/{frame}");
    let (_, current) = get_json(app, &uri).await;
    let (status, body) = put_json(
        app,
        &uri,
        json!({ "revision": current["revision"], "polygons": polygons }),
    )
    .await;
    assert_eq!(status, StatusCode::OK, "{body}");
    body
}

/// Polls a job until it leaves the queue, checking that state only moves
/// forward and progress never decreases.
pub async fn wait_for_job(app: &Router, id: u64) -> Value {
    let order = ["queued", "running", "done", "failed"];
    let rank = |s: &Value| order.iter().position(|o| s == o).expect("known state");
    let start = Instant::now();
    let (mut last_rank, mut last_progress) = (0, 0.0);
    loop {
        let (status, job) = get_json(app, &format!("/api/jobs/{id}")).await;
        assert_eq!(status, StatusCode::OK);
        let r = rank(&job["state"]);
        let p = job["progress"].as_f64().unwrap();
        assert!(r >= last_rank && p >= last_progress, "job went backwards: {job}");
        (last_rank, last_progress) = (r, p);
        if r >= 2 {
            return job;
        }
        assert!(start.elapsed() < Duration::from_secs(120), "job {id} timed out");
        tokio::time::sleep(Duration::from_millis(20)).await;
    }
}
