//! Annotate, propagate through the service, and compare with the engine run
//! directly on the same inputs.

mod common;

use axum::http::{Method, StatusCode};
use serde_json::json;

use segprop_core::dataset::{decode_label_image, encode_label_png, Video, DEFAULT_COLOR_TOLERANCE};
use segprop_core::segprop::{PropagationConfig, Propagator};
use segprop_core::{LabelMap, Palette};
use segprop_service::{rasterize_polygons, Annotation};

use common::*;

fn png_bytes(label: &LabelMap) -> Vec<u8> {
    encode_label_png(label, &Palette::standard()).unwrap()
}

fn engine_output(dir: &std::path::Path, config: PropagationConfig) -> Vec<LabelMap> {
    let video = Video::open(dir).unwrap();
    let keyframes = video
        .keyframe_labels(&Palette::standard(), DEFAULT_COLOR_TOLERANCE)
        .unwrap();
    Propagator::new(config)
        .unwrap()
        .propagate_sequence(&keyframes, video.frame_count(), &video.flow_source())
        .unwrap()
        .labels
}

async fn fetch_labels(app: &axum::Router, frames: usize) -> Vec<Vec<u8>> {
    let mut out = Vec::new();
    for t in 0..frames {
        let (status, bytes) = send(app, Method::GET, &format!("/api/sequences/{SEQ}/labels/{t}"), None).await;
        assert_eq!(status, StatusCode::OK);
        out.push(bytes);
    }
    out
}

async fn run_job(app: &axum::Router, config: &PropagationConfig) -> serde_json::Value {
    let (status, job) = post_json(app, &format!("/api/sequences/{SEQ}/jobs"), json!({ "config": config })).await;
    assert_eq!(status, StatusCode::ACCEPTED, "{job}");
    assert_eq!(job["state"], "queued");
    let job = wait_for_job(app, job["id"].as_u64().unwrap()).await;
    assert_eq!(job["state"], "done", "{job}");
    assert_eq!(job["progress"], 1.0);
    job
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn service_output_matches_engine_byte_for_byte() {
    let dir = tempfile::tempdir().unwrap();
    let frames = 9;
    let scene = write_sequence(dir.path(), frames, 11);
    let app = app(dir.path());

    for t in [0, frames - 1] {
        let state = annotate(&app, t, scene_polygons(&scene, t)).await;
        assert_eq!(state["keyframe"], true);

        // The label file the job will read is exactly the rasterized annotation.
        let ann: Annotation = serde_json::from_value(state.clone()).unwrap();
        let raster = rasterize_polygons(&ann, 48, 32).unwrap();
        let stored = decode_label_image(
            &dir.path().join(SEQ).join("labels").join(format!("{t:06}.png")),
            &Palette::standard(),
            0,
        )
        .unwrap();
        assert_eq!(stored.as_slice(), raster.as_slice());
    }

    let config = PropagationConfig::default();
    let job = run_job(&app, &config).await;
    assert_eq!(job["keyframes"], json!([0, frames - 1]));

    let expected = engine_output(&dir.path().join(SEQ), config);
    let served = fetch_labels(&app, frames).await;
    for t in 1..frames - 1 {
        assert_eq!(served[t], png_bytes(&expected[t]), "frame {t}");
    }
    let (_, seq) = get_json(&app, &format!("/api/sequences/{SEQ}")).await;
    assert_eq!(seq["latest_job"], job["id"]);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn correcting_a_frame_splits_its_interval() {
    let dir = tempfile::tempdir().unwrap();
    let frames = 17;
    let scene = write_sequence(dir.path(), frames, 12);
    let app = app(dir.path());
    for t in [0, 8, 16] {
        annotate(&app, t, scene_polygons(&scene, t)).await;
    }
    let config = PropagationConfig {
        iterations: 0,
        ..Default::default()
    };
    run_job(&app, &config).await;
    let first = fetch_labels(&app, frames).await;

    annotate(&app, 4, scene_polygons(&scene, 4)).await;
    let job = run_job(&app, &config).await;
    assert_eq!(job["keyframes"], json!([0, 4, 8, 16]));
    let second = fetch_labels(&app, frames).await;

    // Without iterations only the split interval can change.
    for t in 8..frames {
        assert_eq!(first[t], second[t], "frame {t} outside the split interval changed");
    }
    let expected = engine_output(&dir.path().join(SEQ), config);
    for t in 0..frames {
        assert_eq!(second[t], png_bytes(&expected[t]), "frame {t}");
    }
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn jobs_on_one_sequence_queue_behind_each_other() {
    let dir = tempfile::tempdir().unwrap();
    let scene = write_sequence(dir.path(), 5, 13);
    let app = app(dir.path());
    for t in [0, 4] {
        annotate(&app, t, scene_polygons(&scene, t)).await;
    }
    let jobs = format!("/api/sequences/{SEQ}/jobs");
    let mut ids = Vec::new();
    for _ in 0..3 {
        let (status, job) = post_json(&app, &jobs, json!({})).await;
        assert_eq!(status, StatusCode::ACCEPTED);
        ids.push(job["id"].as_u64().unwrap());
    }
    for &id in &ids {
        assert_eq!(wait_for_job(&app, id).await["state"], "done");
    }
    let (_, listed) = get_json(&app, &jobs).await;
    let listed: Vec<u64> = listed
        .as_array()
        .unwrap()
        .iter()
        .map(|j| j["id"].as_u64().unwrap())
        .collect();
    assert_eq!(listed, ids);
    let (_, seq) = get_json(&app, &format!("/api/sequences/{SEQ}")).await;
    assert_eq!(seq["latest_job"], *ids.last().unwrap());
}
