use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tokio::sync::RwLock;
use tower::ServiceExt;

use phonecamp::api::{router, ServiceState, SharedState, RUN_ID_HEADER};
use phonecamp::config::Config;
use phonecamp::labeler::LabelBook;
use phonecamp::pipeline::{load_run, run_pipeline, PipelineInputs, LABELS_FILE};
use phonecamp::synth::{generate_corpus, SynthSpec};

struct Fixture {
    _tmp: tempfile::TempDir,
    data: std::path::PathBuf,
    state: SharedState,
}

fn fixture() -> Fixture {
    let tmp = tempfile::tempdir().unwrap();
    let files = generate_corpus(&SynthSpec::planted(7, 3, 2, 40, 0.0))
        .unwrap()
        .write_to_dir(&tmp.path().join("in"))
        .unwrap();
    let inputs = PipelineInputs {
        posts: vec![files.posts],
        snapshots: vec![files.snapshot],
        dnc: Some(files.dnc),
        actors: Some(files.actors),
        ..Default::default()
    };
    let mut config = Config::default();
    config.thresholds.min_campaign_posts = 10;
    config.detail_sample_size = 5;
    let data = tmp.path().join("data");
    run_pipeline(&inputs, &config, Some(&data)).unwrap();
    let state = ServiceState::load(data.clone(), None).unwrap();
    Fixture {
        _tmp: tmp,
        data,
        state: Arc::new(RwLock::new(state)),
    }
}

async fn call(state: &SharedState, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, String, Value) {
    let req = Request::builder().method(method).uri(uri);
    let req = match body {
        Some(b) => req
            .header("content-type", "application/json")
            .body(Body::from(b.to_string()))
            .unwrap(),
        None => req.body(Body::empty()).unwrap(),
    };
    let resp = router(state.clone()).oneshot(req).await.unwrap();
    let status = resp.status();
    let header = resp
        .headers()
        .get(RUN_ID_HEADER)
        .map(|v| v.to_str().unwrap().to_string())
        .unwrap_or_default();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    (status, header, serde_json::from_slice(&bytes).unwrap())
}

async fn run_id(state: &SharedState) -> String {
    state.read().await.artifacts.run_id().to_string()
}

async fn first_campaign(state: &SharedState) -> String {
    state.read().await.artifacts.campaigns[0].campaign.campaign_id.clone()
}

#[tokio::test]
async fn every_response_carries_run_id() {
    let f = fixture();
    let rid = run_id(&f.state).await;
    let id = first_campaign(&f.state).await;
    for uri in [
        "/campaigns".to_string(),
        format!("/campaigns/{id}"),
        format!("/campaigns/{id}/metrics"),
        format!("/runs/{rid}"),
        "/report".to_string(),
        "/campaigns/Cnope".to_string(),
    ] {
        let (_, header, body) = call(&f.state, "GET", &uri, None).await;
        assert_eq!(header, rid, "{uri}");
        assert_eq!(body["run_id"], json!(rid), "{uri}");
    }
}

#[tokio::test]
async fn list_filters_and_sorting() {
    let f = fixture();
    let (status, _, body) = call(&f.state, "GET", "/campaigns?label=unreviewed&min_posts=10", None).await;
    assert_eq!(status, StatusCode::OK);
    let rows = body["data"].as_array().unwrap();
    assert_eq!(rows.len(), 3);
    let counts: Vec<u64> = rows.iter().map(|r| r["post_count"].as_u64().unwrap()).collect();
    assert!(counts.windows(2).all(|w| w[0] >= w[1]));

    let (_, _, body) = call(&f.state, "GET", "/campaigns?min_posts=100000", None).await;
    assert!(body["data"].as_array().unwrap().is_empty());
    let (_, _, body) = call(&f.state, "GET", "/campaigns?label=spam", None).await;
    assert!(body["data"].as_array().unwrap().is_empty());
    let (_, _, body) = call(&f.state, "GET", "/campaigns?country=ID", None).await;
    assert!(body["data"].as_array().unwrap().iter().all(|r| r["country"] == "ID"));
    let (_, _, body) = call(&f.state, "GET", "/campaigns?platform=TW", None).await;
    assert!(body["data"]
        .as_array()
        .unwrap()
        .iter()
        .all(|r| r["platform_counts"]["TW"].as_u64().unwrap() > 0));

    let (status, _, body) = call(&f.state, "GET", "/campaigns?min_posts=lots", None).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(body["error"]["code"], "bad_query");
}

#[tokio::test]
async fn detail_and_metrics() {
    let f = fixture();
    let id = first_campaign(&f.state).await;
    let (status, _, body) = call(&f.state, "GET", &format!("/campaigns/{id}"), None).await;
    assert_eq!(status, StatusCode::OK);
    let d = &body["data"];
    assert_eq!(d["summary"]["campaign_id"], json!(id));
    assert_eq!(d["posts_sample"].as_array().unwrap().len(), 5);
    assert_eq!(d["phones"].as_array().unwrap().len(), 2);
    let (_, _, m) = call(&f.state, "GET", &format!("/campaigns/{id}/metrics"), None).await;
    assert_eq!(m["data"], d["metrics"]);
    assert_eq!(m["data"]["post_count"], d["summary"]["post_count"]);
}

#[tokio::test]
async fn unknown_ids_are_404() {
    let f = fixture();
    for uri in [
        "/campaigns/Cnope",
        "/campaigns/Cnope/metrics",
        "/runs/Rnope",
        "/runs/..%2Fetc",
    ] {
        let (status, _, body) = call(&f.state, "GET", uri, None).await;
        assert_eq!(status, StatusCode::NOT_FOUND, "{uri}");
        assert_eq!(body["error"]["code"], "not_found");
    }
    let (status, _, _) = call(
        &f.state,
        "POST",
        "/campaigns/Cnope/label",
        Some(json!({"verdict": "benign"})),
    )
    .await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn label_round_trip_and_persistence() {
    let f = fixture();
    let id = first_campaign(&f.state).await;
    let rid = run_id(&f.state).await;
    let (status, _, _) = call(
        &f.state,
        "POST",
        &format!("/campaigns/{id}/label"),
        Some(json!({"verdict": "spam", "topic": "tech support", "reviewer": "ana", "run_id": rid, "reviewed_at": 5})),
    )
    .await;
    assert_eq!(status, StatusCode::OK);

    let (_, _, body) = call(&f.state, "GET", &format!("/campaigns/{id}"), None).await;
    assert_eq!(body["data"]["summary"]["label"], "spam");
    assert_eq!(body["data"]["summary"]["topic"], "tech support");
    assert_eq!(body["data"]["label_history"].as_array().unwrap().len(), 1);

    let (_, _, body) = call(&f.state, "GET", "/campaigns?label=spam&topic=tech%20support", None).await;
    assert_eq!(body["data"].as_array().unwrap().len(), 1);
    let (_, _, report) = call(&f.state, "GET", "/report", None).await;
    assert_eq!(report["data"]["totals"]["labeled_spam"], 1);

    // Equivalent to the library code path: the log replays to the same book.
    let book = LabelBook::load(&f.data.join(LABELS_FILE)).unwrap();
    assert_eq!(book, f.state.read().await.labels);
    let (reloaded, _) = load_run(&f.data, None).unwrap();
    assert_eq!(
        reloaded.campaign(&id).unwrap().campaign,
        f.state.read().await.artifacts.campaign(&id).unwrap().campaign
    );
}

#[tokio::test]
async fn label_errors() {
    let f = fixture();
    let id = first_campaign(&f.state).await;
    let uri = format!("/campaigns/{id}/label");
    let (status, _, body) = call(
        &f.state,
        "POST",
        &uri,
        Some(json!({"verdict": "spam", "run_id": "Rstale"})),
    )
    .await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(body["error"]["code"], "stale_run");
    let (status, _, body) = call(&f.state, "POST", &uri, Some(json!({"verdict": "spam"}))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(body["error"]["code"], "missing_topic");
    let (status, _, _) = call(&f.state, "POST", &uri, Some(json!({"verdict": "maybe"}))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert!(f.state.read().await.labels.history(&id).is_empty());
}

#[tokio::test]
async fn reads_do_not_change_state() {
    let f = fixture();
    let rid = run_id(&f.state).await;
    let id = first_campaign(&f.state).await;
    let before = f.state.read().await.state_hash();
    for uri in [
        "/campaigns?label=unreviewed".to_string(),
        format!("/campaigns/{id}"),
        format!("/campaigns/{id}/metrics"),
        format!("/runs/{rid}"),
        "/report".to_string(),
        "/campaigns/Cnope".to_string(),
    ] {
        call(&f.state, "GET", &uri, None).await;
    }
    assert_eq!(f.state.read().await.state_hash(), before);
}

#[tokio::test]
async fn labeling_a_queue_leaves_nothing_unreviewed() {
    let f = fixture();
    let ids: Vec<String> = f
        .state
        .read()
        .await
        .artifacts
        .campaigns
        .iter()
        .map(|c| c.campaign.campaign_id.clone())
        .collect();
    for id in &ids {
        let (status, _, _) = call(
            &f.state,
            "POST",
            &format!("/campaigns/{id}/label"),
            Some(json!({"verdict": "benign", "reviewer": "q"})),
        )
        .await;
        assert_eq!(status, StatusCode::OK);
    }
    let (_, _, body) = call(&f.state, "GET", "/campaigns?label=unreviewed", None).await;
    assert!(body["data"].as_array().unwrap().is_empty());
    assert_eq!(f.state.read().await.labels.total_entries(), ids.len());
}

#[tokio::test]
async fn port_in_use() {
    let f = fixture();
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    let state = ServiceState::load(f.data.clone(), None).unwrap();
    let err = phonecamp::api::serve(addr, state).await.unwrap_err();
    assert!(matches!(err, phonecamp::api::ServeError::PortInUse(a) if a == addr));
}
