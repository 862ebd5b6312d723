//! HTTP API exercised in-process against fixture collections.

use std::path::Path;
use std::sync::Arc;
use std::time::{Duration, Instant};

use axum::body::Body;
use axum::http::{header, Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use missingpath_core::collection::{CollectionDescriptor, IngestSpec};
use missingpath_core::export::{parse_conditions, parse_selection, parse_summary, read_zip};
use missingpath_core::summaries::Facet;
use missingpath_core::synth::{four_books, random_collection, ITEM_CLASS};
use missingpath_server::log::payload_digest;
use missingpath_server::{router, AppState};
use serde_json::{json, Value};
use tower::ServiceExt;

struct Harness {
    app: Router,
    data: tempfile::TempDir,
    fixtures: tempfile::TempDir,
}

impl Harness {
    fn new() -> Self {
        let data = tempfile::tempdir().unwrap();
        let state = Arc::new(AppState::open(data.path(), None).unwrap());
        Harness { app: router(state, None), data, fixtures: tempfile::tempdir().unwrap() }
    }

    fn reopen(&mut self) {
        let state = Arc::new(AppState::open(self.data.path(), None).unwrap());
        self.app = router(state, None);
    }

    fn fixture(&self, name: &str, ntriples: &str) -> String {
        let path = self.fixtures.path().join(name);
        std::fs::write(&path, ntriples).unwrap();
        path.to_string_lossy().into_owned()
    }

    async fn send(&self, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, Vec<u8>) {
        let mut req = Request::builder().method(method).uri(uri);
        let body = match body {
            Some(v) => {
                req = req.header(header::CONTENT_TYPE, "application/json");
                Body::from(serde_json::to_vec(&v).unwrap())
            }
            None => Body::empty(),
        };
        let res = self.app.clone().oneshot(req.body(body).unwrap()).await.unwrap();
        let status = res.status();
        (status, res.into_body().collect().await.unwrap().to_bytes().to_vec())
    }

    async fn json(&self, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
        let (status, bytes) = self.send(method, uri, body).await;
        let value = if bytes.is_empty() {
            Value::Null
        } else {
            serde_json::from_slice(&bytes)
                .unwrap_or_else(|e| panic!("{uri}: {status} {e}: {}", String::from_utf8_lossy(&bytes)))
        };
        (status, value)
    }

    async fn wait_job(&self, job_id: &str) -> Value {
        let deadline = Instant::now() + Duration::from_secs(60);
        loop {
            let (status, job) = self.json(Method::GET, &format!("/jobs/{job_id}"), None).await;
            assert_eq!(status, StatusCode::OK);
            if ["done", "failed", "cancelled"].contains(&job["state"].as_str().unwrap()) {
                return job;
            }
            assert!(Instant::now() < deadline, "job {job_id} did not finish");
            tokio::time::sleep(Duration::from_millis(20)).await;
        }
    }

    /// Ingests `random_collection(seed, n)` and waits until it is ready.
    async fn ready_collection(&self, id: &str, seed: u64, n: usize) {
        let fixture = self.fixture(&format!("{id}.nt"), &random_collection(seed, n).to_ntriples());
        let (status, body) = self
            .json(
                Method::POST,
                "/collections",
                Some(json!({ "class_uri": ITEM_CLASS, "fixture": fixture, "max_depth": 2, "collection_id": id })),
            )
            .await;
        assert_eq!(status, StatusCode::ACCEPTED, "{body}");
        let job = self.wait_job(body["job_id"].as_str().unwrap()).await;
        assert_eq!(job["state"], "done", "{job}");
    }
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn collection_lifecycle() {
    let h = Harness::new();
    let fixture = h.fixture("items.nt", &random_collection(3, 120).to_ntriples());
    let (status, body) = h
        .json(
            Method::POST,
            "/collections",
            Some(json!({ "class_uri": ITEM_CLASS, "fixture": fixture, "max_depth": 2, "quota": 50 })),
        )
        .await;
    assert_eq!(status, StatusCode::ACCEPTED, "{body}");
    let id = body["collection_id"].as_str().unwrap().to_string();
    assert_eq!(id, "item");

    let job = h.wait_job(body["job_id"].as_str().unwrap()).await;
    assert_eq!(job["state"], "done", "{job}");
    assert_eq!(job["kind"], "ingest");
    assert_eq!(job["progress"], 1.0);

    let (status, d) = h.json(Method::GET, &format!("/collections/{id}"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(d["status"]["state"], "ready");
    assert_eq!(d["entity_count"], 120);
    assert_eq!(d["class_uri"], ITEM_CLASS);

    let (_, list) = h.json(Method::GET, "/collections", None).await;
    assert_eq!(list.as_array().unwrap().len(), 1);
    assert_eq!(list[0]["collection_id"], id.as_str());

    let (status, paths) = h.json(Method::GET, &format!("/collections/{id}/paths"), None).await;
    assert_eq!(status, StatusCode::OK);
    let paths = paths.as_array().unwrap();
    assert_eq!(paths.len() as u64, d["path_count"].as_u64().unwrap());
    for (i, p) in paths.iter().enumerate() {
        assert_eq!(p["index"], i);
        let c = p["completeness"].as_f64().unwrap();
        assert!((0.0..=1.0).contains(&c));
        assert_eq!(p["covered_count"].as_f64().unwrap(), (c * 120.0).round());
    }

    let (status, map) = h.json(Method::GET, &format!("/collections/{id}/map"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(map["coordinates"].as_array().unwrap().len(), 120);
    assert_eq!(map["color_buckets"].as_array().unwrap().len(), 120);
    assert_eq!(map["config_used"]["selected_path_indices"].as_array().unwrap().len(), paths.len());
    assert!(map["default_color_path"].is_u64());
    assert_eq!(map["color_path"], map["default_color_path"]);
    for z in map["zones"].as_array().unwrap() {
        assert!(z["member_ids"].as_array().unwrap().len() >= 5);
    }

    let (status, recolored) = h.json(Method::GET, &format!("/collections/{id}/map?color_path=0"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(recolored["color_path"], 0);
    assert_eq!(recolored["coordinates"], map["coordinates"]);
    let (status, _) = h.json(Method::GET, &format!("/collections/{id}/map?color_path=9999"), None).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    let (status, body) = h.json(Method::GET, &format!("/collections/{id}/map?color_path=x"), None).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert!(body["error"].is_string());

    // Reopening the data directory serves the same collection.
    let mut h = h;
    h.reopen();
    let (status, again) = h.json(Method::GET, &format!("/collections/{id}/map"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(again["coordinates"], map["coordinates"]);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn inspection_and_export() {
    let h = Harness::new();
    let fixture = h.fixture("books.nt", &four_books().to_ntriples());
    let (status, body) = h
        .json(
            Method::POST,
            "/collections",
            Some(json!({ "class_uri": "http://example.org/Book", "fixture": fixture, "max_depth": 2, "collection_id": "books" })),
        )
        .await;
    assert_eq!(status, StatusCode::ACCEPTED);
    assert_eq!(h.wait_job(body["job_id"].as_str().unwrap()).await["state"], "done");

    let (_, paths) = h.json(Method::GET, "/collections/books/paths", None).await;
    let index = |label: &str| paths.as_array().unwrap().iter().position(|p| p["label"] == label).unwrap();
    let author = index("ex:author");
    let genre = index("ex:genre");

    let (status, ins) = h
        .json(
            Method::POST,
            "/collections/books/selection/inspect",
            Some(json!({ "conditions": [{ "kind": "path_presence", "path_index": author, "negated": true }] })),
        )
        .await;
    assert_eq!(status, StatusCode::OK, "{ins}");
    assert_eq!(ins["entity_count"], 1);
    assert_eq!(ins["labels"][0]["uri"], "http://example.org/b4");
    assert_eq!(ins["pseudocode"], "SELECT entities NOT HAVING the path ex:author among the whole set");
    assert_eq!(ins["summaries"].as_array().unwrap().len(), paths.as_array().unwrap().len());

    let (status, ins) = h
        .json(
            Method::POST,
            "/collections/books/selection/inspect",
            Some(json!({
                "conditions": [{ "kind": "value_at_path", "path_index": genre, "bucket_key": "http://example.org/g1" }],
                "entity_ids": [0, 2],
                "preferred_language": "en"
            })),
        )
        .await;
    assert_eq!(status, StatusCode::OK, "{ins}");
    assert_eq!(ins["entity_ids"], json!([0, 2]));
    // No rdfs:label, so labels fall back to the IRI tail.
    assert_eq!(ins["labels"][0]["label"], "b1");
    let (status, _) = h
        .json(
            Method::POST,
            "/collections/books/selection/inspect",
            Some(json!({
                "conditions": [{ "kind": "value_at_path", "path_index": genre, "bucket_key": "http://example.org/g1" }],
                "entity_ids": [0, 3]
            })),
        )
        .await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);

    // Narrowing within the current selection.
    let (status, ins) = h
        .json(
            Method::POST,
            "/collections/books/selection/inspect",
            Some(json!({
                "conditions": [{ "kind": "path_presence", "path_index": author }],
                "scope": "current_selection",
                "current_ids": [2, 3]
            })),
        )
        .await;
    assert_eq!(status, StatusCode::OK, "{ins}");
    assert_eq!(ins["entity_ids"], json!([2]));

    let query = json!({ "conditions": [{ "kind": "path_presence", "path_index": author }] });
    let (status, bytes) = h
        .send(Method::POST, "/collections/books/export", Some(json!({ "query": query, "preferred_language": "en" })))
        .await;
    assert_eq!(status, StatusCode::OK);
    let [conditions, selection, summary] = read_zip(&bytes).unwrap();
    let conditions = parse_conditions(&conditions).unwrap();
    assert_eq!(conditions.len(), 1);
    assert_eq!(conditions[0].pseudocode, "HAVING the path ex:author");
    let selection = parse_selection(&selection).unwrap();
    let labels: Vec<&str> = selection.iter().map(|r| r.label.as_str()).collect();
    assert_eq!(labels, ["b1", "b2", "b3"]);
    let summary = parse_summary(&summary).unwrap();
    let subset_genre: u64 = summary
        .iter()
        .filter(|r| r.set == "subset" && r.path_index == genre && r.facet == Facet::Values)
        .map(|r| r.count)
        .sum();
    assert_eq!(subset_genre, 3);

    let res = h
        .app
        .clone()
        .oneshot(
            Request::post("/collections/books/export")
                .header(header::CONTENT_TYPE, "application/json")
                .body(Body::from(json!({ "entity_ids": [3] }).to_string()))
                .unwrap(),
        )
        .await
        .unwrap();
    assert_eq!(res.headers()[header::CONTENT_TYPE], "application/zip");
    let disposition = res.headers()[header::CONTENT_DISPOSITION].to_str().unwrap().to_string();
    assert!(disposition.starts_with("attachment; filename=\"export_books_"), "{disposition}");
    assert!(disposition.ends_with(".zip\""));
    let bytes = res.into_body().collect().await.unwrap().to_bytes();
    let [conditions, selection, _] = read_zip(&bytes).unwrap();
    assert!(parse_conditions(&conditions).unwrap().is_empty());
    assert_eq!(parse_selection(&selection).unwrap()[0].uri, "http://example.org/b4");
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn projection_jobs() {
    let h = Harness::new();
    h.ready_collection("items", 5, 300).await;

    let (status, body) = h
        .json(
            Method::POST,
            "/collections/items/projection",
            Some(json!({ "selected_path_indices": [0, 1, 2, 3], "config": { "n_neighbors": 10, "seed": 7 } })),
        )
        .await;
    assert_eq!(status, StatusCode::ACCEPTED, "{body}");
    let job = h.wait_job(body["job_id"].as_str().unwrap()).await;
    assert_eq!(job["state"], "done", "{job}");
    assert_eq!(job["kind"], "projection");
    let (_, map) = h.json(Method::GET, "/collections/items/map", None).await;
    assert_eq!(map["config_used"]["selected_path_indices"], json!([0, 1, 2, 3]));
    assert_eq!(map["config_used"]["n_neighbors"], 10);
    assert_eq!(map["config_used"]["seed"], 7);

    for bad in [
        json!({ "selected_path_indices": [0] }),
        json!({ "selected_path_indices": [0, 9999] }),
        json!({ "selected_path_indices": [0, 1], "config": { "n_neighbors": 0 } }),
        json!({ "selected_path_indices": [0, 1], "config": { "bogus": 1 } }),
    ] {
        let (status, _) = h.json(Method::POST, "/collections/items/projection", Some(bad.clone())).await;
        assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY, "{bad}");
    }

    // A burst of requests: whichever jobs are skipped, the last request wins.
    let mut ids = Vec::new();
    for seed in 0..4u64 {
        let (status, body) = h
            .json(
                Method::POST,
                "/collections/items/projection",
                Some(json!({ "selected_path_indices": [0, 1, 2], "config": { "seed": seed, "n_epochs": 400 } })),
            )
            .await;
        assert_eq!(status, StatusCode::ACCEPTED);
        ids.push(body["job_id"].as_str().unwrap().to_string());
    }
    let mut states = Vec::new();
    for id in &ids {
        let job = h.wait_job(id).await;
        if job["state"] == "cancelled" {
            assert!(job["reason"].as_str().unwrap().starts_with("superseded by job "), "{job}");
        } else {
            assert_eq!(job["state"], "done", "{job}");
        }
        states.push(job["state"].as_str().unwrap().to_string());
    }
    assert_eq!(states[0], "done");
    assert_eq!(states[3], "done");
    let (_, map) = h.json(Method::GET, "/collections/items/map", None).await;
    assert_eq!(map["config_used"]["seed"], 3);
    assert_eq!(map["config_used"]["n_epochs"], 400);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn error_statuses() {
    let h = Harness::new();
    h.ready_collection("items", 9, 80).await;

    for uri in ["/collections/nope", "/collections/nope/paths", "/collections/nope/map", "/jobs/nope"] {
        let (status, body) = h.json(Method::GET, uri, None).await;
        assert_eq!(status, StatusCode::NOT_FOUND, "{uri}");
        assert!(body["error"].is_string());
    }
    let (status, _) =
        h.json(Method::POST, "/collections/nope/selection/inspect", Some(json!({ "conditions": [] }))).await;
    assert_eq!(status, StatusCode::NOT_FOUND);

    // Invalid collection requests.
    let fixture = h.fixture("x.nt", &random_collection(1, 10).to_ntriples());
    for bad in [
        json!({ "fixture": fixture }),
        json!({ "class_uri": "not an iri", "fixture": fixture }),
        json!({ "class_uri": ITEM_CLASS, "fixture": fixture, "max_depth": 0 }),
        json!({ "class_uri": ITEM_CLASS, "fixture": fixture, "min_coverage": 1.5 }),
        json!({ "class_uri": ITEM_CLASS, "fixture": fixture, "collection_id": "../escape" }),
        json!({ "class_uri": ITEM_CLASS, "fixture": fixture, "endpoint_url": "http://127.0.0.1:9/sparql" }),
        json!({ "class_uri": ITEM_CLASS }),
        json!({ "class_uri": ITEM_CLASS, "fixture": fixture, "colour": "red" }),
    ] {
        let (status, body) = h.json(Method::POST, "/collections", Some(bad.clone())).await;
        assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY, "{bad} -> {body}");
    }

    // Unreachable sources.
    for source in [json!({ "endpoint_url": "http://127.0.0.1:9/sparql" }), json!({ "fixture": "/no/such/file.nt" })] {
        let mut req = json!({ "class_uri": ITEM_CLASS, "collection_id": "gone" });
        req.as_object_mut().unwrap().extend(source.as_object().unwrap().clone());
        let (status, body) = h.json(Method::POST, "/collections", Some(req)).await;
        assert_eq!(status, StatusCode::SERVICE_UNAVAILABLE, "{body}");
    }
    let (status, _) = h.json(Method::GET, "/collections/gone", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);

    // A collection id is taken once ingested.
    let (status, _) = h
        .json(
            Method::POST,
            "/collections",
            Some(json!({ "class_uri": ITEM_CLASS, "fixture": fixture, "collection_id": "items" })),
        )
        .await;
    assert_eq!(status, StatusCode::CONFLICT);

    // Invalid selections.
    for bad in [
        json!({ "conditions": [] }),
        json!({ "conditions": [{ "kind": "path_presence", "path_index": 9999 }] }),
        json!({ "conditions": [{ "kind": "zone", "zone_id": 9999 }] }),
        json!({ "conditions": [{ "kind": "path_presence", "path_index": 0 }], "scope": "current_selection" }),
        json!({ "conditions": [{ "kind": "value_at_path", "path_index": 0, "bucket_key": "no such bucket" }] }),
        json!({ "conditions": [{ "kind": "lasso", "polygon": [[0.0, 0.0], [1.0, 1.0]] }] }),
        json!({ "conditions": [{ "kind": "path_presence", "path_index": 0 }], "entity_ids": [100000] }),
        json!({ "conditions": [{ "kind": "teleport" }] }),
    ] {
        let (status, body) = h.json(Method::POST, "/collections/items/selection/inspect", Some(bad.clone())).await;
        assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY, "{bad} -> {body}");
        let mut query = bad.clone();
        let ids = query.as_object_mut().unwrap().remove("entity_ids");
        let mut export = json!({ "query": query });
        if let Some(ids) = ids {
            export["entity_ids"] = ids;
        }
        let (status, _) = h.json(Method::POST, "/collections/items/export", Some(export)).await;
        assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    }
}

fn pending_collection(data: &Path, id: &str) {
    let spec = IngestSpec::new(ITEM_CLASS, "/nowhere.nt", 2);
    std::fs::create_dir_all(data.join(id)).unwrap();
    CollectionDescriptor::new(id, &spec).write(data.join(id)).unwrap();
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn collections_not_ready_answer_conflict() {
    let mut h = Harness::new();
    pending_collection(h.data.path(), "later");
    h.reopen();
    let (status, d) = h.json(Method::GET, "/collections/later", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(d["status"]["state"], "pending");
    let requests = [
        (Method::GET, "/collections/later/map", None),
        (Method::GET, "/collections/later/paths", None),
        (Method::POST, "/collections/later/projection", Some(json!({ "selected_path_indices": [0, 1] }))),
        (
            Method::POST,
            "/collections/later/selection/inspect",
            Some(json!({ "conditions": [{ "kind": "path_presence", "path_index": 0 }] })),
        ),
        (Method::POST, "/collections/later/export", Some(json!({ "entity_ids": [0] }))),
    ];
    for (method, uri, body) in requests {
        let (status, body) = h.json(method, uri, body).await;
        assert_eq!(status, StatusCode::CONFLICT, "{uri}");
        assert_eq!(body["status"]["state"], "pending", "{uri}");
    }
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn failed_ingest_is_reported_and_can_be_retried() {
    let h = Harness::new();
    // Parses but holds no instance of the class.
    let empty = h.fixture("empty.nt", &four_books().to_ntriples());
    let (status, body) = h
        .json(
            Method::POST,
            "/collections",
            Some(json!({ "class_uri": ITEM_CLASS, "fixture": empty, "collection_id": "retry" })),
        )
        .await;
    assert_eq!(status, StatusCode::ACCEPTED);
    let job = h.wait_job(body["job_id"].as_str().unwrap()).await;
    assert_eq!(job["state"], "failed");
    assert!(job["reason"].as_str().unwrap().contains("no instances"), "{job}");
    let (_, d) = h.json(Method::GET, "/collections/retry", None).await;
    assert_eq!(d["status"]["state"], "failed");

    let good = h.fixture("good.nt", &random_collection(2, 60).to_ntriples());
    let (status, body) = h
        .json(
            Method::POST,
            "/collections",
            Some(json!({ "class_uri": ITEM_CLASS, "fixture": good, "collection_id": "retry", "max_depth": 1 })),
        )
        .await;
    assert_eq!(status, StatusCode::ACCEPTED);
    assert_eq!(h.wait_job(body["job_id"].as_str().unwrap()).await["state"], "done");
    let (status, map) = h.json(Method::GET, "/collections/retry/map", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(map["coordinates"].as_array().unwrap().len(), 60);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn interaction_log() {
    let mut h = Harness::new();
    let actions = [
        "load_collection",
        "compute_projection",
        "select_color",
        "add_condition",
        "retrieve_subset",
        "remove_condition",
        "clear_selection",
    ];
    for (i, action) in actions.iter().enumerate() {
        let payload = json!({ "step": i });
        let (status, body) = h
            .json(
                Method::POST,
                "/log",
                Some(json!({ "session_id": "s1", "action": action, "timestamp": "2026-01-02T03:04:05Z", "payload": payload })),
            )
            .await;
        assert_eq!(status, StatusCode::NO_CONTENT, "{body}");
    }
    let (status, _) =
        h.json(Method::POST, "/log", Some(json!({ "session_id": "s2", "action": "add_condition" }))).await;
    assert_eq!(status, StatusCode::NO_CONTENT);

    for bad in [
        json!({ "session_id": "s1", "action": "dance" }),
        json!({ "session_id": "", "action": "add_condition" }),
        json!({ "session_id": "s1" }),
        json!({ "session_id": "s1", "action": "add_condition", "extra": true }),
    ] {
        let (status, _) = h.json(Method::POST, "/log", Some(bad.clone())).await;
        assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY, "{bad}");
    }

    let check = |entries: &Value| {
        let entries = entries.as_array().unwrap();
        assert_eq!(entries.len(), actions.len());
        for (i, (e, action)) in entries.iter().zip(actions).enumerate() {
            assert_eq!(e["session_id"], "s1");
            assert_eq!(e["action"], action);
            assert_eq!(e["timestamp"], "2026-01-02T03:04:05Z");
            assert_eq!(e["payload_digest"], payload_digest(Some(&json!({ "step": i }))));
            assert!(e.get("payload").is_none());
        }
    };
    let (status, entries) = h.json(Method::GET, "/log?session=s1", None).await;
    assert_eq!(status, StatusCode::OK);
    check(&entries);
    let (_, s2) = h.json(Method::GET, "/log?session=s2", None).await;
    assert_eq!(s2.as_array().unwrap().len(), 1);
    assert!(s2[0]["timestamp"].is_string());
    let (_, none) = h.json(Method::GET, "/log?session=unknown", None).await;
    assert_eq!(none, json!([]));

    h.reopen();
    let (_, entries) = h.json(Method::GET, "/log?session=s1", None).await;
    check(&entries);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn cors_allows_the_configured_origin() {
    let data = tempfile::tempdir().unwrap();
    let state = Arc::new(AppState::open(data.path(), None).unwrap());
    let app = router(state, Some("http://localhost:5173"));
    let res = app
        .oneshot(
            Request::get("/collections").header(header::ORIGIN, "http://localhost:5173").body(Body::empty()).unwrap(),
        )
        .await
        .unwrap();
    assert_eq!(res.status(), StatusCode::OK);
    assert_eq!(res.headers()[header::ACCESS_CONTROL_ALLOW_ORIGIN], "http://localhost:5173");
}
