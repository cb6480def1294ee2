use std::sync::Arc;

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use base64::Engine;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tokio::sync::RwLock;
use tower::ServiceExt;

use fibertrace::connect::{Confidence, MergeProposal, ProposalStatus};
use fibertrace::graph::{End, NodeFlags, Provenance, SegmentGraph};
use fibertrace::io::write_proposals;
use fibertrace::proofread::{read_audit, replay, Session, AUDIT_FILE, PROPOSALS_FILE};
use fibertrace::server::{router, AppState};
use fibertrace::volume::{generate_phantom, min_max_normalize, PhantomSpec};
use fibertrace::Vec3;

fn fixture() -> (SegmentGraph, Vec<MergeProposal>) {
    let mut g = SegmentGraph::new(1.0, 3);
    for y in [10.0, 30.0] {
        let f = g.new_fragment();
        let ids: Vec<_> = (0..4)
            .map(|i| g.add_node(Vec3::new(10.0 + 3.0 * i as f64, y, 20.0), f, NodeFlags::default()))
            .collect();
        for w in ids.windows(2) {
            g.add_edge(w[0], w[1], Provenance::Skeleton).unwrap();
        }
    }
    let proposal = |id, source_node, target, confidence| MergeProposal {
        id,
        source_fragment: 1,
        source_end: End::End,
        source_node,
        target,
        trajectory: (0..=10).map(|i| Vec3::new(19.0, 10.0 + 2.0 * i as f64, 20.0)).collect(),
        confidence,
        status: ProposalStatus::Proposed,
    };
    let props = vec![
        proposal(1, 4, Some((2, 8)), Confidence::LowConfidence),
        proposal(2, 4, Some((2, 8)), Confidence::CentroidMerged),
        proposal(3, 4, None, Confidence::LowConfidence),
    ];
    (g, props)
}

fn app(dir: &std::path::Path, with_volume: bool) -> axum::Router {
    let volume = with_volume.then(|| {
        let spec = PhantomSpec {
            dims: [40, 40, 40],
            origin: [0; 3],
            pitch: 1.0,
            curves: vec![(0..6).map(|i| [20.0, 20.0, 5.0 + 6.0 * i as f64]).collect()],
            tube_radius: 2.0,
            peak_intensity: 1000.0,
            background: 100.0,
            noise_sd: 0.0,
            gaps: vec![],
            seed: 0,
        };
        min_max_normalize(&generate_phantom(&spec).unwrap().0)
    });
    router(Arc::new(AppState {
        session: RwLock::new(Session::open(dir).unwrap()),
        volume,
    }))
}

async fn call(app: &axum::Router, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let mut req = Request::builder().method(method).uri(uri);
    let body = match body {
        Some(v) => {
            req = req.header("content-type", "application/json");
            Body::from(v.to_string())
        }
        None => Body::empty(),
    };
    let resp = app.clone().oneshot(req.body(body).unwrap()).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let value = serde_json::from_slice(&bytes).unwrap_or(Value::Null);
    (status, value)
}

fn setup() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    let (g, p) = fixture();
    g.save(dir.path()).unwrap();
    write_proposals(&dir.path().join(PROPOSALS_FILE), &p).unwrap();
    dir
}

#[tokio::test]
async fn proposals_sorted_and_decisions_conflict() {
    let dir = setup();
    let app = app(dir.path(), false);
    let (s, v) = call(&app, Method::GET, "/proposals", None).await;
    assert_eq!(s, StatusCode::OK);
    let ids: Vec<u64> = v.as_array().unwrap().iter().map(|p| p["id"].as_u64().unwrap()).collect();
    assert_eq!(ids, vec![2, 1, 3]);

    let (s, v) = call(&app, Method::POST, "/proposal/2/accept", None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["status"], "accepted");
    let (s, _) = call(&app, Method::POST, "/proposal/2/accept", None).await;
    assert_eq!(s, StatusCode::CONFLICT);
    let (s, _) = call(&app, Method::POST, "/proposal/2/reject", None).await;
    assert_eq!(s, StatusCode::CONFLICT);
    let (s, _) = call(&app, Method::POST, "/proposal/99/accept", None).await;
    assert_eq!(s, StatusCode::NOT_FOUND);

    // Reject keeps the edge count unchanged.
    let (_, before) = call(&app, Method::GET, "/graph", None).await;
    let (s, _) = call(&app, Method::POST, "/proposal/1/reject", None).await;
    assert_eq!(s, StatusCode::OK);
    let (_, after) = call(&app, Method::GET, "/graph", None).await;
    assert_eq!(before["edges"].as_array().unwrap().len(), after["edges"].as_array().unwrap().len());

    let (_, v) = call(&app, Method::GET, "/proposals", None).await;
    assert_eq!(v.as_array().unwrap().len(), 1);
    let (s, _) = call(&app, Method::POST, "/proposal/3/accept", None).await;
    assert_eq!(s, StatusCode::OK);
    let (_, v) = call(&app, Method::GET, "/proposals", None).await;
    assert!(v.as_array().unwrap().is_empty());

    // Decisions are persisted.
    let reopened = Session::open(dir.path()).unwrap();
    let statuses: Vec<_> = reopened.proposals.iter().map(|p| p.status).collect();
    use ProposalStatus::*;
    assert_eq!(statuses, vec![Rejected, Accepted, Accepted]);
}

#[tokio::test]
async fn graph_edits_read_back_and_replay() {
    let dir = setup();
    let app = app(dir.path(), false);
    let (s, v) = call(&app, Method::POST, "/edge", Some(json!({"a": 4, "b": 5}))).await;
    assert_eq!(s, StatusCode::OK, "{v}");
    let (_, g) = call(&app, Method::GET, "/graph", None).await;
    assert!(g["edges"]
        .as_array()
        .unwrap()
        .iter()
        .any(|e| e["a"] == 4 && e["b"] == 5 && e["provenance"] == "manual"));

    let (s, v) = call(&app, Method::POST, "/node", Some(json!({"position": [1.0, 2.0, 3.0]}))).await;
    assert_eq!(s, StatusCode::OK);
    let n = v["node"].as_u64().unwrap();
    let (s, _) = call(&app, Method::POST, "/edge", Some(json!({"a": 1, "b": n}))).await;
    assert_eq!(s, StatusCode::OK);
    let (s, _) = call(&app, Method::DELETE, "/edge", Some(json!({"a": 1, "b": 2}))).await;
    assert_eq!(s, StatusCode::OK);
    let (s, _) = call(&app, Method::DELETE, "/edge", Some(json!({"a": 1, "b": 2}))).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    let (s, _) = call(&app, Method::POST, "/edge", Some(json!({"a": 1, "b": 999}))).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    let (s, _) = call(&app, Method::POST, "/edge", Some(json!({"a": 1, "b": 1}))).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    let (s, _) = call(&app, Method::POST, "/proposal/2/accept", None).await;
    assert_eq!(s, StatusCode::OK);

    // Failed requests are not logged; replay over the original graph
    // reproduces the served one.
    let entries = read_audit(&dir.path().join(AUDIT_FILE)).unwrap();
    assert_eq!(entries.len(), 5);
    assert!(entries.iter().all(|e| e.timestamp_ms > 0));
    let (g0, p0) = fixture();
    let (rg, rp) = replay(&g0, &p0, &entries).unwrap();
    let now = Session::open(dir.path()).unwrap();
    assert_eq!(rg, now.graph);
    assert_eq!(rp, now.proposals);
}

#[tokio::test]
async fn slab_centres_on_the_tube() {
    let dir = setup();
    let app = app(dir.path(), true);
    let (s, v) = call(&app, Method::GET, "/slab?cx=20&cy=20&cz=20&size=21&axis=z", None).await;
    assert_eq!(s, StatusCode::OK, "{v}");
    let png = base64::engine::general_purpose::STANDARD
        .decode(v["png"].as_str().unwrap())
        .unwrap();
    let img = image::load_from_memory(&png).unwrap().to_luma8();
    assert_eq!(img.dimensions(), (21, 21));
    let (mut best, mut at) = (0u8, (0u32, 0u32));
    for (x, y, p) in img.enumerate_pixels() {
        if p.0[0] > best {
            best = p.0[0];
            at = (x, y);
        }
    }
    let d = ((at.0 as f64 - 10.0).powi(2) + (at.1 as f64 - 10.0).powi(2)).sqrt();
    assert!(d <= 2.0, "brightest pixel at {at:?}");
    assert_eq!(best, 255);

    let (s, _) = call(&app, Method::GET, "/slab?cx=20&cy=20&cz=20&size=0", None).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    let no_volume = self::app(dir.path(), false);
    let (s, _) = call(&no_volume, Method::GET, "/slab?cx=20&cy=20&cz=20&size=8", None).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
}
