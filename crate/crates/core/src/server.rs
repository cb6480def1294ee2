//! HTTP service backing the proofreading stage. Reads run concurrently;
//! mutations are serialized behind a write lock and persisted before the
//! response is sent.

use std::collections::BTreeMap;
use std::io::Cursor;
use std::net::SocketAddr;
use std::sync::Arc;

use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use base64::Engine;
use serde::{Deserialize, Serialize};
use tokio::sync::RwLock;

use crate::connect::MergeProposal;
use crate::graph::{FragmentId, GraphError, Node, NodeId, Provenance};
use crate::proofread::{Action, ActionResult, ProofreadError, Session};
use crate::volume::Volume;

pub struct AppState {
    pub session: RwLock<Session>,
    pub volume: Option<Volume>,
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/graph", get(get_graph))
        .route("/proposals", get(get_proposals))
        .route("/slab", get(get_slab))
        .route("/proposal/{id}/accept", post(accept))
        .route("/proposal/{id}/reject", post(reject))
        .route("/edge", post(add_edge).delete(remove_edge))
        .route("/node", post(add_node))
        .with_state(state)
}

pub async fn serve(state: AppState, addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(Arc::new(state))).await
}

pub struct ApiError(StatusCode, String);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(serde_json::json!({ "error": self.1 }))).into_response()
    }
}

impl From<ProofreadError> for ApiError {
    fn from(e: ProofreadError) -> Self {
        let code = match &e {
            ProofreadError::UnknownProposal(_) => StatusCode::NOT_FOUND,
            ProofreadError::AlreadyResolved(..) => StatusCode::CONFLICT,
            ProofreadError::Graph(
                GraphError::UnknownNode(_) | GraphError::NoEdge(..) | GraphError::UnknownFragment(_),
            ) => StatusCode::NOT_FOUND,
            ProofreadError::Graph(GraphError::SelfLoop(_)) => StatusCode::BAD_REQUEST,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        ApiError(code, e.to_string())
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct EdgeView {
    pub a: NodeId,
    pub b: NodeId,
    pub provenance: Provenance,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct GraphView {
    pub pitch: f64,
    pub sampling_interval: usize,
    pub nodes: Vec<Node>,
    pub edges: Vec<EdgeView>,
    pub fragments: BTreeMap<FragmentId, Vec<NodeId>>,
}

async fn get_graph(State(s): State<Arc<AppState>>) -> Json<GraphView> {
    let session = s.session.read().await;
    let g = &session.graph;
    Json(GraphView {
        pitch: g.pitch,
        sampling_interval: g.sampling_interval,
        nodes: g.nodes().cloned().collect(),
        edges: g
            .edges()
            .map(|(a, b, provenance)| EdgeView { a, b, provenance })
            .collect(),
        fragments: g.fragments(),
    })
}

async fn get_proposals(State(s): State<Arc<AppState>>) -> Json<Vec<MergeProposal>> {
    let session = s.session.read().await;
    Json(session.pending().into_iter().cloned().collect())
}

async fn mutate(s: &AppState, action: Action) -> Result<ActionResult, ApiError> {
    Ok(s.session.write().await.apply(action)?)
}

async fn decide(s: &AppState, id: u64, action: Action) -> Result<Json<MergeProposal>, ApiError> {
    let mut session = s.session.write().await;
    session.apply(action)?;
    Ok(Json(session.proposal(id).cloned().expect("resolved proposal exists")))
}

async fn accept(State(s): State<Arc<AppState>>, Path(id): Path<u64>) -> Result<Json<MergeProposal>, ApiError> {
    decide(&s, id, Action::AcceptProposal { id }).await
}

async fn reject(State(s): State<Arc<AppState>>, Path(id): Path<u64>) -> Result<Json<MergeProposal>, ApiError> {
    decide(&s, id, Action::RejectProposal { id }).await
}

#[derive(Debug, Serialize, Deserialize)]
pub struct EdgeBody {
    pub a: NodeId,
    pub b: NodeId,
}

async fn add_edge(State(s): State<Arc<AppState>>, Json(e): Json<EdgeBody>) -> Result<Json<ActionResult>, ApiError> {
    Ok(Json(mutate(&s, Action::AddEdge { a: e.a, b: e.b }).await?))
}

async fn remove_edge(State(s): State<Arc<AppState>>, Json(e): Json<EdgeBody>) -> Result<Json<ActionResult>, ApiError> {
    Ok(Json(mutate(&s, Action::RemoveEdge { a: e.a, b: e.b }).await?))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct NodeBody {
    pub position: [f64; 3],
    #[serde(default)]
    pub fragment: Option<FragmentId>,
}

async fn add_node(State(s): State<Arc<AppState>>, Json(n): Json<NodeBody>) -> Result<Json<ActionResult>, ApiError> {
    Ok(Json(
        mutate(&s, Action::AddNode { position: n.position, fragment: n.fragment }).await?,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SlabQuery {
    pub cx: i64,
    pub cy: i64,
    pub cz: i64,
    pub size: usize,
    #[serde(default = "default_axis")]
    pub axis: Axis,
}

fn default_axis() -> Axis {
    Axis::Z
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Slab {
    pub width: usize,
    pub height: usize,
    pub axis: Axis,
    /// Global voxel coordinates of pixel (0, 0) along the two image axes.
    pub origin: [i64; 2],
    /// Base64 8-bit grayscale PNG.
    pub png: String,
}

/// Maximum-intensity projection of the `size³` cube centred at the query
/// point along `axis`, rescaled to 8 bits over the window's range. Voxels
/// outside the volume read as its minimum.
pub fn slab_mip(v: &Volume, q: &SlabQuery) -> Slab {
    let size = q.size.max(1);
    let half = (size / 2) as i64;
    let center = [q.cx, q.cy, q.cz];
    let lo: Vec<i64> = center.iter().map(|c| c - half).collect();
    let (u, w, d) = match q.axis {
        Axis::X => (1, 2, 0),
        Axis::Y => (0, 2, 1),
        Axis::Z => (0, 1, 2),
    };
    let dims = v.dims();
    let origin = v.origin();
    let floor = v.data().iter().copied().fold(f32::INFINITY, f32::min);
    let mut mip = vec![f32::NEG_INFINITY; size * size];
    for j in 0..size {
        for i in 0..size {
            let mut best = f32::NEG_INFINITY;
            for k in 0..size {
                let mut g = [0i64; 3];
                g[u] = lo[u] + i as i64;
                g[w] = lo[w] + j as i64;
                g[d] = lo[d] + k as i64;
                let local: Vec<i64> = (0..3).map(|a| g[a] - origin[a]).collect();
                let inside = (0..3).all(|a| local[a] >= 0 && local[a] < dims[a] as i64);
                let val = if inside {
                    v.get(local[0] as usize, local[1] as usize, local[2] as usize)
                } else {
                    floor
                };
                best = best.max(val);
            }
            mip[j * size + i] = best;
        }
    }
    let (mn, mx) = mip
        .iter()
        .fold((f32::INFINITY, f32::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    let range = mx - mn;
    let pixels: Vec<u8> = mip
        .iter()
        .map(|&x| if range > 0.0 { ((x - mn) / range * 255.0).round() as u8 } else { 0 })
        .collect();
    let img = image::GrayImage::from_raw(size as u32, size as u32, pixels).expect("buffer matches size");
    let mut bytes = Cursor::new(Vec::new());
    img.write_to(&mut bytes, image::ImageFormat::Png).expect("png encoding to memory");
    Slab {
        width: size,
        height: size,
        axis: q.axis,
        origin: [lo[u], lo[w]],
        png: base64::engine::general_purpose::STANDARD.encode(bytes.into_inner()),
    }
}

async fn get_slab(State(s): State<Arc<AppState>>, Query(q): Query<SlabQuery>) -> Result<Json<Slab>, ApiError> {
    let v = s
        .volume
        .as_ref()
        .ok_or_else(|| ApiError(StatusCode::NOT_FOUND, "no volume loaded".into()))?;
    if q.size == 0 || q.size > 1024 {
        return Err(ApiError(StatusCode::BAD_REQUEST, "size must be in 1..=1024".into()));
    }
    Ok(Json(slab_mip(v, &q)))
}
