//! Path-following agents launched from fragment terminals.
//!
//! An agent carries a rotation-minimizing frame. Each iteration asks a
//! [`Steering`] implementation for a curvature command `K = (k1, k2)`, picks a
//! step length from the curvature magnitude, advances along the second-order
//! expansion `x + Δs·t + Δs²/2·K`, transports its frame, and checks for
//! termination.

mod steering;

pub use steering::{
    centroid_command, steer_centroid, steer_oracle, CentroidSteering, CropPredictor,
    CropSteering, ExternalPredictor, OracleSteering, Steering, SteeringCommand,
};

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{fit_bspline, rmf, CurvatureVector, Frame, GeometryError};
use crate::graph::{End, FragmentId, GraphError, NodeId, SegmentGraph};
use crate::spatial::PointGrid;
use crate::volume::Volume;
use crate::Vec3;

#[derive(Debug, Error)]
pub enum FlightError {
    #[error("fragment {0} has fewer than 2 nodes")]
    SingleNode(FragmentId),
    #[error("invalid flight parameters: {0}")]
    BadParams(String),
    #[error("degenerate tangent after step")]
    DegenerateTangent,
    #[error("ground truth is empty")]
    EmptyTruth,
    #[error("agent is {0:.2} µm from the nearest ground-truth curve")]
    TooFar(f64),
    #[error("predictor failed: {0}")]
    Predictor(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Volume(#[from] crate::volume::VolumeError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FlightParams {
    /// Step factor.
    pub f: f64,
    /// Dataset scale, µm.
    pub d: f64,
    /// Physical crop size, µm.
    pub p: f64,
    /// Minimum step, µm.
    pub s_min: f64,
    /// Crop edge, voxels.
    pub crop_size: usize,
    /// Crop spacing, µm per voxel.
    pub crop_pitch: f64,
    pub max_steps: usize,
    /// Normalized intensity below which a position counts as background.
    pub bg_threshold: f64,
    /// Distance at which a graph node captures the agent, µm.
    pub merge_radius: f64,
    /// Source-fragment nodes within this arc distance of the launch terminal
    /// cannot capture the agent; `None` means `2·p`.
    pub self_exclusion: Option<f64>,
    /// Per-component bound on steering curvature, 1/µm.
    pub curvature_bound: f64,
    /// Terminal nodes used to fit the launch frame.
    pub init_nodes: usize,
}

impl Default for FlightParams {
    fn default() -> Self {
        Self {
            f: 1.0,
            d: 2.0,
            p: 16.0,
            s_min: 2.0,
            crop_size: 32,
            crop_pitch: 1.0,
            max_steps: 500,
            bg_threshold: 0.2,
            merge_radius: 3.0,
            self_exclusion: None,
            curvature_bound: 2.0,
            init_nodes: 5,
        }
    }
}

impl FlightParams {
    pub fn validate(&self) -> Result<(), FlightError> {
        let positive = [
            ("f", self.f),
            ("d", self.d),
            ("p", self.p),
            ("s_min", self.s_min),
            ("merge_radius", self.merge_radius),
            ("crop_pitch", self.crop_pitch),
            ("curvature_bound", self.curvature_bound),
        ];
        for (name, v) in positive {
            if !(v > 0.0) {
                return Err(FlightError::BadParams(format!("{name} must be positive")));
            }
        }
        if self.crop_size < 8 {
            return Err(FlightError::BadParams("crop_size must be at least 8".into()));
        }
        if self.init_nodes < 2 {
            return Err(FlightError::BadParams("init_nodes must be at least 2".into()));
        }
        Ok(())
    }

    pub fn self_exclusion(&self) -> f64 {
        self.self_exclusion.unwrap_or(2.0 * self.p)
    }

    /// Distance ahead at which steering laws aim to rejoin the centerline.
    pub fn lookahead(&self) -> f64 {
        self.p / 2.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentState {
    pub frame: Frame,
    /// µm.
    pub arc_traveled: f64,
    pub steps: usize,
    /// World positions in µm, starting at the launch point.
    pub trajectory: Vec<Vec3>,
    pub source: Option<(FragmentId, End)>,
    /// Nodes that cannot capture this agent.
    pub excluded: BTreeSet<NodeId>,
}

impl AgentState {
    pub fn position(&self) -> Vec3 {
        self.frame.position
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum TerminationStatus {
    Continue,
    Merged { fragment: FragmentId, node: NodeId },
    LostBackground,
    MaxSteps,
    OutOfBounds,
}

/// Launch state from terminal-ward ordered world points: the last point is
/// the terminal, the tangent points away from the others.
pub fn init_from_points(points: &[Vec3], params: &FlightParams) -> Result<AgentState, FlightError> {
    let start = points.len().saturating_sub(params.init_nodes.max(2));
    let window = &points[start..];
    let curve = fit_bspline(window)?;
    let frames = rmf(&curve, 2 * window.len().max(4))?;
    let mut frame = *frames.last().unwrap();
    frame.position = *window.last().unwrap();
    Ok(AgentState {
        frame,
        arc_traveled: 0.0,
        steps: 0,
        trajectory: vec![frame.position],
        source: None,
        excluded: BTreeSet::new(),
    })
}

/// Launch state at `points[0]` heading into the path, fitted from the first
/// `init_nodes` points.
pub fn init_inward(points: &[Vec3], params: &FlightParams) -> Result<AgentState, FlightError> {
    let window = &points[..points.len().min(params.init_nodes.max(2))];
    let curve = fit_bspline(window)?;
    let mut frame = rmf(&curve, 2 * window.len().max(4))?[0];
    frame.position = window[0];
    Ok(AgentState {
        frame,
        arc_traveled: 0.0,
        steps: 0,
        trajectory: vec![frame.position],
        source: None,
        excluded: BTreeSet::new(),
    })
}

/// Agent at one terminal of a fragment, oriented outward.
pub fn init_agent(
    graph: &SegmentGraph,
    fragment: FragmentId,
    end: End,
    params: &FlightParams,
) -> Result<AgentState, FlightError> {
    let mut path = graph.fragment_path(fragment)?;
    if path.len() < 2 {
        return Err(FlightError::SingleNode(fragment));
    }
    if end == End::Start {
        path.reverse();
    }
    let pts: Vec<Vec3> = path.iter().map(|&id| graph.world(id).unwrap()).collect();
    let mut state = init_from_points(&pts, params)?;
    state.source = Some((fragment, end));

    // Exclude source nodes within the self-exclusion arc of the terminal.
    let limit = params.self_exclusion();
    let mut arc = 0.0;
    for k in (0..path.len()).rev() {
        if k + 1 < path.len() {
            arc += (pts[k + 1] - pts[k]).norm();
        }
        if arc > limit {
            break;
        }
        state.excluded.insert(path[k]);
    }
    Ok(state)
}

/// Step length `max(f·d / (1 + (p/2)·κ), s_min)`.
pub fn adaptive_step(kappa: f64, params: &FlightParams) -> f64 {
    (params.f * params.d / (1.0 + params.p / 2.0 * kappa)).max(params.s_min)
}

/// Advances the agent by `ds` under curvature `k` and transports the frame.
pub fn step(
    state: &AgentState,
    k: CurvatureVector,
    ds: f64,
) -> Result<AgentState, FlightError> {
    let f = &state.frame;
    let kw = k.to_world(f);
    let position = f.position + f.t * ds + kw * (ds * ds / 2.0);
    let tangent = f.t + kw * ds;
    let norm = tangent.norm();
    if !(norm >= 1e-9) {
        return Err(FlightError::DegenerateTangent);
    }
    let frame = f.transport(position, tangent / norm)?;
    let mut next = state.clone();
    next.frame = frame;
    next.arc_traveled += ds;
    next.steps += 1;
    next.trajectory.push(position);
    Ok(next)
}

/// Read-only lookup of graph nodes by world position.
#[derive(Debug, Clone)]
pub struct GraphIndex {
    grid: PointGrid<NodeId>,
    fragment: HashMap<NodeId, FragmentId>,
}

impl GraphIndex {
    pub fn new(graph: &SegmentGraph) -> Self {
        let mut grid = PointGrid::new(4.0);
        let mut fragment = HashMap::new();
        for n in graph.nodes() {
            grid.insert(n.position * graph.pitch, n.id);
            fragment.insert(n.id, n.fragment);
        }
        Self { grid, fragment }
    }

    /// Index over bare points labelled `(fragment, node)`.
    pub fn from_points(points: &[(Vec3, FragmentId, NodeId)]) -> Self {
        let mut grid = PointGrid::new(4.0);
        let mut fragment = HashMap::new();
        for &(p, f, n) in points {
            grid.insert(p, n);
            fragment.insert(n, f);
        }
        Self { grid, fragment }
    }

    /// Nearest node within `r` not in `excluded`.
    pub fn capture(&self, p: &Vec3, r: f64, excluded: &BTreeSet<NodeId>) -> Option<(FragmentId, NodeId)> {
        self.grid
            .within(p, r)
            .into_iter()
            .find(|(_, id)| !excluded.contains(id))
            .map(|(_, id)| (self.fragment[&id], id))
    }
}

/// Trailing positions that must all be dark to end a flight.
const BACKGROUND_WINDOW: usize = 3;

/// Precedence: out of bounds, merged, lost in background, step limit.
pub fn check_termination(
    state: &AgentState,
    volume: &Volume,
    index: &GraphIndex,
    params: &FlightParams,
) -> TerminationStatus {
    let p = state.position();
    if !volume.contains_world(&p) {
        return TerminationStatus::OutOfBounds;
    }
    if let Some((fragment, node)) = index.capture(&p, params.merge_radius, &state.excluded) {
        return TerminationStatus::Merged { fragment, node };
    }
    let n = state.trajectory.len();
    if n >= BACKGROUND_WINDOW
        && state.trajectory[n - BACKGROUND_WINDOW..]
            .iter()
            .all(|q| volume.sample_world(q) < params.bg_threshold)
    {
        return TerminationStatus::LostBackground;
    }
    if state.steps >= params.max_steps {
        return TerminationStatus::MaxSteps;
    }
    TerminationStatus::Continue
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlightOutcome {
    pub state: AgentState,
    pub status: TerminationStatus,
}

/// Steer, size the step, move, check; until a terminal status.
pub fn fly(
    mut state: AgentState,
    steering: &dyn Steering,
    volume: &Volume,
    index: &GraphIndex,
    params: &FlightParams,
) -> Result<FlightOutcome, FlightError> {
    loop {
        let cmd = steering.steer(&state, volume)?;
        let k = cmd.k.clamped(params.curvature_bound);
        let ds = adaptive_step(k.magnitude(), params);
        state = step(&state, k, ds)?;
        let mut status = check_termination(&state, volume, index, params);
        // Ground-truth steering does not depend on image signal, so dark
        // stretches do not end its flight.
        if status == TerminationStatus::LostBackground && steering.uses_ground_truth() {
            status = if state.steps >= params.max_steps {
                TerminationStatus::MaxSteps
            } else {
                TerminationStatus::Continue
            };
        }
        if status != TerminationStatus::Continue {
            return Ok(FlightOutcome { state, status });
        }
    }
}

/// `½·Σ (k_i − k̂_i)²`.
pub fn curvature_mse(pred: &CurvatureVector, truth: &CurvatureVector) -> f64 {
    let a = pred.k1 - truth.k1;
    let b = pred.k2 - truth.k2;
    (a * a + b * b) / 2.0
}
