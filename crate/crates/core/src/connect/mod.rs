//! Connection stage: one agent per fragment endpoint, serial merge
//! arbitration, and trajectory insertion.

mod benchmark;

pub use benchmark::{
    categorize, path_points, run_benchmark, split_at_junctions, truth_graph, BenchmarkReport,
    CategoryRate, LengthCategory, PathResult,
};

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::flight::{fly, init_agent, FlightOutcome, FlightParams, GraphIndex, Steering, TerminationStatus};
use crate::graph::{End, FragmentId, GraphError, NodeFlags, NodeId, Provenance, SegmentGraph};
use crate::volume::Volume;
use crate::Vec3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Confidence {
    OracleMerged,
    CentroidMerged,
    LowConfidence,
}

impl Confidence {
    pub fn as_str(self) -> &'static str {
        match self {
            Confidence::OracleMerged => "oracle_merged",
            Confidence::CentroidMerged => "centroid_merged",
            Confidence::LowConfidence => "low_confidence",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "oracle_merged" => Some(Confidence::OracleMerged),
            "centroid_merged" => Some(Confidence::CentroidMerged),
            "low_confidence" => Some(Confidence::LowConfidence),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProposalStatus {
    Proposed,
    Accepted,
    Rejected,
}

impl ProposalStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            ProposalStatus::Proposed => "proposed",
            ProposalStatus::Accepted => "accepted",
            ProposalStatus::Rejected => "rejected",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "proposed" => Some(ProposalStatus::Proposed),
            "accepted" => Some(ProposalStatus::Accepted),
            "rejected" => Some(ProposalStatus::Rejected),
            _ => None,
        }
    }
}

/// A candidate connection found by one agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MergeProposal {
    pub id: u64,
    pub source_fragment: FragmentId,
    pub source_end: End,
    pub source_node: NodeId,
    /// Captured `(fragment, node)`; absent when the agent never merged.
    pub target: Option<(FragmentId, NodeId)>,
    /// World positions in µm, from the source terminal.
    pub trajectory: Vec<Vec3>,
    pub confidence: Confidence,
    pub status: ProposalStatus,
}

/// Terminals of every fragment with at least 2 nodes that have no other
/// connection, sorted by `(fragment, end)`.
pub fn find_endpoints(graph: &SegmentGraph) -> Vec<(FragmentId, End)> {
    let mut out = Vec::new();
    for (fid, members) in graph.fragments() {
        if members.len() < 2 {
            continue;
        }
        let Ok(path) = graph.fragment_path(fid) else {
            continue;
        };
        for (end, node) in [(End::Start, path[0]), (End::End, *path.last().unwrap())] {
            if graph.degree(node) == 1 {
                out.push((fid, end));
            }
        }
    }
    out
}

/// Minimal union-find over fragment ids.
#[derive(Default)]
struct FragmentSets {
    parent: BTreeMap<FragmentId, FragmentId>,
}

impl FragmentSets {
    fn find(&mut self, f: FragmentId) -> FragmentId {
        let p = *self.parent.entry(f).or_insert(f);
        if p == f {
            return f;
        }
        let root = self.find(p);
        self.parent.insert(f, root);
        root
    }

    fn union(&mut self, a: FragmentId, b: FragmentId) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent.insert(ra.max(rb), ra.min(rb));
        }
    }
}

/// Positions every `spacing` µm of arc along `trajectory`, excluding its
/// first point. With `keep_last` the final point is appended; otherwise points
/// closer than `spacing/2` to it are dropped so a link to the target follows.
pub fn resample_trajectory(trajectory: &[Vec3], spacing: f64, keep_last: bool) -> Vec<Vec3> {
    let mut out = Vec::new();
    if trajectory.len() < 2 || !(spacing > 0.0) {
        return out;
    }
    let total: f64 = trajectory.windows(2).map(|w| (w[1] - w[0]).norm()).sum();
    let mut next = spacing;
    let mut walked = 0.0;
    for w in trajectory.windows(2) {
        let seg = (w[1] - w[0]).norm();
        while seg > 0.0 && next <= walked + seg && next < total - spacing / 2.0 {
            let u = (next - walked) / seg;
            out.push(w[0] + (w[1] - w[0]) * u);
            next += spacing;
        }
        walked += seg;
    }
    if keep_last {
        out.push(*trajectory.last().unwrap());
    }
    out
}

/// Inserts a proposal's trajectory as a new fragment linked to its source
/// terminal and, when present, its target node. Returns the new fragment id.
pub fn apply_trajectory(graph: &mut SegmentGraph, proposal: &MergeProposal) -> Result<FragmentId, GraphError> {
    if graph.node(proposal.source_node).is_none() {
        return Err(GraphError::UnknownNode(proposal.source_node));
    }
    if let Some((_, t)) = proposal.target {
        if graph.node(t).is_none() {
            return Err(GraphError::UnknownNode(t));
        }
    }
    let spacing = graph.sampling_interval.max(1) as f64 * graph.pitch;
    let points = resample_trajectory(&proposal.trajectory, spacing, proposal.target.is_none());
    let fid = graph.new_fragment();
    let mut prev = proposal.source_node;
    for p in points {
        let id = graph.add_node(p / graph.pitch, fid, NodeFlags::default());
        graph.add_edge(prev, id, Provenance::Trajectory)?;
        prev = id;
    }
    if let Some((_, t)) = proposal.target {
        if t != prev {
            graph.add_edge(prev, t, Provenance::Trajectory)?;
        }
    }
    Ok(fid)
}

/// Flies one agent per endpoint in parallel against the input graph, then
/// applies merges serially in `(fragment, end)` order. A merge between
/// fragments already joined (directly or through earlier merges) becomes a
/// low-confidence proposal; the mirror flight of an applied merge is dropped.
pub fn connect_all(
    graph: &SegmentGraph,
    volume: &Volume,
    steering: &dyn Steering,
    params: &FlightParams,
) -> Result<(SegmentGraph, Vec<MergeProposal>), GraphError> {
    if (graph.pitch - volume.pitch()).abs() > 1e-9 * graph.pitch.max(1.0) {
        return Err(GraphError::PitchMismatch(graph.pitch, volume.pitch()));
    }
    let endpoints = find_endpoints(graph);
    let index = GraphIndex::new(graph);
    let flights: Vec<Option<(NodeId, FlightOutcome)>> = endpoints
        .par_iter()
        .map(|&(fid, end)| {
            let run = || -> Result<_, crate::flight::FlightError> {
                let node = graph.terminal(fid, end)?;
                let state = init_agent(graph, fid, end, params)?;
                Ok((node, fly(state, steering, volume, &index, params)?))
            };
            match run() {
                Ok(r) => Some(r),
                Err(e) => {
                    log::warn!("flight from fragment {fid} {end:?} failed: {e}");
                    None
                }
            }
        })
        .collect();

    let merged = if steering.uses_ground_truth() {
        Confidence::OracleMerged
    } else {
        Confidence::CentroidMerged
    };
    let mut out = graph.clone();
    let mut sets = FragmentSets::default();
    for (a, b, _) in graph.edges() {
        let (fa, fb) = (graph.node(a).unwrap().fragment, graph.node(b).unwrap().fragment);
        sets.union(fa, fb);
    }
    let mut applied: BTreeSet<(FragmentId, FragmentId)> = BTreeSet::new();
    let mut proposals = Vec::new();

    for (&(fid, end), flight) in endpoints.iter().zip(flights) {
        let Some((node, outcome)) = flight else {
            continue;
        };
        let mut proposal = MergeProposal {
            id: proposals.len() as u64 + 1,
            source_fragment: fid,
            source_end: end,
            source_node: node,
            target: None,
            trajectory: outcome.state.trajectory,
            confidence: Confidence::LowConfidence,
            status: ProposalStatus::Proposed,
        };
        match outcome.status {
            TerminationStatus::Merged { fragment, node: target } => {
                if applied.contains(&(fragment, fid)) {
                    continue;
                }
                proposal.target = Some((fragment, target));
                if sets.find(fragment) != sets.find(fid) {
                    let tf = apply_trajectory(&mut out, &proposal)?;
                    sets.union(fid, fragment);
                    sets.union(fid, tf);
                    applied.insert((fid, fragment));
                    proposal.confidence = merged;
                    proposal.status = ProposalStatus::Accepted;
                }
            }
            TerminationStatus::LostBackground | TerminationStatus::MaxSteps
                if outcome.state.steps > 2 => {}
            _ => continue,
        }
        proposals.push(proposal);
    }
    Ok((out, proposals))
}
