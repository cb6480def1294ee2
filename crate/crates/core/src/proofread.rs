//! Proofreading session: graph edits and proposal decisions, each recorded
//! in an append-only audit log that can be replayed over the original graph.

use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::connect::{apply_trajectory, MergeProposal, ProposalStatus};
use crate::graph::{FragmentId, GraphError, NodeFlags, NodeId, Provenance, SegmentGraph};
use crate::io::{read_proposals, write_proposals, IoError};
use crate::Vec3;

pub const PROPOSALS_FILE: &str = "proposals.tsv";
pub const AUDIT_FILE: &str = "audit.jsonl";

#[derive(Debug, Error)]
pub enum ProofreadError {
    #[error("unknown proposal {0}")]
    UnknownProposal(u64),
    #[error("proposal {0} is already {1}")]
    AlreadyResolved(u64, &'static str),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Io(#[from] IoError),
    #[error("audit log line {line}: {msg}")]
    Audit { line: usize, msg: String },
}

impl From<std::io::Error> for ProofreadError {
    fn from(e: std::io::Error) -> Self {
        ProofreadError::Io(IoError::Io(e))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum Action {
    AcceptProposal { id: u64 },
    RejectProposal { id: u64 },
    AddEdge { a: NodeId, b: NodeId },
    RemoveEdge { a: NodeId, b: NodeId },
    /// Position in global voxel coordinates; without a fragment the node
    /// starts a new one.
    AddNode {
        position: [f64; 3],
        #[serde(default)]
        fragment: Option<FragmentId>,
    },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionResult {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub node: Option<NodeId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditEntry {
    pub seq: u64,
    /// Milliseconds since the Unix epoch.
    pub timestamp_ms: u64,
    #[serde(flatten)]
    pub action: Action,
}

#[derive(Debug)]
pub struct Session {
    pub graph: SegmentGraph,
    pub proposals: Vec<MergeProposal>,
    dir: Option<PathBuf>,
    seq: u64,
}

impl Session {
    /// In-memory session; nothing is persisted.
    pub fn new(graph: SegmentGraph, proposals: Vec<MergeProposal>) -> Self {
        Self {
            graph,
            proposals,
            dir: None,
            seq: 0,
        }
    }

    /// Session over a graph directory. Proposals come from `proposals.tsv`
    /// when present; every applied action is appended to `audit.jsonl` and
    /// the graph and proposals are rewritten.
    pub fn open(dir: &Path) -> Result<Self, ProofreadError> {
        let graph = SegmentGraph::load(dir)?;
        let ppath = dir.join(PROPOSALS_FILE);
        let proposals = if ppath.exists() {
            read_proposals(&ppath)?
        } else {
            Vec::new()
        };
        let seq = read_audit(&dir.join(AUDIT_FILE))?.last().map_or(0, |e| e.seq);
        Ok(Self {
            graph,
            proposals,
            dir: Some(dir.to_path_buf()),
            seq,
        })
    }

    pub fn proposal(&self, id: u64) -> Option<&MergeProposal> {
        self.proposals.iter().find(|p| p.id == id)
    }

    /// Undecided proposals, most confident first, then by id.
    pub fn pending(&self) -> Vec<&MergeProposal> {
        let mut v: Vec<_> = self
            .proposals
            .iter()
            .filter(|p| p.status == ProposalStatus::Proposed)
            .collect();
        v.sort_by_key(|p| (p.confidence, p.id));
        v
    }

    pub fn apply(&mut self, action: Action) -> Result<ActionResult, ProofreadError> {
        let result = apply_action(&mut self.graph, &mut self.proposals, &action)?;
        if let Some(dir) = &self.dir {
            self.seq += 1;
            let entry = AuditEntry {
                seq: self.seq,
                timestamp_ms: SystemTime::now()
                    .duration_since(UNIX_EPOCH)
                    .map_or(0, |d| d.as_millis() as u64),
                action,
            };
            let mut f = OpenOptions::new()
                .create(true)
                .append(true)
                .open(dir.join(AUDIT_FILE))?;
            writeln!(f, "{}", serde_json::to_string(&entry).map_err(GraphError::from)?)?;
            f.sync_all()?;
            self.graph.save(dir)?;
            write_proposals(&dir.join(PROPOSALS_FILE), &self.proposals)?;
        }
        Ok(result)
    }
}

fn resolve(
    proposals: &mut [MergeProposal],
    id: u64,
) -> Result<&mut MergeProposal, ProofreadError> {
    let p = proposals
        .iter_mut()
        .find(|p| p.id == id)
        .ok_or(ProofreadError::UnknownProposal(id))?;
    if p.status != ProposalStatus::Proposed {
        return Err(ProofreadError::AlreadyResolved(id, p.status.as_str()));
    }
    Ok(p)
}

/// Applies one action. Validation happens before any mutation, so a failed
/// action leaves both graph and proposals untouched.
pub fn apply_action(
    graph: &mut SegmentGraph,
    proposals: &mut [MergeProposal],
    action: &Action,
) -> Result<ActionResult, ProofreadError> {
    let mut result = ActionResult::default();
    match *action {
        Action::AcceptProposal { id } => {
            let p = resolve(proposals, id)?;
            apply_trajectory(graph, p)?;
            p.status = ProposalStatus::Accepted;
        }
        Action::RejectProposal { id } => {
            resolve(proposals, id)?.status = ProposalStatus::Rejected;
        }
        Action::AddEdge { a, b } => {
            graph.add_edge(a, b, Provenance::Manual)?;
        }
        Action::RemoveEdge { a, b } => {
            graph.remove_edge(a, b)?;
        }
        Action::AddNode { position, fragment } => {
            let f = fragment.unwrap_or_else(|| graph.new_fragment());
            let [x, y, z] = position;
            result.node = Some(graph.add_node(Vec3::new(x, y, z), f, NodeFlags::default()));
        }
    }
    Ok(result)
}

pub fn read_audit(path: &Path) -> Result<Vec<AuditEntry>, ProofreadError> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    fs::read_to_string(path)?
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| ProofreadError::Audit {
                line: i + 1,
                msg: e.to_string(),
            })
        })
        .collect()
}

/// Re-applies logged actions in order to a copy of the original state.
pub fn replay(
    graph: &SegmentGraph,
    proposals: &[MergeProposal],
    entries: &[AuditEntry],
) -> Result<(SegmentGraph, Vec<MergeProposal>), ProofreadError> {
    let mut g = graph.clone();
    let mut p = proposals.to_vec();
    for e in entries {
        apply_action(&mut g, &mut p, &e.action)?;
    }
    Ok((g, p))
}
