//! Spatial graph of skeleton nodes. Positions are global voxel coordinates;
//! a fragment is the set of nodes sharing a `fragment` id.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::Vec3;

pub type NodeId = u64;
pub type FragmentId = u64;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
    #[error("unknown fragment {0}")]
    UnknownFragment(FragmentId),
    #[error("self-loop on node {0}")]
    SelfLoop(NodeId),
    #[error("no edge between {0} and {1}")]
    NoEdge(NodeId, NodeId),
    #[error("fragment {0} is not a simple path")]
    NotAPath(FragmentId),
    #[error("fragment {0} has fewer than 2 nodes")]
    TooShort(FragmentId),
    #[error("mixed pitches {0} and {1}")]
    PitchMismatch(f64, f64),
    #[error("malformed {file} line {line}: {msg}")]
    Parse {
        file: &'static str,
        line: usize,
        msg: String,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeFlags {
    pub endpoint: bool,
    pub junction: bool,
    pub soma: bool,
}

impl NodeFlags {
    pub fn encode(&self) -> String {
        let mut parts = Vec::new();
        if self.endpoint {
            parts.push("endpoint");
        }
        if self.junction {
            parts.push("junction");
        }
        if self.soma {
            parts.push("soma");
        }
        if parts.is_empty() {
            "-".into()
        } else {
            parts.join(",")
        }
    }

    pub fn decode(s: &str) -> Result<Self, String> {
        let mut f = NodeFlags::default();
        if s == "-" {
            return Ok(f);
        }
        for part in s.split(',') {
            match part {
                "endpoint" => f.endpoint = true,
                "junction" => f.junction = true,
                "soma" => f.soma = true,
                other => return Err(format!("unknown flag {other:?}")),
            }
        }
        Ok(f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub id: NodeId,
    /// Global voxel coordinates.
    pub position: Vec3,
    pub fragment: FragmentId,
    pub flags: NodeFlags,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Skeleton,
    Trajectory,
    Manual,
}

impl Provenance {
    pub fn as_str(&self) -> &'static str {
        match self {
            Provenance::Skeleton => "skeleton",
            Provenance::Trajectory => "trajectory",
            Provenance::Manual => "manual",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "skeleton" => Some(Provenance::Skeleton),
            "trajectory" => Some(Provenance::Trajectory),
            "manual" => Some(Provenance::Manual),
            _ => None,
        }
    }
}

/// Which terminal of a fragment. `Start` is the terminal with the smaller
/// node id.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum End {
    Start,
    End,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Meta {
    pitch: f64,
    sampling_interval: usize,
    next_node_id: NodeId,
    next_fragment_id: FragmentId,
    source_hash: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SegmentGraph {
    nodes: BTreeMap<NodeId, Node>,
    edges: BTreeMap<(NodeId, NodeId), Provenance>,
    adjacency: BTreeMap<NodeId, BTreeSet<NodeId>>,
    /// µm per voxel.
    pub pitch: f64,
    /// Skeleton resampling interval in voxels.
    pub sampling_interval: usize,
    pub source_hash: Option<String>,
    next_node_id: NodeId,
    next_fragment_id: FragmentId,
}

fn key(a: NodeId, b: NodeId) -> (NodeId, NodeId) {
    (a.min(b), a.max(b))
}

impl SegmentGraph {
    pub fn new(pitch: f64, sampling_interval: usize) -> Self {
        Self {
            nodes: BTreeMap::new(),
            edges: BTreeMap::new(),
            adjacency: BTreeMap::new(),
            pitch,
            sampling_interval,
            source_hash: None,
            next_node_id: 1,
            next_fragment_id: 1,
        }
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn next_node_id(&self) -> NodeId {
        self.next_node_id
    }

    pub fn next_fragment_id(&self) -> FragmentId {
        self.next_fragment_id
    }

    /// Reserves a fresh fragment id.
    pub fn new_fragment(&mut self) -> FragmentId {
        let id = self.next_fragment_id;
        self.next_fragment_id += 1;
        id
    }

    pub fn add_node(&mut self, position: Vec3, fragment: FragmentId, flags: NodeFlags) -> NodeId {
        let id = self.next_node_id;
        self.next_node_id += 1;
        if fragment >= self.next_fragment_id {
            self.next_fragment_id = fragment + 1;
        }
        self.nodes.insert(
            id,
            Node {
                id,
                position,
                fragment,
                flags,
            },
        );
        self.adjacency.insert(id, BTreeSet::new());
        id
    }

    /// Inserts an undirected edge. Returns `false` if it already existed.
    pub fn add_edge(&mut self, a: NodeId, b: NodeId, prov: Provenance) -> Result<bool, GraphError> {
        if a == b {
            return Err(GraphError::SelfLoop(a));
        }
        for n in [a, b] {
            if !self.nodes.contains_key(&n) {
                return Err(GraphError::UnknownNode(n));
            }
        }
        if self.edges.contains_key(&key(a, b)) {
            return Ok(false);
        }
        self.edges.insert(key(a, b), prov);
        self.adjacency.get_mut(&a).unwrap().insert(b);
        self.adjacency.get_mut(&b).unwrap().insert(a);
        Ok(true)
    }

    pub fn remove_edge(&mut self, a: NodeId, b: NodeId) -> Result<Provenance, GraphError> {
        let prov = self.edges.remove(&key(a, b)).ok_or(GraphError::NoEdge(a, b))?;
        self.adjacency.get_mut(&a).unwrap().remove(&b);
        self.adjacency.get_mut(&b).unwrap().remove(&a);
        Ok(prov)
    }

    pub fn node(&self, id: NodeId) -> Option<&Node> {
        self.nodes.get(&id)
    }

    pub fn set_flags(&mut self, id: NodeId, flags: NodeFlags) -> Result<(), GraphError> {
        self.nodes
            .get_mut(&id)
            .ok_or(GraphError::UnknownNode(id))?
            .flags = flags;
        Ok(())
    }

    pub fn nodes(&self) -> impl Iterator<Item = &Node> {
        self.nodes.values()
    }

    pub fn edges(&self) -> impl Iterator<Item = (NodeId, NodeId, Provenance)> + '_ {
        self.edges.iter().map(|(&(a, b), &p)| (a, b, p))
    }

    pub fn has_edge(&self, a: NodeId, b: NodeId) -> bool {
        self.edges.contains_key(&key(a, b))
    }

    pub fn neighbors(&self, id: NodeId) -> impl Iterator<Item = NodeId> + '_ {
        self.adjacency.get(&id).into_iter().flatten().copied()
    }

    pub fn degree(&self, id: NodeId) -> usize {
        self.adjacency.get(&id).map_or(0, |s| s.len())
    }

    /// Position in µm.
    pub fn world(&self, id: NodeId) -> Option<Vec3> {
        self.nodes.get(&id).map(|n| n.position * self.pitch)
    }

    /// Fragment ids with their member node ids (ascending).
    pub fn fragments(&self) -> BTreeMap<FragmentId, Vec<NodeId>> {
        let mut out: BTreeMap<FragmentId, Vec<NodeId>> = BTreeMap::new();
        for n in self.nodes.values() {
            out.entry(n.fragment).or_default().push(n.id);
        }
        out
    }

    fn fragment_members(&self, fid: FragmentId) -> Vec<NodeId> {
        self.nodes
            .values()
            .filter(|n| n.fragment == fid)
            .map(|n| n.id)
            .collect()
    }

    /// Nodes of a fragment in path order from `End::Start` to `End::End`,
    /// following edges between members only.
    pub fn fragment_path(&self, fid: FragmentId) -> Result<Vec<NodeId>, GraphError> {
        let members = self.fragment_members(fid);
        if members.is_empty() {
            return Err(GraphError::UnknownFragment(fid));
        }
        let inner = |id: NodeId| -> Vec<NodeId> {
            self.neighbors(id)
                .filter(|m| self.nodes[m].fragment == fid)
                .collect()
        };
        if members.len() == 1 {
            return Ok(members);
        }
        let mut start = None;
        for &m in &members {
            let d = inner(m).len();
            if d > 2 || d == 0 {
                return Err(GraphError::NotAPath(fid));
            }
            if d == 1 && start.is_none() {
                start = Some(m);
            }
        }
        let start = start.ok_or(GraphError::NotAPath(fid))?;
        let mut path = vec![start];
        let mut prev = None;
        let mut cur = start;
        loop {
            let next = inner(cur).into_iter().find(|&n| Some(n) != prev);
            match next {
                Some(n) => {
                    prev = Some(cur);
                    cur = n;
                    path.push(n);
                }
                None => break,
            }
        }
        if path.len() != members.len() {
            return Err(GraphError::NotAPath(fid));
        }
        Ok(path)
    }

    pub fn terminal(&self, fid: FragmentId, end: End) -> Result<NodeId, GraphError> {
        let path = self.fragment_path(fid)?;
        Ok(match end {
            End::Start => path[0],
            End::End => *path.last().unwrap(),
        })
    }

    /// Connected components over all edges, each as ascending node ids,
    /// ordered by their smallest id.
    pub fn connected_components(&self) -> Vec<Vec<NodeId>> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for &start in self.nodes.keys() {
            if !seen.insert(start) {
                continue;
            }
            let mut comp = vec![start];
            let mut stack = vec![start];
            while let Some(n) = stack.pop() {
                for m in self.neighbors(n) {
                    if seen.insert(m) {
                        comp.push(m);
                        stack.push(m);
                    }
                }
            }
            comp.sort_unstable();
            out.push(comp);
        }
        out
    }

    pub fn save(&self, dir: &Path) -> Result<(), GraphError> {
        fs::create_dir_all(dir)?;
        let mut nodes = String::from("node_id\tx\ty\tz\tfragment_id\tflags\n");
        for n in self.nodes.values() {
            let p = n.position;
            writeln!(
                nodes,
                "{}\t{}\t{}\t{}\t{}\t{}",
                n.id,
                p.x,
                p.y,
                p.z,
                n.fragment,
                n.flags.encode()
            )
            .unwrap();
        }
        let mut edges = String::from("node_a\tnode_b\tprovenance\n");
        for (&(a, b), p) in &self.edges {
            writeln!(edges, "{a}\t{b}\t{}", p.as_str()).unwrap();
        }
        let meta = Meta {
            pitch: self.pitch,
            sampling_interval: self.sampling_interval,
            next_node_id: self.next_node_id,
            next_fragment_id: self.next_fragment_id,
            source_hash: self.source_hash.clone(),
        };
        crate::io::replace_file(&dir.join("nodes.tsv"), nodes.as_bytes())?;
        crate::io::replace_file(&dir.join("edges.tsv"), edges.as_bytes())?;
        crate::io::replace_file(
            &dir.join("meta.json"),
            serde_json::to_string_pretty(&meta)?.as_bytes(),
        )?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self, GraphError> {
        let meta: Meta = serde_json::from_str(&fs::read_to_string(dir.join("meta.json"))?)?;
        let mut g = SegmentGraph::new(meta.pitch, meta.sampling_interval);
        g.source_hash = meta.source_hash;

        let text = fs::read_to_string(dir.join("nodes.tsv"))?;
        for (i, line) in text.lines().enumerate().skip(1) {
            let err = |msg: String| GraphError::Parse {
                file: "nodes.tsv",
                line: i + 1,
                msg,
            };
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 6 {
                return Err(err(format!("expected 6 columns, got {}", cols.len())));
            }
            let num = |s: &str| s.parse::<f64>().map_err(|e| err(e.to_string()));
            let id: NodeId = cols[0].parse().map_err(|e: std::num::ParseIntError| err(e.to_string()))?;
            let fragment: FragmentId =
                cols[4].parse().map_err(|e: std::num::ParseIntError| err(e.to_string()))?;
            let node = Node {
                id,
                position: Vec3::new(num(cols[1])?, num(cols[2])?, num(cols[3])?),
                fragment,
                flags: NodeFlags::decode(cols[5]).map_err(err)?,
            };
            g.nodes.insert(id, node);
            g.adjacency.insert(id, BTreeSet::new());
        }

        let text = fs::read_to_string(dir.join("edges.tsv"))?;
        for (i, line) in text.lines().enumerate().skip(1) {
            let err = |msg: String| GraphError::Parse {
                file: "edges.tsv",
                line: i + 1,
                msg,
            };
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 3 {
                return Err(err(format!("expected 3 columns, got {}", cols.len())));
            }
            let a: NodeId = cols[0].parse().map_err(|e: std::num::ParseIntError| err(e.to_string()))?;
            let b: NodeId = cols[1].parse().map_err(|e: std::num::ParseIntError| err(e.to_string()))?;
            let p = Provenance::parse(cols[2]).ok_or_else(|| err(format!("provenance {:?}", cols[2])))?;
            g.add_edge(a, b, p)?;
        }
        g.next_node_id = meta.next_node_id;
        g.next_fragment_id = meta.next_fragment_id;
        Ok(g)
    }
}
