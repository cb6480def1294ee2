use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt::Write as _;

use super::IoError;
use crate::graph::{NodeId, SegmentGraph};

/// One line of an SWC file. Coordinates and radius in µm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SwcRecord {
    pub id: i64,
    pub kind: i64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub radius: f64,
    pub parent: i64,
}

/// Which part of the graph to export.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SwcRoot {
    /// The component containing this node, rooted there.
    Node(NodeId),
    /// Every component, rooted at a soma node if it has one, else at its
    /// smallest id.
    All,
}

const TYPE_UNDEFINED: i64 = 0;
const TYPE_SOMA: i64 = 1;
const DEFAULT_RADIUS: f64 = 1.0;

/// Breadth-first SWC enumeration; fails on the first edge closing a cycle.
pub fn export_swc(graph: &SegmentGraph, root: SwcRoot) -> Result<String, IoError> {
    let roots: Vec<NodeId> = match root {
        SwcRoot::Node(id) => {
            if graph.node(id).is_none() {
                return Err(IoError::UnknownNode(id));
            }
            vec![id]
        }
        SwcRoot::All => graph
            .connected_components()
            .into_iter()
            .map(|comp| {
                comp.iter()
                    .copied()
                    .find(|&id| graph.node(id).unwrap().flags.soma)
                    .unwrap_or(comp[0])
            })
            .collect(),
    };

    let mut swc_id: BTreeMap<NodeId, i64> = BTreeMap::new();
    let mut out = String::from("# id type x y z radius parent\n");
    for r in roots {
        let mut queue = VecDeque::from([(r, None::<NodeId>)]);
        let mut seen_edges: BTreeSet<(NodeId, NodeId)> = BTreeSet::new();
        swc_id.insert(r, swc_id.len() as i64 + 1);
        while let Some((n, parent)) = queue.pop_front() {
            let node = graph.node(n).unwrap();
            let p = node.position * graph.pitch;
            let kind = if node.flags.soma { TYPE_SOMA } else { TYPE_UNDEFINED };
            let pid = parent.map_or(-1, |q| swc_id[&q]);
            writeln!(out, "{} {kind} {} {} {} {DEFAULT_RADIUS} {pid}", swc_id[&n], p.x, p.y, p.z).unwrap();
            for m in graph.neighbors(n) {
                let e = (n.min(m), n.max(m));
                if !seen_edges.insert(e) {
                    continue;
                }
                if swc_id.contains_key(&m) {
                    return Err(IoError::Cycle(e.0, e.1));
                }
                swc_id.insert(m, swc_id.len() as i64 + 1);
                queue.push_back((m, Some(n)));
            }
        }
    }
    Ok(out)
}

pub fn parse_swc(text: &str) -> Result<Vec<SwcRecord>, IoError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |msg: String| IoError::Parse { line: i + 1, msg };
        let cols: Vec<&str> = line.split_whitespace().collect();
        if cols.len() != 7 {
            return Err(err(format!("expected 7 fields, got {}", cols.len())));
        }
        let int = |s: &str| s.parse::<i64>().map_err(|e| err(e.to_string()));
        let num = |s: &str| s.parse::<f64>().map_err(|e| err(e.to_string()));
        out.push(SwcRecord {
            id: int(cols[0])?,
            kind: int(cols[1])?,
            x: num(cols[2])?,
            y: num(cols[3])?,
            z: num(cols[4])?,
            radius: num(cols[5])?,
            parent: int(cols[6])?,
        });
    }
    Ok(out)
}

/// Ids unique and positive; each parent is −1 or an earlier record.
pub fn validate_forest(records: &[SwcRecord]) -> Result<(), IoError> {
    let mut seen = BTreeSet::new();
    for r in records {
        if r.id <= 0 {
            return Err(IoError::NotAForest(format!("non-positive id {}", r.id)));
        }
        if r.parent != -1 && !seen.contains(&r.parent) {
            return Err(IoError::NotAForest(format!("record {} precedes its parent {}", r.id, r.parent)));
        }
        if !seen.insert(r.id) {
            return Err(IoError::NotAForest(format!("duplicate id {}", r.id)));
        }
    }
    Ok(())
}
