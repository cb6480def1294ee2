//! Two-agent path benchmark: each non-branching ground-truth path is flown
//! from both ends toward the other.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::flight::{fly, init_inward, FlightError, FlightParams, GraphIndex, Steering, TerminationStatus};
use crate::geometry::{arc_length, Curve};
use crate::graph::{NodeFlags, NodeId, Provenance, SegmentGraph};
use crate::volume::{GroundTruth, Volume};
use crate::Vec3;

/// Samples every ground-truth curve about every `spacing` µm into one graph.
/// Curve ends within `snap` µm of an existing node reuse that node, so
/// branches that start on a parent curve share its node.
pub fn truth_graph(truth: &GroundTruth, pitch: f64, spacing: f64, snap: f64) -> SegmentGraph {
    let mut g = SegmentGraph::new(pitch, 1);
    for tc in &truth.curves {
        let fid = g.new_fragment();
        let n = ((arc_length(&tc.curve) / spacing).round() as usize).max(1);
        let mut prev: Option<NodeId> = None;
        for k in 0..=n {
            let p = tc.curve.point(k as f64 / n as f64);
            let end = k == 0 || k == n;
            let existing = end
                .then(|| {
                    g.nodes()
                        .map(|node| ((node.position * pitch - p).norm(), node.id))
                        .filter(|(d, _)| *d <= snap)
                        .min_by(|a, b| a.0.total_cmp(&b.0))
                        .map(|(_, id)| id)
                })
                .flatten();
            let id = existing.unwrap_or_else(|| g.add_node(p / pitch, fid, NodeFlags::default()));
            if let Some(q) = prev {
                if q != id {
                    g.add_edge(q, id, Provenance::Manual).expect("fresh nodes");
                }
            }
            prev = Some(id);
        }
    }
    g
}

/// Maximal paths whose interior nodes have degree 2, each edge in exactly one
/// path. Paths start at the smaller-id side; pure cycles come out closed,
/// starting and ending at their smallest node.
pub fn split_at_junctions(graph: &SegmentGraph) -> Vec<Vec<NodeId>> {
    let key = |a: NodeId, b: NodeId| (a.min(b), a.max(b));
    let mut used: BTreeSet<(NodeId, NodeId)> = BTreeSet::new();
    let mut paths = Vec::new();
    let neighbors = |n: NodeId| {
        let mut v: Vec<NodeId> = graph.neighbors(n).collect();
        v.sort_unstable();
        v
    };
    let walk = |start: NodeId, first: NodeId, used: &mut BTreeSet<(NodeId, NodeId)>| {
        let mut path = vec![start, first];
        used.insert(key(start, first));
        let (mut prev, mut cur) = (start, first);
        while graph.degree(cur) == 2 && cur != start {
            let next = neighbors(cur).into_iter().find(|&m| m != prev).unwrap_or(prev);
            if !used.insert(key(cur, next)) {
                break;
            }
            path.push(next);
            prev = cur;
            cur = next;
        }
        path
    };

    let ids: Vec<NodeId> = graph.nodes().map(|n| n.id).collect();
    for &b in &ids {
        if graph.degree(b) == 2 {
            continue;
        }
        for m in neighbors(b) {
            if !used.contains(&key(b, m)) {
                paths.push(walk(b, m, &mut used));
            }
        }
    }
    for &b in &ids {
        for m in neighbors(b) {
            if !used.contains(&key(b, m)) {
                paths.push(walk(b, m, &mut used));
            }
        }
    }
    paths
}

/// World positions of a node path.
pub fn path_points(graph: &SegmentGraph, path: &[NodeId]) -> Vec<Vec3> {
    path.iter().filter_map(|&id| graph.world(id)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LengthCategory {
    Short,
    Medium,
    Long,
}

impl LengthCategory {
    pub fn as_str(self) -> &'static str {
        match self {
            LengthCategory::Short => "short",
            LengthCategory::Medium => "medium",
            LengthCategory::Long => "long",
        }
    }
}

/// Mean, population standard deviation, and per-length category:
/// short below µ, medium in `[µ, µ+σ)`, long from `µ+σ`.
pub fn categorize(lengths: &[f64]) -> (f64, f64, Vec<LengthCategory>) {
    if lengths.is_empty() {
        return (0.0, 0.0, Vec::new());
    }
    let n = lengths.len() as f64;
    let mean = lengths.iter().sum::<f64>() / n;
    let var = lengths.iter().map(|l| (l - mean).powi(2)).sum::<f64>() / n;
    let sd = var.sqrt();
    let cats = lengths
        .iter()
        .map(|&l| {
            if l < mean {
                LengthCategory::Short
            } else if l < mean + sd {
                LengthCategory::Medium
            } else {
                LengthCategory::Long
            }
        })
        .collect();
    (mean, sd, cats)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathResult {
    /// µm along the path polyline.
    pub length: f64,
    pub category: LengthCategory,
    pub success: bool,
    /// Outcome of the agent launched at the first node; `None` if it failed
    /// to fly.
    pub forward: Option<TerminationStatus>,
    pub backward: Option<TerminationStatus>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryRate {
    pub category: LengthCategory,
    pub paths: usize,
    pub successes: usize,
    /// `None` when the category is empty.
    pub rate: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub paths: Vec<PathResult>,
    pub mean_length: f64,
    pub sd_length: f64,
    pub categories: Vec<CategoryRate>,
    pub overall_rate: Option<f64>,
}

impl BenchmarkReport {
    pub fn to_table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "paths: {}  mean length: {:.2} µm  sd: {:.2} µm", self.paths.len(), self.mean_length, self.sd_length);
        let _ = writeln!(s, "{:<8} {:>6} {:>9} {:>8}", "category", "paths", "successes", "rate");
        let fmt = |r: Option<f64>| r.map_or("-".to_string(), |r| format!("{:.3}", r));
        for c in &self.categories {
            let _ = writeln!(s, "{:<8} {:>6} {:>9} {:>8}", c.category.as_str(), c.paths, c.successes, fmt(c.rate));
        }
        let total: usize = self.paths.iter().filter(|p| p.success).count();
        let _ = writeln!(s, "{:<8} {:>6} {:>9} {:>8}", "all", self.paths.len(), total, fmt(self.overall_rate));
        s
    }
}

fn fly_toward(
    path: &[Vec3],
    volume: &Volume,
    steering: &dyn Steering,
    params: &FlightParams,
) -> Result<TerminationStatus, FlightError> {
    let state = init_inward(path, params)?;
    let index = GraphIndex::from_points(&[(*path.last().unwrap(), 0, 0)]);
    Ok(fly(state, steering, volume, &index, params)?.status)
}

/// Flies two agents per path, one from each end toward the other. A path
/// succeeds only when both reach the opposite terminal.
pub fn run_benchmark(
    paths: &[Vec<Vec3>],
    volume: &Volume,
    steering: &dyn Steering,
    params: &FlightParams,
) -> Result<BenchmarkReport, FlightError> {
    params.validate()?;
    if let Some(i) = paths.iter().position(|p| p.len() < 2) {
        return Err(FlightError::BadParams(format!("path {i} has fewer than 2 nodes")));
    }
    let lengths: Vec<f64> = paths
        .iter()
        .map(|p| p.windows(2).map(|w| (w[1] - w[0]).norm()).sum())
        .collect();
    let (mean, sd, cats) = categorize(&lengths);
    let outcomes: Vec<(Option<TerminationStatus>, Option<TerminationStatus>)> = paths
        .par_iter()
        .map(|p| {
            let mut rev = p.clone();
            rev.reverse();
            let run = |pts: &[Vec3]| match fly_toward(pts, volume, steering, params) {
                Ok(s) => Some(s),
                Err(e) => {
                    log::warn!("benchmark flight failed: {e}");
                    None
                }
            };
            (run(p), run(&rev))
        })
        .collect();

    let merged = |s: &Option<TerminationStatus>| matches!(s, Some(TerminationStatus::Merged { .. }));
    let results: Vec<PathResult> = outcomes
        .into_iter()
        .zip(lengths.iter().zip(&cats))
        .map(|((f, b), (&length, &category))| PathResult {
            length,
            category,
            success: merged(&f) && merged(&b),
            forward: f,
            backward: b,
        })
        .collect();

    let mut tally: BTreeMap<LengthCategory, (usize, usize)> = BTreeMap::new();
    for r in &results {
        let e = tally.entry(r.category).or_default();
        e.0 += 1;
        e.1 += r.success as usize;
    }
    let rate = |n: usize, k: usize| (n > 0).then(|| k as f64 / n as f64);
    let categories = [LengthCategory::Short, LengthCategory::Medium, LengthCategory::Long]
        .into_iter()
        .map(|c| {
            let (n, k) = tally.get(&c).copied().unwrap_or_default();
            CategoryRate {
                category: c,
                paths: n,
                successes: k,
                rate: rate(n, k),
            }
        })
        .collect();
    let overall_rate = rate(results.len(), results.iter().filter(|r| r.success).count());
    Ok(BenchmarkReport {
        paths: results,
        mean_length: mean,
        sd_length: sd,
        categories,
        overall_rate,
    })
}
