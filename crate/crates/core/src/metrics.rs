//! Skeleton-level recall, precision and F1, and their length-weighted
//! aggregate.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{GraphError, SegmentGraph};
use crate::spatial::PointGrid;
use crate::Vec3;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("no scenarios to aggregate")]
    Empty,
    #[error("scenario {0} has non-positive length")]
    BadLength(usize),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// Default matching tolerance, µm.
pub const DEFAULT_TOLERANCE: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub recall: f64,
    pub precision: f64,
    pub f1: f64,
}

impl Prf {
    pub fn new(recall: f64, precision: f64) -> Self {
        let s = recall + precision;
        let f1 = if s > 0.0 { 2.0 * recall * precision / s } else { 0.0 };
        Self {
            recall,
            precision,
            f1,
        }
    }
}

/// Nodes plus points along every edge at most 1 µm apart, in µm.
pub fn sample_points(graph: &SegmentGraph) -> Vec<Vec3> {
    let mut out: Vec<Vec3> = graph.nodes().map(|n| n.position * graph.pitch).collect();
    for (a, b, _) in graph.edges() {
        let (pa, pb) = (graph.world(a).unwrap(), graph.world(b).unwrap());
        let k = (pb - pa).norm().ceil() as usize;
        for i in 1..k {
            out.push(pa + (pb - pa) * (i as f64 / k as f64));
        }
    }
    out
}

fn fraction_within(points: &[Vec3], reference: &[Vec3], tol: f64) -> f64 {
    let mut grid = PointGrid::new(tol.max(1e-6));
    for (i, p) in reference.iter().enumerate() {
        grid.insert(*p, i);
    }
    let hits = points.par_iter().filter(|p| grid.any_within(p, tol)).count();
    hits as f64 / points.len() as f64
}

/// Point-to-nearest-point matching of resampled skeletons at tolerance `tol`
/// µm. Empty prediction: recall 0, precision 1. Both empty: all 1. Empty
/// truth with a prediction: recall 1, precision 0.
pub fn skeleton_prf(pred: &SegmentGraph, truth: &SegmentGraph, tol: f64) -> Result<Prf, MetricsError> {
    if (pred.pitch - truth.pitch).abs() > 1e-9 * truth.pitch.max(1.0) {
        return Err(GraphError::PitchMismatch(pred.pitch, truth.pitch).into());
    }
    let p = sample_points(pred);
    let t = sample_points(truth);
    Ok(match (p.is_empty(), t.is_empty()) {
        (true, true) => Prf::new(1.0, 1.0),
        (true, false) => Prf::new(0.0, 1.0),
        (false, true) => Prf::new(1.0, 0.0),
        (false, false) => Prf::new(fraction_within(&t, &p, tol), fraction_within(&p, &t, tol)),
    })
}

/// `Σ f1_i·L_i / Σ L_i`.
pub fn weighted_f1(scores: &[(Prf, f64)]) -> Result<f64, MetricsError> {
    if scores.is_empty() {
        return Err(MetricsError::Empty);
    }
    if let Some(i) = scores.iter().position(|(_, l)| !(*l > 0.0)) {
        return Err(MetricsError::BadLength(i));
    }
    let total: f64 = scores.iter().map(|(_, l)| l).sum();
    Ok(scores.iter().map(|(s, l)| s.f1 * l).sum::<f64>() / total)
}

/// TSV with one row per scenario and a final length-weighted row.
pub fn prf_table(rows: &[(String, Prf, f64)]) -> Result<String, MetricsError> {
    let mut s = String::from("scenario\trec.\tprec.\tF1\tlength_um\n");
    for (name, prf, len) in rows {
        let _ = writeln!(s, "{name}\t{:.3}\t{:.3}\t{:.3}\t{len:.1}", prf.recall, prf.precision, prf.f1);
    }
    let pairs: Vec<(Prf, f64)> = rows.iter().map(|(_, p, l)| (*p, *l)).collect();
    let w = weighted_f1(&pairs)?;
    let total: f64 = pairs.iter().map(|(_, l)| l).sum();
    let _ = writeln!(s, "weighted\t\t\t{w:.3}\t{total:.1}");
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{NodeFlags, Provenance};
    use proptest::prelude::*;

    fn chain(g: &mut SegmentGraph, from: Vec3, to: Vec3, n: usize) {
        let f = g.new_fragment();
        let ids: Vec<_> = (0..=n)
            .map(|i| g.add_node(from + (to - from) * (i as f64 / n as f64), f, NodeFlags::default()))
            .collect();
        for w in ids.windows(2) {
            g.add_edge(w[0], w[1], Provenance::Skeleton).unwrap();
        }
    }

    fn v(x: f64, y: f64) -> Vec3 {
        Vec3::new(x, y, 0.0)
    }

    /// Brute-force counterpart of `fraction_within`.
    fn brute(points: &[Vec3], reference: &[Vec3], tol: f64) -> f64 {
        let hits = points
            .iter()
            .filter(|p| reference.iter().any(|q| (*p - q).norm() <= tol))
            .count();
        hits as f64 / points.len() as f64
    }

    #[test]
    fn identical_graphs_score_one() {
        let mut g = SegmentGraph::new(1.0, 3);
        chain(&mut g, v(0.0, 0.0), v(30.0, 0.0), 10);
        let s = skeleton_prf(&g, &g, 2.0).unwrap();
        assert_eq!(s, Prf::new(1.0, 1.0));
        assert_eq!(s.f1, 1.0);
    }

    #[test]
    fn empty_conventions() {
        let mut t = SegmentGraph::new(1.0, 3);
        chain(&mut t, v(0.0, 0.0), v(30.0, 0.0), 10);
        let e = SegmentGraph::new(1.0, 3);
        assert_eq!(skeleton_prf(&e, &t, 2.0).unwrap(), Prf { recall: 0.0, precision: 1.0, f1: 0.0 });
        assert_eq!(skeleton_prf(&e, &e, 2.0).unwrap(), Prf { recall: 1.0, precision: 1.0, f1: 1.0 });
    }

    #[test]
    fn half_coverage() {
        // Two equal chains far apart; the prediction reproduces one of them.
        let mut t = SegmentGraph::new(1.0, 3);
        chain(&mut t, v(0.0, 0.0), v(30.0, 0.0), 10);
        chain(&mut t, v(0.0, 50.0), v(30.0, 50.0), 10);
        let mut p = SegmentGraph::new(1.0, 3);
        chain(&mut p, v(0.0, 0.0), v(30.0, 0.0), 10);
        let s = skeleton_prf(&p, &t, 2.0).unwrap();
        let (pp, tp) = (sample_points(&p), sample_points(&t));
        assert_eq!(s.recall, brute(&tp, &pp, 2.0));
        assert_eq!(s.recall, 0.5);
        assert_eq!(s.precision, 1.0);
        assert!((s.f1 - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn mixed_pitch_is_an_error() {
        let a = SegmentGraph::new(1.0, 3);
        let b = SegmentGraph::new(0.5, 3);
        assert!(skeleton_prf(&a, &b, 2.0).is_err());
    }

    #[test]
    fn weighted_examples() {
        let p = |f1: f64| Prf { recall: f1, precision: f1, f1 };
        assert!((weighted_f1(&[(p(0.7), 3.0)]).unwrap() - 0.7).abs() < 1e-15);
        assert_eq!(weighted_f1(&[(p(1.0), 1.0), (p(0.0), 1.0)]).unwrap(), 0.5);
        let vals = [0.926, 0.946, 0.874, 0.738];
        let w = weighted_f1(&vals.map(|f| (p(f), 1.0))).unwrap();
        let mean = vals.iter().sum::<f64>() / 4.0;
        assert!((w - mean).abs() < 1e-12);
        assert!((w - 0.871).abs() < 5e-4);
        assert!(weighted_f1(&[]).is_err());
        assert!(weighted_f1(&[(p(1.0), 0.0)]).is_err());
    }

    #[test]
    fn table_has_weighted_row() {
        let rows = vec![
            ("a".to_string(), Prf::new(1.0, 1.0), 1.0),
            ("b".to_string(), Prf::new(0.0, 0.0), 1.0),
        ];
        let t = prf_table(&rows).unwrap();
        assert_eq!(t.lines().count(), 4);
        assert!(t.lines().last().unwrap().starts_with("weighted\t\t\t0.500"));
    }

    fn graph_of(chains: &[(f64, f64, f64, f64)]) -> SegmentGraph {
        let mut g = SegmentGraph::new(1.0, 3);
        for &(x0, y0, x1, y1) in chains {
            chain(&mut g, v(x0, y0), v(x1, y1), 4);
        }
        g
    }

    fn chains() -> impl Strategy<Value = Vec<(f64, f64, f64, f64)>> {
        proptest::collection::vec((0.0..40.0, 0.0..40.0, 0.0..40.0, 0.0..40.0), 1..4)
    }

    proptest! {
        #[test]
        fn matches_brute_force_and_is_symmetric(a in chains(), b in chains()) {
            let (ga, gb) = (graph_of(&a), graph_of(&b));
            let ab = skeleton_prf(&ga, &gb, 2.0).unwrap();
            let ba = skeleton_prf(&gb, &ga, 2.0).unwrap();
            prop_assert_eq!(ab.recall, ba.precision);
            prop_assert_eq!(ab.precision, ba.recall);
            let (pa, pb) = (sample_points(&ga), sample_points(&gb));
            prop_assert_eq!(ab.recall, brute(&pb, &pa, 2.0));
            prop_assert_eq!(ab.precision, brute(&pa, &pb, 2.0));
        }

        #[test]
        fn monotone_in_added_points(a in chains(), b in chains(), k in 0usize..5) {
            let truth = graph_of(&b);
            let mut pred = graph_of(&a);
            let before = skeleton_prf(&pred, &truth, 2.0).unwrap();

            // A correct point: a copy of a truth node.
            let mut with_hit = pred.clone();
            let target = truth.nodes().nth(k % truth.node_count()).unwrap().position;
            let f = with_hit.new_fragment();
            with_hit.add_node(target, f, NodeFlags::default());
            prop_assert!(skeleton_prf(&with_hit, &truth, 2.0).unwrap().recall >= before.recall);

            // A far spurious point.
            let f = pred.new_fragment();
            pred.add_node(Vec3::new(1000.0, 1000.0, 1000.0), f, NodeFlags::default());
            prop_assert!(skeleton_prf(&pred, &truth, 2.0).unwrap().precision <= before.precision);
        }
    }
}
