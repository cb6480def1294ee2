use std::fmt::Write as _;
use std::path::Path;

use super::{replace_file, IoError};
use crate::connect::{Confidence, MergeProposal, ProposalStatus};
use crate::graph::End;
use crate::Vec3;

const HEADER: &str =
    "id\tstatus\tconfidence\tsource_fragment\tsource_end\tsource_node\ttarget_fragment\ttarget_node\ttrajectory";

fn end_str(e: End) -> &'static str {
    match e {
        End::Start => "start",
        End::End => "end",
    }
}

/// One row per proposal; the trajectory is `x,y,z` triples in µm joined by
/// `;`, and a missing target is `-`.
pub fn write_proposals(path: &Path, proposals: &[MergeProposal]) -> Result<(), IoError> {
    let mut s = format!("{HEADER}\n");
    for p in proposals {
        let (tf, tn) = p
            .target
            .map_or(("-".to_string(), "-".to_string()), |(f, n)| (f.to_string(), n.to_string()));
        let traj: Vec<String> = p
            .trajectory
            .iter()
            .map(|v| format!("{},{},{}", v.x, v.y, v.z))
            .collect();
        writeln!(
            s,
            "{}\t{}\t{}\t{}\t{}\t{}\t{tf}\t{tn}\t{}",
            p.id,
            p.status.as_str(),
            p.confidence.as_str(),
            p.source_fragment,
            end_str(p.source_end),
            p.source_node,
            traj.join(";")
        )
        .unwrap();
    }
    replace_file(path, s.as_bytes())?;
    Ok(())
}

pub fn read_proposals(path: &Path) -> Result<Vec<MergeProposal>, IoError> {
    let text = std::fs::read_to_string(path)?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate().skip(1) {
        if line.is_empty() {
            continue;
        }
        let err = |msg: String| IoError::Parse { line: i + 1, msg };
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 9 {
            return Err(err(format!("expected 9 columns, got {}", cols.len())));
        }
        let int = |s: &str| s.parse::<u64>().map_err(|e| err(format!("{s:?}: {e}")));
        let target = match (cols[6], cols[7]) {
            ("-", "-") => None,
            (f, n) => Some((int(f)?, int(n)?)),
        };
        let mut trajectory = Vec::new();
        for triple in cols[8].split(';').filter(|t| !t.is_empty()) {
            let v: Vec<f64> = triple
                .split(',')
                .map(|x| x.parse::<f64>().map_err(|e| err(format!("{x:?}: {e}"))))
                .collect::<Result<_, _>>()?;
            if v.len() != 3 {
                return Err(err(format!("bad point {triple:?}")));
            }
            trajectory.push(Vec3::new(v[0], v[1], v[2]));
        }
        out.push(MergeProposal {
            id: int(cols[0])?,
            status: ProposalStatus::parse(cols[1]).ok_or_else(|| err(format!("status {:?}", cols[1])))?,
            confidence: Confidence::parse(cols[2]).ok_or_else(|| err(format!("confidence {:?}", cols[2])))?,
            source_fragment: int(cols[3])?,
            source_end: match cols[4] {
                "start" => End::Start,
                "end" => End::End,
                other => return Err(err(format!("end {other:?}"))),
            },
            source_node: int(cols[5])?,
            target,
            trajectory,
        });
    }
    Ok(out)
}
