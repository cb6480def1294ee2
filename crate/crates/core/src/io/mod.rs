//! File formats: SWC export, proposal tables, atomic file replacement.

mod proposals;
mod swc;

pub use proposals::{read_proposals, write_proposals};
pub use swc::{export_swc, parse_swc, validate_forest, SwcRecord, SwcRoot};

use std::fs;
use std::io::Write;
use std::path::Path;

use thiserror::Error;

use crate::graph::{GraphError, NodeId};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("cycle through edge {0}-{1}")]
    Cycle(NodeId, NodeId),
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("not a forest: {0}")]
    NotAForest(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// Writes `bytes` to a sibling temp file and renames it over `path`.
pub fn replace_file(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp-write");
    let tmp = std::path::PathBuf::from(tmp);
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)
}
