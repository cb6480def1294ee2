use std::io::{Read, Write};
use std::process::{Command, Stdio};

use super::SegmentError;
use crate::volume::Volume;

/// One scoring call: dims and voxels to the program's stdin, one `f32` per
/// voxel back on stdout.
pub(super) fn run(command: &str, args: &[String], block: &Volume) -> Result<Vec<f32>, SegmentError> {
    let err = |m: String| SegmentError::External(format!("{command}: {m}"));
    let mut child = Command::new(command)
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::inherit())
        .spawn()
        .map_err(|e| err(e.to_string()))?;

    let mut payload = Vec::with_capacity(12 + 4 * block.len());
    for d in block.dims() {
        payload.extend_from_slice(&(d as u32).to_le_bytes());
    }
    for &v in block.data() {
        payload.extend_from_slice(&v.to_le_bytes());
    }
    let mut stdin = child.stdin.take().expect("piped stdin");
    let writer = std::thread::spawn(move || stdin.write_all(&payload));

    let mut out = Vec::new();
    child
        .stdout
        .take()
        .expect("piped stdout")
        .read_to_end(&mut out)
        .map_err(|e| err(e.to_string()))?;
    writer
        .join()
        .map_err(|_| err("writer panicked".into()))?
        .map_err(|e| err(e.to_string()))?;
    let status = child.wait().map_err(|e| err(e.to_string()))?;
    if !status.success() {
        return Err(err(format!("exited with {status}")));
    }
    if out.len() != 4 * block.len() {
        return Err(err(format!(
            "expected {} bytes of scores, got {}",
            4 * block.len(),
            out.len()
        )));
    }
    Ok(out
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect())
}
