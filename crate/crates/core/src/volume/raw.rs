//! Raw volume files.
//!
//! Layout (all little-endian), 64-byte header then voxels in x-fastest order:
//!
//! | offset | size | field                                   |
//! |--------|------|-----------------------------------------|
//! | 0      | 8    | magic `NFVOL1\0\0`                      |
//! | 8      | 12   | nx, ny, nz as `u32`                     |
//! | 20     | 12   | origin x, y, z as `i32`                 |
//! | 32     | 24   | pitch x, y, z as `f64` (µm, must match) |
//! | 56     | 4    | kind: 0 = u16 voxels, 1 = f32 voxels    |
//! | 60     | 4    | reserved, zero                          |

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{Volume, VolumeError, VolumeKind};

pub const RAW_MAGIC: &[u8; 8] = b"NFVOL1\0\0";
pub const RAW_HEADER_LEN: usize = 64;

pub fn write_volume(path: &Path, v: &Volume) -> Result<(), VolumeError> {
    let tmp = path.with_extension("tmp-write");
    {
        let mut w = BufWriter::new(File::create(&tmp)?);
        let mut header = [0u8; RAW_HEADER_LEN];
        header[..8].copy_from_slice(RAW_MAGIC);
        for a in 0..3 {
            let d = u32::try_from(v.dims()[a]).map_err(|_| VolumeError::BadDims(v.dims()))?;
            header[8 + 4 * a..12 + 4 * a].copy_from_slice(&d.to_le_bytes());
            let o = i32::try_from(v.origin()[a])
                .map_err(|_| VolumeError::BadHeader("origin exceeds i32".into()))?;
            header[20 + 4 * a..24 + 4 * a].copy_from_slice(&o.to_le_bytes());
            header[32 + 8 * a..40 + 8 * a].copy_from_slice(&v.pitch().to_le_bytes());
        }
        let kind: u32 = match v.kind() {
            VolumeKind::Raw16 => 0,
            VolumeKind::NormalizedFloat => 1,
        };
        header[56..60].copy_from_slice(&kind.to_le_bytes());
        w.write_all(&header)?;
        match v.kind() {
            VolumeKind::Raw16 => {
                for &x in v.data() {
                    w.write_all(&(x as u16).to_le_bytes())?;
                }
            }
            VolumeKind::NormalizedFloat => {
                for &x in v.data() {
                    w.write_all(&x.to_le_bytes())?;
                }
            }
        }
        w.flush()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}

pub fn read_volume(path: &Path) -> Result<Volume, VolumeError> {
    let mut r = BufReader::new(File::open(path)?);
    let mut header = [0u8; RAW_HEADER_LEN];
    r.read_exact(&mut header)?;
    if &header[..8] != RAW_MAGIC {
        return Err(VolumeError::BadHeader("bad magic".into()));
    }
    let u32_at = |o: usize| u32::from_le_bytes(header[o..o + 4].try_into().unwrap());
    let i32_at = |o: usize| i32::from_le_bytes(header[o..o + 4].try_into().unwrap());
    let f64_at = |o: usize| f64::from_le_bytes(header[o..o + 8].try_into().unwrap());
    let dims = [u32_at(8) as usize, u32_at(12) as usize, u32_at(16) as usize];
    let origin = [i32_at(20) as i64, i32_at(24) as i64, i32_at(28) as i64];
    let pitches = [f64_at(32), f64_at(40), f64_at(48)];
    if pitches[0] != pitches[1] || pitches[1] != pitches[2] {
        return Err(VolumeError::BadPitch(pitches));
    }
    let kind = match u32_at(56) {
        0 => VolumeKind::Raw16,
        1 => VolumeKind::NormalizedFloat,
        k => return Err(VolumeError::BadHeader(format!("unknown kind {k}"))),
    };
    let n: usize = dims.iter().product();
    let width = if kind == VolumeKind::Raw16 { 2 } else { 4 };
    let mut bytes = vec![0u8; n * width];
    r.read_exact(&mut bytes)?;
    let data: Vec<f32> = match kind {
        VolumeKind::Raw16 => bytes
            .chunks_exact(2)
            .map(|c| u16::from_le_bytes([c[0], c[1]]) as f32)
            .collect(),
        VolumeKind::NormalizedFloat => bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect(),
    };
    Volume::new(dims, origin, pitches[0], kind, data)
}
