//! In-memory 3D image blocks and intensity operations.

mod crop;
mod histogram;
mod phantom;
mod raw;

pub use crop::crop_aligned;
pub use histogram::match_histogram;
pub use phantom::{generate_phantom, Gap, GroundTruth, PhantomSpec, TruthCurve};
pub use raw::{read_volume, write_volume, RAW_HEADER_LEN, RAW_MAGIC};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::geometry::GeometryError;
use crate::Vec3;

#[derive(Debug, Error)]
pub enum VolumeError {
    #[error("invalid dimensions {0:?}")]
    BadDims([usize; 3]),
    #[error("data length {got} does not match dimensions ({expected} voxels)")]
    LengthMismatch { expected: usize, got: usize },
    #[error("volume dimensions differ: {0:?} vs {1:?}")]
    DimMismatch([usize; 3], [usize; 3]),
    #[error("volume kinds differ")]
    KindMismatch,
    #[error("normalized volume holds value {0} outside [0, 1]")]
    OutOfRange(f32),
    #[error("raw volume holds non-16-bit value {0}")]
    NotRaw16(f32),
    #[error("voxel pitch must be positive and isotropic, got {0:?}")]
    BadPitch([f64; 3]),
    #[error("volume is empty")]
    Empty,
    #[error("curves outside volume bounds: {0:?}")]
    CurvesOutOfBounds(Vec<usize>),
    #[error("invalid phantom: {0}")]
    InvalidPhantom(String),
    #[error("geometry: {0}")]
    Geometry(#[from] GeometryError),
    #[error("not a volume file: {0}")]
    BadHeader(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VolumeKind {
    /// Integer intensities in `[0, 65535]`.
    Raw16,
    /// Real intensities in `[0, 1]`.
    NormalizedFloat,
}

/// A 3D scalar block with x-fastest storage.
///
/// `origin` is the global voxel index of local voxel `(0, 0, 0)`; world
/// coordinates in µm are `global_index · pitch`, with voxel centers at integer
/// indices.
#[derive(Debug, Clone, PartialEq)]
pub struct Volume {
    dims: [usize; 3],
    origin: [i64; 3],
    pitch: f64,
    kind: VolumeKind,
    data: Vec<f32>,
}

impl Volume {
    pub fn new(
        dims: [usize; 3],
        origin: [i64; 3],
        pitch: f64,
        kind: VolumeKind,
        data: Vec<f32>,
    ) -> Result<Self, VolumeError> {
        if dims.contains(&0) {
            return Err(VolumeError::BadDims(dims));
        }
        if !(pitch > 0.0 && pitch.is_finite()) {
            return Err(VolumeError::BadPitch([pitch; 3]));
        }
        let expected = dims[0] * dims[1] * dims[2];
        if data.len() != expected {
            return Err(VolumeError::LengthMismatch {
                expected,
                got: data.len(),
            });
        }
        match kind {
            VolumeKind::NormalizedFloat => {
                if let Some(&v) = data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
                    return Err(VolumeError::OutOfRange(v));
                }
            }
            VolumeKind::Raw16 => {
                if let Some(&v) = data
                    .iter()
                    .find(|v| !(0.0..=65535.0).contains(*v) || v.fract() != 0.0)
                {
                    return Err(VolumeError::NotRaw16(v));
                }
            }
        }
        Ok(Self {
            dims,
            origin,
            pitch,
            kind,
            data,
        })
    }

    pub fn filled(
        dims: [usize; 3],
        origin: [i64; 3],
        pitch: f64,
        kind: VolumeKind,
        value: f32,
    ) -> Result<Self, VolumeError> {
        let n = dims.iter().product();
        Self::new(dims, origin, pitch, kind, vec![value; n])
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn origin(&self) -> [i64; 3] {
        self.origin
    }

    pub fn pitch(&self) -> f64 {
        self.pitch
    }

    pub fn kind(&self) -> VolumeKind {
        self.kind
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        x + self.dims[0] * (y + self.dims[1] * z)
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, z: usize) -> f32 {
        self.data[self.index(x, y, z)]
    }

    /// World position (µm) of a local voxel index.
    pub fn voxel_to_world(&self, x: f64, y: f64, z: f64) -> Vec3 {
        Vec3::new(
            (x + self.origin[0] as f64) * self.pitch,
            (y + self.origin[1] as f64) * self.pitch,
            (z + self.origin[2] as f64) * self.pitch,
        )
    }

    /// Local (fractional) voxel coordinates of a world position.
    pub fn world_to_voxel(&self, p: &Vec3) -> Vec3 {
        Vec3::new(
            p.x / self.pitch - self.origin[0] as f64,
            p.y / self.pitch - self.origin[1] as f64,
            p.z / self.pitch - self.origin[2] as f64,
        )
    }

    /// Whether a world position lies within half a voxel of the block.
    pub fn contains_world(&self, p: &Vec3) -> bool {
        let v = self.world_to_voxel(p);
        (0..3).all(|a| v[a] >= -0.5 && v[a] <= self.dims[a] as f64 - 0.5)
    }

    /// Trilinear sample at local voxel coordinates; outside voxels read as 0.
    pub fn sample_voxel(&self, v: &Vec3) -> f64 {
        let fx = v.x.floor();
        let fy = v.y.floor();
        let fz = v.z.floor();
        let (dx, dy, dz) = (v.x - fx, v.y - fy, v.z - fz);
        let (x0, y0, z0) = (fx as i64, fy as i64, fz as i64);
        let at = |x: i64, y: i64, z: i64| -> f64 {
            if x < 0
                || y < 0
                || z < 0
                || x >= self.dims[0] as i64
                || y >= self.dims[1] as i64
                || z >= self.dims[2] as i64
            {
                0.0
            } else {
                self.get(x as usize, y as usize, z as usize) as f64
            }
        };
        let c00 = at(x0, y0, z0) * (1.0 - dx) + at(x0 + 1, y0, z0) * dx;
        let c10 = at(x0, y0 + 1, z0) * (1.0 - dx) + at(x0 + 1, y0 + 1, z0) * dx;
        let c01 = at(x0, y0, z0 + 1) * (1.0 - dx) + at(x0 + 1, y0, z0 + 1) * dx;
        let c11 = at(x0, y0 + 1, z0 + 1) * (1.0 - dx) + at(x0 + 1, y0 + 1, z0 + 1) * dx;
        let c0 = c00 * (1.0 - dy) + c10 * dy;
        let c1 = c01 * (1.0 - dy) + c11 * dy;
        c0 * (1.0 - dz) + c1 * dz
    }

    /// Trilinear sample at a world position (µm).
    pub fn sample_world(&self, p: &Vec3) -> f64 {
        self.sample_voxel(&self.world_to_voxel(p))
    }

    /// Copies the sub-block `[lo, hi)` (local indices) with its origin shifted.
    pub fn sub_block(&self, lo: [usize; 3], hi: [usize; 3]) -> Volume {
        let dims = [hi[0] - lo[0], hi[1] - lo[1], hi[2] - lo[2]];
        let mut data = Vec::with_capacity(dims.iter().product());
        for z in lo[2]..hi[2] {
            for y in lo[1]..hi[1] {
                let start = self.index(lo[0], y, z);
                data.extend_from_slice(&self.data[start..start + dims[0]]);
            }
        }
        Volume {
            dims,
            origin: [
                self.origin[0] + lo[0] as i64,
                self.origin[1] + lo[1] as i64,
                self.origin[2] + lo[2] as i64,
            ],
            pitch: self.pitch,
            kind: self.kind,
            data,
        }
    }

    /// SHA-256 of dims, origin, pitch and voxel data, hex encoded.
    pub fn content_hash(&self) -> String {
        let mut h = Sha256::new();
        for d in self.dims {
            h.update((d as u64).to_le_bytes());
        }
        for o in self.origin {
            h.update(o.to_le_bytes());
        }
        h.update(self.pitch.to_le_bytes());
        for v in &self.data {
            h.update(v.to_le_bytes());
        }
        hex::encode(h.finalize())
    }

    pub(crate) fn with_data(&self, kind: VolumeKind, data: Vec<f32>) -> Volume {
        debug_assert_eq!(data.len(), self.data.len());
        Volume {
            dims: self.dims,
            origin: self.origin,
            pitch: self.pitch,
            kind,
            data,
        }
    }
}

/// Min-max normalization to `[0, 1]`; a constant volume maps to all zeros.
pub fn min_max_normalize(v: &Volume) -> Volume {
    let (lo, hi) = v
        .data
        .iter()
        .fold((f32::INFINITY, f32::NEG_INFINITY), |(lo, hi), &x| {
            (lo.min(x), hi.max(x))
        });
    let range = hi as f64 - lo as f64;
    let data = if range > 0.0 {
        v.data
            .iter()
            .map(|&x| ((x as f64 - lo as f64) / range).clamp(0.0, 1.0) as f32)
            .collect()
    } else {
        vec![0.0; v.data.len()]
    };
    v.with_data(VolumeKind::NormalizedFloat, data)
}

/// Voxelwise maximum of two volumes of identical shape and kind.
pub fn fuse(a: &Volume, b: &Volume) -> Result<Volume, VolumeError> {
    if a.dims != b.dims {
        return Err(VolumeError::DimMismatch(a.dims, b.dims));
    }
    if a.kind != b.kind {
        return Err(VolumeError::KindMismatch);
    }
    let data = a.data.iter().zip(&b.data).map(|(x, y)| x.max(*y)).collect();
    Ok(a.with_data(a.kind, data))
}
