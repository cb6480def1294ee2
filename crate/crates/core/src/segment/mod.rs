//! Segmentation stage: foreground scoring, thresholding, blockwise
//! execution, thinning, and fragment extraction.

mod blockwise;
mod external;
mod extract;
mod hessian;
mod thinning;

pub use blockwise::{run_blockwise, run_monolithic, skeletonize_blockwise, ChunkLayout};
pub use extract::{extract_graph, DEFAULT_SAMPLING_INTERVAL};
pub use hessian::line_response;
pub use thinning::{label_components, skeletonize};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::SegmentGraph;
use crate::volume::{Volume, VolumeError, VolumeKind};

#[derive(Debug, Error)]
pub enum SegmentError {
    #[error("scoring requires a normalized volume")]
    NotNormalized,
    #[error("unsupported segmenter: {0}")]
    Unsupported(String),
    #[error("invalid chunk layout: {0}")]
    BadLayout(String),
    #[error("external scorer failed: {0}")]
    External(String),
    #[error(transparent)]
    Volume(#[from] VolumeError),
}

/// Foreground scoring method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum SegmenterSpec {
    /// Intensities are used as scores directly.
    Threshold,
    /// Bright-line response from Hessian eigenvalues at scale `sigma` voxels.
    HessianCurvilinear { sigma: f64 },
    /// A scoring program: receives `nx ny nz` as little-endian `u32` followed
    /// by the normalized block as `f32` on stdin, answers with one `f32` score
    /// per voxel on stdout.
    External {
        command: String,
        #[serde(default)]
        args: Vec<String>,
    },
}

impl Default for SegmenterSpec {
    fn default() -> Self {
        SegmenterSpec::Threshold
    }
}

impl SegmenterSpec {
    /// Voxels of context each output voxel depends on, per side.
    pub fn support_radius(&self) -> usize {
        match self {
            SegmenterSpec::Threshold => 0,
            SegmenterSpec::HessianCurvilinear { sigma } => hessian::kernel_radius(*sigma),
            SegmenterSpec::External { .. } => 0,
        }
    }

    fn normalizes(&self) -> bool {
        matches!(self, SegmenterSpec::HessianCurvilinear { .. })
    }

    /// Unnormalized per-voxel scores of one block.
    fn raw_scores(&self, block: &Volume) -> Result<Vec<f32>, SegmentError> {
        match self {
            SegmenterSpec::Threshold => Ok(block.data().to_vec()),
            SegmenterSpec::HessianCurvilinear { sigma } => {
                if !(*sigma > 0.0) {
                    return Err(SegmentError::Unsupported(format!("sigma {sigma}")));
                }
                Ok(line_response(block.data(), block.dims(), *sigma))
            }
            SegmenterSpec::External { command, args } => {
                let mut s = external::run(command, args, block)?;
                for v in &mut s {
                    *v = if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) };
                }
                Ok(s)
            }
        }
    }
}

/// Rescales raw responses with a global range; a (near) zero range maps to 0.
fn apply_min_max(scores: &mut [f32], lo: f32, hi: f32) {
    let range = hi - lo;
    if !(range > 1e-9) {
        scores.iter_mut().for_each(|s| *s = 0.0);
        return;
    }
    for s in scores.iter_mut() {
        *s = ((*s - lo) / range).clamp(0.0, 1.0);
    }
}

fn range_of(scores: &[f32]) -> (f32, f32) {
    scores
        .iter()
        .fold((f32::INFINITY, f32::NEG_INFINITY), |(lo, hi), &x| {
            (lo.min(x), hi.max(x))
        })
}

/// Per-voxel foreground score in `[0, 1]`.
pub fn score_foreground(v: &Volume, spec: &SegmenterSpec) -> Result<Volume, SegmentError> {
    if v.kind() != VolumeKind::NormalizedFloat {
        return Err(SegmentError::NotNormalized);
    }
    let mut scores = spec.raw_scores(v)?;
    if spec.normalizes() {
        let (lo, hi) = range_of(&scores);
        apply_min_max(&mut scores, lo, hi);
    }
    Ok(Volume::new(
        v.dims(),
        v.origin(),
        v.pitch(),
        VolumeKind::NormalizedFloat,
        scores,
    )?)
}

/// Binary voxel mask sharing a volume's placement.
#[derive(Debug, Clone, PartialEq)]
pub struct BitMask {
    dims: [usize; 3],
    origin: [i64; 3],
    pitch: f64,
    bits: Vec<u8>,
}

impl BitMask {
    pub fn empty(dims: [usize; 3], origin: [i64; 3], pitch: f64) -> Self {
        Self {
            dims,
            origin,
            pitch,
            bits: vec![0; dims.iter().product()],
        }
    }

    pub fn from_bits(dims: [usize; 3], origin: [i64; 3], pitch: f64, bits: Vec<u8>) -> Self {
        assert_eq!(bits.len(), dims.iter().product::<usize>());
        Self {
            dims,
            origin,
            pitch,
            bits: bits.into_iter().map(|b| (b != 0) as u8).collect(),
        }
    }

    /// Nonzero voxels of `v` become foreground.
    pub fn from_volume(v: &Volume) -> Self {
        Self::from_bits(
            v.dims(),
            v.origin(),
            v.pitch(),
            v.data().iter().map(|&x| (x != 0.0) as u8).collect(),
        )
    }

    pub fn to_volume(&self) -> Volume {
        Volume::new(
            self.dims,
            self.origin,
            self.pitch,
            VolumeKind::Raw16,
            self.bits.iter().map(|&b| b as f32).collect(),
        )
        .expect("mask dims are valid")
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

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        x + self.dims[0] * (y + self.dims[1] * z)
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, z: usize) -> bool {
        self.bits[self.index(x, y, z)] != 0
    }

    pub fn set(&mut self, x: usize, y: usize, z: usize, on: bool) {
        let i = self.index(x, y, z);
        self.bits[i] = on as u8;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b != 0).count()
    }

    pub(crate) fn bits_mut(&mut self) -> &mut [u8] {
        &mut self.bits
    }
}

/// `mask[i] = score[i] ≥ threshold`.
pub fn binarize(score: &Volume, threshold: f32) -> BitMask {
    BitMask::from_bits(
        score.dims(),
        score.origin(),
        score.pitch(),
        score.data().iter().map(|&s| (s >= threshold) as u8).collect(),
    )
}

/// Full segmentation stage on a normalized volume: blockwise scoring and
/// thresholding, blockwise thinning, fragment extraction.
pub fn segment_volume(
    v: &Volume,
    spec: &SegmenterSpec,
    layout: &ChunkLayout,
    threshold: f32,
    interval: usize,
) -> Result<SegmentGraph, SegmentError> {
    let mask = run_blockwise(v, spec, layout, threshold)?;
    let skel = skeletonize_blockwise(&mask, layout.skel_block);
    let mut graph = extract_graph(&skel, interval);
    graph.source_hash = Some(v.content_hash());
    Ok(graph)
}
