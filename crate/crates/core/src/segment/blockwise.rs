use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::thinning::skeletonize;
use super::{apply_min_max, binarize, BitMask, SegmentError, SegmenterSpec};
use crate::volume::{Volume, VolumeKind};

fn default_block() -> [usize; 3] {
    [100; 3]
}

fn default_border() -> usize {
    14
}

fn default_skel_block() -> [usize; 3] {
    [300; 3]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChunkLayout {
    #[serde(default = "default_block")]
    pub block: [usize; 3],
    /// Context voxels added on each side of a scoring block.
    #[serde(default = "default_border")]
    pub border: usize,
    #[serde(default = "default_skel_block")]
    pub skel_block: [usize; 3],
}

impl Default for ChunkLayout {
    fn default() -> Self {
        Self {
            block: default_block(),
            border: default_border(),
            skel_block: default_skel_block(),
        }
    }
}

impl ChunkLayout {
    pub fn validate(&self) -> Result<(), SegmentError> {
        if self.block.contains(&0) || self.skel_block.contains(&0) {
            return Err(SegmentError::BadLayout("block sizes must be positive".into()));
        }
        Ok(())
    }
}

/// `[lo, hi)` tiles covering `dims`, z-major, the last tile per axis clamped.
pub(crate) fn tiles(dims: [usize; 3], block: [usize; 3]) -> Vec<([usize; 3], [usize; 3])> {
    let mut out = Vec::new();
    for z in (0..dims[2]).step_by(block[2]) {
        for y in (0..dims[1]).step_by(block[1]) {
            for x in (0..dims[0]).step_by(block[0]) {
                let lo = [x, y, z];
                let hi = [
                    (x + block[0]).min(dims[0]),
                    (y + block[1]).min(dims[1]),
                    (z + block[2]).min(dims[2]),
                ];
                out.push((lo, hi));
            }
        }
    }
    out
}

/// Scores each block with `layout.border` voxels of context, keeps only the
/// interior, then thresholds at `threshold`. Methods that min-max normalize
/// use the range over all interiors, so the result equals monolithic
/// [`super::score_foreground`] + [`binarize`] whenever the scorer's support
/// radius is at most the border.
pub fn run_blockwise(
    v: &Volume,
    spec: &SegmenterSpec,
    layout: &ChunkLayout,
    threshold: f32,
) -> Result<BitMask, SegmentError> {
    if v.kind() != VolumeKind::NormalizedFloat {
        return Err(SegmentError::NotNormalized);
    }
    layout.validate()?;
    let dims = v.dims();
    let b = layout.border;
    let blocks = tiles(dims, layout.block);

    let parts: Vec<Vec<f32>> = blocks
        .par_iter()
        .map(|&(lo, hi)| -> Result<Vec<f32>, SegmentError> {
            let plo = [lo[0].saturating_sub(b), lo[1].saturating_sub(b), lo[2].saturating_sub(b)];
            let phi = [
                (hi[0] + b).min(dims[0]),
                (hi[1] + b).min(dims[1]),
                (hi[2] + b).min(dims[2]),
            ];
            let padded = v.sub_block(plo, phi);
            let raw = spec.raw_scores(&padded)?;
            let pd = padded.dims();
            let mut interior = Vec::with_capacity((0..3).map(|a| hi[a] - lo[a]).product());
            for z in lo[2]..hi[2] {
                for y in lo[1]..hi[1] {
                    let row = (lo[0] - plo[0]) + pd[0] * ((y - plo[1]) + pd[1] * (z - plo[2]));
                    interior.extend_from_slice(&raw[row..row + (hi[0] - lo[0])]);
                }
            }
            Ok(interior)
        })
        .collect::<Result<_, _>>()?;

    let range = if spec.normalizes() {
        let (lo, hi) = parts
            .iter()
            .map(|p| super::range_of(p))
            .fold((f32::INFINITY, f32::NEG_INFINITY), |a, b| (a.0.min(b.0), a.1.max(b.1)));
        Some((lo, hi))
    } else {
        None
    };

    let mut mask = BitMask::empty(dims, v.origin(), v.pitch());
    for ((lo, hi), mut part) in blocks.into_iter().zip(parts) {
        if let Some((rlo, rhi)) = range {
            apply_min_max(&mut part, rlo, rhi);
        }
        let w = hi[0] - lo[0];
        let mut k = 0;
        for z in lo[2]..hi[2] {
            for y in lo[1]..hi[1] {
                let start = mask.index(lo[0], y, z);
                for (dst, &s) in mask.bits_mut()[start..start + w].iter_mut().zip(&part[k..k + w]) {
                    *dst = (s >= threshold) as u8;
                }
                k += w;
            }
        }
    }
    Ok(mask)
}

/// Monolithic reference for [`run_blockwise`].
pub fn run_monolithic(v: &Volume, spec: &SegmenterSpec, threshold: f32) -> Result<BitMask, SegmentError> {
    Ok(binarize(&super::score_foreground(v, spec)?, threshold))
}

/// Skeleton endpoints within this many voxels of an internal block face are
/// candidates for stitching.
const STITCH_MARGIN: i64 = 6;
/// Largest gap bridged across a block face, in voxels.
const STITCH_REACH: f64 = 12.0;

fn neighbour_count(m: &BitMask, x: usize, y: usize, z: usize) -> usize {
    let d = m.dims();
    let mut c = 0;
    for dz in -1i64..=1 {
        for dy in -1i64..=1 {
            for dx in -1i64..=1 {
                if (dx, dy, dz) == (0, 0, 0) {
                    continue;
                }
                let (a, b, cc) = (x as i64 + dx, y as i64 + dy, z as i64 + dz);
                if a >= 0
                    && b >= 0
                    && cc >= 0
                    && (a as usize) < d[0]
                    && (b as usize) < d[1]
                    && (cc as usize) < d[2]
                    && m.get(a as usize, b as usize, cc as usize)
                {
                    c += 1;
                }
            }
        }
    }
    c
}

/// 26-connected digital segment between two voxels, both ends included.
fn digital_line(a: [i64; 3], b: [i64; 3]) -> Vec<[i64; 3]> {
    let steps = (0..3).map(|i| (b[i] - a[i]).abs()).max().unwrap();
    (0..=steps)
        .map(|k| {
            let t = if steps == 0 { 0.0 } else { k as f64 / steps as f64 };
            let mut p = [0i64; 3];
            for i in 0..3 {
                p[i] = (a[i] as f64 + (b[i] - a[i]) as f64 * t).round() as i64;
            }
            p
        })
        .collect()
}

/// Thins each `skel_block` tile independently (in parallel), then stitches
/// skeleton ends that face each other across internal tile faces with
/// digital line segments.
pub fn skeletonize_blockwise(mask: &BitMask, skel_block: [usize; 3]) -> BitMask {
    let dims = mask.dims();
    let blocks = tiles(dims, skel_block);
    if blocks.len() == 1 {
        return skeletonize(mask);
    }
    let thinned: Vec<BitMask> = blocks
        .par_iter()
        .map(|&(lo, hi)| {
            let sub_dims = [hi[0] - lo[0], hi[1] - lo[1], hi[2] - lo[2]];
            let mut sub = BitMask::empty(sub_dims, [0; 3], mask.pitch());
            for z in 0..sub_dims[2] {
                for y in 0..sub_dims[1] {
                    for x in 0..sub_dims[0] {
                        if mask.get(lo[0] + x, lo[1] + y, lo[2] + z) {
                            sub.set(x, y, z, true);
                        }
                    }
                }
            }
            skeletonize(&sub)
        })
        .collect();

    let mut out = BitMask::empty(dims, mask.origin(), mask.pitch());
    let mut block_of = vec![u32::MAX; mask.bits().len()];
    for (bi, ((lo, _), sub)) in blocks.iter().zip(&thinned).enumerate() {
        let sd = sub.dims();
        for z in 0..sd[2] {
            for y in 0..sd[1] {
                for x in 0..sd[0] {
                    if sub.get(x, y, z) {
                        let i = out.index(lo[0] + x, lo[1] + y, lo[2] + z);
                        out.bits_mut()[i] = 1;
                        block_of[i] = bi as u32;
                    }
                }
            }
        }
    }

    // Ends close to an internal face, paired with the nearest skeleton voxel
    // of another tile (ends preferred), scanned in index order.
    let near_internal_face = |p: [usize; 3], bi: usize| {
        let (lo, hi) = blocks[bi];
        (0..3).any(|a| {
            (lo[a] > 0 && (p[a] - lo[a]) as i64 <= STITCH_MARGIN)
                || (hi[a] < dims[a] && (hi[a] - 1 - p[a]) as i64 <= STITCH_MARGIN)
        })
    };
    let coords = |i: usize| [i % dims[0], (i / dims[0]) % dims[1], i / (dims[0] * dims[1])];
    let ends: Vec<usize> = (0..out.bits().len())
        .filter(|&i| out.bits()[i] != 0)
        .filter(|&i| {
            let p = coords(i);
            neighbour_count(&out, p[0], p[1], p[2]) <= 1 && near_internal_face(p, block_of[i] as usize)
        })
        .collect();
    let r = STITCH_REACH.ceil() as i64;
    let mut links: Vec<(usize, usize)> = Vec::new();
    for &e in &ends {
        let p = coords(e);
        let mut best: Option<(bool, f64, usize)> = None;
        for dz in -r..=r {
            for dy in -r..=r {
                for dx in -r..=r {
                    let q = [p[0] as i64 + dx, p[1] as i64 + dy, p[2] as i64 + dz];
                    if (0..3).any(|a| q[a] < 0 || q[a] >= dims[a] as i64) {
                        continue;
                    }
                    let j = out.index(q[0] as usize, q[1] as usize, q[2] as usize);
                    if out.bits()[j] == 0 || block_of[j] == block_of[e] {
                        continue;
                    }
                    let d = ((dx * dx + dy * dy + dz * dz) as f64).sqrt();
                    if d > STITCH_REACH {
                        continue;
                    }
                    let is_end = ends.binary_search(&j).is_ok();
                    // Ends first, then distance, then index.
                    let cand = (!is_end, d, j);
                    let better = match best {
                        None => true,
                        Some(b) => (cand.0, cand.1, cand.2) < (b.0, b.1, b.2),
                    };
                    if better {
                        best = Some(cand);
                    }
                }
            }
        }
        if let Some((_, _, j)) = best {
            links.push((e.min(j), e.max(j)));
        }
    }
    links.sort_unstable();
    links.dedup();
    for (a, b) in links {
        let (pa, pb) = (coords(a), coords(b));
        let line = digital_line(
            [pa[0] as i64, pa[1] as i64, pa[2] as i64],
            [pb[0] as i64, pb[1] as i64, pb[2] as i64],
        );
        for q in line {
            let i = out.index(q[0] as usize, q[1] as usize, q[2] as usize);
            out.bits_mut()[i] = 1;
        }
    }
    out
}
