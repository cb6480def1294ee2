use super::{Volume, VolumeError, VolumeKind};
use crate::geometry::Frame;

/// Resamples a `size³` block aligned with `frame`: crop axes x, y, z follow
/// `n1`, `n2`, `t`, centered on the frame position, spaced `out_pitch` µm.
///
/// Trilinear interpolation; samples outside `v` are zero. Raw volumes are
/// rounded back to integers.
pub fn crop_aligned(
    v: &Volume,
    frame: &Frame,
    size: usize,
    out_pitch: f64,
) -> Result<Volume, VolumeError> {
    frame
        .check_orthonormal(1e-6)
        .map_err(VolumeError::Geometry)?;
    if size == 0 {
        return Err(VolumeError::BadDims([0; 3]));
    }
    let c = (size as f64 - 1.0) / 2.0;
    // Work in the source's voxel space: one crop step moves by step_* voxels.
    let scale = out_pitch / v.pitch();
    let step_i = frame.n1 * scale;
    let step_j = frame.n2 * scale;
    let step_k = frame.t * scale;
    let center = v.world_to_voxel(&frame.position);
    let mut data = Vec::with_capacity(size * size * size);
    for k in 0..size {
        let dk = k as f64 - c;
        for j in 0..size {
            let dj = j as f64 - c;
            for i in 0..size {
                let di = i as f64 - c;
                let p = center + step_i * di + step_j * dj + step_k * dk;
                data.push(v.sample_voxel(&p));
            }
        }
    }
    let data = match v.kind() {
        VolumeKind::Raw16 => data.into_iter().map(|x| x.round() as f32).collect(),
        VolumeKind::NormalizedFloat => data
            .into_iter()
            .map(|x| (x as f32).clamp(0.0, 1.0))
            .collect(),
    };
    Volume::new([size; 3], [0; 3], out_pitch, v.kind(), data)
}
