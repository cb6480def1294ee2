use super::{Volume, VolumeError, VolumeKind};

/// Monotone remapping of `src` so its empirical distribution follows `reference`.
///
/// Voxels are ranked by value with ties broken by linear index. A run of equal
/// values is assigned its mid-rank, so equal inputs stay equal. Rank `r` of
/// `n` maps to position `r·(m−1)/(n−1)` in the sorted reference (linear
/// interpolation between order statistics); a single voxel maps to the
/// reference median.
pub fn match_histogram(src: &Volume, reference: &Volume) -> Result<Volume, VolumeError> {
    if src.kind() != reference.kind() {
        return Err(VolumeError::KindMismatch);
    }
    if src.is_empty() || reference.is_empty() {
        return Err(VolumeError::Empty);
    }
    let n = src.len();
    let mut order: Vec<usize> = (0..n).collect();
    let data = src.data();
    order.sort_by(|&a, &b| data[a].total_cmp(&data[b]).then(a.cmp(&b)));

    let mut sorted_ref = reference.data().to_vec();
    sorted_ref.sort_by(f32::total_cmp);
    let m = sorted_ref.len();
    let quantile = |rank: f64| -> f64 {
        let pos = if n == 1 {
            (m - 1) as f64 / 2.0
        } else {
            rank * (m - 1) as f64 / (n - 1) as f64
        };
        let lo = pos.floor() as usize;
        let hi = (lo + 1).min(m - 1);
        let w = pos - lo as f64;
        sorted_ref[lo] as f64 * (1.0 - w) + sorted_ref[hi] as f64 * w
    };

    let mut out = vec![0.0f32; n];
    let mut start = 0;
    while start < n {
        let value = data[order[start]];
        let mut end = start + 1;
        while end < n && data[order[end]] == value {
            end += 1;
        }
        let mid_rank = (start + end - 1) as f64 / 2.0;
        let mut mapped = quantile(mid_rank);
        if src.kind() == VolumeKind::Raw16 {
            mapped = mapped.round();
        }
        for &i in &order[start..end] {
            out[i] = mapped as f32;
        }
        start = end;
    }
    Ok(src.with_data(src.kind(), out))
}
