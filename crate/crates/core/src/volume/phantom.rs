//! Synthetic tube phantoms with known centerlines.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{Volume, VolumeError, VolumeKind};
use crate::geometry::{arc_length, fit_bspline, Curve, ParamCurve};
use crate::Vec3;

/// Attenuation applied where the nearest centerline parameter lies in
/// `[t_start, t_end]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gap {
    pub curve: usize,
    pub t_start: f64,
    pub t_end: f64,
    pub attenuation: f64,
}

fn default_pitch() -> f64 {
    1.0
}

fn default_radius() -> f64 {
    2.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhantomSpec {
    pub dims: [usize; 3],
    #[serde(default)]
    pub origin: [i64; 3],
    #[serde(default = "default_pitch")]
    pub pitch: f64,
    /// Control polylines in global µm.
    pub curves: Vec<Vec<[f64; 3]>>,
    /// Tube radius in µm; the radial profile is Gaussian with σ = radius / 2.
    #[serde(default = "default_radius")]
    pub tube_radius: f64,
    pub peak_intensity: f64,
    pub background: f64,
    #[serde(default)]
    pub noise_sd: f64,
    #[serde(default)]
    pub gaps: Vec<Gap>,
    #[serde(default)]
    pub seed: u64,
}

impl PhantomSpec {
    pub fn validate(&self) -> Result<(), VolumeError> {
        let bad = |m: &str| Err(VolumeError::InvalidPhantom(m.to_string()));
        if self.dims.contains(&0) {
            return Err(VolumeError::BadDims(self.dims));
        }
        if !(self.pitch > 0.0) {
            return Err(VolumeError::BadPitch([self.pitch; 3]));
        }
        if !(self.tube_radius > 0.0) {
            return bad("tube_radius must be positive");
        }
        if !(self.peak_intensity > self.background) {
            return bad("peak_intensity must exceed background");
        }
        if self.noise_sd < 0.0 {
            return bad("noise_sd must be non-negative");
        }
        for (i, c) in self.curves.iter().enumerate() {
            if c.len() < 5 {
                return Err(VolumeError::InvalidPhantom(format!(
                    "curve {i} has {} control points, need at least 5",
                    c.len()
                )));
            }
        }
        for g in &self.gaps {
            if g.curve >= self.curves.len() {
                return bad("gap references a missing curve");
            }
            if !(0.0..=1.0).contains(&g.attenuation) {
                return bad("gap attenuation must lie in [0, 1]");
            }
            if g.t_start > g.t_end {
                return bad("gap interval is reversed");
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthCurve {
    pub id: u32,
    pub curve: ParamCurve,
}

/// Centerlines of a phantom, in µm.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub curves: Vec<TruthCurve>,
}

impl GroundTruth {
    pub fn is_empty(&self) -> bool {
        self.curves.is_empty()
    }
}

/// Renders the phantom: `background + Σ peak·exp(−d²/2σ²)·gap` plus clamped
/// Gaussian noise, rounded to 16-bit. Deterministic for a fixed seed.
pub fn generate_phantom(spec: &PhantomSpec) -> Result<(Volume, GroundTruth), VolumeError> {
    spec.validate()?;
    let dims = spec.dims;
    let n: usize = dims.iter().product();
    let pitch = spec.pitch;
    let origin = spec.origin;
    let lo = Vec3::new(
        origin[0] as f64 * pitch,
        origin[1] as f64 * pitch,
        origin[2] as f64 * pitch,
    );
    let hi = lo + Vec3::new(
        (dims[0] - 1) as f64 * pitch,
        (dims[1] - 1) as f64 * pitch,
        (dims[2] - 1) as f64 * pitch,
    );

    let mut truth = GroundTruth::default();
    let mut outside = Vec::new();
    for (i, poly) in spec.curves.iter().enumerate() {
        let pts: Vec<Vec3> = poly.iter().map(|p| Vec3::new(p[0], p[1], p[2])).collect();
        let curve = fit_bspline(&pts)?;
        let inside = (0..=200).all(|k| {
            let p = curve.point(k as f64 / 200.0);
            (0..3).all(|a| p[a] >= lo[a] - 1e-9 && p[a] <= hi[a] + 1e-9)
        });
        if !inside {
            outside.push(i);
        }
        truth.curves.push(TruthCurve {
            id: i as u32,
            curve,
        });
    }
    if !outside.is_empty() {
        return Err(VolumeError::CurvesOutOfBounds(outside));
    }

    let sigma = spec.tube_radius / 2.0;
    let cutoff = 4.0 * sigma;
    let mut signal = vec![0.0f64; n];
    // Nearest centerline distance² (µm²) and parameter, per voxel, for the
    // curve currently being rendered.
    let mut nearest = vec![(f64::INFINITY, 0.0f64); n];
    let mut touched: Vec<usize> = Vec::new();

    for (ci, tc) in truth.curves.iter().enumerate() {
        let len = arc_length(&tc.curve);
        let steps = ((len / (0.25 * pitch)).ceil() as usize).max(1);
        let samples: Vec<(Vec3, f64)> = (0..=steps)
            .map(|k| {
                let t = k as f64 / steps as f64;
                (tc.curve.point(t), t)
            })
            .collect();
        for w in samples.windows(2) {
            let ((a, ta), (b, tb)) = (w[0], w[1]);
            let ab = b - a;
            let ab2 = ab.norm_squared();
            let mut vlo = [0usize; 3];
            let mut vhi = [0usize; 3];
            let mut empty = false;
            for ax in 0..3 {
                let mn = a[ax].min(b[ax]) - cutoff;
                let mx = a[ax].max(b[ax]) + cutoff;
                let l = (mn / pitch - origin[ax] as f64).ceil().max(0.0);
                let h = (mx / pitch - origin[ax] as f64).floor();
                if h < 0.0 || l > (dims[ax] - 1) as f64 {
                    empty = true;
                    break;
                }
                vlo[ax] = l as usize;
                vhi[ax] = (h as usize).min(dims[ax] - 1);
            }
            if empty {
                continue;
            }
            for z in vlo[2]..=vhi[2] {
                for y in vlo[1]..=vhi[1] {
                    for x in vlo[0]..=vhi[0] {
                        let p = Vec3::new(
                            (x as i64 + origin[0]) as f64 * pitch,
                            (y as i64 + origin[1]) as f64 * pitch,
                            (z as i64 + origin[2]) as f64 * pitch,
                        );
                        let s = if ab2 > 0.0 {
                            ((p - a).dot(&ab) / ab2).clamp(0.0, 1.0)
                        } else {
                            0.0
                        };
                        let d2 = (a + ab * s - p).norm_squared();
                        let idx = x + dims[0] * (y + dims[1] * z);
                        let slot = &mut nearest[idx];
                        if slot.0.is_infinite() {
                            touched.push(idx);
                        }
                        if d2 < slot.0 {
                            *slot = (d2, ta + (tb - ta) * s);
                        }
                    }
                }
            }
        }
        for &idx in &touched {
            let (d2, t) = nearest[idx];
            let mut atten = 1.0;
            for g in spec.gaps.iter().filter(|g| g.curve == ci) {
                if t >= g.t_start && t <= g.t_end {
                    atten *= g.attenuation;
                }
            }
            signal[idx] += spec.peak_intensity * (-d2 / (2.0 * sigma * sigma)).exp() * atten;
            nearest[idx] = (f64::INFINITY, 0.0);
        }
        touched.clear();
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let noise = Normal::new(0.0, spec.noise_sd.max(0.0))
        .map_err(|e| VolumeError::InvalidPhantom(e.to_string()))?;
    let data: Vec<f32> = signal
        .into_iter()
        .map(|s| {
            let eps = if spec.noise_sd > 0.0 {
                noise.sample(&mut rng)
            } else {
                0.0
            };
            (spec.background + s + eps).clamp(0.0, 65535.0).round() as f32
        })
        .collect();
    let vol = Volume::new(dims, origin, pitch, VolumeKind::Raw16, data)?;
    Ok((vol, truth))
}
