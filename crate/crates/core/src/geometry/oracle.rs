//! Off-centerline training/oracle samples and the corrective steering law.
//!
//! An agent at `x` with frame `(T, n1, n2)` moving as `x + sT + s²/2·K` should
//! meet the reference curve `lookahead` ahead of its nearest point `c`. The
//! reference is continued by its own second-order expansion
//! `c + L·T₀ + L²/2·K₀`, so equating the lateral parts gives
//!
//! `K = [K₀ + 2(c − x)/L² + 2(T₀ − T)/L]⊥T`.
//!
//! On the centerline and aligned this is the curve's own curvature vector; a
//! lateral offset `δ` from a straight line yields `|K| = 2δ/L²` pointing back.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{
    closest_point, curvature_vector, fit_bspline, rmf, Curve, CurvatureVector, Frame,
    GeometryError, ParamCurve,
};
use crate::Vec3;

/// Corrective curvature toward `reference` for an agent at `frame`, and the
/// distance to the reference.
pub fn corrective_curvature(
    reference: &impl Curve,
    frame: &Frame,
    lookahead: f64,
    search_samples: usize,
) -> Result<(CurvatureVector, f64), GeometryError> {
    let x = frame.position;
    let (t_star, dist) = closest_point(reference, &x, search_samples);
    let c = reference.point(t_star);
    let mut t0 = reference
        .tangent(t_star)
        .ok_or(GeometryError::VanishingDerivative(t_star))?;
    if t0.dot(&frame.t) < 0.0 {
        t0 = -t0;
    }
    let k0 = curvature_vector(reference, t_star)?;
    let l = lookahead;
    let k = k0 + (c - x) * (2.0 / (l * l)) + (t0 - frame.t) * (2.0 / l);
    let k = k - frame.t * k.dot(&frame.t);
    Ok((CurvatureVector::new(k.dot(&frame.n1), k.dot(&frame.n2)), dist))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerturbOptions {
    /// Fraction of interpolation points to displace.
    pub fraction: f64,
    /// Displacement length, µm.
    pub magnitude: f64,
    /// Lookahead distance of the corrective law, µm (half the crop size).
    pub lookahead: f64,
    /// Number of RMF samples along the perturbed curve.
    pub samples: usize,
    pub seed: u64,
}

impl Default for PerturbOptions {
    fn default() -> Self {
        Self {
            fraction: 0.2,
            magnitude: 1.0,
            lookahead: 8.0,
            samples: 64,
            seed: 0,
        }
    }
}

/// A perturbed curve with frames along it and the curvature that steers each
/// frame back toward the original centerline.
#[derive(Debug, Clone)]
pub struct OracleSamples {
    pub curve: ParamCurve,
    pub frames: Vec<Frame>,
    pub corrective: Vec<CurvatureVector>,
}

/// Moves selected interpolation points and re-interpolates.
pub fn displace_points(
    curve: &ParamCurve,
    offsets: &[(usize, Vec3)],
) -> Result<ParamCurve, GeometryError> {
    let mut pts = curve.points().to_vec();
    for &(i, d) in offsets {
        if let Some(p) = pts.get_mut(i) {
            *p += d;
        }
    }
    fit_bspline(&pts)
}

/// Frames along `perturbed` and their corrective curvature toward `original`.
pub fn corrective_samples(
    original: &ParamCurve,
    perturbed: ParamCurve,
    samples: usize,
    lookahead: f64,
) -> Result<OracleSamples, GeometryError> {
    let frames = rmf(&perturbed, samples)?;
    let search = 64 * original.points().len().max(4);
    let corrective = frames
        .iter()
        .map(|f| corrective_curvature(original, f, lookahead, search).map(|(k, _)| k))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(OracleSamples {
        curve: perturbed,
        frames,
        corrective,
    })
}

/// Shifts a random `⌈fraction·n⌉` subset of the interpolation points by
/// `magnitude` perpendicular to the local tangent, re-interpolates, and
/// returns corrective curvature samples along the result.
pub fn perturb_for_oracle(
    curve: &ParamCurve,
    opts: &PerturbOptions,
) -> Result<OracleSamples, GeometryError> {
    let n = curve.points().len();
    let count = ((opts.fraction.clamp(0.0, 1.0) * n as f64).ceil() as usize).min(n);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut chosen: Vec<usize> = sample(&mut rng, n, count).into_vec();
    chosen.sort_unstable();
    let mut offsets = Vec::with_capacity(count);
    for i in chosen {
        let u = curve.params()[i];
        let tan = curve
            .tangent(u)
            .ok_or(GeometryError::VanishingDerivative(u))?;
        let basis = Frame::seeded(curve.point(u), tan)?;
        let angle: f64 = rng.random_range(0.0..std::f64::consts::TAU);
        let dir = basis.n1 * angle.cos() + basis.n2 * angle.sin();
        offsets.push((i, dir * opts.magnitude));
    }
    let perturbed = if offsets.is_empty() || opts.magnitude == 0.0 {
        curve.clone()
    } else {
        displace_points(curve, &offsets)?
    };
    corrective_samples(curve, perturbed, opts.samples, opts.lookahead)
}
