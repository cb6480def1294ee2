//! Differential geometry of fragments: spline fitting, Frenet quantities,
//! rotation-minimizing frames and curvature-vector decomposition.

mod analytic;
mod bspline;
mod frame;
mod oracle;
mod quadrature;

pub use analytic::{Circle, Helix, Line};
pub use bspline::{fit_bspline, ParamCurve};
pub use frame::{rmf, Frame};
pub use oracle::{
    corrective_curvature, corrective_samples, displace_points, perturb_for_oracle, OracleSamples,
    PerturbOptions,
};
pub use quadrature::{arc_length, arc_length_between, param_at_arc_length};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::Vec3;

/// Below this curvature a curve is treated as exactly straight.
pub const STRAIGHT_EPS: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("need at least two distinct points, got {0}")]
    TooFewPoints(usize),
    #[error("all input points coincide")]
    CoincidentPoints,
    #[error("first derivative vanishes at t = {0}")]
    VanishingDerivative(f64),
    #[error("consecutive frame samples coincide at index {0}")]
    CoincidentSamples(usize),
    #[error("need at least 2 frame samples, got {0}")]
    TooFewSamples(usize),
    #[error("frame does not match curve at t = {t}: {what} off by {err:e}")]
    FrameMismatch { t: f64, what: &'static str, err: f64 },
    #[error("frame is not orthonormal (deviation {0:e})")]
    NotOrthonormal(f64),
    #[error("interpolation system is singular")]
    Singular,
}

/// A regular parametric space curve on `t ∈ [0, 1]`.
pub trait Curve {
    /// Position and the first three derivatives with respect to `t`.
    fn derivatives(&self, t: f64) -> [Vec3; 4];

    fn point(&self, t: f64) -> Vec3 {
        self.derivatives(t)[0]
    }

    fn tangent(&self, t: f64) -> Option<Vec3> {
        let d1 = self.derivatives(t)[1];
        let n = d1.norm();
        (n > 0.0).then(|| d1 / n)
    }
}

impl<C: Curve + ?Sized> Curve for &C {
    fn derivatives(&self, t: f64) -> [Vec3; 4] {
        (**self).derivatives(t)
    }
}

/// Curvature vector `K = κN` in the RMF normal plane, units 1/µm.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CurvatureVector {
    pub k1: f64,
    pub k2: f64,
}

impl CurvatureVector {
    pub const ZERO: CurvatureVector = CurvatureVector { k1: 0.0, k2: 0.0 };

    pub fn new(k1: f64, k2: f64) -> Self {
        Self { k1, k2 }
    }

    pub fn magnitude(&self) -> f64 {
        self.k1.hypot(self.k2)
    }

    /// The 3D vector `k1·n1 + k2·n2`.
    pub fn to_world(&self, frame: &Frame) -> Vec3 {
        frame.n1 * self.k1 + frame.n2 * self.k2
    }

    pub fn clamped(&self, bound: f64) -> Self {
        Self {
            k1: self.k1.clamp(-bound, bound),
            k2: self.k2.clamp(-bound, bound),
        }
    }
}

/// Frenet quantities at one parameter value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Frenet {
    pub tangent: Vec3,
    /// Absent on straight pieces, where the normal is undefined.
    pub normal: Option<Vec3>,
    pub curvature: f64,
}

/// Unit tangent, principal normal and curvature magnitude.
///
/// `κ = |γ′ × γ″| / |γ′|³`, `N = T′ / |T′|`.
pub fn frenet(curve: &impl Curve, t: f64) -> Result<Frenet, GeometryError> {
    let [_, d1, d2, _] = curve.derivatives(t);
    let speed = d1.norm();
    if speed <= f64::EPSILON {
        return Err(GeometryError::VanishingDerivative(t));
    }
    let tangent = d1 / speed;
    let curvature = d1.cross(&d2).norm() / speed.powi(3);
    let normal = if curvature > STRAIGHT_EPS {
        // T′ is parallel to the component of γ″ orthogonal to T.
        let perp = d2 - tangent * d2.dot(&tangent);
        Some(perp.normalize())
    } else {
        None
    };
    Ok(Frenet {
        tangent,
        normal,
        curvature,
    })
}

/// Curvature vector `K = dT/ds` as a 3D vector (zero on straight pieces).
pub fn curvature_vector(curve: &impl Curve, t: f64) -> Result<Vec3, GeometryError> {
    let [_, d1, d2, _] = curve.derivatives(t);
    let speed2 = d1.norm_squared();
    if speed2 <= f64::EPSILON * f64::EPSILON {
        return Err(GeometryError::VanishingDerivative(t));
    }
    let tangent = d1 / speed2.sqrt();
    let k = (d2 - tangent * d2.dot(&tangent)) / speed2;
    if k.norm() < STRAIGHT_EPS {
        Ok(Vec3::zeros())
    } else {
        Ok(k)
    }
}

/// Components of the curvature vector in the frame's `(n1, n2)` plane.
///
/// The frame must sit on the curve at `t` with a matching tangent.
pub fn decompose_curvature(
    curve: &impl Curve,
    t: f64,
    frame: &Frame,
) -> Result<CurvatureVector, GeometryError> {
    let [pos, d1, _, _] = curve.derivatives(t);
    let pos_err = (pos - frame.position).norm();
    if pos_err > 1e-6 * (1.0 + pos.norm()) {
        return Err(GeometryError::FrameMismatch {
            t,
            what: "position",
            err: pos_err,
        });
    }
    let speed = d1.norm();
    if speed <= f64::EPSILON {
        return Err(GeometryError::VanishingDerivative(t));
    }
    let tan_err = (d1 / speed - frame.t).norm();
    if tan_err > 1e-6 {
        return Err(GeometryError::FrameMismatch {
            t,
            what: "tangent",
            err: tan_err,
        });
    }
    let k = curvature_vector(curve, t)?;
    Ok(CurvatureVector::new(k.dot(&frame.n1), k.dot(&frame.n2)))
}

/// Parameter of the point on `curve` nearest to `x`, and the distance.
///
/// Dense sampling followed by golden-section refinement around the best
/// sample.
pub fn closest_point(curve: &impl Curve, x: &Vec3, samples: usize) -> (f64, f64) {
    let samples = samples.max(8);
    let dist2 = |t: f64| (curve.point(t) - x).norm_squared();
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for i in 0..=samples {
        let d = dist2(i as f64 / samples as f64);
        if d < best_d {
            best_d = d;
            best = i;
        }
    }
    let h = 1.0 / samples as f64;
    let mut lo = (best as f64 - 1.0).max(0.0) * h;
    let mut hi = (best as f64 + 1.0).min(samples as f64) * h;
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut a = hi - g * (hi - lo);
    let mut b = lo + g * (hi - lo);
    let (mut fa, mut fb) = (dist2(a), dist2(b));
    for _ in 0..80 {
        if fa < fb {
            hi = b;
            b = a;
            fb = fa;
            a = hi - g * (hi - lo);
            fa = dist2(a);
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + g * (hi - lo);
            fb = dist2(b);
        }
    }
    let mut t = 0.5 * (lo + hi);
    let mut d = dist2(t);
    for cand in [0.0, 1.0, best as f64 * h] {
        let dc = dist2(cand);
        if dc < d {
            d = dc;
            t = cand;
        }
    }
    (t, d.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn straight_line_has_no_normal() {
        let line = Line::new(Vec3::zeros(), Vec3::new(10.0, 0.0, 0.0));
        let f = frenet(&line, 0.3).unwrap();
        assert_eq!(f.curvature, 0.0);
        assert!(f.normal.is_none());
        assert_relative_eq!(f.tangent, Vec3::x(), epsilon = 1e-15);
    }

    #[test]
    fn circle_normal_points_to_center() {
        let c = Circle::xy(Vec3::new(1.0, 2.0, 3.0), 4.0, 1.0);
        for &t in &[0.0, 0.17, 0.5, 0.93] {
            let f = frenet(&c, t).unwrap();
            assert_relative_eq!(f.curvature, 0.25, epsilon = 1e-12);
            let to_center = (c.center - c.point(t)).normalize();
            assert_relative_eq!(f.normal.unwrap(), to_center, epsilon = 1e-12);
        }
    }

    #[test]
    fn helix_curvature_matches_finite_differences() {
        // Oracle: curvature of dense samples via second differences in arc
        // length, independent of the analytic derivatives.
        let h = Helix::new(5.0, 2.0, 2.0 * std::f64::consts::PI);
        let t = 0.4;
        let dt = 1e-4;
        let p = |t: f64| h.point(t);
        let d1 = (p(t + dt) - p(t - dt)) / (2.0 * dt);
        let d2 = (p(t + dt) - 2.0 * p(t) + p(t - dt)) / (dt * dt);
        let fd = d1.cross(&d2).norm() / d1.norm().powi(3);
        let f = frenet(&h, t).unwrap();
        assert_relative_eq!(fd, 5.0 / 29.0, max_relative = 1e-6);
        assert_relative_eq!(f.curvature, fd, max_relative = 1e-6);
        assert_relative_eq!(f.curvature, 0.172_413_793, epsilon = 1e-9);
    }

    #[test]
    fn vanishing_derivative_is_an_error() {
        let line = Line::new(Vec3::zeros(), Vec3::zeros());
        assert!(matches!(
            frenet(&line, 0.5),
            Err(GeometryError::VanishingDerivative(_))
        ));
    }

    #[test]
    fn decompose_straight_is_zero() {
        let line = Line::new(Vec3::zeros(), Vec3::new(0.0, 5.0, 5.0));
        let frames = rmf(&line, 5).unwrap();
        let k = decompose_curvature(&line, 0.5, &frames[2]).unwrap();
        assert_eq!(k, CurvatureVector::ZERO);
    }

    #[test]
    fn decompose_circle_in_plane_normal() {
        let c = Circle::xy(Vec3::zeros(), 10.0, 1.0);
        let t = 0.25;
        let pos = c.point(t);
        let tan = c.tangent(t).unwrap();
        let n1 = (c.center - pos).normalize();
        let frame = Frame::new(pos, tan, n1).unwrap();
        let k = decompose_curvature(&c, t, &frame).unwrap();
        assert_relative_eq!(k.k1, 0.1, epsilon = 1e-12);
        assert_relative_eq!(k.k2, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn decompose_helix_preserves_magnitude() {
        let h = Helix::new(5.0, 2.0, 2.0 * std::f64::consts::PI);
        let frames = rmf(&h, 201).unwrap();
        for (i, frame) in frames.iter().enumerate().step_by(20) {
            let t = i as f64 / 200.0;
            let k = decompose_curvature(&h, t, frame).unwrap();
            assert_relative_eq!(k.magnitude(), 5.0 / 29.0, max_relative = 1e-9);
            // No residual along the tangent.
            let kw = curvature_vector(&h, t).unwrap();
            assert!(kw.dot(&frame.t).abs() < 1e-9);
        }
    }

    #[test]
    fn decompose_rejects_mismatched_frame() {
        let c = Circle::xy(Vec3::zeros(), 10.0, 1.0);
        let frames = rmf(&c, 11).unwrap();
        let err = decompose_curvature(&c, 0.5, &frames[2]).unwrap_err();
        assert!(matches!(err, GeometryError::FrameMismatch { .. }));
    }

    #[test]
    fn closest_point_on_circle() {
        let c = Circle::xy(Vec3::zeros(), 10.0, 1.0);
        let x = Vec3::new(0.0, 12.0, 0.0);
        let (t, d) = closest_point(&c, &x, 64);
        assert_relative_eq!(t, 0.25, epsilon = 1e-7);
        assert_relative_eq!(d, 2.0, epsilon = 1e-9);
    }
}
