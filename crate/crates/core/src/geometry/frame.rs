//! Rotation-minimizing frames propagated by double reflection.

use serde::{Deserialize, Serialize};

use super::{Curve, GeometryError};
use crate::Vec3;

/// Orthonormal moving frame `(t, n1, n2)` with `n1 × n2 = t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    pub position: Vec3,
    pub t: Vec3,
    pub n1: Vec3,
    pub n2: Vec3,
}

impl Frame {
    /// Frame from a tangent and a first normal; `n1` is re-orthogonalized
    /// against `t` and `n2 = t × n1`.
    pub fn new(position: Vec3, t: Vec3, n1: Vec3) -> Result<Self, GeometryError> {
        let tn = t.norm();
        if tn <= f64::EPSILON {
            return Err(GeometryError::NotOrthonormal(1.0));
        }
        let t = t / tn;
        let n1 = n1 - t * n1.dot(&t);
        let nn = n1.norm();
        if nn <= 1e-12 {
            return Err(GeometryError::NotOrthonormal(1.0));
        }
        let n1 = n1 / nn;
        Ok(Self {
            position,
            t,
            n1,
            n2: t.cross(&n1),
        })
    }

    /// Axis-aligned frame: `n1 = x`, `n2 = y`, `t = z`.
    pub fn identity(position: Vec3) -> Self {
        Self {
            position,
            t: Vec3::z(),
            n1: Vec3::x(),
            n2: Vec3::y(),
        }
    }

    /// Frame whose `n1` is the global z-axis projected off `t`, falling back
    /// to the x-axis when `t` is nearly parallel to z.
    pub fn seeded(position: Vec3, t: Vec3) -> Result<Self, GeometryError> {
        let tn = t.normalize();
        let reference = if tn.dot(&Vec3::z()).abs() > 0.999 {
            Vec3::x()
        } else {
            Vec3::z()
        };
        Self::new(position, tn, reference)
    }

    /// Largest deviation from orthonormality and right-handedness.
    pub fn orthonormality_error(&self) -> f64 {
        let dots = [
            self.t.dot(&self.n1).abs(),
            self.t.dot(&self.n2).abs(),
            self.n1.dot(&self.n2).abs(),
            (self.t.norm() - 1.0).abs(),
            (self.n1.norm() - 1.0).abs(),
            (self.n2.norm() - 1.0).abs(),
        ];
        let handed = (self.n1.cross(&self.n2) - self.t).norm();
        dots.into_iter().fold(handed, f64::max)
    }

    pub fn check_orthonormal(&self, tol: f64) -> Result<(), GeometryError> {
        let e = self.orthonormality_error();
        if e > tol {
            Err(GeometryError::NotOrthonormal(e))
        } else {
            Ok(())
        }
    }

    /// Moves the frame to `(position, tangent)` with one double-reflection
    /// step.
    pub fn transport(&self, position: Vec3, tangent: Vec3) -> Result<Self, GeometryError> {
        let t_next = tangent.normalize();
        let v1 = position - self.position;
        let c1 = v1.dot(&v1);
        if c1 <= 1e-24 {
            return Err(GeometryError::CoincidentSamples(0));
        }
        let r_l = self.n1 - v1 * (2.0 / c1 * v1.dot(&self.n1));
        let t_l = self.t - v1 * (2.0 / c1 * v1.dot(&self.t));
        let v2 = t_next - t_l;
        let c2 = v2.dot(&v2);
        let r_next = if c2 <= 1e-300 {
            r_l
        } else {
            r_l - v2 * (2.0 / c2 * v2.dot(&r_l))
        };
        Self::new(position, t_next, r_next)
    }
}

/// Rotation-minimizing frames at `n_samples` uniform parameter values.
///
/// The first frame is [`Frame::seeded`] at `t = 0`; the rest follow by double
/// reflection.
pub fn rmf(curve: &impl Curve, n_samples: usize) -> Result<Vec<Frame>, GeometryError> {
    if n_samples < 2 {
        return Err(GeometryError::TooFewSamples(n_samples));
    }
    let last = (n_samples - 1) as f64;
    let mut frames = Vec::with_capacity(n_samples);
    let t0 = curve
        .tangent(0.0)
        .ok_or(GeometryError::VanishingDerivative(0.0))?;
    frames.push(Frame::seeded(curve.point(0.0), t0)?);
    for i in 1..n_samples {
        let u = i as f64 / last;
        let tan = curve
            .tangent(u)
            .ok_or(GeometryError::VanishingDerivative(u))?;
        let prev = frames[i - 1];
        let next = prev
            .transport(curve.point(u), tan)
            .map_err(|e| match e {
                GeometryError::CoincidentSamples(_) => GeometryError::CoincidentSamples(i),
                other => other,
            })?;
        frames.push(next);
    }
    Ok(frames)
}
