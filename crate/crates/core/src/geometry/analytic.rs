//! Closed-form curves used as oracles and phantom centerlines.

use std::f64::consts::TAU;

use super::Curve;
use crate::Vec3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Line {
    pub a: Vec3,
    pub b: Vec3,
}

impl Line {
    pub fn new(a: Vec3, b: Vec3) -> Self {
        Self { a, b }
    }
}

impl Curve for Line {
    fn derivatives(&self, t: f64) -> [Vec3; 4] {
        let d = self.b - self.a;
        [self.a + d * t, d, Vec3::zeros(), Vec3::zeros()]
    }
}

/// Circle in a plane parallel to xy, traversed `turns` times on `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Circle {
    pub center: Vec3,
    pub radius: f64,
    pub turns: f64,
}

impl Circle {
    pub fn xy(center: Vec3, radius: f64, turns: f64) -> Self {
        Self {
            center,
            radius,
            turns,
        }
    }
}

impl Curve for Circle {
    fn derivatives(&self, t: f64) -> [Vec3; 4] {
        let w = TAU * self.turns;
        let (s, c) = (w * t).sin_cos();
        let r = self.radius;
        [
            self.center + Vec3::new(r * c, r * s, 0.0),
            Vec3::new(-r * w * s, r * w * c, 0.0),
            Vec3::new(-r * w * w * c, -r * w * w * s, 0.0),
            Vec3::new(r * w.powi(3) * s, -r * w.powi(3) * c, 0.0),
        ]
    }
}

/// `(r cos u, r sin u, c u)` for `u = t · u_max`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Helix {
    pub radius: f64,
    pub pitch: f64,
    pub u_max: f64,
}

impl Helix {
    pub fn new(radius: f64, pitch: f64, u_max: f64) -> Self {
        Self {
            radius,
            pitch,
            u_max,
        }
    }
}

impl Curve for Helix {
    fn derivatives(&self, t: f64) -> [Vec3; 4] {
        let w = self.u_max;
        let u = w * t;
        let (s, c) = u.sin_cos();
        let r = self.radius;
        [
            Vec3::new(r * c, r * s, self.pitch * u),
            Vec3::new(-r * s * w, r * c * w, self.pitch * w),
            Vec3::new(-r * c * w * w, -r * s * w * w, 0.0),
            Vec3::new(r * s * w.powi(3), -r * c * w.powi(3), 0.0),
        ]
    }
}
