//! Clamped interpolating B-splines with analytic derivatives.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{Curve, GeometryError};
use crate::Vec3;

/// Default (and maximum) spline degree.
pub const DEGREE: usize = 4;

/// Interpolating clamped B-spline on `t ∈ [0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamCurve {
    degree: usize,
    knots: Vec<f64>,
    control: Vec<Vec3>,
    /// Interpolated input points and their chord-length parameters.
    points: Vec<Vec3>,
    params: Vec<f64>,
}

impl ParamCurve {
    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn control_points(&self) -> &[Vec3] {
        &self.control
    }

    /// The points the curve was fitted through.
    pub fn points(&self) -> &[Vec3] {
        &self.points
    }

    /// Parameter value at which the curve passes through `points()[i]`.
    pub fn params(&self) -> &[f64] {
        &self.params
    }

    fn find_span(&self, u: f64) -> usize {
        let n = self.control.len() - 1;
        let p = self.degree;
        if u >= self.knots[n + 1] {
            return n;
        }
        if u <= self.knots[p] {
            return p;
        }
        let (mut lo, mut hi) = (p, n + 1);
        let mut mid = (lo + hi) / 2;
        while u < self.knots[mid] || u >= self.knots[mid + 1] {
            if u < self.knots[mid] {
                hi = mid;
            } else {
                lo = mid;
            }
            mid = (lo + hi) / 2;
        }
        mid
    }
}

/// Basis functions and their derivatives up to `nders` at `u` in `span`.
/// Returns `ders[k][j]` = k-th derivative of `N_{span-p+j, p}`.
fn basis_derivatives(knots: &[f64], span: usize, u: f64, p: usize, nders: usize) -> Vec<Vec<f64>> {
    let mut ndu = vec![vec![0.0; p + 1]; p + 1];
    let mut left = vec![0.0; p + 1];
    let mut right = vec![0.0; p + 1];
    ndu[0][0] = 1.0;
    for j in 1..=p {
        left[j] = u - knots[span + 1 - j];
        right[j] = knots[span + j] - u;
        let mut saved = 0.0;
        for r in 0..j {
            ndu[j][r] = right[r + 1] + left[j - r];
            let temp = ndu[r][j - 1] / ndu[j][r];
            ndu[r][j] = saved + right[r + 1] * temp;
            saved = left[j - r] * temp;
        }
        ndu[j][j] = saved;
    }
    let mut ders = vec![vec![0.0; p + 1]; nders + 1];
    for j in 0..=p {
        ders[0][j] = ndu[j][p];
    }
    let mut a = vec![vec![0.0; p + 1]; 2];
    for r in 0..=p {
        let (mut s1, mut s2) = (0usize, 1usize);
        a[0][0] = 1.0;
        for k in 1..=nders.min(p) {
            let mut d = 0.0;
            let rk = r as isize - k as isize;
            let pk = p - k;
            if r >= k {
                a[s2][0] = a[s1][0] / ndu[pk + 1][rk as usize];
                d = a[s2][0] * ndu[rk as usize][pk];
            }
            let j1 = if rk >= -1 { 1 } else { (-rk) as usize };
            let j2 = if (r as isize - 1) <= pk as isize {
                k - 1
            } else {
                p - r
            };
            for j in j1..=j2 {
                let idx = (rk + j as isize) as usize;
                a[s2][j] = (a[s1][j] - a[s1][j - 1]) / ndu[pk + 1][idx];
                d += a[s2][j] * ndu[idx][pk];
            }
            if r <= pk {
                a[s2][k] = -a[s1][k - 1] / ndu[pk + 1][r];
                d += a[s2][k] * ndu[r][pk];
            }
            ders[k][r] = d;
            std::mem::swap(&mut s1, &mut s2);
        }
    }
    let mut factor = p as f64;
    for k in 1..=nders.min(p) {
        for j in 0..=p {
            ders[k][j] *= factor;
        }
        factor *= (p - k) as f64;
    }
    ders
}

impl Curve for ParamCurve {
    fn derivatives(&self, t: f64) -> [Vec3; 4] {
        let u = t.clamp(0.0, 1.0);
        let p = self.degree;
        let span = self.find_span(u);
        let ders = basis_derivatives(&self.knots, span, u, p, 3);
        let mut out = [Vec3::zeros(); 4];
        for (k, row) in ders.iter().enumerate().take(4) {
            for (j, &b) in row.iter().enumerate() {
                out[k] += self.control[span - p + j] * b;
            }
        }
        out
    }
}

/// Interpolating clamped B-spline through `points` with chord-length
/// parameterization and averaged knots.
///
/// Degree is 4, lowered to `n - 1` for fewer than 5 points. Consecutive
/// duplicate points are dropped before fitting.
pub fn fit_bspline(points: &[Vec3]) -> Result<ParamCurve, GeometryError> {
    if points.len() < 2 {
        return Err(GeometryError::TooFewPoints(points.len()));
    }
    let mut pts: Vec<Vec3> = Vec::with_capacity(points.len());
    for p in points {
        if pts.last().is_none_or(|q: &Vec3| (p - q).norm() > 1e-12) {
            pts.push(*p);
        }
    }
    if pts.len() < 2 {
        return Err(GeometryError::CoincidentPoints);
    }
    let n = pts.len() - 1;
    let p = DEGREE.min(n);

    let chords: Vec<f64> = pts.windows(2).map(|w| (w[1] - w[0]).norm()).collect();
    let total: f64 = chords.iter().sum();
    let mut params = Vec::with_capacity(n + 1);
    params.push(0.0);
    let mut acc = 0.0;
    for c in &chords[..n - 1] {
        acc += c;
        params.push(acc / total);
    }
    params.push(1.0);

    let m = n + p + 1;
    let mut knots = vec![0.0; m + 1];
    for k in knots.iter_mut().skip(m - p) {
        *k = 1.0;
    }
    for j in 1..=(n - p) {
        knots[j + p] = params[j..j + p].iter().sum::<f64>() / p as f64;
    }

    let mut curve = ParamCurve {
        degree: p,
        knots,
        control: vec![Vec3::zeros(); n + 1],
        points: pts,
        params,
    };

    let mut a = DMatrix::<f64>::zeros(n + 1, n + 1);
    for (row, &u) in curve.params.iter().enumerate() {
        let span = curve.find_span(u);
        let ders = basis_derivatives(&curve.knots, span, u, p, 0);
        for j in 0..=p {
            a[(row, span - p + j)] = ders[0][j];
        }
    }
    let lu = a.lu();
    let mut control = vec![Vec3::zeros(); n + 1];
    for axis in 0..3 {
        let rhs = DVector::from_iterator(n + 1, curve.points.iter().map(|q| q[axis]));
        let sol = lu.solve(&rhs).ok_or(GeometryError::Singular)?;
        for (c, v) in control.iter_mut().zip(sol.iter()) {
            c[axis] = *v;
        }
    }
    // Clamped ends interpolate exactly.
    control[0] = curve.points[0];
    control[n] = curve.points[n];
    curve.control = control;
    Ok(curve)
}
