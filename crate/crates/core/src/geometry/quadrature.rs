//! Arc length by composite Gauss–Legendre quadrature.

use std::sync::OnceLock;

use super::Curve;

const ORDER: usize = 16;
const PANELS: usize = 64;

/// Nodes and weights on `[-1, 1]`, computed once by Newton iteration on the
/// Legendre polynomial.
fn gauss_legendre() -> &'static [(f64, f64); ORDER] {
    static RULE: OnceLock<[(f64, f64); ORDER]> = OnceLock::new();
    RULE.get_or_init(|| {
        let n = ORDER;
        let mut rule = [(0.0, 0.0); ORDER];
        for i in 0..n {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=n {
                    let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            rule[i] = (x, 2.0 / ((1.0 - x * x) * dp * dp));
        }
        rule
    })
}

/// Length of the curve between parameters `a` and `b`.
pub fn arc_length_between(curve: &impl Curve, a: f64, b: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    let rule = gauss_legendre();
    let h = (b - a) / PANELS as f64;
    let mut total = 0.0;
    for panel in 0..PANELS {
        let lo = a + panel as f64 * h;
        let mid = lo + 0.5 * h;
        let mut s = 0.0;
        for &(x, w) in rule {
            s += w * curve.derivatives(mid + 0.5 * h * x)[1].norm();
        }
        total += 0.5 * h * s;
    }
    total
}

pub fn arc_length(curve: &impl Curve) -> f64 {
    arc_length_between(curve, 0.0, 1.0)
}

/// Parameter at which the arc length from `t = 0` reaches `s` (bisection).
pub fn param_at_arc_length(curve: &impl Curve, s: f64) -> f64 {
    let total = arc_length(curve);
    if s <= 0.0 {
        return 0.0;
    }
    if s >= total {
        return 1.0;
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if arc_length_between(curve, 0.0, mid) < s {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}
