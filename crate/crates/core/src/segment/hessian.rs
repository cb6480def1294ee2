//! Multiscale-free Hessian line filter with separable Gaussian derivatives.
//!
//! Each output voxel is a fixed-order sum over a `(2r+1)³` neighbourhood with
//! clamp-to-edge boundaries, so any sub-block padded by at least `r` voxels
//! reproduces the full-volume result exactly.

/// Half-width of the derivative kernels at scale `sigma`.
pub fn kernel_radius(sigma: f64) -> usize {
    (3.0 * sigma).ceil().max(1.0) as usize
}

/// Correlation kernels approximating smoothing, first and second derivative.
fn kernels(sigma: f64) -> [Vec<f32>; 3] {
    let r = kernel_radius(sigma) as i64;
    let u: Vec<f64> = (-r..=r).map(|i| i as f64).collect();
    let g: Vec<f64> = u.iter().map(|x| (-x * x / (2.0 * sigma * sigma)).exp()).collect();
    let gs: f64 = g.iter().sum();
    let g0: Vec<f64> = g.iter().map(|v| v / gs).collect();

    let mut d1: Vec<f64> = u.iter().zip(&g0).map(|(x, w)| x * w).collect();
    let m1: f64 = d1.iter().zip(&u).map(|(k, x)| k * x).sum();
    d1.iter_mut().for_each(|k| *k /= m1);

    let mut d2: Vec<f64> = u
        .iter()
        .zip(&g0)
        .map(|(x, w)| (x * x - sigma * sigma) * w)
        .collect();
    let mean = d2.iter().sum::<f64>() / d2.len() as f64;
    d2.iter_mut().for_each(|k| *k -= mean);
    let m2: f64 = d2.iter().zip(&u).map(|(k, x)| k * x * x / 2.0).sum();
    d2.iter_mut().for_each(|k| *k /= m2);

    let to32 = |v: Vec<f64>| v.into_iter().map(|x| x as f32).collect();
    [to32(g0), to32(d1), to32(d2)]
}

#[inline]
fn clamp_idx(i: isize, n: usize) -> usize {
    i.clamp(0, n as isize - 1) as usize
}

fn conv_x(src: &[f32], dims: [usize; 3], k: &[f32]) -> Vec<f32> {
    let nx = dims[0];
    let r = (k.len() / 2) as isize;
    let mut out = vec![0.0f32; src.len()];
    for (row_in, row_out) in src.chunks_exact(nx).zip(out.chunks_exact_mut(nx)) {
        for x in 0..nx {
            let mut acc = 0.0f32;
            for (j, &w) in k.iter().enumerate() {
                acc += w * row_in[clamp_idx(x as isize + j as isize - r, nx)];
            }
            row_out[x] = acc;
        }
    }
    out
}

fn conv_y(src: &[f32], dims: [usize; 3], k: &[f32]) -> Vec<f32> {
    let [nx, ny, _] = dims;
    let r = (k.len() / 2) as isize;
    let mut out = vec![0.0f32; src.len()];
    for (slab_in, slab_out) in src.chunks_exact(nx * ny).zip(out.chunks_exact_mut(nx * ny)) {
        for y in 0..ny {
            let row_out = &mut slab_out[y * nx..(y + 1) * nx];
            for (j, &w) in k.iter().enumerate() {
                let yy = clamp_idx(y as isize + j as isize - r, ny);
                let row_in = &slab_in[yy * nx..(yy + 1) * nx];
                for (o, &v) in row_out.iter_mut().zip(row_in) {
                    *o += w * v;
                }
            }
        }
    }
    out
}

fn conv_z_slice(src: &[f32], dims: [usize; 3], k: &[f32], z: usize, out: &mut [f32]) {
    let [nx, ny, nz] = dims;
    let plane = nx * ny;
    let r = (k.len() / 2) as isize;
    out.iter_mut().for_each(|o| *o = 0.0);
    for (j, &w) in k.iter().enumerate() {
        let zz = clamp_idx(z as isize + j as isize - r, nz);
        for (o, &v) in out.iter_mut().zip(&src[zz * plane..(zz + 1) * plane]) {
            *o += w * v;
        }
    }
}

/// Eigenvalues of a symmetric 3×3 matrix in ascending order.
fn sym_eigenvalues(a11: f64, a22: f64, a33: f64, a12: f64, a13: f64, a23: f64) -> [f64; 3] {
    let p1 = a12 * a12 + a13 * a13 + a23 * a23;
    let mut e = if p1 == 0.0 {
        [a11, a22, a33]
    } else {
        let q = (a11 + a22 + a33) / 3.0;
        let p2 = (a11 - q).powi(2) + (a22 - q).powi(2) + (a33 - q).powi(2) + 2.0 * p1;
        let p = (p2 / 6.0).sqrt();
        let (b11, b22, b33) = ((a11 - q) / p, (a22 - q) / p, (a33 - q) / p);
        let (b12, b13, b23) = (a12 / p, a13 / p, a23 / p);
        let det = b11 * (b22 * b33 - b23 * b23) - b12 * (b12 * b33 - b23 * b13)
            + b13 * (b12 * b23 - b22 * b13);
        let phi = (det / 2.0).clamp(-1.0, 1.0).acos() / 3.0;
        let hi = q + 2.0 * p * phi.cos();
        let lo = q + 2.0 * p * (phi + 2.0 * std::f64::consts::PI / 3.0).cos();
        [lo, 3.0 * q - hi - lo, hi]
    };
    e.sort_by(f64::total_cmp);
    e
}

/// Bright-line response `max(0, −λ₂ − |λ₃|)` from the scale-normalized
/// Hessian eigenvalues `λ₁ ≤ λ₂ ≤ λ₃`. Unnormalized.
pub fn line_response(data: &[f32], dims: [usize; 3], sigma: f64) -> Vec<f32> {
    let [g0, d1, d2] = kernels(sigma);
    let n = data.len();
    debug_assert_eq!(n, dims.iter().product::<usize>());

    let x2 = conv_x(data, dims, &d2);
    let y20 = conv_y(&x2, dims, &g0);
    drop(x2);
    let x1 = conv_x(data, dims, &d1);
    let y10 = conv_y(&x1, dims, &g0);
    let y11 = conv_y(&x1, dims, &d1);
    drop(x1);
    let x0 = conv_x(data, dims, &g0);
    let y00 = conv_y(&x0, dims, &g0);
    let y01 = conv_y(&x0, dims, &d1);
    let y02 = conv_y(&x0, dims, &d2);
    drop(x0);

    let plane = dims[0] * dims[1];
    let s2 = (sigma * sigma) as f32;
    let mut out = vec![0.0f32; n];
    let mut h = vec![vec![0.0f32; plane]; 6];
    for z in 0..dims[2] {
        conv_z_slice(&y20, dims, &g0, z, &mut h[0]);
        conv_z_slice(&y02, dims, &g0, z, &mut h[1]);
        conv_z_slice(&y00, dims, &d2, z, &mut h[2]);
        conv_z_slice(&y11, dims, &g0, z, &mut h[3]);
        conv_z_slice(&y10, dims, &d1, z, &mut h[4]);
        conv_z_slice(&y01, dims, &d1, z, &mut h[5]);
        let out_slice = &mut out[z * plane..(z + 1) * plane];
        for (i, o) in out_slice.iter_mut().enumerate() {
            let c = |m: usize| (h[m][i] * s2) as f64;
            let [_, l2, l3] = sym_eigenvalues(c(0), c(1), c(2), c(3), c(4), c(5));
            *o = (-l2 - l3.abs()).max(0.0) as f32;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{Matrix3, SymmetricEigen};
    use proptest::prelude::*;

    #[test]
    fn kernels_reproduce_polynomial_derivatives() {
        let [g0, d1, d2] = kernels(2.0);
        let r = (g0.len() / 2) as f64;
        let moment = |k: &[f32], p: i32| -> f64 {
            k.iter()
                .enumerate()
                .map(|(j, &w)| w as f64 * (j as f64 - r).powi(p))
                .sum()
        };
        assert!((moment(&g0, 0) - 1.0).abs() < 1e-6);
        assert!(moment(&d1, 0).abs() < 1e-6);
        assert!((moment(&d1, 1) - 1.0).abs() < 1e-6);
        assert!(moment(&d2, 0).abs() < 1e-6);
        assert!(moment(&d2, 1).abs() < 1e-6);
        assert!((moment(&d2, 2) - 2.0).abs() < 1e-6);
    }

    #[test]
    fn quadratic_field_has_exact_hessian_response() {
        // f = −(y² + z²)/2 about the centre: Hyy = Hzz = −1, Hxx = 0, so
        // −λ₂ − |λ₃| = σ²·1 − 0 away from the clamped edges.
        let dims = [21, 21, 21];
        let mut data = Vec::new();
        for z in 0..21 {
            for y in 0..21 {
                for _x in 0..21 {
                    let (dy, dz) = (y as f32 - 10.0, z as f32 - 10.0);
                    data.push(-(dy * dy + dz * dz) / 2.0);
                }
            }
        }
        let sigma = 1.5;
        let r = line_response(&data, dims, sigma);
        let v = r[10 + 21 * (10 + 21 * 10)];
        assert!((v as f64 - sigma * sigma).abs() < 1e-3, "{v}");
    }

    proptest! {
        #[test]
        fn eigenvalues_match_nalgebra(
            a in -5.0f64..5.0, b in -5.0f64..5.0, c in -5.0f64..5.0,
            d in -5.0f64..5.0, e in -5.0f64..5.0, f in -5.0f64..5.0,
        ) {
            let m = Matrix3::new(a, d, e, d, b, f, e, f, c);
            let mut want: Vec<f64> = SymmetricEigen::new(m).eigenvalues.iter().copied().collect();
            want.sort_by(f64::total_cmp);
            let got = sym_eigenvalues(a, b, c, d, e, f);
            for i in 0..3 {
                prop_assert!((got[i] - want[i]).abs() < 1e-6 * (1.0 + want[i].abs()));
            }
        }
    }
}
