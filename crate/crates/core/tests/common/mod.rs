//! Brute-force reference implementations shared by the integration tests.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector, Matrix2};
use proptest::prelude::*;

pub fn mat(cov: &[f64], n: usize) -> DMatrix<f64> {
    DMatrix::from_row_slice(n, n, cov)
}

/// `ln p − ½ ln|Σ| − ½ dᵀ Σ⁻¹ d` with an explicit inverse and determinant.
pub fn discriminant(mean: &[f64], cov: &[f64], prior: f64, x: &[f64]) -> f64 {
    let n = mean.len();
    let s = mat(cov, n);
    let inv = s.clone().try_inverse().expect("invertible");
    let d = DVector::from_iterator(n, x.iter().zip(mean).map(|(a, b)| a - b));
    let q = (d.transpose() * inv * &d)[(0, 0)];
    prior.ln() - 0.5 * s.determinant().ln() - 0.5 * q
}

pub fn log_density(mean: &[f64], cov: &[f64], x: &[f64]) -> f64 {
    let n = mean.len() as f64;
    discriminant(mean, cov, 1.0, x) - 0.5 * n * (2.0 * std::f64::consts::PI).ln()
}

/// `p_i f_i(x) / Σ_j p_j f_j(x)` evaluated in densities scaled by the largest one.
pub fn posteriors(params: &[(Vec<f64>, Vec<f64>, f64)], x: &[f64]) -> Vec<f64> {
    let g: Vec<f64> = params
        .iter()
        .map(|(m, c, p)| discriminant(m, c, *p, x))
        .collect();
    let top = g.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = g.iter().map(|v| (v - top).exp()).collect();
    let z: f64 = e.iter().sum();
    e.iter().map(|v| v / z).collect()
}

pub fn weighted_mean(pixels: &[Vec<f64>], w: &[f64]) -> Vec<f64> {
    let n = pixels[0].len();
    let total: f64 = w.iter().sum();
    (0..n)
        .map(|b| pixels.iter().zip(w).map(|(p, wi)| wi * p[b]).sum::<f64>() / total)
        .collect()
}

pub fn weighted_cov(pixels: &[Vec<f64>], w: &[f64], mean: &[f64]) -> Vec<f64> {
    let n = mean.len();
    let total: f64 = w.iter().sum();
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            out[i * n + j] = pixels
                .iter()
                .zip(w)
                .map(|(p, wi)| wi * (p[i] - mean[i]) * (p[j] - mean[j]))
                .sum::<f64>()
                / total;
        }
    }
    out
}

/// Two-pass `1/(N−1)` sample covariance.
pub fn sample_cov(pixels: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let w = vec![1.0; pixels.len()];
    let mean = weighted_mean(pixels, &w);
    let scale = pixels.len() as f64 / (pixels.len() - 1) as f64;
    let cov = weighted_cov(pixels, &w, &mean)
        .into_iter()
        .map(|v| v * scale)
        .collect();
    (mean, cov)
}

pub fn mean_filter(band: &[f32], nrows: usize, ncols: usize, k: usize) -> Vec<f64> {
    let h = (k / 2) as i64;
    let mut out = vec![0.0; nrows * ncols];
    for r in 0..nrows as i64 {
        for c in 0..ncols as i64 {
            let mut s = 0.0;
            for dr in -h..=h {
                for dc in -h..=h {
                    let rr = (r + dr).max(0).min(nrows as i64 - 1) as usize;
                    let cc = (c + dc).max(0).min(ncols as i64 - 1) as usize;
                    s += band[rr * ncols + cc] as f64;
                }
            }
            out[r as usize * ncols + c as usize] = s / (k * k) as f64;
        }
    }
    out
}

pub fn region_mean(values: &[f64], labels: &[u32], id: u32) -> f64 {
    let sel: Vec<f64> = values
        .iter()
        .zip(labels)
        .filter(|(_, l)| **l == id)
        .map(|(v, _)| *v)
        .collect();
    sel.iter().sum::<f64>() / sel.len() as f64
}

/// `4·sqrt(λ_max)·ps` of the pixel-center second moments plus `1/12` per axis.
pub fn major_axis(labels: &[u32], ncols: usize, id: u32, ps: f64) -> f64 {
    let pts: Vec<(f64, f64)> = labels
        .iter()
        .enumerate()
        .filter(|(_, l)| **l == id)
        .map(|(p, _)| ((p / ncols) as f64, (p % ncols) as f64))
        .collect();
    let n = pts.len() as f64;
    let my = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let mx = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let mut m = Matrix2::zeros();
    for (y, x) in &pts {
        let d = nalgebra::Vector2::new(y - my, x - mx);
        m += d * d.transpose() / n;
    }
    m[(0, 0)] += 1.0 / 12.0;
    m[(1, 1)] += 1.0 / 12.0;
    let ev = m.symmetric_eigen().eigenvalues;
    4.0 * ev.max().sqrt() * ps
}

/// Nonzero winding number; agrees with even-odd for simple polygons.
pub fn winding_inside(poly: &[(f64, f64)], y: f64, x: f64) -> bool {
    let mut wn = 0i32;
    for i in 0..poly.len() {
        let (y0, x0) = poly[i];
        let (y1, x1) = poly[(i + 1) % poly.len()];
        let cross = (x1 - x0) * (y - y0) - (x - x0) * (y1 - y0);
        if y0 <= y {
            if y1 > y && cross > 0.0 {
                wn += 1;
            }
        } else if y1 <= y && cross < 0.0 {
            wn -= 1;
        }
    }
    wn != 0
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

/// Symmetric positive definite `n × n` matrix `A Aᵀ + εI`, row-major.
pub fn spd(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-2.0f64..2.0, n * n).prop_map(move |a| {
        let a = DMatrix::from_row_slice(n, n, &a);
        let s = &a * a.transpose() + DMatrix::identity(n, n) * 0.5;
        let mut out = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                out.push(s[(i, j)]);
            }
        }
        out
    })
}

/// `(mean, covariance, prior)` triples for `k` classes in `n` bands.
pub fn model_params(n: usize, k: usize) -> impl Strategy<Value = Vec<(Vec<f64>, Vec<f64>, f64)>> {
    prop::collection::vec(
        (
            prop::collection::vec(-10.0f64..10.0, n),
            spd(n),
            0.05f64..1.0,
        ),
        k,
    )
    .prop_map(|mut v| {
        let total: f64 = v.iter().map(|t| t.2).sum();
        v.iter_mut().for_each(|t| t.2 /= total);
        v
    })
}
