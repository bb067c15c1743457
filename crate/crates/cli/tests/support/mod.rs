//! Brute-force references and random-case generators for the acceptance run.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector, Matrix2};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn discriminant(mean: &[f64], cov: &[f64], prior: f64, x: &[f64]) -> f64 {
    let n = mean.len();
    let s = DMatrix::from_row_slice(n, n, cov);
    let inv = s.clone().try_inverse().expect("invertible");
    let d = DVector::from_iterator(n, x.iter().zip(mean).map(|(a, b)| a - b));
    prior.ln() - 0.5 * s.determinant().ln() - 0.5 * (d.transpose() * inv * &d)[(0, 0)]
}

pub fn log_density(mean: &[f64], cov: &[f64], x: &[f64]) -> f64 {
    discriminant(mean, cov, 1.0, x) - 0.5 * mean.len() as f64 * (2.0 * std::f64::consts::PI).ln()
}

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
    let total: f64 = w.iter().sum();
    (0..pixels[0].len())
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

pub fn mean_filter(band: &[f32], nrows: usize, ncols: usize, k: usize) -> Vec<f64> {
    let h = (k / 2) as i64;
    let mut out = vec![0.0; nrows * ncols];
    for r in 0..nrows as i64 {
        for c in 0..ncols as i64 {
            let mut s = 0.0;
            for dr in -h..=h {
                for dc in -h..=h {
                    let rr = (r + dr).clamp(0, nrows as i64 - 1) as usize;
                    let cc = (c + dc).clamp(0, ncols as i64 - 1) as usize;
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
    4.0 * m.symmetric_eigen().eigenvalues.max().sqrt() * ps
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}

pub fn spd(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-2.0..2.0));
    let s = &a * a.transpose() + DMatrix::identity(n, n) * 0.5;
    (0..n * n).map(|i| s[(i / n, i % n)]).collect()
}

pub fn model_params(rng: &mut ChaCha8Rng, n: usize, k: usize) -> Vec<(Vec<f64>, Vec<f64>, f64)> {
    let mut v: Vec<(Vec<f64>, Vec<f64>, f64)> = (0..k)
        .map(|_| {
            let mean = (0..n).map(|_| rng.random_range(-10.0..10.0)).collect();
            (mean, spd(rng, n), rng.random_range(0.05..1.0))
        })
        .collect();
    let total: f64 = v.iter().map(|t| t.2).sum();
    v.iter_mut().for_each(|t| t.2 /= total);
    v
}

pub fn vector(rng: &mut ChaCha8Rng, n: usize, lim: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-lim..lim)).collect()
}
