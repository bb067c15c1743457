//! Small dense linear algebra for per-class covariance matrices.
//!
//! Matrices are square, row-major `Vec<f64>`. Band counts are small (a handful
//! to a few hundred), so a plain Cholesky factorization is all that is needed.

use crate::error::{Error, Result};

/// Ridge multipliers tried, in order, when a covariance fails to factorize.
pub const RIDGE_STEPS: [f64; 4] = [1e-10, 1e-8, 1e-6, 1e-4];

/// Lower-triangular Cholesky factor `L` with `A = L Lᵀ`.
#[derive(Debug, Clone, PartialEq)]
pub struct Cholesky {
    n: usize,
    lower: Vec<f64>,
}

impl Cholesky {
    /// Factorizes a symmetric matrix. Only the lower triangle is read.
    pub fn new(matrix: &[f64], n: usize) -> Result<Self> {
        if matrix.len() != n * n {
            return Err(Error::Dimension {
                expected: n * n,
                actual: matrix.len(),
            });
        }
        let mut l = vec![0.0; n * n];
        for j in 0..n {
            let mut d = matrix[j * n + j];
            for k in 0..j {
                d -= l[j * n + k] * l[j * n + k];
            }
            if !(d > 0.0) || !d.is_finite() {
                return Err(Error::NotPositiveDefinite(format!(" (pivot {j} is {d:e})")));
            }
            let djj = d.sqrt();
            l[j * n + j] = djj;
            for i in (j + 1)..n {
                let mut s = matrix[i * n + j];
                for k in 0..j {
                    s -= l[i * n + k] * l[j * n + k];
                }
                l[i * n + j] = s / djj;
            }
        }
        Ok(Self { n, lower: l })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    /// ln |A| = 2 Σ ln L_ii.
    pub fn log_det(&self) -> f64 {
        (0..self.n)
            .map(|i| self.lower[i * self.n + i].ln())
            .sum::<f64>()
            * 2.0
    }

    /// Squared Mahalanobis norm `vᵀ A⁻¹ v`, via forward substitution `L y = v`.
    /// `scratch` must hold at least `n` values.
    pub fn quad_form(&self, v: &[f64], scratch: &mut [f64]) -> f64 {
        let n = self.n;
        let y = &mut scratch[..n];
        let mut acc = 0.0;
        for i in 0..n {
            let row = &self.lower[i * n..i * n + i];
            let s: f64 = row.iter().zip(y.iter()).map(|(a, b)| a * b).sum();
            let yi = (v[i] - s) / self.lower[i * n + i];
            y[i] = yi;
            acc += yi * yi;
        }
        acc
    }

    /// `L z`, used to colour standard normal draws.
    pub fn mul_lower(&self, z: &[f64], out: &mut [f64]) {
        let n = self.n;
        for (i, o) in out.iter_mut().enumerate().take(n) {
            *o = self.lower[i * n..i * n + i + 1]
                .iter()
                .zip(z)
                .map(|(a, b)| a * b)
                .sum();
        }
    }
}

/// Result of fitting a covariance: the (possibly ridged) matrix, its factor,
/// and the multiplier that was needed (`0.0` when none).
#[derive(Debug, Clone)]
pub struct Regularized {
    pub matrix: Vec<f64>,
    pub factor: Cholesky,
    pub ridge: f64,
}

/// Symmetrizes and factorizes `cov`, adding `λ·trace/n·I` for increasing λ from
/// [`RIDGE_STEPS`] until the factorization succeeds. A zero-trace matrix uses a
/// unit scale so flat inputs still end up with a ridge floor.
pub fn regularize(cov: &[f64], n: usize) -> Result<Regularized> {
    if cov.len() != n * n {
        return Err(Error::Dimension {
            expected: n * n,
            actual: cov.len(),
        });
    }
    if cov.iter().any(|v| !v.is_finite()) {
        return Err(Error::NotPositiveDefinite(" (non-finite entries)".into()));
    }
    let mut sym = cov.to_vec();
    symmetrize(&mut sym, n);
    if let Ok(factor) = Cholesky::new(&sym, n) {
        return Ok(Regularized {
            matrix: sym,
            factor,
            ridge: 0.0,
        });
    }
    let trace: f64 = (0..n).map(|i| sym[i * n + i]).sum();
    let scale = if trace > 0.0 && trace.is_finite() {
        trace / n as f64
    } else {
        1.0
    };
    for &lambda in &RIDGE_STEPS {
        let mut m = sym.clone();
        for i in 0..n {
            m[i * n + i] += lambda * scale;
        }
        if let Ok(factor) = Cholesky::new(&m, n) {
            return Ok(Regularized {
                matrix: m,
                factor,
                ridge: lambda,
            });
        }
    }
    Err(Error::NotPositiveDefinite(format!(
        " after ridge {:e}",
        RIDGE_STEPS[RIDGE_STEPS.len() - 1]
    )))
}

pub fn symmetrize(m: &mut [f64], n: usize) {
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = 0.5 * (m[i * n + j] + m[j * n + i]);
            m[i * n + j] = avg;
            m[j * n + i] = avg;
        }
    }
}
