//! Per-class Gaussian models and per-pixel maximum-likelihood classification.
//!
//! Each class is scored with the discriminant
//!
//! ```text
//! g_i(x) = ln p(ω_i) − ½ ln|Σ_i| − ½ (x − m_i)ᵀ Σ_i⁻¹ (x − m_i)
//! ```
//!
//! which is the log of `p(ω_i)·N(x; m_i, Σ_i)` without the shared constant
//! `−(n/2) ln 2π`. The label of a pixel is the argmax over classes.

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fsutil;
use crate::linalg::{self, Cholesky};
use crate::par;
use crate::raster::Raster;
use crate::training::TrainingSet;

/// Label value reserved for pixels left unclassified by the threshold.
pub const UNCLASSIFIED: u16 = 0;

#[derive(Debug, Clone)]
pub struct GaussianClassModel {
    class_name: String,
    mean: Vec<f64>,
    covariance: Vec<f64>,
    prior: f64,
    ridge: f64,
    factor: Cholesky,
    log_det: f64,
}

impl GaussianClassModel {
    /// Builds a model, symmetrizing and (if needed) ridge-regularizing the covariance.
    pub fn new(
        class_name: impl Into<String>,
        mean: Vec<f64>,
        covariance: Vec<f64>,
        prior: f64,
    ) -> Result<Self> {
        let n = mean.len();
        if n == 0 {
            return Err(Error::Parameter("model mean is empty".into()));
        }
        if mean.iter().any(|v| !v.is_finite()) {
            return Err(Error::NotPositiveDefinite(" (non-finite mean)".into()));
        }
        check_prior(prior)?;
        let reg = linalg::regularize(&covariance, n)?;
        let log_det = reg.factor.log_det();
        Ok(Self {
            class_name: class_name.into(),
            mean,
            covariance: reg.matrix,
            prior,
            ridge: reg.ridge,
            factor: reg.factor,
            log_det,
        })
    }

    pub fn class_name(&self) -> &str {
        &self.class_name
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    /// Row-major `n × n` covariance, after any regularization.
    pub fn covariance(&self) -> &[f64] {
        &self.covariance
    }

    pub fn prior(&self) -> f64 {
        self.prior
    }

    /// Ridge multiplier λ that had to be applied (`0` when none).
    pub fn ridge(&self) -> f64 {
        self.ridge
    }

    pub fn log_det(&self) -> f64 {
        self.log_det
    }

    pub fn nbands(&self) -> usize {
        self.mean.len()
    }

    pub fn with_prior(mut self, prior: f64) -> Result<Self> {
        check_prior(prior)?;
        self.prior = prior;
        Ok(self)
    }

    fn check_dim(&self, len: usize) -> Result<()> {
        if len != self.nbands() {
            return Err(Error::Dimension {
                expected: self.nbands(),
                actual: len,
            });
        }
        Ok(())
    }

    /// Squared Mahalanobis distance of `x` to the class mean. No dimension check.
    fn mahalanobis_sq(&self, x: &[f64], scratch: &mut Scratch) -> f64 {
        for ((d, xi), mi) in scratch.diff.iter_mut().zip(x).zip(&self.mean) {
            *d = xi - mi;
        }
        self.factor.quad_form(&scratch.diff, &mut scratch.solve)
    }

    fn discriminant_unchecked(&self, x: &[f64], scratch: &mut Scratch) -> f64 {
        self.prior.ln() - 0.5 * self.log_det - 0.5 * self.mahalanobis_sq(x, scratch)
    }

    pub fn discriminant(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x.len())?;
        let mut s = Scratch::new(self.nbands());
        Ok(self.discriminant_unchecked(x, &mut s))
    }

    /// Multivariate normal log-density `ln f(x | m, Σ)`, prior excluded.
    pub fn log_density(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x.len())?;
        let mut s = Scratch::new(self.nbands());
        Ok(self.log_density_unchecked(x, &mut s))
    }

    fn log_density_unchecked(&self, x: &[f64], scratch: &mut Scratch) -> f64 {
        -0.5 * (self.nbands() as f64 * (2.0 * PI).ln()
            + self.log_det
            + self.mahalanobis_sq(x, scratch))
    }

    /// Log-likelihood of i.i.d. observations: the sum of per-pixel log-densities.
    pub fn log_likelihood<P: AsRef<[f64]>>(&self, pixels: &[P]) -> Result<f64> {
        let mut s = Scratch::new(self.nbands());
        let mut total = 0.0;
        for p in pixels {
            let p = p.as_ref();
            self.check_dim(p.len())?;
            total += self.log_density_unchecked(p, &mut s);
        }
        Ok(total)
    }
}

fn check_prior(prior: f64) -> Result<()> {
    if !(prior > 0.0 && prior <= 1.0) {
        return Err(Error::Parameter(format!(
            "prior must lie in (0, 1], got {prior}"
        )));
    }
    Ok(())
}

/// Reusable per-thread buffers for pixel scoring.
#[derive(Debug, Clone)]
pub(crate) struct Scratch {
    diff: Vec<f64>,
    solve: Vec<f64>,
}

impl Scratch {
    pub(crate) fn new(n: usize) -> Self {
        Self {
            diff: vec![0.0; n],
            solve: vec![0.0; n],
        }
    }
}

/// Fills `out[i]` with `g_i(x)` for every model. Dimensions must already be checked.
pub(crate) fn discriminants_into(
    models: &[GaussianClassModel],
    x: &[f64],
    scratch: &mut Scratch,
    out: &mut [f64],
) {
    for (o, m) in out.iter_mut().zip(models) {
        *o = m.discriminant_unchecked(x, scratch);
    }
}

/// Index of the largest value; ties go to the lowest index.
pub(crate) fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Normalizes discriminants into posteriors in place using log-sum-exp.
pub(crate) fn softmax_in_place(values: &mut [f64]) {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in values.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in values.iter_mut() {
        *v /= sum;
    }
}

pub(crate) fn check_models(models: &[GaussianClassModel], nbands: usize) -> Result<()> {
    if models.is_empty() {
        return Err(Error::Parameter(
            "at least one class model is required".into(),
        ));
    }
    if models.len() > u16::MAX as usize {
        return Err(Error::Parameter(format!(
            "too many classes ({})",
            models.len()
        )));
    }
    for m in models {
        m.check_dim(nbands)?;
    }
    Ok(())
}

/// Posterior class probabilities `P(ω_i | x)` under the models' priors.
pub fn posteriors(models: &[GaussianClassModel], x: &[f64]) -> Result<Vec<f64>> {
    check_models(models, x.len())?;
    let mut s = Scratch::new(x.len());
    let mut g = vec![0.0; models.len()];
    discriminants_into(models, x, &mut s, &mut g);
    softmax_in_place(&mut g);
    Ok(g)
}

/// Mean vector, covariance and the ridge multiplier that was applied.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassStats {
    pub mean: Vec<f64>,
    /// Row-major `n × n`, `1/(N−1)` normalized, regularized to positive definite.
    pub covariance: Vec<f64>,
    pub ridge: f64,
}

/// Sample mean and covariance of the listed pixels (single-pass Welford update).
pub fn estimate_class_stats(raster: &Raster, pixels: &[(usize, usize)]) -> Result<ClassStats> {
    let n = raster.nbands();
    if pixels.len() < n + 1 {
        return Err(Error::TooFewPixels {
            class: String::new(),
            count: pixels.len(),
            required: n + 1,
        });
    }
    let mut mean = vec![0.0; n];
    let mut comoment = vec![0.0; n * n];
    let mut x = vec![0.0; n];
    let mut delta = vec![0.0; n];
    for (k, &(r, c)) in pixels.iter().enumerate() {
        if !raster.header().contains(r, c) {
            return Err(Error::Training(format!("pixel ({r}, {c}) outside raster")));
        }
        raster.pixel_at(r * raster.ncols() + c, &mut x);
        let count = (k + 1) as f64;
        for b in 0..n {
            delta[b] = x[b] - mean[b];
            mean[b] += delta[b] / count;
        }
        // C += δ_old ⊗ (x − m_new)
        for i in 0..n {
            for j in 0..n {
                comoment[i * n + j] += delta[i] * (x[j] - mean[j]);
            }
        }
    }
    let denom = (pixels.len() - 1) as f64;
    comoment.iter_mut().for_each(|v| *v /= denom);
    let reg = linalg::regularize(&comoment, n)?;
    Ok(ClassStats {
        mean,
        covariance: reg.matrix,
        ridge: reg.ridge,
    })
}

/// Fits one model per training class with equal priors.
pub fn train(raster: &Raster, training: &TrainingSet) -> Result<Vec<GaussianClassModel>> {
    let prior = 1.0 / training.len() as f64;
    training
        .classes()
        .iter()
        .map(|c| {
            let stats = estimate_class_stats(raster, &c.pixels).map_err(|e| match e {
                Error::TooFewPixels {
                    count, required, ..
                } => Error::TooFewPixels {
                    class: c.name.clone(),
                    count,
                    required,
                },
                other => other,
            })?;
            let mut m =
                GaussianClassModel::new(c.name.clone(), stats.mean, stats.covariance, prior)?;
            m.ridge = stats.ridge;
            Ok(m)
        })
        .collect()
}

/// Per-pixel class labels; `0` is unclassified, `k` is `class_table[k - 1]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassificationResult {
    pub nrows: usize,
    pub ncols: usize,
    pub labels: Vec<u16>,
    pub class_table: Vec<String>,
}

impl ClassificationResult {
    pub fn label(&self, row: usize, col: usize) -> u16 {
        self.labels[row * self.ncols + col]
    }

    /// Sidecar text: one `label<TAB>name` line per label value, starting with 0.
    pub fn class_table_text(&self) -> String {
        let mut s = String::from("0\tunclassified\n");
        for (i, n) in self.class_table.iter().enumerate() {
            s.push_str(&format!("{}\t{}\n", i + 1, n));
        }
        s
    }
}

/// Assigns each pixel to the class with the largest discriminant. With a
/// threshold, pixels whose winning posterior falls below it stay unclassified.
pub fn classify(
    raster: &Raster,
    models: &[GaussianClassModel],
    threshold: Option<f64>,
) -> Result<ClassificationResult> {
    check_models(models, raster.nbands())?;
    if let Some(t) = threshold {
        if !(t > 0.0 && t < 1.0) {
            return Err(Error::Parameter(format!(
                "threshold must lie in (0, 1), got {t}"
            )));
        }
    }
    let (nrows, ncols, nb) = (raster.nrows(), raster.ncols(), raster.nbands());
    let rows = par::map_range(nrows, |r| {
        let mut scratch = Scratch::new(nb);
        let mut x = vec![0.0; nb];
        let mut g = vec![0.0; models.len()];
        (0..ncols)
            .map(|c| {
                raster.pixel_at(r * ncols + c, &mut x);
                discriminants_into(models, &x, &mut scratch, &mut g);
                let best = argmax(&g);
                if let Some(t) = threshold {
                    softmax_in_place(&mut g);
                    if g[best] < t {
                        return UNCLASSIFIED;
                    }
                }
                (best + 1) as u16
            })
            .collect::<Vec<u16>>()
    });
    Ok(ClassificationResult {
        nrows,
        ncols,
        labels: rows.concat(),
        class_table: models.iter().map(|m| m.class_name.clone()).collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelEntry {
    pub name: String,
    pub prior: f64,
    pub mean: Vec<f64>,
    pub covariance: Vec<Vec<f64>>,
    pub ridge_used: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDocument {
    pub classes: Vec<ModelEntry>,
}

impl ModelDocument {
    pub fn from_models(models: &[GaussianClassModel]) -> Self {
        Self {
            classes: models
                .iter()
                .map(|m| {
                    let n = m.nbands();
                    ModelEntry {
                        name: m.class_name.clone(),
                        prior: m.prior,
                        mean: m.mean.clone(),
                        covariance: m.covariance.chunks(n).map(<[f64]>::to_vec).collect(),
                        ridge_used: m.ridge,
                    }
                })
                .collect(),
        }
    }

    pub fn into_models(self) -> Result<Vec<GaussianClassModel>> {
        self.classes
            .into_iter()
            .map(|e| {
                let n = e.mean.len();
                if e.covariance.len() != n || e.covariance.iter().any(|r| r.len() != n) {
                    return Err(Error::Parse(format!(
                        "class '{}': covariance must be {n}x{n}",
                        e.name
                    )));
                }
                let cov = e.covariance.concat();
                let mut m = GaussianClassModel::new(e.name, e.mean, cov, e.prior)?;
                if m.ridge == 0.0 {
                    m.ridge = e.ridge_used;
                }
                Ok(m)
            })
            .collect()
    }
}

pub fn save_models(models: &[GaussianClassModel], path: &Path) -> Result<()> {
    let json = serde_json::to_string_pretty(&ModelDocument::from_models(models))?;
    fsutil::write_atomic(path, json.as_bytes())
}

pub fn load_models(path: &Path) -> Result<Vec<GaussianClassModel>> {
    let doc: ModelDocument = serde_json::from_str(&fsutil::read_to_string(path)?)?;
    doc.into_models()
}
