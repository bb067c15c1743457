//! Fuzzy maximum-likelihood classification.
//!
//! Membership grades are class posteriors: `μ_k(x) = p_k f_k(x) / Σ_i p_i f_i(x)`.
//! Class statistics are re-estimated from those grades as membership-weighted
//! moments (weights `μ^m`), and priors as normalized fuzzy cardinalities. The
//! two steps alternate, starting from crisp ROI statistics, until the grades
//! stop moving.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fsutil;
use crate::gaussian::{self, ClassificationResult, GaussianClassModel, Scratch};
use crate::par;
use crate::raster::{self, Raster, RasterHeader};
use crate::training::TrainingSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum EstimationSet {
    #[default]
    TrainingPixelsOnly,
    FullScene,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FuzzyConfig {
    pub m_exponent: f64,
    pub max_iterations: usize,
    /// Stop once the largest per-pixel grade change drops below this.
    pub epsilon: f64,
    pub estimation_set: EstimationSet,
}

impl Default for FuzzyConfig {
    fn default() -> Self {
        Self {
            m_exponent: 1.0,
            max_iterations: 10,
            epsilon: 1e-4,
            estimation_set: EstimationSet::TrainingPixelsOnly,
        }
    }
}

impl FuzzyConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.m_exponent >= 1.0 && self.m_exponent.is_finite()) {
            return Err(Error::Parameter(format!(
                "m exponent must be >= 1, got {}",
                self.m_exponent
            )));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::Parameter(format!(
                "epsilon must be > 0, got {}",
                self.epsilon
            )));
        }
        if self.max_iterations == 0 {
            return Err(Error::Parameter("max_iterations must be positive".into()));
        }
        Ok(())
    }
}

fn weights(memberships: &[f64], m: f64) -> Vec<f64> {
    if m == 1.0 {
        memberships.to_vec()
    } else {
        memberships.iter().map(|u| u.powf(m)).collect()
    }
}

fn check_inputs<P: AsRef<[f64]>>(pixels: &[P], memberships: &[f64]) -> Result<usize> {
    if pixels.len() != memberships.len() {
        return Err(Error::Dimension {
            expected: pixels.len(),
            actual: memberships.len(),
        });
    }
    let first = pixels
        .first()
        .ok_or_else(|| Error::Parameter("no pixels".into()))?
        .as_ref()
        .len();
    if let Some(p) = pixels.iter().find(|p| p.as_ref().len() != first) {
        return Err(Error::Dimension {
            expected: first,
            actual: p.as_ref().len(),
        });
    }
    if memberships.iter().any(|u| !(0.0..=1.0).contains(u)) {
        return Err(Error::Parameter("memberships must lie in [0, 1]".into()));
    }
    Ok(first)
}

/// Weighted sum over the rows of a flat `npix × nb` block. Sequential so that
/// the result is bit-stable.
fn weighted_mean_flat(flat: &[f64], nb: usize, w: &[f64]) -> Result<Vec<f64>> {
    let total: f64 = w.iter().sum();
    if !(total > 0.0) {
        return Err(Error::Parameter("membership weights sum to zero".into()));
    }
    let mut mean = vec![0.0; nb];
    for (x, &wj) in flat.chunks_exact(nb).zip(w) {
        for (m, xi) in mean.iter_mut().zip(x) {
            *m += wj * xi;
        }
    }
    mean.iter_mut().for_each(|m| *m /= total);
    Ok(mean)
}

fn weighted_scatter_flat(flat: &[f64], nb: usize, w: &[f64], mean: &[f64]) -> Result<Vec<f64>> {
    let total: f64 = w.iter().sum();
    if !(total > 0.0) {
        return Err(Error::Parameter("membership weights sum to zero".into()));
    }
    let mut cov = vec![0.0; nb * nb];
    let mut d = vec![0.0; nb];
    for (x, &wj) in flat.chunks_exact(nb).zip(w) {
        for ((di, xi), mi) in d.iter_mut().zip(x).zip(mean) {
            *di = xi - mi;
        }
        for i in 0..nb {
            let wi = wj * d[i];
            for j in 0..nb {
                cov[i * nb + j] += wi * d[j];
            }
        }
    }
    cov.iter_mut().for_each(|c| *c /= total);
    Ok(cov)
}

/// Membership-weighted mean `Σ μ_j^m x_j / Σ μ_j^m`.
pub fn fuzzy_mean<P: AsRef<[f64]>>(pixels: &[P], memberships: &[f64], m: f64) -> Result<Vec<f64>> {
    let nb = check_inputs(pixels, memberships)?;
    let flat: Vec<f64> = pixels
        .iter()
        .flat_map(|p| p.as_ref().iter().copied())
        .collect();
    weighted_mean_flat(&flat, nb, &weights(memberships, m))
}

/// Membership-weighted scatter about `mean`, normalized by `Σ μ_j^m`
/// (not `N − 1`). Returned raw, before any regularization.
pub fn fuzzy_covariance<P: AsRef<[f64]>>(
    pixels: &[P],
    memberships: &[f64],
    mean: &[f64],
    m: f64,
) -> Result<Vec<f64>> {
    let nb = check_inputs(pixels, memberships)?;
    if mean.len() != nb {
        return Err(Error::Dimension {
            expected: nb,
            actual: mean.len(),
        });
    }
    let flat: Vec<f64> = pixels
        .iter()
        .flat_map(|p| p.as_ref().iter().copied())
        .collect();
    weighted_scatter_flat(&flat, nb, &weights(memberships, m), mean)
}

/// Per-class membership grades of one pixel: its normalized class posteriors.
pub fn membership_grades(models: &[GaussianClassModel], x: &[f64]) -> Result<Vec<f64>> {
    gaussian::posteriors(models, x)
}

/// Sum of one class's grades over a set of pixels.
pub fn fuzzy_cardinality(grades: &[f64]) -> f64 {
    grades.iter().sum()
}

/// Grades for every pixel of a flat `npix × nb` block, as a flat `npix × K` block.
fn grades_flat(models: &[GaussianClassModel], flat: &[f64], nb: usize) -> Vec<f64> {
    let k = models.len();
    let npix = flat.len() / nb;
    const CHUNK: usize = 1024;
    let mut out = vec![0.0; npix * k];
    par::for_each_chunk_mut(&mut out, CHUNK * k, |ci, chunk| {
        let mut s = Scratch::new(nb);
        let start = ci * CHUNK;
        for (j, g) in chunk.chunks_exact_mut(k).enumerate() {
            let x = &flat[(start + j) * nb..(start + j + 1) * nb];
            gaussian::discriminants_into(models, x, &mut s, g);
            gaussian::softmax_in_place(g);
        }
    });
    out
}

/// Outcome of [`fit_fuzzy`]. Non-convergence is reported, not an error.
#[derive(Debug, Clone)]
pub struct FuzzyFit {
    pub models: Vec<GaussianClassModel>,
    pub iterations: usize,
    pub converged: bool,
    /// Largest per-pixel grade change in the last iteration.
    pub final_change: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FuzzyRunReport {
    pub config: FuzzyConfig,
    pub iterations: usize,
    pub converged: bool,
    pub final_change: f64,
    pub classes: Vec<String>,
    pub priors: Vec<f64>,
    pub ridge_used: Vec<f64>,
}

impl FuzzyFit {
    pub fn report(&self, config: &FuzzyConfig) -> FuzzyRunReport {
        FuzzyRunReport {
            config: config.clone(),
            iterations: self.iterations,
            converged: self.converged,
            final_change: self.final_change,
            classes: self
                .models
                .iter()
                .map(|m| m.class_name().to_string())
                .collect(),
            priors: self.models.iter().map(|m| m.prior()).collect(),
            ridge_used: self.models.iter().map(|m| m.ridge()).collect(),
        }
    }
}

/// Fits fuzzy class models: crisp ROI initialization, then alternating grade
/// evaluation and weighted re-estimation over the configured estimation set.
pub fn fit_fuzzy(
    raster: &Raster,
    training: &TrainingSet,
    config: &FuzzyConfig,
) -> Result<FuzzyFit> {
    config.validate()?;
    let nb = raster.nbands();
    let ncols = raster.ncols();
    let mut models = gaussian::train(raster, training)?;
    let k = models.len();

    let indices: Vec<usize> = match config.estimation_set {
        EstimationSet::TrainingPixelsOnly => training.pixel_union(ncols),
        EstimationSet::FullScene => (0..raster.npixels()).collect(),
    };
    let npix = indices.len();
    let mut flat = vec![0.0; npix * nb];
    for (x, &idx) in flat.chunks_exact_mut(nb).zip(&indices) {
        raster.pixel_at(idx, x);
    }

    // Starting grades are indicators: the ROI class where one exists,
    // otherwise the crisp label under the initial models.
    let mut roi_class = vec![usize::MAX; raster.npixels()];
    for (ci, c) in training.classes().iter().enumerate().rev() {
        for &(r, col) in &c.pixels {
            roi_class[r * ncols + col] = ci;
        }
    }
    let mut prev = vec![0.0; npix * k];
    {
        let mut s = Scratch::new(nb);
        let mut g = vec![0.0; k];
        for (j, &idx) in indices.iter().enumerate() {
            let cls = if roi_class[idx] != usize::MAX {
                roi_class[idx]
            } else {
                gaussian::discriminants_into(&models, &flat[j * nb..(j + 1) * nb], &mut s, &mut g);
                gaussian::argmax(&g)
            };
            prev[j * k + cls] = 1.0;
        }
    }

    let mut iterations = 0;
    let mut converged = false;
    let mut final_change = f64::INFINITY;
    while iterations < config.max_iterations {
        iterations += 1;
        let grades = grades_flat(&models, &flat, nb);
        final_change = grades
            .iter()
            .zip(&prev)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);

        let refit: Vec<Result<GaussianClassModel>> = par::map_range(k, |c| {
            let class_grades: Vec<f64> = grades.iter().skip(c).step_by(k).copied().collect();
            let w = weights(&class_grades, config.m_exponent);
            let mean = weighted_mean_flat(&flat, nb, &w)?;
            let cov = weighted_scatter_flat(&flat, nb, &w, &mean)?;
            let prior = (fuzzy_cardinality(&class_grades) / npix as f64).min(1.0);
            if !(prior > 0.0) {
                return Err(Error::Parameter(format!(
                    "class '{}' lost all membership",
                    models[c].class_name()
                )));
            }
            GaussianClassModel::new(models[c].class_name(), mean, cov, prior)
        });
        models = refit.into_iter().collect::<Result<Vec<_>>>()?;
        prev = grades;
        if final_change < config.epsilon {
            converged = true;
            break;
        }
    }
    Ok(FuzzyFit {
        models,
        iterations,
        converged,
        final_change,
    })
}

/// Per-pixel, per-class membership grades over a whole scene.
#[derive(Debug, Clone, PartialEq)]
pub struct MembershipMap {
    pub nrows: usize,
    pub ncols: usize,
    /// Pixel-major: grades of pixel `p` are `grades[p*K .. (p+1)*K]`.
    pub grades: Vec<f64>,
    pub class_table: Vec<String>,
}

impl MembershipMap {
    pub fn nclasses(&self) -> usize {
        self.class_table.len()
    }

    pub fn pixel_grades(&self, row: usize, col: usize) -> &[f64] {
        let k = self.nclasses();
        let p = row * self.ncols + col;
        &self.grades[p * k..(p + 1) * k]
    }

    pub fn class_grades(&self, class: usize) -> Vec<f64> {
        self.grades
            .iter()
            .skip(class)
            .step_by(self.nclasses())
            .copied()
            .collect()
    }

    pub fn cardinality(&self, class: usize) -> f64 {
        fuzzy_cardinality(&self.class_grades(class))
    }
}

/// Scene-wide membership map and its hardened labels.
pub fn fuzzy_classify(
    raster: &Raster,
    models: &[GaussianClassModel],
) -> Result<(MembershipMap, ClassificationResult)> {
    gaussian::check_models(models, raster.nbands())?;
    let (nrows, ncols, nb, k) = (
        raster.nrows(),
        raster.ncols(),
        raster.nbands(),
        models.len(),
    );
    let rows = par::map_range(nrows, |r| {
        let mut s = Scratch::new(nb);
        let mut x = vec![0.0; nb];
        let mut grades = vec![0.0; ncols * k];
        let mut labels = vec![0u16; ncols];
        for c in 0..ncols {
            raster.pixel_at(r * ncols + c, &mut x);
            let g = &mut grades[c * k..(c + 1) * k];
            gaussian::discriminants_into(models, &x, &mut s, g);
            // Harden on the discriminants: same argmax as the grades, without
            // ties introduced by exponent underflow.
            labels[c] = (gaussian::argmax(g) + 1) as u16;
            gaussian::softmax_in_place(g);
        }
        (grades, labels)
    });
    let mut grades = Vec::with_capacity(nrows * ncols * k);
    let mut labels = Vec::with_capacity(nrows * ncols);
    for (g, l) in rows {
        grades.extend(g);
        labels.extend(l);
    }
    let class_table: Vec<String> = models.iter().map(|m| m.class_name().to_string()).collect();
    Ok((
        MembershipMap {
            nrows,
            ncols,
            grades,
            class_table: class_table.clone(),
        },
        ClassificationResult {
            nrows,
            ncols,
            labels,
            class_table,
        },
    ))
}

/// Writes one single-band float grid per class at `<prefix>.memberships.<k>`
/// (1-based) plus a `<prefix>.memberships.classes` table.
pub fn save_membership_map(map: &MembershipMap, prefix: &Path, pixel_size: f64) -> Result<()> {
    let header = RasterHeader::new(map.ncols, map.nrows, 1, pixel_size)?;
    for k in 0..map.nclasses() {
        let band: Vec<f32> = map.class_grades(k).into_iter().map(|v| v as f32).collect();
        let r = Raster::new(header.clone(), band)?;
        raster::save_raster(&r, &with_suffix(prefix, &format!(".memberships.{}", k + 1)))?;
    }
    let table: String = map
        .class_table
        .iter()
        .enumerate()
        .map(|(i, n)| format!("{}\t{}\n", i + 1, n))
        .collect();
    fsutil::write_atomic(
        &with_suffix(prefix, ".memberships.classes"),
        table.as_bytes(),
    )
}

pub fn with_suffix(prefix: &Path, suffix: &str) -> std::path::PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    s.into()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::training::TrainingClass;
    use approx::assert_relative_eq;

    #[test]
    fn crisp_memberships_give_arithmetic_mean() {
        let px = vec![vec![1.0, 2.0], vec![3.0, 6.0], vec![5.0, 1.0]];
        let m = fuzzy_mean(&px, &[1.0, 1.0, 1.0], 1.0).unwrap();
        assert_relative_eq!(m[0], 3.0);
        assert_relative_eq!(m[1], 3.0);
    }

    #[test]
    fn indicator_selects_pixel() {
        let px = vec![vec![1.5, -2.0], vec![3.0, 6.0], vec![5.0, 1.0]];
        assert_eq!(
            fuzzy_mean(&px, &[1.0, 0.0, 0.0], 2.0).unwrap(),
            vec![1.5, -2.0]
        );
    }

    #[test]
    fn single_pixel_scatter_is_zero() {
        let px = vec![vec![4.0, 9.0]];
        let mean = fuzzy_mean(&px, &[1.0], 1.0).unwrap();
        assert_eq!(
            fuzzy_covariance(&px, &[1.0], &mean, 1.0).unwrap(),
            vec![0.0; 4]
        );
    }

    #[test]
    fn zero_memberships_and_mismatches_rejected() {
        let px = vec![vec![1.0], vec![2.0]];
        assert!(fuzzy_mean(&px, &[0.0, 0.0], 1.0).is_err());
        assert!(fuzzy_mean(&px, &[1.0], 1.0).is_err());
        assert!(fuzzy_covariance(&px, &[1.0, 1.0], &[0.0, 0.0], 1.0).is_err());
    }

    #[test]
    fn partial_membership_moves_the_mean() {
        let mut px = vec![vec![0.0], vec![10.0]];
        let a = fuzzy_mean(&px, &[1.0, 0.5], 1.0).unwrap();
        px[1][0] = 11.0;
        let b = fuzzy_mean(&px, &[1.0, 0.5], 1.0).unwrap();
        assert!((b[0] - a[0]).abs() > 0.1);
    }

    #[test]
    fn grades_single_and_identical_models() {
        let a =
            GaussianClassModel::new("a", vec![0.0, 0.0], vec![1.0, 0.2, 0.2, 1.0], 0.5).unwrap();
        assert_eq!(
            membership_grades(&[a.clone().with_prior(1.0).unwrap()], &[3.0, -1.0]).unwrap(),
            vec![1.0]
        );
        let b =
            GaussianClassModel::new("b", vec![0.0, 0.0], vec![1.0, 0.2, 0.2, 1.0], 0.5).unwrap();
        let g = membership_grades(&[a, b], &[8.0, 2.0]).unwrap();
        assert_eq!(g, vec![0.5, 0.5]);
    }

    #[test]
    fn cardinality_of_uniform_grades() {
        assert_relative_eq!(fuzzy_cardinality(&[0.25; 8]), 2.0);
    }

    #[test]
    fn config_validation() {
        assert!(FuzzyConfig::default().validate().is_ok());
        let c = FuzzyConfig {
            m_exponent: 0.5,
            ..Default::default()
        };
        assert!(c.validate().is_err());
        let c = FuzzyConfig {
            epsilon: 0.0,
            ..Default::default()
        };
        assert!(c.validate().is_err());
    }

    #[test]
    fn one_class_converges_immediately() {
        let h = RasterHeader::new(4, 4, 2, 30.0).unwrap();
        let samples: Vec<f32> = (0..32).map(|i| ((i * 7) % 11) as f32).collect();
        let r = Raster::new(h.clone(), samples).unwrap();
        let ts = TrainingSet::new(
            vec![TrainingClass {
                name: "only".into(),
                pixels: vec![(0, 0), (1, 1), (2, 3), (3, 2), (0, 3)],
            }],
            &h,
        )
        .unwrap();
        for set in [EstimationSet::TrainingPixelsOnly, EstimationSet::FullScene] {
            let cfg = FuzzyConfig {
                estimation_set: set,
                ..Default::default()
            };
            let fit = fit_fuzzy(&r, &ts, &cfg).unwrap();
            assert_eq!(fit.iterations, 1);
            assert!(fit.converged);
            assert_eq!(fit.models[0].prior(), 1.0);
            let (map, labels) = fuzzy_classify(&r, &fit.models).unwrap();
            assert!(map.grades.iter().all(|&g| g == 1.0));
            assert!(labels.labels.iter().all(|&l| l == 1));
        }
    }
}
