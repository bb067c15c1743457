//! Seeded synthetic scenes with known per-region Gaussian statistics, and a
//! Monte Carlo estimate of the Bayes accuracy for a set of true models.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::{self, GaussianClassModel, Scratch};
use crate::linalg::Cholesky;
use crate::par;
use crate::raster::{Raster, RasterHeader};
use crate::training::{self, TrainingClass, TrainingSet};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RegionGeometry {
    Rect {
        row0: usize,
        col0: usize,
        nrows: usize,
        ncols: usize,
    },
    /// `(row, col)` vertices, rasterized with the half-open ROI rule.
    Polygon { vertices: Vec<[f64; 2]> },
}

impl RegionGeometry {
    fn pixels(&self, header: &RasterHeader) -> Result<Vec<(usize, usize)>> {
        match self {
            RegionGeometry::Rect {
                row0,
                col0,
                nrows,
                ncols,
            } => {
                let r1 = (row0 + nrows).min(header.nrows);
                let c1 = (col0 + ncols).min(header.ncols);
                Ok((*row0..r1)
                    .flat_map(|r| (*col0..c1).map(move |c| (r, c)))
                    .collect())
            }
            RegionGeometry::Polygon { vertices } => {
                let v: Vec<(f64, f64)> = vertices.iter().map(|&[r, c]| (r, c)).collect();
                training::rasterize_roi(&v, header)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneClass {
    pub name: String,
    pub mean: Vec<f64>,
    pub covariance: Vec<Vec<f64>>,
    pub region: RegionGeometry,
}

#[derive(Debug, Clone)]
pub struct SyntheticScene {
    pub raster: Raster,
    pub training: TrainingSet,
    /// Row-major true class per pixel, 1-based like classification labels.
    pub truth: Vec<u16>,
}

/// Every `ROI_STRIDE`-th row and column of a region is used for training.
pub const ROI_STRIDE: usize = 4;

/// Draws every pixel from its region's multivariate normal. Regions must
/// partition the grid; the result is fully determined by `seed`.
pub fn generate_synthetic_scene(
    classes: &[SceneClass],
    header: &RasterHeader,
    seed: u64,
) -> Result<SyntheticScene> {
    header.validate()?;
    if classes.is_empty() {
        return Err(Error::Parameter("scene needs at least one class".into()));
    }
    let nb = header.nbands;
    let npix = header.npixels();
    let mut truth = vec![0u16; npix];
    let mut factors = Vec::with_capacity(classes.len());
    let mut class_pixels = Vec::with_capacity(classes.len());
    for (k, c) in classes.iter().enumerate() {
        if c.mean.len() != nb {
            return Err(Error::Dimension {
                expected: nb,
                actual: c.mean.len(),
            });
        }
        if c.covariance.len() != nb || c.covariance.iter().any(|r| r.len() != nb) {
            return Err(Error::Parameter(format!(
                "class '{}': covariance must be {nb}x{nb}",
                c.name
            )));
        }
        let cov = c.covariance.concat();
        for i in 0..nb {
            for j in 0..i {
                if (cov[i * nb + j] - cov[j * nb + i]).abs()
                    > 1e-12 * cov[i * nb + j].abs().max(1.0)
                {
                    return Err(Error::NotPositiveDefinite(format!(
                        " (class '{}' covariance is not symmetric)",
                        c.name
                    )));
                }
            }
        }
        factors.push(Cholesky::new(&cov, nb)?);
        let px = c.region.pixels(header)?;
        for &(r, col) in &px {
            let t = &mut truth[r * header.ncols + col];
            if *t != 0 {
                return Err(Error::Parameter(format!(
                    "regions overlap at ({r}, {col}) ('{}' and '{}')",
                    classes[*t as usize - 1].name,
                    c.name
                )));
            }
            *t = (k + 1) as u16;
        }
        class_pixels.push(px);
    }
    if let Some(i) = truth.iter().position(|&t| t == 0) {
        return Err(Error::Parameter(format!(
            "regions do not cover pixel ({}, {})",
            i / header.ncols,
            i % header.ncols
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples = vec![0f32; header.sample_count()];
    let mut z = vec![0.0; nb];
    let mut x = vec![0.0; nb];
    for (p, &t) in truth.iter().enumerate() {
        let k = t as usize - 1;
        for zi in z.iter_mut() {
            *zi = rng.sample(StandardNormal);
        }
        factors[k].mul_lower(&z, &mut x);
        for b in 0..nb {
            samples[b * npix + p] = (classes[k].mean[b] + x[b]) as f32;
        }
    }
    let raster = Raster::new(header.clone(), samples)?;

    let training_classes = classes
        .iter()
        .zip(&class_pixels)
        .map(|(c, px)| {
            let mut roi: Vec<(usize, usize)> = px
                .iter()
                .copied()
                .filter(|&(r, col)| r % ROI_STRIDE == 0 && col % ROI_STRIDE == 0)
                .collect();
            if roi.len() < nb + 1 {
                roi = px.clone();
            }
            TrainingClass {
                name: c.name.clone(),
                pixels: roi,
            }
        })
        .collect();
    let training = TrainingSet::new(training_classes, header)?;
    Ok(SyntheticScene {
        raster,
        training,
        truth,
    })
}

/// Vertical stripes, one per class, with means `separation` apart in every
/// band and a shared correlated covariance of unit-variance scale `sigma²`.
pub fn striped_classes(
    header: &RasterHeader,
    nclasses: usize,
    separation: f64,
    sigma: f64,
) -> Vec<SceneClass> {
    let nb = header.nbands;
    let var = sigma * sigma;
    let covariance: Vec<Vec<f64>> = (0..nb)
        .map(|i| {
            (0..nb)
                .map(|j| if i == j { var } else { 0.3 * var })
                .collect()
        })
        .collect();
    (0..nclasses)
        .map(|k| {
            let c0 = k * header.ncols / nclasses;
            let c1 = (k + 1) * header.ncols / nclasses;
            SceneClass {
                name: format!("class_{}", k + 1),
                mean: (0..nb)
                    .map(|b| 50.0 + separation * k as f64 + 5.0 * b as f64)
                    .collect(),
                covariance: covariance.clone(),
                region: RegionGeometry::Rect {
                    row0: 0,
                    col0: c0,
                    nrows: header.nrows,
                    ncols: c1 - c0,
                },
            }
        })
        .collect()
}

/// Models carrying the scene's true parameters, with priors equal to each
/// class's share of the grid.
pub fn true_models(
    classes: &[SceneClass],
    scene: &SyntheticScene,
) -> Result<Vec<GaussianClassModel>> {
    let n = scene.truth.len() as f64;
    classes
        .iter()
        .enumerate()
        .map(|(k, c)| {
            let count = scene.truth.iter().filter(|&&t| t as usize == k + 1).count() as f64;
            GaussianClassModel::new(
                c.name.clone(),
                c.mean.clone(),
                c.covariance.concat(),
                count / n,
            )
        })
        .collect()
}

const MC_CHUNK: usize = 4096;

/// Fraction of `draws` samples from the prior-weighted mixture that the
/// Bayes rule (argmax discriminant under the true models) labels correctly.
/// Draws are split into fixed-size chunks, each with its own ChaCha stream, so
/// the estimate does not depend on the number of threads.
pub fn monte_carlo_bayes_accuracy(
    models: &[GaussianClassModel],
    draws: usize,
    seed: u64,
) -> Result<f64> {
    let nb = models
        .first()
        .ok_or_else(|| Error::Parameter("no models".into()))?
        .nbands();
    gaussian::check_models(models, nb)?;
    if draws == 0 {
        return Err(Error::Parameter("draws must be positive".into()));
    }
    let factors: Vec<Cholesky> = models
        .iter()
        .map(|m| Cholesky::new(m.covariance(), nb))
        .collect::<Result<_>>()?;
    let prior_total: f64 = models.iter().map(|m| m.prior()).sum();
    let nchunks = draws.div_ceil(MC_CHUNK);
    let correct: Vec<usize> = par::map_range(nchunks, |ci| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(ci as u64);
        let n = MC_CHUNK.min(draws - ci * MC_CHUNK);
        let mut s = Scratch::new(nb);
        let mut z = vec![0.0; nb];
        let mut x = vec![0.0; nb];
        let mut g = vec![0.0; models.len()];
        let mut hits = 0;
        for _ in 0..n {
            let u: f64 = rng.random::<f64>() * prior_total;
            let mut acc = 0.0;
            let mut k = models.len() - 1;
            for (i, m) in models.iter().enumerate() {
                acc += m.prior();
                if u < acc {
                    k = i;
                    break;
                }
            }
            for zi in z.iter_mut() {
                *zi = rng.sample(StandardNormal);
            }
            factors[k].mul_lower(&z, &mut x);
            for (xi, mi) in x.iter_mut().zip(models[k].mean()) {
                *xi += mi;
            }
            gaussian::discriminants_into(models, &x, &mut s, &mut g);
            if gaussian::argmax(&g) == k {
                hits += 1;
            }
        }
        hits
    });
    Ok(correct.iter().sum::<usize>() as f64 / draws as f64)
}
