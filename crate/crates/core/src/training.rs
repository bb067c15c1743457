//! Training regions of interest: per-class pixel lists, polygon rasterization
//! and the JSON ROI document.
//!
//! Polygon vertices are continuous `(row, col)` coordinates where pixel
//! `(r, c)` covers `[r, r+1) × [c, c+1)` and has its center at
//! `(r + 0.5, c + 0.5)`.

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fsutil;
use crate::raster::RasterHeader;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingClass {
    pub name: String,
    pub pixels: Vec<(usize, usize)>,
}

/// Validated training data: unique class names, in-bounds pixels, and at least
/// `nbands + 1` pixels per class.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    classes: Vec<TrainingClass>,
}

impl TrainingSet {
    pub fn new(classes: Vec<TrainingClass>, header: &RasterHeader) -> Result<Self> {
        if classes.is_empty() {
            return Err(Error::Training("no classes".into()));
        }
        let mut names = HashSet::new();
        for c in &classes {
            if !names.insert(c.name.as_str()) {
                return Err(Error::Training(format!(
                    "duplicate class name '{}'",
                    c.name
                )));
            }
            if let Some(&(r, col)) = c.pixels.iter().find(|&&(r, col)| !header.contains(r, col)) {
                return Err(Error::Training(format!(
                    "class '{}' references pixel ({r}, {col}) outside the {}x{} raster",
                    c.name, header.nrows, header.ncols
                )));
            }
            let required = header.nbands + 1;
            if c.pixels.len() < required {
                return Err(Error::TooFewPixels {
                    class: c.name.clone(),
                    count: c.pixels.len(),
                    required,
                });
            }
        }
        Ok(Self { classes })
    }

    pub fn classes(&self) -> &[TrainingClass] {
        &self.classes
    }

    pub fn class_names(&self) -> Vec<String> {
        self.classes.iter().map(|c| c.name.clone()).collect()
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    /// Distinct training pixels (row-major flat indices) in ascending order.
    pub fn pixel_union(&self, ncols: usize) -> Vec<usize> {
        let mut v: Vec<usize> = self
            .classes
            .iter()
            .flat_map(|c| c.pixels.iter().map(move |&(r, col)| r * ncols + col))
            .collect();
        v.sort_unstable();
        v.dedup();
        v
    }
}

fn shoelace(polygon: &[(f64, f64)]) -> f64 {
    let n = polygon.len();
    (0..n)
        .map(|i| {
            let (y0, x0) = polygon[i];
            let (y1, x1) = polygon[(i + 1) % n];
            x0 * y1 - x1 * y0
        })
        .sum::<f64>()
        * 0.5
}

/// Even-odd test of a point against a polygon. Points on an edge count as
/// inside iff that edge is a top (smaller row) or left (smaller col) boundary.
pub fn point_in_polygon(polygon: &[(f64, f64)], y: f64, x: f64) -> bool {
    let n = polygon.len();
    let mut inside = false;
    for i in 0..n {
        // Canonical endpoint order so that shared edges of adjacent polygons
        // produce bit-identical intersections.
        let (mut a, mut b) = (polygon[i], polygon[(i + 1) % n]);
        if (b.0, b.1) < (a.0, a.1) {
            std::mem::swap(&mut a, &mut b);
        }
        let (ya, xa) = a;
        let (yb, xb) = b;
        if (ya > y) != (yb > y) {
            let x_int = xa + (xb - xa) * (y - ya) / (yb - ya);
            if x < x_int {
                inside = !inside;
            }
        }
    }
    inside
}

/// Pixels whose centers fall inside `polygon` under the half-open even-odd rule.
pub fn rasterize_roi(polygon: &[(f64, f64)], header: &RasterHeader) -> Result<Vec<(usize, usize)>> {
    if polygon.len() < 3 {
        return Err(Error::Parameter(format!(
            "polygon needs at least 3 vertices, got {}",
            polygon.len()
        )));
    }
    if polygon
        .iter()
        .any(|&(y, x)| !y.is_finite() || !x.is_finite())
    {
        return Err(Error::Parameter("polygon has non-finite vertices".into()));
    }
    if shoelace(polygon) == 0.0 {
        return Err(Error::DegeneratePolygon);
    }
    let (mut ymin, mut ymax, mut xmin, mut xmax) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for &(y, x) in polygon {
        ymin = ymin.min(y);
        ymax = ymax.max(y);
        xmin = xmin.min(x);
        xmax = xmax.max(x);
    }
    // Pixel center r + 0.5 lies in [ymin, ymax] only for r in this span.
    let r0 = (ymin - 0.5).ceil().max(0.0);
    let r1 = (ymax - 0.5).floor().min(header.nrows as f64 - 1.0);
    let c0 = (xmin - 0.5).ceil().max(0.0);
    let c1 = (xmax - 0.5).floor().min(header.ncols as f64 - 1.0);
    if r0 > r1 || c0 > c1 {
        return Ok(Vec::new());
    }
    let mut out = Vec::new();
    for r in (r0 as usize)..=(r1 as usize) {
        for c in (c0 as usize)..=(c1 as usize) {
            if point_in_polygon(polygon, r as f64 + 0.5, c as f64 + 0.5) {
                out.push((r, c));
            }
        }
    }
    Ok(out)
}

/// One class entry of the ROI document. Either or both geometries may be
/// given; their pixel sets are unioned.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoiClass {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pixels: Option<Vec<[usize; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub polygon: Option<Vec<[f64; 2]>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoiDocument {
    pub classes: Vec<RoiClass>,
}

impl RoiDocument {
    pub fn from_training(set: &TrainingSet) -> Self {
        Self {
            classes: set
                .classes()
                .iter()
                .map(|c| RoiClass {
                    name: c.name.clone(),
                    pixels: Some(c.pixels.iter().map(|&(r, col)| [r, col]).collect()),
                    polygon: None,
                })
                .collect(),
        }
    }

    pub fn into_training(self, header: &RasterHeader) -> Result<TrainingSet> {
        let mut classes = Vec::with_capacity(self.classes.len());
        for c in self.classes {
            if c.pixels.is_none() && c.polygon.is_none() {
                return Err(Error::Training(format!(
                    "class '{}' has neither \"pixels\" nor \"polygon\"",
                    c.name
                )));
            }
            let mut pixels: Vec<(usize, usize)> = c
                .pixels
                .unwrap_or_default()
                .into_iter()
                .map(|[r, col]| (r, col))
                .collect();
            if let Some(poly) = c.polygon {
                let verts: Vec<(f64, f64)> = poly.into_iter().map(|[r, col]| (r, col)).collect();
                pixels.extend(rasterize_roi(&verts, header)?);
            }
            let mut seen = HashSet::new();
            pixels.retain(|p| seen.insert(*p));
            classes.push(TrainingClass {
                name: c.name,
                pixels,
            });
        }
        TrainingSet::new(classes, header)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

pub fn load_roi(path: &Path, header: &RasterHeader) -> Result<TrainingSet> {
    let doc: RoiDocument = serde_json::from_str(&fsutil::read_to_string(path)?)?;
    doc.into_training(header)
}

pub fn save_roi(set: &TrainingSet, path: &Path) -> Result<()> {
    fsutil::write_atomic(path, RoiDocument::from_training(set).to_json()?.as_bytes())
}
