//! Supervised Gaussian maximum-likelihood and fuzzy classification of
//! multispectral rasters, object segmentation, region attributes and a fuzzy
//! rule engine over them.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod attributes;
pub mod error;
pub mod fsutil;
pub mod fuzzy_mlc;
pub mod fuzzy_rules;
pub mod gaussian;
pub mod linalg;
pub mod par;
pub mod raster;
pub mod reporting;
pub mod segmentation;
pub mod synthetic;
pub mod training;

pub use error::{Error, Result};
pub use gaussian::{ClassificationResult, GaussianClassModel};
pub use raster::{Raster, RasterHeader};
pub use segmentation::SegmentMap;
pub use training::TrainingSet;
