//! Raster data model and the flat band-sequential file format.
//!
//! A raster on disk is a headerless body of little-endian samples, all of
//! band 1 in row-major order, then band 2, and so on, plus a plain-text
//! sidecar at `<body>.hdr` holding `key = value` lines:
//!
//! ```text
//! ncols = 256
//! nrows = 256
//! nbands = 3
//! pixel_size = 30
//! data_type = float32
//! wavelengths = {0.485, 0.56, 0.66}
//! band_names = {Band 1, Band 2, Band 3}
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::fsutil;

pub const DEFAULT_PIXEL_SIZE: f64 = 30.0;

/// Sample encoding of a raster body.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DataType {
    #[default]
    Float32,
    UInt16,
    UInt32,
}

impl DataType {
    pub fn as_str(self) -> &'static str {
        match self {
            DataType::Float32 => "float32",
            DataType::UInt16 => "uint16",
            DataType::UInt32 => "uint32",
        }
    }

    pub fn size(self) -> usize {
        match self {
            DataType::UInt16 => 2,
            DataType::Float32 | DataType::UInt32 => 4,
        }
    }

    fn parse(s: &str) -> Result<Self> {
        match s {
            "float32" => Ok(DataType::Float32),
            "uint16" => Ok(DataType::UInt16),
            "uint32" => Ok(DataType::UInt32),
            other => Err(Error::Header(format!("unsupported data_type '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RasterHeader {
    pub ncols: usize,
    pub nrows: usize,
    pub nbands: usize,
    /// Meters per pixel side.
    pub pixel_size: f64,
    /// Band-center wavelengths in micrometers.
    pub wavelengths: Option<Vec<f64>>,
    pub band_names: Option<Vec<String>>,
    pub data_type: DataType,
}

impl RasterHeader {
    pub fn new(ncols: usize, nrows: usize, nbands: usize, pixel_size: f64) -> Result<Self> {
        let h = Self {
            ncols,
            nrows,
            nbands,
            pixel_size,
            wavelengths: None,
            band_names: None,
            data_type: DataType::Float32,
        };
        h.validate()?;
        Ok(h)
    }

    pub fn with_wavelengths(mut self, wavelengths: Vec<f64>) -> Result<Self> {
        self.wavelengths = Some(wavelengths);
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.ncols == 0 || self.nrows == 0 || self.nbands == 0 {
            return Err(Error::Header(format!(
                "dimensions must be positive (ncols={}, nrows={}, nbands={})",
                self.ncols, self.nrows, self.nbands
            )));
        }
        if !(self.pixel_size > 0.0 && self.pixel_size.is_finite()) {
            return Err(Error::Header(format!(
                "pixel_size must be positive, got {}",
                self.pixel_size
            )));
        }
        if let Some(w) = &self.wavelengths {
            if w.len() != self.nbands {
                return Err(Error::Header(format!(
                    "{} wavelengths for {} bands",
                    w.len(),
                    self.nbands
                )));
            }
            if w.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
                return Err(Error::Header("wavelengths must be positive".into()));
            }
        }
        if let Some(n) = &self.band_names {
            if n.len() != self.nbands {
                return Err(Error::Header(format!(
                    "{} band names for {} bands",
                    n.len(),
                    self.nbands
                )));
            }
        }
        Ok(())
    }

    pub fn npixels(&self) -> usize {
        self.nrows * self.ncols
    }

    pub fn sample_count(&self) -> usize {
        self.npixels() * self.nbands
    }

    pub fn contains(&self, row: usize, col: usize) -> bool {
        row < self.nrows && col < self.ncols
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "ncols = {}", self.ncols);
        let _ = writeln!(s, "nrows = {}", self.nrows);
        let _ = writeln!(s, "nbands = {}", self.nbands);
        let _ = writeln!(s, "pixel_size = {}", self.pixel_size);
        let _ = writeln!(s, "data_type = {}", self.data_type.as_str());
        if let Some(w) = &self.wavelengths {
            let items: Vec<String> = w.iter().map(|v| v.to_string()).collect();
            let _ = writeln!(s, "wavelengths = {{{}}}", items.join(", "));
        }
        if let Some(n) = &self.band_names {
            let _ = writeln!(s, "band_names = {{{}}}", n.join(", "));
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut kv: BTreeMap<String, String> = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                Error::Header(format!("line {}: expected 'key = value'", lineno + 1))
            })?;
            let key = k.trim().to_ascii_lowercase();
            let value = v.trim().to_string();
            if let Some(prev) = kv.get(&key) {
                if *prev != value {
                    return Err(Error::Header(format!("contradictory values for '{key}'")));
                }
            }
            kv.insert(key, value);
        }

        let req_usize = |key: &str| -> Result<usize> {
            let v = kv
                .get(key)
                .ok_or_else(|| Error::Header(format!("missing '{key}'")))?;
            v.parse()
                .map_err(|_| Error::Header(format!("'{key}' is not a positive integer: {v}")))
        };
        let pixel_size = match kv.get("pixel_size") {
            Some(v) => v
                .parse()
                .map_err(|_| Error::Header(format!("bad pixel_size: {v}")))?,
            None => DEFAULT_PIXEL_SIZE,
        };
        let data_type = match kv.get("data_type") {
            Some(v) => DataType::parse(v)?,
            None => DataType::Float32,
        };
        let wavelengths = match kv.get("wavelengths") {
            Some(v) => Some(
                parse_list(v)?
                    .into_iter()
                    .map(|s| {
                        s.parse::<f64>()
                            .map_err(|_| Error::Header(format!("bad wavelength '{s}'")))
                    })
                    .collect::<Result<Vec<_>>>()?,
            ),
            None => None,
        };
        let band_names = match kv.get("band_names") {
            Some(v) => Some(parse_list(v)?),
            None => None,
        };
        let h = Self {
            ncols: req_usize("ncols")?,
            nrows: req_usize("nrows")?,
            nbands: req_usize("nbands")?,
            pixel_size,
            wavelengths,
            band_names,
            data_type,
        };
        h.validate()?;
        Ok(h)
    }
}

fn parse_list(v: &str) -> Result<Vec<String>> {
    let inner = v
        .strip_prefix('{')
        .and_then(|s| s.strip_suffix('}'))
        .ok_or_else(|| Error::Header(format!("list must be wrapped in braces: {v}")))?;
    if inner.trim().is_empty() {
        return Ok(Vec::new());
    }
    Ok(inner.split(',').map(|s| s.trim().to_string()).collect())
}

/// Sidecar header location for a raster body.
pub fn header_path(body: &Path) -> PathBuf {
    let mut s = body.as_os_str().to_owned();
    s.push(".hdr");
    PathBuf::from(s)
}

/// A multiband image. Samples are stored band-sequentially as `f32`, exactly
/// as they appear on disk.
#[derive(Debug, Clone, PartialEq)]
pub struct Raster {
    header: RasterHeader,
    samples: Vec<f32>,
}

impl Raster {
    pub fn new(header: RasterHeader, samples: Vec<f32>) -> Result<Self> {
        header.validate()?;
        if samples.len() != header.sample_count() {
            return Err(Error::SizeMismatch {
                expected: header.sample_count(),
                actual: samples.len(),
            });
        }
        if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
            let np = header.npixels();
            return Err(Error::NonFinite {
                band: i / np,
                row: (i % np) / header.ncols,
                col: i % header.ncols,
            });
        }
        Ok(Self { header, samples })
    }

    pub fn header(&self) -> &RasterHeader {
        &self.header
    }

    pub fn nrows(&self) -> usize {
        self.header.nrows
    }

    pub fn ncols(&self) -> usize {
        self.header.ncols
    }

    pub fn nbands(&self) -> usize {
        self.header.nbands
    }

    pub fn npixels(&self) -> usize {
        self.header.npixels()
    }

    pub fn samples(&self) -> &[f32] {
        &self.samples
    }

    pub fn sample(&self, band: usize, row: usize, col: usize) -> f32 {
        self.samples[band * self.npixels() + row * self.ncols() + col]
    }

    pub fn band(&self, band: usize) -> &[f32] {
        let np = self.npixels();
        &self.samples[band * np..(band + 1) * np]
    }

    /// Writes the pixel vector at flat index `idx` (row-major) into `out`.
    pub fn pixel_at(&self, idx: usize, out: &mut [f64]) {
        let np = self.npixels();
        for (b, o) in out.iter_mut().enumerate().take(self.nbands()) {
            *o = self.samples[b * np + idx] as f64;
        }
    }

    pub fn pixel(&self, row: usize, col: usize) -> Vec<f64> {
        let mut v = vec![0.0; self.nbands()];
        self.pixel_at(row * self.ncols() + col, &mut v);
        v
    }

    /// A single-band raster sharing this raster's geometry.
    pub fn single_band(&self, band: usize) -> Result<Raster> {
        if band >= self.nbands() {
            return Err(Error::Parameter(format!(
                "band index {band} out of range for {} bands",
                self.nbands()
            )));
        }
        let mut h = self.header.clone();
        h.nbands = 1;
        h.wavelengths = h.wavelengths.map(|w| vec![w[band]]);
        h.band_names = h.band_names.map(|n| vec![n[band].clone()]);
        Raster::new(h, self.band(band).to_vec())
    }
}

/// Reads a raster body and its `.hdr` sidecar. Integer bodies are widened to `f32`.
pub fn load_raster(path: &Path) -> Result<Raster> {
    let hdr_path = header_path(path);
    let mut header = RasterHeader::parse(&fsutil::read_to_string(&hdr_path)?)?;
    let bytes = fsutil::read_bytes(path)?;
    let dt = header.data_type;
    if bytes.len() % dt.size() != 0 {
        return Err(Error::SizeMismatch {
            expected: header.sample_count(),
            actual: bytes.len() / dt.size(),
        });
    }
    let count = bytes.len() / dt.size();
    if count != header.sample_count() {
        return Err(Error::SizeMismatch {
            expected: header.sample_count(),
            actual: count,
        });
    }
    let samples: Vec<f32> = match dt {
        DataType::Float32 => bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect(),
        DataType::UInt16 => bytes
            .chunks_exact(2)
            .map(|c| u16::from_le_bytes([c[0], c[1]]) as f32)
            .collect(),
        DataType::UInt32 => bytes
            .chunks_exact(4)
            .map(|c| u32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f32)
            .collect(),
    };
    header.data_type = DataType::Float32;
    Raster::new(header, samples)
}

pub fn save_raster(raster: &Raster, path: &Path) -> Result<()> {
    let mut header = raster.header.clone();
    header.data_type = DataType::Float32;
    let mut body = Vec::with_capacity(raster.samples.len() * 4);
    for v in &raster.samples {
        body.extend_from_slice(&v.to_le_bytes());
    }
    fsutil::write_atomic(path, &body)?;
    fsutil::write_atomic(&header_path(path), header.to_text().as_bytes())
}

/// Writes a single-band unsigned integer grid (labels, segment ids).
pub fn save_grid_u16(
    path: &Path,
    nrows: usize,
    ncols: usize,
    pixel_size: f64,
    data: &[u16],
) -> Result<()> {
    let mut header = RasterHeader::new(ncols, nrows, 1, pixel_size)?;
    header.data_type = DataType::UInt16;
    check_len(&header, data.len())?;
    let body: Vec<u8> = data.iter().flat_map(|v| v.to_le_bytes()).collect();
    fsutil::write_atomic(path, &body)?;
    fsutil::write_atomic(&header_path(path), header.to_text().as_bytes())
}

pub fn save_grid_u32(
    path: &Path,
    nrows: usize,
    ncols: usize,
    pixel_size: f64,
    data: &[u32],
) -> Result<()> {
    let mut header = RasterHeader::new(ncols, nrows, 1, pixel_size)?;
    header.data_type = DataType::UInt32;
    check_len(&header, data.len())?;
    let body: Vec<u8> = data.iter().flat_map(|v| v.to_le_bytes()).collect();
    fsutil::write_atomic(path, &body)?;
    fsutil::write_atomic(&header_path(path), header.to_text().as_bytes())
}

/// Reads a single-band integer grid written by [`save_grid_u16`] or [`save_grid_u32`].
pub fn load_grid(path: &Path) -> Result<(RasterHeader, Vec<u32>)> {
    let header = RasterHeader::parse(&fsutil::read_to_string(&header_path(path))?)?;
    if header.nbands != 1 {
        return Err(Error::Header(format!(
            "label grid must have 1 band, found {}",
            header.nbands
        )));
    }
    let bytes = fsutil::read_bytes(path)?;
    let dt = header.data_type;
    if bytes.len() != header.npixels() * dt.size() {
        return Err(Error::SizeMismatch {
            expected: header.npixels(),
            actual: bytes.len() / dt.size(),
        });
    }
    let data = match dt {
        DataType::UInt16 => bytes
            .chunks_exact(2)
            .map(|c| u16::from_le_bytes([c[0], c[1]]) as u32)
            .collect(),
        DataType::UInt32 => bytes
            .chunks_exact(4)
            .map(|c| u32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect(),
        DataType::Float32 => {
            return Err(Error::Header("label grid must be uint16 or uint32".into()))
        }
    };
    Ok((header, data))
}

fn check_len(header: &RasterHeader, len: usize) -> Result<()> {
    if len != header.npixels() {
        return Err(Error::SizeMismatch {
            expected: header.npixels(),
            actual: len,
        });
    }
    Ok(())
}
