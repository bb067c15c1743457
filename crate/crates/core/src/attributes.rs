//! Per-region spectral, texture and spatial attributes.
//!
//! * `avgband_k`: mean of band `k` (1-based in names) over the region.
//! * `tx_mean`: mean over the region of a `kernel × kernel` local-mean filtered band.
//! * `majaxislen`: `4·sqrt(λ_max)·pixel_size`, where `λ_max` is the largest
//!   eigenvalue of the centered second-moment matrix of pixel centers with
//!   the unit-square moment `1/12` added on the diagonal.
//! * `area`: `pixel_count · pixel_size²`.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::fsutil;
use crate::par;
use crate::raster::Raster;
use crate::segmentation::SegmentMap;

const UNIT_PIXEL_MOMENT: f64 = 1.0 / 12.0;

#[derive(Debug, Clone, PartialEq)]
pub struct RegionAttributes {
    pub region_id: u32,
    pub pixel_count: usize,
    pub area: f64,
    pub avgband: Vec<f64>,
    pub tx_mean: f64,
    pub majaxislen: f64,
}

impl RegionAttributes {
    /// Looks up an attribute by rule name (`avgband_1`, `tx_mean`, ...).
    pub fn get(&self, name: &str) -> Option<f64> {
        match name {
            "tx_mean" => Some(self.tx_mean),
            "majaxislen" => Some(self.majaxislen),
            "area" => Some(self.area),
            "pixel_count" => Some(self.pixel_count as f64),
            _ => {
                let k: usize = name.strip_prefix("avgband_")?.parse().ok()?;
                self.avgband.get(k.checked_sub(1)?).copied()
            }
        }
    }
}

/// Whether `name` is a recognised attribute name (band range not checked).
pub fn is_attribute_name(name: &str) -> bool {
    matches!(name, "tx_mean" | "majaxislen" | "area" | "pixel_count")
        || name
            .strip_prefix("avgband_")
            .and_then(|k| k.parse::<usize>().ok())
            .is_some_and(|k| k >= 1)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttributeParams {
    pub kernel: usize,
    /// Band used for texture; the segmentation band by convention.
    pub texture_band: usize,
}

impl Default for AttributeParams {
    fn default() -> Self {
        Self {
            kernel: 3,
            texture_band: 0,
        }
    }
}

fn check_kernel(kernel: usize) -> Result<()> {
    if kernel == 0 || kernel.is_multiple_of(2) {
        return Err(Error::Parameter(format!(
            "kernel must be odd and >= 1, got {kernel}"
        )));
    }
    Ok(())
}

fn check_band(raster: &Raster, band: usize) -> Result<()> {
    if band >= raster.nbands() {
        return Err(Error::Parameter(format!(
            "band index {band} out of range for {} bands",
            raster.nbands()
        )));
    }
    Ok(())
}

fn check_geometry(raster: &Raster, seg: &SegmentMap) -> Result<()> {
    if raster.nrows() != seg.nrows || raster.ncols() != seg.ncols {
        return Err(Error::Dimension {
            expected: raster.npixels(),
            actual: seg.nrows * seg.ncols,
        });
    }
    Ok(())
}

fn check_region(seg: &SegmentMap, region_id: u32) -> Result<()> {
    if region_id == 0 || region_id > seg.region_count {
        return Err(Error::Parameter(format!(
            "region {region_id} does not exist ({} regions)",
            seg.region_count
        )));
    }
    Ok(())
}

/// `kernel × kernel` moving average with replicated edges.
pub fn mean_filter(band: &[f32], nrows: usize, ncols: usize, kernel: usize) -> Result<Vec<f64>> {
    check_kernel(kernel)?;
    let h = (kernel / 2) as isize;
    let norm = (kernel * kernel) as f64;
    let rows = par::map_range(nrows, |r| {
        (0..ncols)
            .map(|c| {
                let mut s = 0.0;
                for dr in -h..=h {
                    let rr = (r as isize + dr).clamp(0, nrows as isize - 1) as usize;
                    for dc in -h..=h {
                        let cc = (c as isize + dc).clamp(0, ncols as isize - 1) as usize;
                        s += band[rr * ncols + cc] as f64;
                    }
                }
                s / norm
            })
            .collect::<Vec<f64>>()
    });
    Ok(rows.concat())
}

pub fn compute_avgband(
    raster: &Raster,
    seg: &SegmentMap,
    region_id: u32,
    band: usize,
) -> Result<f64> {
    check_geometry(raster, seg)?;
    check_region(seg, region_id)?;
    check_band(raster, band)?;
    let (sum, n) = raster
        .band(band)
        .iter()
        .zip(&seg.labels)
        .filter(|(_, &l)| l == region_id)
        .fold((0.0, 0usize), |(s, n), (&v, _)| (s + v as f64, n + 1));
    Ok(sum / n as f64)
}

pub fn compute_tx_mean(
    raster: &Raster,
    seg: &SegmentMap,
    region_id: u32,
    kernel: usize,
    band: usize,
) -> Result<f64> {
    check_geometry(raster, seg)?;
    check_region(seg, region_id)?;
    check_band(raster, band)?;
    let filtered = mean_filter(raster.band(band), raster.nrows(), raster.ncols(), kernel)?;
    let (sum, n) = filtered
        .iter()
        .zip(&seg.labels)
        .filter(|(_, &l)| l == region_id)
        .fold((0.0, 0usize), |(s, n), (&v, _)| (s + v, n + 1));
    Ok(sum / n as f64)
}

fn major_axis(syy: f64, sxx: f64, sxy: f64, pixel_size: f64) -> f64 {
    let a = syy + UNIT_PIXEL_MOMENT;
    let c = sxx + UNIT_PIXEL_MOMENT;
    let half_diff = 0.5 * (a - c);
    let lambda = 0.5 * (a + c) + half_diff.hypot(sxy);
    4.0 * lambda.sqrt() * pixel_size
}

pub fn compute_majaxislen(seg: &SegmentMap, region_id: u32, pixel_size: f64) -> Result<f64> {
    check_region(seg, region_id)?;
    let coords: Vec<(f64, f64)> = seg
        .labels
        .iter()
        .enumerate()
        .filter(|(_, &l)| l == region_id)
        .map(|(p, _)| ((p / seg.ncols) as f64 + 0.5, (p % seg.ncols) as f64 + 0.5))
        .collect();
    let n = coords.len() as f64;
    let (my, mx) = coords
        .iter()
        .fold((0.0, 0.0), |(a, b), &(y, x)| (a + y, b + x));
    let (my, mx) = (my / n, mx / n);
    let (mut syy, mut sxx, mut sxy) = (0.0, 0.0, 0.0);
    for &(y, x) in &coords {
        syy += (y - my) * (y - my);
        sxx += (x - mx) * (x - mx);
        sxy += (y - my) * (x - mx);
    }
    Ok(major_axis(syy / n, sxx / n, sxy / n, pixel_size))
}

/// All attributes for every region, ascending by id.
pub fn compute_all(
    raster: &Raster,
    seg: &SegmentMap,
    params: &AttributeParams,
) -> Result<Vec<RegionAttributes>> {
    check_geometry(raster, seg)?;
    check_band(raster, params.texture_band)?;
    let filtered = mean_filter(
        raster.band(params.texture_band),
        raster.nrows(),
        raster.ncols(),
        params.kernel,
    )?;
    let rc = seg.region_count as usize;
    let nb = raster.nbands();
    let np = raster.npixels();
    let ncols = seg.ncols;
    let ps = raster.header().pixel_size;

    let mut counts = vec![0usize; rc];
    let mut band_sums = vec![0.0; rc * nb];
    let mut tx_sums = vec![0.0; rc];
    let mut ysum = vec![0.0; rc];
    let mut xsum = vec![0.0; rc];
    for (p, &l) in seg.labels.iter().enumerate() {
        let r = l as usize - 1;
        counts[r] += 1;
        for b in 0..nb {
            band_sums[r * nb + b] += raster.samples()[b * np + p] as f64;
        }
        tx_sums[r] += filtered[p];
        ysum[r] += (p / ncols) as f64 + 0.5;
        xsum[r] += (p % ncols) as f64 + 0.5;
    }
    let mut moments = vec![[0.0f64; 3]; rc];
    for (p, &l) in seg.labels.iter().enumerate() {
        let r = l as usize - 1;
        let n = counts[r] as f64;
        let dy = (p / ncols) as f64 + 0.5 - ysum[r] / n;
        let dx = (p % ncols) as f64 + 0.5 - xsum[r] / n;
        moments[r][0] += dy * dy;
        moments[r][1] += dx * dx;
        moments[r][2] += dy * dx;
    }
    Ok((0..rc)
        .map(|r| {
            let n = counts[r] as f64;
            RegionAttributes {
                region_id: r as u32 + 1,
                pixel_count: counts[r],
                area: counts[r] as f64 * ps * ps,
                avgband: (0..nb).map(|b| band_sums[r * nb + b] / n).collect(),
                tx_mean: tx_sums[r] / n,
                majaxislen: major_axis(moments[r][0] / n, moments[r][1] / n, moments[r][2] / n, ps),
            }
        })
        .collect())
}

/// Tab-separated attribute table with a header row.
pub fn attributes_to_tsv(attrs: &[RegionAttributes]) -> String {
    let nb = attrs.first().map_or(0, |a| a.avgband.len());
    let mut s = String::from("region_id\tpixel_count\tarea");
    for k in 1..=nb {
        let _ = write!(s, "\tavgband_{k}");
    }
    s.push_str("\ttx_mean\tmajaxislen\n");
    for a in attrs {
        let _ = write!(s, "{}\t{}\t{}", a.region_id, a.pixel_count, a.area);
        for v in &a.avgband {
            let _ = write!(s, "\t{v}");
        }
        let _ = writeln!(s, "\t{}\t{}", a.tx_mean, a.majaxislen);
    }
    s
}

pub fn attributes_from_tsv(text: &str) -> Result<Vec<RegionAttributes>> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header: Vec<&str> = lines
        .next()
        .ok_or_else(|| Error::Parse("empty attribute table".into()))?
        .split('\t')
        .collect();
    let col = |name: &str| -> Result<usize> {
        header
            .iter()
            .position(|h| *h == name)
            .ok_or_else(|| Error::Parse(format!("attribute table lacks column '{name}'")))
    };
    let (id_c, count_c, area_c, tx_c, maj_c) = (
        col("region_id")?,
        col("pixel_count")?,
        col("area")?,
        col("tx_mean")?,
        col("majaxislen")?,
    );
    let mut band_cols = Vec::new();
    for k in 1.. {
        match header.iter().position(|h| *h == format!("avgband_{k}")) {
            Some(c) => band_cols.push(c),
            None => break,
        }
    }
    lines
        .enumerate()
        .map(|(i, line)| {
            let f: Vec<&str> = line.split('\t').collect();
            if f.len() != header.len() {
                return Err(Error::Parse(format!(
                    "row {}: {} fields, header has {}",
                    i + 1,
                    f.len(),
                    header.len()
                )));
            }
            let num = |c: usize| -> Result<f64> {
                f[c].parse()
                    .map_err(|_| Error::Parse(format!("row {}: bad number '{}'", i + 1, f[c])))
            };
            Ok(RegionAttributes {
                region_id: f[id_c]
                    .parse()
                    .map_err(|_| Error::Parse(format!("row {}: bad region id", i + 1)))?,
                pixel_count: f[count_c]
                    .parse()
                    .map_err(|_| Error::Parse(format!("row {}: bad pixel count", i + 1)))?,
                area: num(area_c)?,
                avgband: band_cols.iter().map(|&c| num(c)).collect::<Result<_>>()?,
                tx_mean: num(tx_c)?,
                majaxislen: num(maj_c)?,
            })
        })
        .collect()
}

pub fn load_attributes(path: &Path) -> Result<Vec<RegionAttributes>> {
    attributes_from_tsv(&fsutil::read_to_string(path)?)
}

pub fn save_attributes(attrs: &[RegionAttributes], path: &Path) -> Result<()> {
    fsutil::write_atomic(path, attributes_to_tsv(attrs).as_bytes())
}
