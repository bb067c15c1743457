//! Per-feature area statistics and the run report.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::attributes::RegionAttributes;
use crate::error::{Error, Result};
use crate::fuzzy_rules::{self, Assignment, RuleSet};
use crate::raster::RasterHeader;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureStats {
    pub feature_name: String,
    pub feature_count: usize,
    pub total_area: f64,
    /// Rounded to two decimals.
    pub mean_area: f64,
    pub min_area: f64,
    pub max_area: f64,
}

pub fn round2(v: f64) -> f64 {
    (v * 100.0).round() / 100.0
}

/// Groups assigned regions by feature. Rows follow the earliest rule that
/// produced each feature; unclassified regions are left out.
pub fn feature_statistics(
    assignments: &[Assignment],
    attrs: &[RegionAttributes],
) -> Result<Vec<FeatureStats>> {
    let area_of: BTreeMap<u32, f64> = attrs.iter().map(|a| (a.region_id, a.area)).collect();
    // feature -> (first rule index, areas)
    let mut groups: BTreeMap<&str, (usize, Vec<f64>)> = BTreeMap::new();
    for a in assignments {
        let Some(feature) = a.feature.as_deref() else {
            continue;
        };
        let area = *area_of
            .get(&a.region_id)
            .ok_or_else(|| Error::Parameter(format!("region {} has no attributes", a.region_id)))?;
        let rule = a.rule_index.unwrap_or(usize::MAX);
        let g = groups.entry(feature).or_insert((rule, Vec::new()));
        g.0 = g.0.min(rule);
        g.1.push(area);
    }
    let mut rows: Vec<(usize, FeatureStats)> = groups
        .into_iter()
        .map(|(name, (rule, areas))| {
            let total: f64 = areas.iter().sum();
            let stats = FeatureStats {
                feature_name: name.to_string(),
                feature_count: areas.len(),
                total_area: total,
                mean_area: round2(total / areas.len() as f64),
                min_area: areas.iter().copied().fold(f64::INFINITY, f64::min),
                max_area: areas.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            };
            (rule, stats)
        })
        .collect();
    rows.sort_by(|a, b| {
        a.0.cmp(&b.0)
            .then_with(|| a.1.feature_name.cmp(&b.1.feature_name))
    });
    Ok(rows.into_iter().map(|(_, s)| s).collect())
}

pub fn unclassified_count(assignments: &[Assignment]) -> usize {
    assignments.iter().filter(|a| a.feature.is_none()).count()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandInfo {
    pub band: String,
    pub wavelength: Option<f64>,
}

pub fn band_table(header: &RasterHeader) -> Vec<BandInfo> {
    (0..header.nbands)
        .map(|b| BandInfo {
            band: header
                .band_names
                .as_ref()
                .and_then(|n| n.get(b).cloned())
                .unwrap_or_else(|| format!("Band {}", b + 1)),
            wavelength: header.wavelengths.as_ref().and_then(|w| w.get(b).copied()),
        })
        .collect()
}

/// Everything the report echoes. The JSON form serializes this directly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub area_unit: String,
    pub pixel_size: f64,
    pub file_name: String,
    pub scale_level: f64,
    pub merge_level: f64,
    pub refine: Option<(f64, f64)>,
    pub attributes_computed: Vec<String>,
    /// Rule lines without ordinals; `None` when no rules ran.
    pub rule_set: Option<Vec<String>>,
    pub vector_output_directory: String,
    pub features: Vec<String>,
    pub smoothing_threshold: usize,
    pub bands: Vec<BandInfo>,
    pub feature_stats: Vec<FeatureStats>,
    pub unclassified_count: usize,
    pub region_count: usize,
}

impl RunSummary {
    /// Rule lines and distinct feature names, in rule order.
    pub fn rule_block(rules: &RuleSet) -> (Vec<String>, Vec<String>) {
        let lines = rules.rules().iter().map(fuzzy_rules::format_rule).collect();
        let mut features: Vec<String> = Vec::new();
        for r in rules.rules() {
            if !features.contains(&r.feature) {
                features.push(r.feature.clone());
            }
        }
        (lines, features)
    }
}

/// Areas are pixel counts times `pixel_size²`, with pixel size read as meters.
pub fn area_unit_for(pixel_size: f64) -> String {
    format!("m^2 (pixel size {pixel_size} m)")
}

pub fn run_report(s: &RunSummary) -> String {
    let mut out = String::new();
    let w = &mut out;
    let _ = writeln!(w, "Area Unit: {}", s.area_unit);
    let _ = writeln!(w, "File Name: {}", s.file_name);
    let _ = writeln!(w, "Segment Scale Level: {:.1}", s.scale_level);
    let _ = writeln!(w, "Merge Level: {:.1}", s.merge_level);
    match s.refine {
        Some((lo, hi)) => {
            let _ = writeln!(w, "Refine: {lo:.5} to {hi:.5}");
        }
        None => {
            let _ = writeln!(w, "Refine: none");
        }
    }
    let _ = writeln!(w, "Attributes Computed:");
    for a in &s.attributes_computed {
        let _ = writeln!(w, "{a}");
    }
    match &s.rule_set {
        Some(lines) => {
            let _ = writeln!(w, "Classification: Rule-Based");
            let _ = writeln!(w, "Rule Set:");
            for (i, l) in lines.iter().enumerate() {
                let _ = writeln!(w, "{}. {l}", i + 1);
            }
        }
        None => {
            let _ = writeln!(w, "Classification: None");
        }
    }
    let _ = writeln!(w, "Export Options:");
    let _ = writeln!(w, "Vector Output Directory:");
    let _ = writeln!(w, "{}", s.vector_output_directory);
    let _ = writeln!(w, "Feature Info:");
    for f in &s.features {
        let _ = writeln!(w, "{f} Type: Polygon");
    }
    let _ = writeln!(w, "Smoothing: Threshold of {}", s.smoothing_threshold);

    let _ = writeln!(w);
    let _ = writeln!(w, "Band Wavelengths");
    let _ = writeln!(w, "No.\tBand\tWavelength");
    for (i, b) in s.bands.iter().enumerate() {
        let value = b
            .wavelength
            .map_or_else(|| "n/a".to_string(), |v| format!("{v:.4}"));
        let _ = writeln!(w, "{}\t{}\t{value}", i + 1, b.band);
    }

    let _ = writeln!(w);
    let _ = writeln!(w, "Feature Area Statistics");
    let _ = writeln!(
        w,
        "Feature Name\tFeature Count\tTotal Area\tMean Area\tMin Area\tMax Area"
    );
    for f in &s.feature_stats {
        let _ = writeln!(
            w,
            "{}\t{}\t{}\t{}\t{}\t{}",
            f.feature_name, f.feature_count, f.total_area, f.mean_area, f.min_area, f.max_area
        );
    }
    let _ = writeln!(w, "Unclassified Regions: {}", s.unclassified_count);
    let _ = writeln!(w, "Total Regions: {}", s.region_count);
    out
}

pub fn run_report_json(s: &RunSummary) -> Result<String> {
    Ok(serde_json::to_string_pretty(s)? + "\n")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fuzzy_rules::parse_ruleset;

    fn attrs(areas: &[f64]) -> Vec<RegionAttributes> {
        areas
            .iter()
            .enumerate()
            .map(|(i, &a)| RegionAttributes {
                region_id: i as u32 + 1,
                pixel_count: (a / 900.0) as usize,
                area: a,
                avgband: vec![0.0],
                tx_mean: 0.0,
                majaxislen: 0.0,
            })
            .collect()
    }

    fn assign(id: u32, feature: Option<&str>, rule: Option<usize>) -> Assignment {
        Assignment {
            region_id: id,
            feature: feature.map(String::from),
            rule_index: rule,
            confidence: if feature.is_some() { 1.0 } else { 0.0 },
        }
    }

    #[test]
    fn hand_arithmetic() {
        let a = attrs(&[900.0, 2700.0, 1800.0]);
        let s = feature_statistics(
            &[
                assign(1, Some("F"), Some(0)),
                assign(2, Some("F"), Some(0)),
                assign(3, None, None),
            ],
            &a,
        )
        .unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(
            s[0],
            FeatureStats {
                feature_name: "F".into(),
                feature_count: 2,
                total_area: 3600.0,
                mean_area: 1800.0,
                min_area: 900.0,
                max_area: 2700.0,
            }
        );
    }

    #[test]
    fn rows_follow_rule_order() {
        let a = attrs(&[900.0, 900.0]);
        let s = feature_statistics(
            &[assign(1, Some("Z"), Some(0)), assign(2, Some("A"), Some(1))],
            &a,
        )
        .unwrap();
        assert_eq!(s[0].feature_name, "Z");
        assert_eq!(s[1].feature_name, "A");
    }

    #[test]
    fn missing_attributes_is_error() {
        assert!(feature_statistics(&[assign(9, Some("F"), Some(0))], &attrs(&[900.0])).is_err());
    }

    #[test]
    fn mean_is_rounded() {
        let a = attrs(&[900.0, 900.0, 1800.0]);
        let s = feature_statistics(
            &[
                assign(1, Some("F"), Some(0)),
                assign(2, Some("F"), Some(0)),
                assign(3, Some("F"), Some(0)),
            ],
            &a,
        )
        .unwrap();
        assert_eq!(s[0].mean_area, 1200.0);
        assert_eq!(round2(228817.3728813), 228817.37);
    }

    fn summary(rules: Option<&RuleSet>) -> RunSummary {
        let header = RasterHeader::new(4, 4, 3, 30.0)
            .unwrap()
            .with_wavelengths(vec![0.485, 0.56, 0.66])
            .unwrap();
        let (rule_set, features) = match rules {
            Some(r) => {
                let (l, f) = RunSummary::rule_block(r);
                (Some(l), f)
            }
            None => (None, vec![]),
        };
        RunSummary {
            area_unit: area_unit_for(30.0),
            pixel_size: 30.0,
            file_name: "maxi".into(),
            scale_level: 50.0,
            merge_level: 0.0,
            refine: Some((1.0, 3.0)),
            attributes_computed: vec!["Spatial".into(), "Spectral".into(), "Texture".into()],
            rule_set,
            vector_output_directory: "polygons".into(),
            features,
            smoothing_threshold: 1,
            bands: band_table(&header),
            feature_stats: vec![],
            unclassified_count: 0,
            region_count: 0,
        }
    }

    #[test]
    fn report_lines() {
        let rules = parse_ruleset(
            "1. (1.000): If tx_mean [0.7242, 2.8601], then object belongs to \"Feature_1\".\n\
             2. (1.000): If avgband_1 < 2.0131, then object belongs to \"Feature_2\".\n",
        )
        .unwrap();
        let text = run_report(&summary(Some(&rules)));
        for line in [
            "File Name: maxi",
            "Segment Scale Level: 50.0",
            "Merge Level: 0.0",
            "Refine: 1.00000 to 3.00000",
            "Classification: Rule-Based",
            "1. (1.000): If tx_mean [0.7242, 2.8601], then object belongs to \"Feature_1\".",
            "Feature_2 Type: Polygon",
            "Smoothing: Threshold of 1",
            "1\tBand 1\t0.4850",
        ] {
            assert!(
                text.lines().any(|l| l == line),
                "missing {line:?} in\n{text}"
            );
        }
        let order = [
            "File Name",
            "Segment Scale",
            "Merge Level",
            "Refine",
            "Attributes",
            "Classification",
            "Rule Set",
            "Export",
            "Feature Info",
            "Smoothing",
            "Band Wavelengths",
            "Feature Area",
        ];
        let pos: Vec<usize> = order.iter().map(|k| text.find(k).unwrap()).collect();
        assert!(pos.windows(2).all(|p| p[0] < p[1]));
    }

    #[test]
    fn no_rules_means_classification_none() {
        let text = run_report(&summary(None));
        assert!(text.contains("Classification: None\n"));
        assert!(!text.contains("Rule Set:"));
        assert_eq!(text, run_report(&summary(None)));
    }

    #[test]
    fn json_round_trip() {
        let s = summary(None);
        let back: RunSummary = serde_json::from_str(&run_report_json(&s).unwrap()).unwrap();
        assert_eq!(back, s);
    }
}
