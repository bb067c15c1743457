//! On-disk formats survive a save/load cycle.

use std::fs;

use terraclass::attributes::{self, AttributeParams};
use terraclass::error::Error;
use terraclass::fuzzy_rules;
use terraclass::gaussian;
use terraclass::raster::{self, header_path, Raster, RasterHeader};
use terraclass::segmentation::{self, SegmentParams};
use terraclass::synthetic;
use terraclass::training;

fn scene() -> synthetic::SyntheticScene {
    let h = RasterHeader::new(24, 16, 3, 30.0)
        .unwrap()
        .with_wavelengths(vec![0.485, 0.56, 0.66])
        .unwrap();
    let classes = synthetic::striped_classes(&h, 3, 20.0, 3.0);
    synthetic::generate_synthetic_scene(&classes, &h, 7).unwrap()
}

#[test]
fn raster_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let s = scene();
    let p = dir.path().join("scene");
    raster::save_raster(&s.raster, &p).unwrap();
    assert_eq!(raster::load_raster(&p).unwrap(), s.raster);
}

#[test]
fn uint16_bodies_are_widened() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("u16");
    let body: Vec<u8> = [1u16, 2, 65535, 7]
        .iter()
        .flat_map(|v| v.to_le_bytes())
        .collect();
    fs::write(&p, body).unwrap();
    fs::write(
        header_path(&p),
        "ncols = 2\nnrows = 2\nnbands = 1\ndata_type = uint16\n",
    )
    .unwrap();
    let r = raster::load_raster(&p).unwrap();
    assert_eq!(r.samples(), &[1.0, 2.0, 65535.0, 7.0]);
    assert_eq!(r.header().pixel_size, 30.0);
}

#[test]
fn truncated_body_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("short");
    fs::write(&p, [0u8; 12]).unwrap();
    fs::write(header_path(&p), "ncols = 2\nnrows = 2\nnbands = 1\n").unwrap();
    assert!(matches!(
        raster::load_raster(&p),
        Err(Error::SizeMismatch { .. })
    ));
}

#[test]
fn non_finite_sample_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("nan");
    let body: Vec<u8> = [1.0f32, f32::NAN]
        .iter()
        .flat_map(|v| v.to_le_bytes())
        .collect();
    fs::write(&p, body).unwrap();
    fs::write(header_path(&p), "ncols = 2\nnrows = 1\nnbands = 1\n").unwrap();
    assert!(matches!(
        raster::load_raster(&p),
        Err(Error::NonFinite { .. })
    ));
}

#[test]
fn missing_file_names_the_path() {
    let err = raster::load_raster(std::path::Path::new("/nonexistent/img")).unwrap_err();
    assert!(err.to_string().contains("/nonexistent/img"));
}

#[test]
fn grids_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let p16 = dir.path().join("labels");
    raster::save_grid_u16(&p16, 2, 3, 30.0, &[0, 1, 2, 3, 4, 65535]).unwrap();
    assert_eq!(
        raster::load_grid(&p16).unwrap().1,
        vec![0, 1, 2, 3, 4, 65535]
    );
    let p32 = dir.path().join("seg");
    raster::save_grid_u32(&p32, 1, 2, 30.0, &[1, 70000]).unwrap();
    assert_eq!(raster::load_grid(&p32).unwrap().1, vec![1, 70000]);
}

#[test]
fn models_and_roi_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let s = scene();
    let models = gaussian::train(&s.raster, &s.training).unwrap();
    let mp = dir.path().join("model.json");
    gaussian::save_models(&models, &mp).unwrap();
    let back = gaussian::load_models(&mp).unwrap();
    assert_eq!(back.len(), models.len());
    for (a, b) in models.iter().zip(&back) {
        assert_eq!(a.mean(), b.mean());
        assert_eq!(a.covariance(), b.covariance());
        assert_eq!(a.prior(), b.prior());
    }
    let rp = dir.path().join("roi.json");
    training::save_roi(&s.training, &rp).unwrap();
    let t = training::load_roi(&rp, s.raster.header()).unwrap();
    assert_eq!(t.classes(), s.training.classes());
}

#[test]
fn attribute_table_and_rules_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let s = scene();
    let seg = segmentation::segment_scene(&s.raster, &SegmentParams::default()).unwrap();
    let attrs = attributes::compute_all(&s.raster, &seg, &AttributeParams::default()).unwrap();
    let ap = dir.path().join("attrs.tsv");
    attributes::save_attributes(&attrs, &ap).unwrap();
    assert_eq!(attributes::load_attributes(&ap).unwrap(), attrs);

    let rules = fuzzy_rules::parse_ruleset(
        "1. (1.000): If tx_mean [0.7242, 2.8601], then object belongs to \"Feature_1\".\n",
    )
    .unwrap();
    for name in ["rules.txt", "rules.json"] {
        let p = dir.path().join(name);
        fuzzy_rules::save_ruleset(&rules, &p).unwrap();
        assert_eq!(fuzzy_rules::load_ruleset(&p).unwrap(), rules);
    }
}

#[test]
fn polygon_document_is_json() {
    let s = scene();
    let seg = segmentation::segment_scene(&s.raster, &SegmentParams::default()).unwrap();
    let doc = segmentation::export_polygons(&seg, s.raster.header());
    let text = serde_json::to_string(&doc).unwrap();
    let back: segmentation::PolygonDocument = serde_json::from_str(&text).unwrap();
    assert_eq!(back, doc);
    let single: Raster = s.raster.single_band(1).unwrap();
    assert_eq!(single.header().wavelengths, Some(vec![0.56]));
}
