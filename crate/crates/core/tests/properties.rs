//! Invariants checked over randomized inputs.

mod common;

use common::*;
use proptest::prelude::*;
use terraclass::attributes::{self, AttributeParams, RegionAttributes};
use terraclass::fuzzy_mlc;
use terraclass::fuzzy_rules::{
    classify_objects, Comparator, Condition, FuzzyRule, MembershipFunction, RuleSet, Shape,
};
use terraclass::gaussian::{self, GaussianClassModel};
use terraclass::raster::{Raster, RasterHeader};
use terraclass::reporting;
use terraclass::segmentation::{self, SegmentMap, SegmentParams};

fn build(params: &[(Vec<f64>, Vec<f64>, f64)]) -> Vec<GaussianClassModel> {
    params
        .iter()
        .enumerate()
        .map(|(i, (m, c, p))| {
            GaussianClassModel::new(format!("c{i}"), m.clone(), c.clone(), *p).unwrap()
        })
        .collect()
}

fn scene(nrows: usize, ncols: usize, nb: usize) -> impl Strategy<Value = Raster> {
    prop::collection::vec(0u8..6, nrows * ncols * nb).prop_map(move |v| {
        let header = RasterHeader::new(ncols, nrows, nb, 30.0).unwrap();
        Raster::new(header, v.into_iter().map(|x| x as f32 * 3.0).collect()).unwrap()
    })
}

fn comparator() -> impl Strategy<Value = Comparator> {
    prop_oneof![
        (-10.0f64..10.0).prop_map(Comparator::LessThan),
        (-10.0f64..10.0).prop_map(Comparator::GreaterThan),
        (-10.0f64..10.0, 0.0f64..10.0).prop_map(|(lo, w)| Comparator::InRange(lo, lo + w)),
    ]
}

fn shape() -> impl Strategy<Value = Shape> {
    prop_oneof![Just(Shape::Linear), Just(Shape::SType)]
}

proptest! {
    #[test]
    fn grades_form_a_distribution(
        (params, x) in (1usize..=4, 1usize..=5).prop_flat_map(|(n, k)| (model_params(n, k), prop::collection::vec(-40.0f64..40.0, n)))
    ) {
        let g = fuzzy_mlc::membership_grades(&build(&params), &x).unwrap();
        prop_assert!(g.iter().all(|v| (0.0..=1.0).contains(v)));
        prop_assert!((g.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn equal_prior_posterior_argmax_is_likelihood_argmax(
        (params, x) in (1usize..=4, 2usize..=5).prop_flat_map(|(n, k)| (model_params(n, k), prop::collection::vec(-20.0f64..20.0, n)))
    ) {
        let k = params.len();
        let models: Vec<GaussianClassModel> = build(&params).into_iter().map(|m| m.with_prior(1.0 / k as f64).unwrap()).collect();
        let post = gaussian::posteriors(&models, &x).unwrap();
        let ll: Vec<f64> = models.iter().map(|m| m.log_density(&x).unwrap()).collect();
        let argmax = |v: &[f64]| v.iter().enumerate().fold(0, |b, (i, x)| if *x > v[b] { i } else { b });
        prop_assert_eq!(argmax(&post), argmax(&ll));
    }

    #[test]
    fn hardened_fuzzy_labels_equal_crisp_labels(
        (params, raster) in (1usize..=3, 1usize..=4).prop_flat_map(|(n, k)| (model_params(n, k), scene(6, 7, n)))
    ) {
        let models = build(&params);
        let crisp = gaussian::classify(&raster, &models, None).unwrap();
        let (map, hard) = fuzzy_mlc::fuzzy_classify(&raster, &models).unwrap();
        prop_assert_eq!(&crisp.labels, &hard.labels);
        prop_assert!(crisp.labels.iter().all(|&l| l >= 1 && l as usize <= models.len()));
        for p in map.grades.chunks(models.len()) {
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        }
    }

    #[test]
    fn raising_threshold_only_unclassifies(
        (params, raster) in (1usize..=3, 2usize..=4).prop_flat_map(|(n, k)| (model_params(n, k), scene(5, 5, n))),
        t in 0.05f64..0.9,
    ) {
        let models = build(&params);
        let lo = gaussian::classify(&raster, &models, Some(t)).unwrap();
        let hi = gaussian::classify(&raster, &models, Some((t + 0.99) / 2.0)).unwrap();
        for (a, b) in lo.labels.iter().zip(&hi.labels) {
            prop_assert!(*b == 0 || a == b);
        }
    }

    #[test]
    fn segmentation_stages_keep_a_partition(
        raster in scene(12, 12, 2),
        scale in 0.0f64..100.0,
        merge in 0.0f64..100.0,
        smooth_t in 1usize..8,
    ) {
        let params = SegmentParams { scale_level: scale, ..Default::default() };
        let s0 = segmentation::segment(&raster, &params).unwrap();
        s0.check_partition().unwrap();
        let s1 = segmentation::merge_regions(&raster, &s0, merge).unwrap();
        s1.check_partition().unwrap();
        prop_assert!(s1.region_count <= s0.region_count);
        let s2 = segmentation::smooth(&s1, &raster, smooth_t).unwrap();
        s2.check_partition().unwrap();
        prop_assert!(s2.region_count <= s1.region_count);
        if s2.region_count > 1 {
            prop_assert!(s2.region_sizes().iter().all(|&n| n >= smooth_t));
        }
        prop_assert_eq!(s2.region_sizes().iter().sum::<usize>(), 144);
    }

    #[test]
    fn region_count_monotone_in_scale_and_merge(raster in scene(12, 12, 1)) {
        let mut prev = u32::MAX;
        for scale in [0.0, 25.0, 50.0, 75.0, 100.0] {
            let s = segmentation::segment(&raster, &SegmentParams { scale_level: scale, ..Default::default() }).unwrap();
            prop_assert!(s.region_count <= prev);
            prev = s.region_count;
        }
        let base = segmentation::segment(&raster, &SegmentParams { scale_level: 0.0, ..Default::default() }).unwrap();
        let mut prev = u32::MAX;
        for merge in [0.0, 25.0, 50.0, 75.0, 100.0] {
            let s = segmentation::merge_regions(&raster, &base, merge).unwrap();
            prop_assert!(s.region_count <= prev);
            prev = s.region_count;
        }
    }

    #[test]
    fn polygon_areas_match_pixel_counts(raster in scene(10, 9, 1)) {
        let seg = segmentation::segment(&raster, &SegmentParams { scale_level: 20.0, ..Default::default() }).unwrap();
        let doc = segmentation::export_polygons(&seg, raster.header());
        prop_assert_eq!(doc.features.len(), seg.region_count as usize);
        let sizes = seg.region_sizes();
        for f in &doc.features {
            prop_assert_eq!(f.ring.first(), f.ring.last());
            let px = sizes[f.region_id as usize - 1] as f64 * 900.0;
            if doc.metadata.regions_with_holes.contains(&f.region_id) {
                prop_assert!(f.area > px);
            } else {
                prop_assert_eq!(f.area, px);
            }
        }
    }

    #[test]
    fn attribute_bounds_and_partition(raster in scene(10, 10, 2), kernel in prop::sample::select(vec![1usize, 3, 5])) {
        let seg = segmentation::segment(&raster, &SegmentParams { scale_level: 30.0, ..Default::default() }).unwrap();
        let attrs = attributes::compute_all(&raster, &seg, &AttributeParams { kernel, texture_band: 0 }).unwrap();
        prop_assert_eq!(attrs.iter().map(|a| a.pixel_count).sum::<usize>(), 100);
        let b0 = raster.band(0);
        let (gmin, gmax) = b0.iter().fold((f64::MAX, f64::MIN), |(a, b), &v| (a.min(v as f64), b.max(v as f64)));
        for a in &attrs {
            prop_assert!(a.pixel_count >= 1);
            prop_assert_eq!(a.area, a.pixel_count as f64 * 900.0);
            for b in 0..2 {
                let vals: Vec<f64> = raster.band(b).iter().zip(&seg.labels).filter(|(_, l)| **l == a.region_id).map(|(v, _)| *v as f64).collect();
                let lo = vals.iter().cloned().fold(f64::MAX, f64::min);
                let hi = vals.iter().cloned().fold(f64::MIN, f64::max);
                prop_assert!(a.avgband[b] >= lo - 1e-9 && a.avgband[b] <= hi + 1e-9);
            }
            prop_assert!(a.tx_mean >= gmin - 1e-9 && a.tx_mean <= gmax + 1e-9);
        }
    }

    #[test]
    fn major_axis_translation_and_rotation(
        cells in prop::collection::btree_set((0usize..5, 0usize..5), 1..12),
        dy in 0usize..5, dx in 0usize..5,
    ) {
        let place = |f: &dyn Fn(usize, usize) -> (usize, usize)| {
            let mut raw = vec![2u32; 15 * 15];
            for &(r, c) in &cells {
                let (r, c) = f(r, c);
                raw[r * 15 + c] = 1;
            }
            let seg = SegmentMap::from_raw(15, 15, &raw).unwrap();
            let id = seg.labels[raw.iter().position(|&v| v == 1).unwrap()];
            attributes::compute_majaxislen(&seg, id, 30.0).unwrap()
        };
        let base = place(&|r, c| (r, c));
        let moved = place(&|r, c| (r + dy, c + dx));
        let rotated = place(&|r, c| (c, 4 - r + 6));
        prop_assert!((base - moved).abs() <= 1e-9 * base);
        prop_assert!((base - rotated).abs() <= 1e-9 * base);
    }

    #[test]
    fn membership_properties(
        cmp in comparator(), tau in 0.0f64..3.0, v1 in -15.0f64..15.0, v2 in -15.0f64..15.0,
    ) {
        let lin = MembershipFunction::new(Shape::Linear, cmp, tau).unwrap();
        let s = MembershipFunction::new(Shape::SType, cmp, tau).unwrap();
        let (a, b) = if v1 <= v2 { (v1, v2) } else { (v2, v1) };
        for f in [&lin, &s] {
            let (fa, fb) = (f.eval(a), f.eval(b));
            prop_assert!((0.0..=1.0).contains(&fa) && (0.0..=1.0).contains(&fb));
            match cmp {
                Comparator::LessThan(_) => prop_assert!(fa >= fb),
                Comparator::GreaterThan(_) => prop_assert!(fa <= fb),
                Comparator::InRange(lo, hi) => {
                    let mid = 0.5 * (lo + hi);
                    if b <= mid { prop_assert!(fa <= fb); }
                    if a >= mid { prop_assert!(fa >= fb); }
                }
            }
        }
        let l = lin.eval(v1);
        if l == 0.0 || l == 0.5 || l == 1.0 {
            prop_assert_eq!(s.eval(v1), l);
        }
    }

    #[test]
    fn small_tolerance_reaches_crisp_limit(cmp in comparator(), sh in shape(), v in -15.0f64..15.0) {
        let off = match cmp {
            Comparator::LessThan(t) | Comparator::GreaterThan(t) => (v - t).abs() > 1e-6,
            Comparator::InRange(lo, hi) => (v - lo).abs() > 1e-6 && (v - hi).abs() > 1e-6,
        };
        prop_assume!(off);
        let crisp = MembershipFunction::new(sh, cmp, 0.0).unwrap();
        let fuzzy = MembershipFunction::new(sh, cmp, 1e-9).unwrap();
        prop_assert_eq!(crisp.eval(v), fuzzy.eval(v));
    }

    #[test]
    fn confidences_bounded_and_weight_scaling_keeps_assignment(
        rules in prop::collection::vec((comparator(), shape(), 0.0f64..2.0, 0.1f64..=1.0, 0usize..3), 1..5),
        regions in prop::collection::vec((-12.0f64..12.0, -12.0f64..12.0, -12.0f64..12.0), 1..20),
        factor in 0.05f64..=1.0,
    ) {
        let names = ["tx_mean", "avgband_1", "majaxislen"];
        let rs = RuleSet::new(rules.iter().enumerate().map(|(i, (c, s, tau, w, attr))| FuzzyRule {
            feature: format!("F{}", i % 2),
            weight: *w,
            conditions: vec![Condition {
                attribute: names[*attr].into(),
                function: MembershipFunction::new(*s, *c, *tau).unwrap(),
            }],
        }).collect()).unwrap();
        let attrs: Vec<RegionAttributes> = regions.iter().enumerate().map(|(i, (t, b, m))| RegionAttributes {
            region_id: i as u32 + 1, pixel_count: i + 1, area: (i + 1) as f64 * 900.0,
            avgband: vec![*b], tx_mean: *t, majaxislen: *m,
        }).collect();
        let out = classify_objects(&rs, &attrs).unwrap();
        prop_assert!(out.confidence.iter().flatten().all(|c| (0.0..=1.0).contains(c)));
        let scaled = classify_objects(&rs.scaled(factor).unwrap(), &attrs).unwrap();
        for (a, b) in out.assignments.iter().zip(&scaled.assignments) {
            prop_assert_eq!(&a.feature, &b.feature);
        }

        let stats = reporting::feature_statistics(&out.assignments, &attrs).unwrap();
        let assigned: usize = stats.iter().map(|s| s.feature_count).sum();
        prop_assert_eq!(assigned + reporting::unclassified_count(&out.assignments), attrs.len());
        for s in &stats {
            prop_assert!((s.total_area - s.feature_count as f64 * s.mean_area).abs() <= 0.005 * s.feature_count as f64);
            prop_assert!(s.min_area <= s.mean_area && s.mean_area <= s.max_area);
            prop_assert_eq!(s.total_area % 900.0, 0.0);
        }
    }

    #[test]
    fn header_text_round_trip(
        ncols in 1usize..500, nrows in 1usize..500, nb in 1usize..6, ps in 0.5f64..100.0,
        wl in prop::collection::vec(0.3f64..2.5, 6),
    ) {
        let h = RasterHeader::new(ncols, nrows, nb, ps).unwrap().with_wavelengths(wl[..nb].to_vec()).unwrap();
        prop_assert_eq!(RasterHeader::parse(&h.to_text()).unwrap(), h);
    }
}
