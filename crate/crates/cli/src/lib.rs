//! Command-line front end: argument definitions and the stage runners.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use terraclass::attributes::{self, AttributeParams};
use terraclass::fsutil;
use terraclass::fuzzy_mlc::{self, EstimationSet, FuzzyConfig};
use terraclass::fuzzy_rules::{self, RuleSet};
use terraclass::gaussian::{self, GaussianClassModel};
use terraclass::raster::{self, Raster, RasterHeader};
use terraclass::reporting::{self, RunSummary};
use terraclass::segmentation::{self, SegmentMap, SegmentParams};
use terraclass::synthetic;
use terraclass::training;

pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_NUMERICAL: i32 = 4;

#[derive(Debug, Parser)]
#[command(
    name = "terraclass",
    version,
    about = "Maximum-likelihood and fuzzy land-cover classification"
)]
pub struct Cli {
    /// Worker threads for data-parallel stages (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print a raster's header and per-band statistics.
    Info { raster: PathBuf },
    /// Generate a seeded synthetic scene with training ROIs and truth labels.
    Synth(SynthArgs),
    /// Fit one Gaussian model per ROI class.
    Train {
        #[arg(long)]
        raster: PathBuf,
        #[arg(long)]
        roi: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Crisp maximum-likelihood classification.
    Classify {
        #[arg(long)]
        raster: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Leave pixels whose winning posterior is below this unclassified.
        #[arg(long)]
        threshold: Option<f64>,
    },
    /// Fit fuzzy models and write membership maps plus hardened labels.
    FuzzyClassify {
        #[arg(long)]
        raster: PathBuf,
        #[arg(long)]
        roi: PathBuf,
        /// Output prefix; writes `<out>`, `<out>.memberships.<k>`, `<out>.model.json`, `<out>.fit.json`.
        #[arg(long, visible_alias = "out-prefix")]
        out: PathBuf,
        #[command(flatten)]
        fuzzy: FuzzyArgs,
    },
    /// Segment one band into regions and optionally export polygons.
    Segment {
        #[arg(long)]
        raster: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        seg: SegmentArgs,
        /// Directory to receive `polygons.json`.
        #[arg(long)]
        export_polygons: Option<PathBuf>,
    },
    /// Per-region attribute table.
    Attrs {
        #[arg(long)]
        raster: PathBuf,
        #[arg(long)]
        seg: PathBuf,
        #[arg(long, default_value_t = 3)]
        kernel: usize,
        /// Texture band (0-based).
        #[arg(long, default_value_t = 0)]
        band: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fuzzy rule operations.
    Rules {
        #[command(subcommand)]
        action: RulesCommand,
    },
    /// Render the text report of a finished pipeline run.
    Report {
        #[arg(long)]
        run: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Emit the machine-readable form instead.
        #[arg(long)]
        json: bool,
    },
    /// Run train, classify, segment, attributes, rules and report end to end.
    Pipeline(PipelineArgs),
}

#[derive(Debug, Subcommand)]
pub enum RulesCommand {
    /// Assign regions to features and write per-rule confidence tables.
    Apply {
        #[arg(long)]
        attrs: PathBuf,
        #[arg(long)]
        rules: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        confidence_maps: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    /// Output raster path; `<out>.roi.json` and `<out>.truth` are written beside it.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 128)]
    pub rows: usize,
    #[arg(long, default_value_t = 128)]
    pub cols: usize,
    #[arg(long, default_value_t = 3)]
    pub bands: usize,
    #[arg(long, default_value_t = 3)]
    pub classes: usize,
    /// Mean offset between consecutive classes, in every band.
    #[arg(long, default_value_t = 12.0)]
    pub separation: f64,
    #[arg(long, default_value_t = 4.0)]
    pub sigma: f64,
    #[arg(long, default_value_t = 30.0)]
    pub pixel_size: f64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args)]
pub struct FuzzyArgs {
    #[arg(long = "m", default_value_t = 1.0)]
    pub m_exponent: f64,
    #[arg(long, default_value_t = 10)]
    pub iterations: usize,
    #[arg(long, default_value_t = 1e-4)]
    pub epsilon: f64,
    #[arg(long, value_enum, default_value_t = EstimationArg::Training)]
    pub estimation_set: EstimationArg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EstimationArg {
    Training,
    Scene,
}

impl FuzzyArgs {
    pub fn config(&self) -> FuzzyConfig {
        FuzzyConfig {
            m_exponent: self.m_exponent,
            max_iterations: self.iterations,
            epsilon: self.epsilon,
            estimation_set: match self.estimation_set {
                EstimationArg::Training => EstimationSet::TrainingPixelsOnly,
                EstimationArg::Scene => EstimationSet::FullScene,
            },
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct SegmentArgs {
    /// Band to segment (0-based).
    #[arg(long, default_value_t = 0)]
    pub band: usize,
    #[arg(long, default_value_t = 50.0)]
    pub scale: f64,
    #[arg(long, default_value_t = 0.0)]
    pub merge: f64,
    #[arg(long, default_value_t = 1)]
    pub smooth: usize,
    /// Refinement range `LO,HI`; recorded in reports only.
    #[arg(long, value_parser = parse_range)]
    pub refine: Option<(f64, f64)>,
}

impl SegmentArgs {
    pub fn params(&self) -> SegmentParams {
        SegmentParams {
            band_index: self.band,
            scale_level: self.scale,
            merge_level: self.merge,
            smoothing_threshold: self.smooth,
            refine_range: self.refine,
        }
    }
}

fn parse_range(s: &str) -> std::result::Result<(f64, f64), String> {
    let (a, b) = s.split_once(',').ok_or("expected LO,HI")?;
    let lo: f64 = a.trim().parse().map_err(|_| format!("bad number '{a}'"))?;
    let hi: f64 = b.trim().parse().map_err(|_| format!("bad number '{b}'"))?;
    Ok((lo, hi))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SegmentInput {
    /// The hardened classification image.
    Labels,
    /// The original multiband raster.
    Raster,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Classifier {
    Mlc,
    Fuzzy,
}

#[derive(Debug, Clone, Args)]
pub struct PipelineArgs {
    /// Input raster. Without it a synthetic scene is generated from `--seed`.
    #[arg(long, requires = "roi")]
    pub raster: Option<PathBuf>,
    #[arg(long)]
    pub roi: Option<PathBuf>,
    /// Seed for the synthetic input scene when `--raster` is absent.
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub rules: Option<PathBuf>,
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Which labels feed segmentation when `--segment-input labels`.
    #[arg(long, value_enum, default_value_t = Classifier::Fuzzy)]
    pub classifier: Classifier,
    #[arg(long, value_enum, default_value_t = SegmentInput::Labels)]
    pub segment_input: SegmentInput,
    #[arg(long, default_value_t = 3)]
    pub kernel: usize,
    #[command(flatten)]
    pub fuzzy: FuzzyArgs,
    #[command(flatten)]
    pub seg: SegmentArgs,
    /// Print the stage plan and exit without writing anything.
    #[arg(long)]
    pub dry_run: bool,
}

/// Exit code for an error: numerical failures and data problems differ.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    let numerical = err
        .chain()
        .filter_map(|e| e.downcast_ref::<terraclass::Error>())
        .any(terraclass::Error::is_numerical);
    if numerical {
        EXIT_NUMERICAL
    } else {
        EXIT_DATA
    }
}

pub fn run(cli: Cli) -> Result<()> {
    configure_threads(cli.threads)?;
    match cli.command {
        Command::Info { raster } => info(&raster),
        Command::Synth(a) => synth(&a),
        Command::Train { raster, roi, out } => {
            let r = load_raster(&raster)?;
            let t = training::load_roi(&roi, r.header())
                .with_context(|| format!("reading ROIs {}", roi.display()))?;
            let models = gaussian::train(&r, &t).context("stage 'train'")?;
            gaussian::save_models(&models, &out)?;
            Ok(())
        }
        Command::Classify {
            raster,
            model,
            out,
            threshold,
        } => {
            let r = load_raster(&raster)?;
            let models = gaussian::load_models(&model)
                .with_context(|| format!("reading model {}", model.display()))?;
            let res = gaussian::classify(&r, &models, threshold).context("stage 'classify'")?;
            write_labels(&out, &res, r.header().pixel_size)
        }
        Command::FuzzyClassify {
            raster,
            roi,
            out,
            fuzzy,
        } => {
            let r = load_raster(&raster)?;
            let t = training::load_roi(&roi, r.header())
                .with_context(|| format!("reading ROIs {}", roi.display()))?;
            run_fuzzy(&r, &t, &fuzzy.config(), &out)?;
            Ok(())
        }
        Command::Segment {
            raster,
            out,
            seg,
            export_polygons,
        } => {
            let r = load_raster(&raster)?;
            let s = segmentation::segment_scene(&r, &seg.params()).context("stage 'segment'")?;
            raster::save_grid_u32(&out, s.nrows, s.ncols, r.header().pixel_size, &s.labels)?;
            if let Some(dir) = export_polygons {
                fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
                write_json(
                    &dir.join("polygons.json"),
                    &segmentation::export_polygons(&s, r.header()),
                )?;
            }
            Ok(())
        }
        Command::Attrs {
            raster,
            seg,
            kernel,
            band,
            out,
        } => {
            let r = load_raster(&raster)?;
            let s = load_segments(&seg)?;
            let a = attributes::compute_all(
                &r,
                &s,
                &AttributeParams {
                    kernel,
                    texture_band: band,
                },
            )
            .context("stage 'attributes'")?;
            attributes::save_attributes(&a, &out)?;
            Ok(())
        }
        Command::Rules {
            action:
                RulesCommand::Apply {
                    attrs,
                    rules,
                    out,
                    confidence_maps,
                },
        } => {
            let a = attributes::load_attributes(&attrs)
                .with_context(|| format!("reading {}", attrs.display()))?;
            let rs = fuzzy_rules::load_ruleset(&rules)
                .with_context(|| format!("reading rules {}", rules.display()))?;
            let res = fuzzy_rules::classify_objects(&rs, &a).context("stage 'rules'")?;
            fsutil::write_atomic(&out, fuzzy_rules::assignments_to_tsv(&res).as_bytes())?;
            if let Some(dir) = confidence_maps {
                write_confidence_maps(&dir, &res)?;
            }
            Ok(())
        }
        Command::Report { run, out, json } => {
            let path = run.join("report.json");
            let text = fsutil::read_to_string(&path)?;
            let summary: RunSummary = serde_json::from_str(&text)
                .with_context(|| format!("parsing {}", path.display()))?;
            let rendered = if json {
                reporting::run_report_json(&summary)?
            } else {
                reporting::run_report(&summary)
            };
            match out {
                Some(p) => fsutil::write_atomic(&p, rendered.as_bytes())?,
                None => print!("{rendered}"),
            }
            Ok(())
        }
        Command::Pipeline(a) => pipeline(&a),
    }
}

#[cfg(feature = "parallel")]
fn configure_threads(threads: Option<usize>) -> Result<()> {
    if let Some(n) = threads {
        if n == 0 {
            bail!("--threads must be positive");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring thread pool")?;
    }
    Ok(())
}

#[cfg(not(feature = "parallel"))]
fn configure_threads(threads: Option<usize>) -> Result<()> {
    if threads == Some(0) {
        bail!("--threads must be positive");
    }
    Ok(())
}

fn load_raster(path: &Path) -> Result<Raster> {
    raster::load_raster(path).with_context(|| format!("reading raster {}", path.display()))
}

fn load_segments(path: &Path) -> Result<SegmentMap> {
    let (h, ids) =
        raster::load_grid(path).with_context(|| format!("reading segments {}", path.display()))?;
    Ok(SegmentMap::from_raw(h.nrows, h.ncols, &ids)?)
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    fsutil::write_atomic(path, text.as_bytes())?;
    Ok(())
}

fn write_labels(path: &Path, res: &gaussian::ClassificationResult, pixel_size: f64) -> Result<()> {
    raster::save_grid_u16(path, res.nrows, res.ncols, pixel_size, &res.labels)?;
    fsutil::write_atomic(
        &fuzzy_mlc::with_suffix(path, ".classes"),
        res.class_table_text().as_bytes(),
    )?;
    Ok(())
}

fn write_confidence_maps(dir: &Path, res: &fuzzy_rules::ObjectClassification) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    for k in 0..res.confidence.len() {
        let p = dir.join(format!("rule_{}.tsv", k + 1));
        fsutil::write_atomic(&p, fuzzy_rules::confidence_to_tsv(res, k).as_bytes())?;
    }
    Ok(())
}

fn run_fuzzy(
    r: &Raster,
    t: &training::TrainingSet,
    config: &FuzzyConfig,
    out: &Path,
) -> Result<(Vec<GaussianClassModel>, gaussian::ClassificationResult)> {
    let fit = fuzzy_mlc::fit_fuzzy(r, t, config).context("stage 'fuzzy-classify'")?;
    let (map, hard) =
        fuzzy_mlc::fuzzy_classify(r, &fit.models).context("stage 'fuzzy-classify'")?;
    let ps = r.header().pixel_size;
    fuzzy_mlc::save_membership_map(&map, out, ps)?;
    write_labels(out, &hard, ps)?;
    gaussian::save_models(&fit.models, &fuzzy_mlc::with_suffix(out, ".model.json"))?;
    write_json(
        &fuzzy_mlc::with_suffix(out, ".fit.json"),
        &fit.report(config),
    )?;
    Ok((fit.models, hard))
}

fn info(path: &Path) -> Result<()> {
    let r = load_raster(path)?;
    let h = r.header();
    let mut s = String::new();
    let _ = writeln!(
        s,
        "rows: {}\ncols: {}\nbands: {}\npixel size: {}",
        h.nrows, h.ncols, h.nbands, h.pixel_size
    );
    for (b, info) in reporting::band_table(h).iter().enumerate() {
        let band = r.band(b);
        let (lo, hi, sum) = band
            .iter()
            .fold((f32::MAX, f32::MIN, 0.0f64), |(lo, hi, s), &v| {
                (lo.min(v), hi.max(v), s + v as f64)
            });
        let wl = info
            .wavelength
            .map_or_else(|| "n/a".into(), |w| format!("{w:.4}"));
        let _ = writeln!(
            s,
            "{}: wavelength {wl}, min {lo}, max {hi}, mean {}",
            info.band,
            sum / band.len() as f64
        );
    }
    print!("{s}");
    Ok(())
}

fn synth_scene(a: &SynthArgs) -> Result<synthetic::SyntheticScene> {
    if a.classes == 0 || a.classes > a.cols {
        bail!("--classes must be between 1 and --cols");
    }
    let header = RasterHeader::new(a.cols, a.rows, a.bands, a.pixel_size)?;
    let classes = synthetic::striped_classes(&header, a.classes, a.separation, a.sigma);
    synthetic::generate_synthetic_scene(&classes, &header, a.seed).context("stage 'synth'")
}

fn synth(a: &SynthArgs) -> Result<()> {
    let scene = synth_scene(a)?;
    raster::save_raster(&scene.raster, &a.out)?;
    training::save_roi(
        &scene.training,
        &fuzzy_mlc::with_suffix(&a.out, ".roi.json"),
    )?;
    raster::save_grid_u16(
        &fuzzy_mlc::with_suffix(&a.out, ".truth"),
        a.rows,
        a.cols,
        a.pixel_size,
        &scene.truth,
    )?;
    Ok(())
}

/// Resolved inputs for a pipeline run.
struct Inputs {
    name: String,
    raster: Raster,
    training: training::TrainingSet,
}

fn pipeline_inputs(a: &PipelineArgs) -> Result<Inputs> {
    match (&a.raster, &a.roi) {
        (Some(rp), Some(roi)) => {
            let raster = load_raster(rp)?;
            let training = training::load_roi(roi, raster.header())
                .with_context(|| format!("reading ROIs {}", roi.display()))?;
            let name = rp
                .file_stem()
                .map_or_else(|| "raster".into(), |s| s.to_string_lossy().into_owned());
            Ok(Inputs {
                name,
                raster,
                training,
            })
        }
        _ => {
            let scene = synth_scene(&SynthArgs {
                out: PathBuf::new(),
                rows: 128,
                cols: 128,
                bands: 3,
                classes: 3,
                separation: 12.0,
                sigma: 4.0,
                pixel_size: 30.0,
                seed: a.seed,
            })?;
            Ok(Inputs {
                name: format!("synthetic_seed_{}", a.seed),
                raster: scene.raster,
                training: scene.training,
            })
        }
    }
}

fn check_inputs_exist(a: &PipelineArgs) -> Result<()> {
    for p in [&a.raster, &a.roi, &a.rules].into_iter().flatten() {
        if !p.exists() {
            bail!("input not found: {}", p.display());
        }
    }
    if let Some(p) = &a.raster {
        let h = raster::header_path(p);
        if !h.exists() {
            bail!("raster header not found: {}", h.display());
        }
    }
    Ok(())
}

fn plan(a: &PipelineArgs) -> String {
    let mut s = String::new();
    let input = match &a.raster {
        Some(p) => p.display().to_string(),
        None => format!("synthetic scene (seed {})", a.seed),
    };
    let _ = writeln!(s, "input: {input}");
    let _ = writeln!(s, "output directory: {}", a.out.display());
    let _ = writeln!(s, "1. train: model.json");
    let _ = writeln!(s, "2. classify (threshold {:?}): labels", a.threshold);
    let _ = writeln!(
        s,
        "3. fuzzy-classify (m {}, iterations {}, epsilon {}): fuzzy, fuzzy.memberships.*",
        a.fuzzy.m_exponent, a.fuzzy.iterations, a.fuzzy.epsilon
    );
    let _ = writeln!(
        s,
        "4. segment {:?} input (band {}, scale {}, merge {}, smooth {}): seg, polygons/polygons.json",
        a.segment_input, a.seg.band, a.seg.scale, a.seg.merge, a.seg.smooth
    );
    let _ = writeln!(s, "5. attributes (kernel {}): attrs.tsv", a.kernel);
    match &a.rules {
        Some(r) => {
            let _ = writeln!(
                s,
                "6. rules {}: assignments.tsv, confidence/rule_*.tsv",
                r.display()
            );
        }
        None => {
            let _ = writeln!(s, "6. rules: skipped");
        }
    }
    let _ = writeln!(s, "7. report: report.txt, report.json");
    s
}

fn validate_pipeline(a: &PipelineArgs) -> Result<()> {
    a.fuzzy.config().validate()?;
    a.seg.params().validate()?;
    if a.kernel == 0 || a.kernel.is_multiple_of(2) {
        bail!("--kernel must be odd and >= 1");
    }
    if let Some(t) = a.threshold {
        if !(t > 0.0 && t < 1.0) {
            bail!("--threshold must lie in (0, 1)");
        }
    }
    Ok(())
}

fn pipeline(a: &PipelineArgs) -> Result<()> {
    check_inputs_exist(a)?;
    validate_pipeline(a)?;
    if a.dry_run {
        print!("{}", plan(a));
        return Ok(());
    }
    let rules: Option<RuleSet> = match &a.rules {
        Some(p) => Some(
            fuzzy_rules::load_ruleset(p)
                .with_context(|| format!("reading rules {}", p.display()))?,
        ),
        None => None,
    };
    let inputs = pipeline_inputs(a)?;
    let out = &a.out;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let r = &inputs.raster;
    let ps = r.header().pixel_size;

    let models = gaussian::train(r, &inputs.training).context("stage 'train'")?;
    gaussian::save_models(&models, &out.join("model.json"))?;
    let crisp = gaussian::classify(r, &models, a.threshold).context("stage 'classify'")?;
    write_labels(&out.join("labels"), &crisp, ps)?;

    let (_, fuzzy_labels) = run_fuzzy(r, &inputs.training, &a.fuzzy.config(), &out.join("fuzzy"))?;

    let seg_raster = match a.segment_input {
        SegmentInput::Raster => r.clone(),
        SegmentInput::Labels => {
            let labels = match a.classifier {
                Classifier::Mlc => &crisp,
                Classifier::Fuzzy => &fuzzy_labels,
            };
            let mut h = RasterHeader::new(r.ncols(), r.nrows(), 1, ps)?;
            h.band_names = Some(vec!["Class".into()]);
            Raster::new(h, labels.labels.iter().map(|&l| l as f32).collect())?
        }
    };
    let mut seg_params = a.seg.params();
    if a.segment_input == SegmentInput::Labels {
        seg_params.band_index = 0;
    }
    let seg = segmentation::segment_scene(&seg_raster, &seg_params).context("stage 'segment'")?;
    raster::save_grid_u32(&out.join("seg"), seg.nrows, seg.ncols, ps, &seg.labels)?;
    let polygons_dir = out.join("polygons");
    fs::create_dir_all(&polygons_dir)
        .with_context(|| format!("creating {}", polygons_dir.display()))?;
    write_json(
        &polygons_dir.join("polygons.json"),
        &segmentation::export_polygons(&seg, r.header()),
    )?;

    let attrs = attributes::compute_all(
        &seg_raster,
        &seg,
        &AttributeParams {
            kernel: a.kernel,
            texture_band: seg_params.band_index,
        },
    )
    .context("stage 'attributes'")?;
    attributes::save_attributes(&attrs, &out.join("attrs.tsv"))?;

    let (rule_set, features, assignments) = match &rules {
        Some(rs) => {
            let res = fuzzy_rules::classify_objects(rs, &attrs).context("stage 'rules'")?;
            fsutil::write_atomic(
                &out.join("assignments.tsv"),
                fuzzy_rules::assignments_to_tsv(&res).as_bytes(),
            )?;
            write_confidence_maps(&out.join("confidence"), &res)?;
            let (lines, features) = RunSummary::rule_block(rs);
            (Some(lines), features, res.assignments)
        }
        None => (None, Vec::new(), Vec::new()),
    };

    let summary = RunSummary {
        area_unit: reporting::area_unit_for(ps),
        pixel_size: ps,
        file_name: inputs.name,
        scale_level: seg_params.scale_level,
        merge_level: seg_params.merge_level,
        refine: seg_params.refine_range,
        attributes_computed: vec!["Spatial".into(), "Spectral".into(), "Texture".into()],
        rule_set,
        vector_output_directory: "polygons".into(),
        features,
        smoothing_threshold: seg_params.smoothing_threshold,
        bands: reporting::band_table(r.header()),
        feature_stats: reporting::feature_statistics(&assignments, &attrs)
            .context("stage 'report'")?,
        unclassified_count: if rules.is_some() {
            reporting::unclassified_count(&assignments)
        } else {
            attrs.len()
        },
        region_count: attrs.len(),
    };
    fsutil::write_atomic(
        &out.join("report.txt"),
        reporting::run_report(&summary).as_bytes(),
    )?;
    fsutil::write_atomic(
        &out.join("report.json"),
        reporting::run_report_json(&summary)?.as_bytes(),
    )?;
    Ok(())
}
