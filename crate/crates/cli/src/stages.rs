//! The pipeline stages. Each reads its inputs from the output directory,
//! writes its artifacts there and leaves a reproducibility record under
//! `records/`.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use log::{info, warn};
use regionseq::annotation::{
    normalize_rotation, parse_annotations, rasterize_mask, region_bounding_box, RegionIssue,
};
use regionseq::bilstm::{self, BiLstmModel, Checkpoint};
use regionseq::eval::{
    cross_validate, evaluate_model, render_aggregate_table, render_report_table, split, CvConfig,
    PlanKind, SplitPlan,
};
use regionseq::features::{
    build_sequence, load_feature_set, write_feature_manifest, FeatureExtractor, FeatureManifest,
    ToyExtractor,
};
use regionseq::flops::bilstm_flops;
use regionseq::raster::{crop_window, load_rgb, save_rgb};
use regionseq::scan::{continuity_cost, grid_dims, scan_order, tile_region};
use regionseq::{FeatureSequence, ScanOrder};
use serde::Serialize;

use crate::artifacts::*;
use crate::config::{PipelineConfig, Required, SplitMode};
use crate::error::{CliError, CliResult};

/// Loaded configuration plus the invocation it came from.
pub struct Context {
    pub config: PipelineConfig,
    pub config_path: PathBuf,
    pub args: Vec<String>,
}

impl Context {
    pub fn out(&self) -> &Path {
        &self.config.data.output_dir
    }

    fn ensure_out(&self) -> CliResult<()> {
        fs::create_dir_all(self.out())
            .map_err(|e| CliError::data(format!("{}: {e}", self.out().display())))
    }
}

#[derive(Serialize)]
struct Seeds {
    train: u64,
    split: u64,
}

#[derive(Serialize)]
struct RunRecord<'a> {
    stage: &'a str,
    toolkit: &'static str,
    version: &'static str,
    args: &'a [String],
    config_file: String,
    seeds: Seeds,
    config: &'a PipelineConfig,
    unix_time: u64,
}

/// Writes `records/<stage>.json`. Reports themselves carry no timestamps.
pub fn write_record(ctx: &Context, stage: &str) -> CliResult<()> {
    let cfg = &ctx.config;
    let record = RunRecord {
        stage,
        toolkit: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        args: &ctx.args,
        config_file: ctx.config_path.display().to_string(),
        seeds: Seeds {
            train: cfg.train_config().seed,
            split: cfg.split.seed,
        },
        config: cfg,
        unix_time: SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
    };
    write_json(&ctx.out().join("records").join(format!("{stage}.json")), &record)
}

fn region_stem(id: i64) -> String {
    format!("region_{id}")
}

pub fn extract_regions(ctx: &Context) -> CliResult<RegionsManifest> {
    let cfg = &ctx.config;
    cfg.validate(&[Required::Slide, Required::Annotations])?;
    ctx.ensure_out()?;
    let slide_path = cfg.data.slide.as_deref().expect("validated");
    let xml_path = cfg.data.annotations.as_deref().expect("validated");
    let slide = load_rgb(slide_path)?;
    let xml = fs::read(xml_path).map_err(|e| CliError::data(format!("{}: {e}", xml_path.display())))?;
    let parsed = parse_annotations(&xml, &cfg.schema())?;
    for issue in &parsed.issues {
        warn!("region {}: {issue:?}", issue.region_id());
    }
    let side = cfg.tile.patch_side;

    let mut regions = Vec::new();
    let mut skipped = Vec::new();
    for rec in &parsed.regions {
        let bbox = region_bounding_box(rec);
        let mask = match rasterize_mask(rec, &bbox) {
            Ok(m) if !m.is_empty() => m,
            Ok(_) => {
                skipped.push(SkippedRegion {
                    region_id: rec.region_id,
                    reason: "region polygon encloses no pixel centres".into(),
                });
                continue;
            }
            Err(e) => {
                skipped.push(SkippedRegion {
                    region_id: rec.region_id,
                    reason: e.to_string(),
                });
                continue;
            }
        };
        let crop = crop_window(&slide, &bbox);
        let (image, mask, rotation_deg, isotropic) = if cfg.regions.normalize_rotation {
            match normalize_rotation(&crop, &mask, side) {
                Ok(n) => (n.image, n.mask, n.rotation_deg, n.isotropic),
                Err(e) => {
                    skipped.push(SkippedRegion {
                        region_id: rec.region_id,
                        reason: e.to_string(),
                    });
                    continue;
                }
            }
        } else {
            (crop, mask, 0.0, false)
        };
        if isotropic {
            warn!("region {}: isotropic mask, left unrotated", rec.region_id);
        }
        let stem = region_stem(rec.region_id);
        let image_file = format!("regions/{stem}.png");
        let mask_file = format!("regions/{stem}_mask.png");
        fs::create_dir_all(ctx.out().join("regions"))
            .map_err(|e| CliError::data(format!("{}: {e}", ctx.out().display())))?;
        save_rgb(&image, &ctx.out().join(&image_file))?;
        mask.to_image()
            .save(ctx.out().join(&mask_file))
            .map_err(|e| CliError::data(format!("{mask_file}: {e}")))?;
        regions.push(RegionEntry {
            region_id: rec.region_id,
            label: rec.label.clone(),
            label_index: cfg.data.classes.iter().position(|c| *c == rec.label),
            area_px: rec.area_px,
            rotation_deg,
            isotropic,
            width: image.width() as usize,
            height: image.height() as usize,
            image: image_file,
            mask: mask_file,
        });
    }
    for s in &skipped {
        warn!("region {} skipped: {}", s.region_id, s.reason);
    }
    let manifest = RegionsManifest {
        classes: cfg.data.classes.clone(),
        patch_side: side,
        normalized: cfg.regions.normalize_rotation,
        regions,
        issues: parsed.issues,
        skipped,
    };
    write_json(&ctx.out().join(REGIONS), &manifest)?;
    info!(
        "extract-regions: {} regions, {} flagged, {} skipped",
        manifest.regions.len(),
        manifest.issues.iter().filter(|i| matches!(i, RegionIssue::UnknownLabel { .. })).count(),
        manifest.skipped.len()
    );
    write_record(ctx, "extract-regions")?;
    Ok(manifest)
}

pub fn tile(ctx: &Context) -> CliResult<TilesManifest> {
    let cfg = &ctx.config;
    cfg.validate(&[])?;
    ctx.ensure_out()?;
    let regions: RegionsManifest = read_artifact(ctx.out(), REGIONS)?;
    let side = cfg.tile.patch_side;
    let strategy = cfg.tile.strategy;
    let mut entries = Vec::with_capacity(regions.regions.len());
    for r in &regions.regions {
        let image = load_rgb(&ctx.out().join(&r.image))?;
        let dims = grid_dims(image.height() as usize, image.width() as usize, side);
        let order = scan_order(dims, strategy);
        let mut patches = Vec::new();
        if cfg.tile.write_patches {
            let dir = format!("tiles/{}", region_stem(r.region_id));
            fs::create_dir_all(ctx.out().join(&dir))
                .map_err(|e| CliError::data(format!("{dir}: {e}")))?;
            for p in tile_region(&image, &order, side)? {
                let file = format!("{dir}/{:04}_r{}_c{}.png", p.sequence_pos, p.grid_pos.0, p.grid_pos.1);
                save_rgb(&p.pixels, &ctx.out().join(&file))?;
                patches.push(file);
            }
        }
        entries.push(TileEntry {
            region_id: r.region_id,
            label_index: r.label_index,
            image: r.image.clone(),
            rows: dims.rows,
            cols: dims.cols,
            continuity_cost: continuity_cost(&order),
            visits: order.visits,
            patches,
        });
    }
    let manifest = TilesManifest {
        classes: regions.classes,
        patch_side: side,
        strategy,
        regions: entries,
    };
    write_json(&ctx.out().join(TILES), &manifest)?;
    info!("tile: {} regions with {strategy}", manifest.regions.len());
    write_record(ctx, "tile")?;
    Ok(manifest)
}

pub fn extract_features(ctx: &Context) -> CliResult<()> {
    let cfg = &ctx.config;
    cfg.validate(&[])?;
    ctx.ensure_out()?;
    if let Some(ext) = &cfg.features.external_manifest {
        let set = load_feature_set(ext)?;
        info!(
            "extract-features: using {} precomputed sequences from {}",
            set.sequences.len(),
            ext.display()
        );
        return write_record(ctx, "extract-features");
    }
    let tiles: TilesManifest = read_artifact(ctx.out(), TILES)?;
    let extractor = ToyExtractor::with_grid(cfg.features.grid);
    let mut sequences = Vec::new();
    for t in &tiles.regions {
        let Some(label) = t.label_index else {
            info!("region {}: unknown label, not used", t.region_id);
            continue;
        };
        let image = load_rgb(&ctx.out().join(&t.image))?;
        let order = ScanOrder {
            dims: regionseq::GridDims::new(t.rows, t.cols),
            strategy: tiles.strategy,
            visits: t.visits.clone(),
        };
        let patches = tile_region(&image, &order, tiles.patch_side)?;
        sequences.push(build_sequence(
            &patches,
            &extractor,
            label,
            format!("region-{}", t.region_id),
        )?);
    }
    if sequences.is_empty() {
        return Err(CliError::data("no labelled regions to extract features from"));
    }
    let g = cfg.features.grid;
    let template = FeatureManifest {
        dim: extractor.dim(),
        classes: tiles.classes.clone(),
        extractor: Some(format!("toy-{g}x{g}")),
        preprocessing: Some("none".into()),
        strategy: Some(tiles.strategy.as_str().into()),
        regions: Vec::new(),
    };
    write_feature_manifest(&ctx.out().join(FEATURES), &sequences, &template)?;
    info!(
        "extract-features: {} sequences, D = {}",
        sequences.len(),
        extractor.dim()
    );
    write_record(ctx, "extract-features")
}

struct Dataset {
    classes: Vec<String>,
    dim: usize,
    sequences: Vec<FeatureSequence>,
}

fn load_dataset(ctx: &Context) -> CliResult<Dataset> {
    let cfg = &ctx.config;
    let path = cfg
        .features
        .external_manifest
        .clone()
        .unwrap_or_else(|| ctx.out().join(FEATURES));
    if !path.exists() {
        return Err(missing(&path, "extract-features"));
    }
    let set = load_feature_set(&path)?;
    if set.sequences.is_empty() {
        return Err(CliError::data(format!("{} lists no sequences", path.display())));
    }
    let classes = if set.manifest.classes.is_empty() {
        cfg.data.classes.clone()
    } else {
        set.manifest.classes.clone()
    };
    if let Some(s) = set.sequences.iter().find(|s| s.label >= classes.len()) {
        return Err(CliError::data(format!(
            "sequence {} has label {} but only {} classes are configured",
            s.region_id,
            s.label,
            classes.len()
        )));
    }
    Ok(Dataset {
        classes,
        dim: set.manifest.dim,
        sequences: set.sequences,
    })
}

fn pick(data: &[FeatureSequence], idx: &[usize]) -> Vec<FeatureSequence> {
    idx.iter().map(|&i| data[i].clone()).collect()
}

fn holdout(plan: &SplitPlan) -> (&[usize], &[usize], &[usize]) {
    match &plan.kind {
        PlanKind::Holdout {
            train,
            validation,
            test,
        } => (train, validation, test),
        PlanKind::KFold { .. } => (&[], &[], &[]),
    }
}

pub fn train(ctx: &Context) -> CliResult<()> {
    let cfg = &ctx.config;
    cfg.validate(&[])?;
    ctx.ensure_out()?;
    let data = load_dataset(ctx)?;
    let labels: Vec<usize> = data.sequences.iter().map(|s| s.label).collect();
    let plan = split(&labels, data.classes.len(), cfg.split.ratios, cfg.split.seed)?;
    for w in &plan.warnings {
        warn!("split: {w}");
    }
    let (train_idx, val_idx, _) = holdout(&plan);
    let tc = cfg.train_config();
    let model = BiLstmModel::new(cfg.model_config(data.dim, data.classes.len()), tc.seed)?;
    let (model, history) = bilstm::train(
        model,
        &pick(&data.sequences, train_idx),
        &pick(&data.sequences, val_idx),
        &tc,
    )?;
    info!(
        "train: {} epochs, best epoch {}, {:?}",
        history.epochs.len(),
        history.best_epoch,
        history.stop_reason
    );
    let mut checkpoint = Checkpoint::new(model, tc.seed, Some(tc));
    checkpoint.classes = data.classes;
    checkpoint.save(&ctx.out().join(MODEL))?;
    write_json(&ctx.out().join(HISTORY), &history)?;
    write_json(&ctx.out().join(SPLIT), &plan)?;
    write_record(ctx, "train")
}

pub fn evaluate(ctx: &Context) -> CliResult<EvaluationOutput> {
    let cfg = &ctx.config;
    cfg.validate(&[])?;
    ctx.ensure_out()?;
    let model_path = ctx.out().join(MODEL);
    if !model_path.exists() {
        return Err(missing(&model_path, "train"));
    }
    let checkpoint = Checkpoint::load(&model_path)?;
    let data = load_dataset(ctx)?;
    let split_path = ctx.out().join(SPLIT);
    let (subset, sequences) = if split_path.exists() {
        let plan: SplitPlan = read_artifact(ctx.out(), SPLIT)?;
        let (_, _, test) = holdout(&plan);
        if test.iter().any(|&i| i >= data.sequences.len()) {
            return Err(CliError::data(format!(
                "{} does not match the feature manifest; rerun `regionseq train`",
                split_path.display()
            )));
        }
        ("test", pick(&data.sequences, test))
    } else {
        ("all", data.sequences)
    };
    let report = evaluate_model(&checkpoint.model, &sequences, None)?;
    let classes = if checkpoint.classes.is_empty() {
        data.classes
    } else {
        checkpoint.classes
    };
    write_text(&ctx.out().join(REPORT_TXT), &render_report_table(&report, &classes))?;
    let output = EvaluationOutput {
        classes,
        subset: subset.to_string(),
        report,
    };
    write_json(&ctx.out().join(REPORT), &output)?;
    info!("evaluate: accuracy {:?} on {} sequences", output.report.accuracy, output.report.samples);
    write_record(ctx, "evaluate")?;
    Ok(output)
}

pub fn cross_validate_stage(ctx: &Context) -> CliResult<CvOutput> {
    let cfg = &ctx.config;
    cfg.validate(&[])?;
    ctx.ensure_out()?;
    let data = load_dataset(ctx)?;
    let cv = CvConfig {
        folds: cfg.split.folds,
        validation_fraction: cfg.split.validation_fraction,
        seed: cfg.split.seed,
    };
    let result = cross_validate(
        &data.sequences,
        cfg.model_config(data.dim, data.classes.len()),
        &cfg.train_config(),
        &cv,
    )?;
    for w in &result.plan.warnings {
        warn!("split: {w}");
    }
    write_text(
        &ctx.out().join(CV_REPORT_TXT),
        &render_aggregate_table(&result.aggregate, &data.classes),
    )?;
    write_json(&ctx.out().join(CV_HISTORIES), &result.histories)?;
    let output = CvOutput {
        classes: data.classes,
        plan: result.plan,
        folds: result.folds,
        aggregate: result.aggregate,
    };
    write_json(&ctx.out().join(CV_REPORT), &output)?;
    info!(
        "cross-validate: {} folds, mean accuracy {:?}",
        output.aggregate.folds, output.aggregate.accuracy.mean
    );
    write_record(ctx, "cross-validate")?;
    Ok(output)
}

/// Every stage in order, ending with the parameter count of the trained head.
pub fn run_all(ctx: &Context) -> CliResult<()> {
    let cfg = &ctx.config;
    let precomputed = cfg.features.external_manifest.is_some();
    if precomputed {
        cfg.validate(&[])?;
    } else {
        cfg.validate(&[Required::Slide, Required::Annotations])?;
        extract_regions(ctx)?;
        tile(ctx)?;
    }
    extract_features(ctx)?;
    match cfg.split.mode {
        SplitMode::Holdout => {
            train(ctx)?;
            evaluate(ctx)?;
        }
        SplitMode::Kfold => {
            cross_validate_stage(ctx)?;
        }
    }
    let data = load_dataset(ctx)?;
    let report = bilstm_flops(
        data.dim as u64,
        cfg.model.hidden_size as u64,
        data.classes.len() as u64,
    );
    write_json(&ctx.out().join(FLOPS), &report)?;
    write_record(ctx, "run-all")
}
