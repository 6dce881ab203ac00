//! Batch dataset generation: per-sample seeding, model assembly, rendering,
//! metrics, and resumable manifest writing.
//!
//! Reproducibility contract: everything a sample does derives from
//! `(master seed, index)` through fixed stream tags, so a dataset is
//! byte-identical across reruns, worker counts, and resume patterns.

use super::config::GenerationConfig;
use super::manifest::{read_manifest, write_manifest, ManifestRow};
use super::sweep::{sweep_expand, SweepRow};
use crate::anatomy::{
    bake_blood_field, build_layers, embed_lesion, generate_blood_network, generate_hair,
    BloodConfig, FieldSpec, LesionPlacement, SkinModel,
};
use crate::lesion::{grow, LesionParams};
use crate::metrics::{
    center_crop_random, circularity, ita, ita_category, relative_area, RgbImage8,
};
use crate::render::{load_envmap, render, Camera, RenderConfig, RenderScene};
use crate::rng::{derive_seed, stream_rng};
use crate::{Error, Result};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Instant;

/// Stream tags for the per-sample seed chain.
mod tag {
    pub const LESION: u64 = 1;
    pub const LAYERS: u64 = 2;
    pub const BLOOD: u64 = 3;
    pub const HAIR: u64 = 4;
    pub const RENDER: u64 = 5;
    pub const CROP: u64 = 6;
    pub const PARAMS: u64 = 7;
}

/// Fully resolved per-sample parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleParams {
    pub index: u32,
    pub seed: u64,
    pub melanosome: f64,
    pub blood: f64,
    pub regularity: f64,
    pub time_points: u32,
    pub hair: bool,
    pub env: String,
    pub split: String,
}

fn pick<T: Copy>(rng: &mut impl Rng, list: &[T]) -> T {
    list[rng.gen_range(0..list.len())]
}

fn split_label(cfg: &GenerationConfig, u: f64) -> String {
    let [train, val, _] = cfg.split_fractions;
    if u < train {
        "train".into()
    } else if u < train + val {
        "val".into()
    } else {
        "test".into()
    }
}

/// Resolve the parameters of sample `index`: either a random draw from the
/// config presets or the matching sweep row.
pub fn sample_params(cfg: &GenerationConfig, index: u32) -> Result<SampleParams> {
    let sweep_row: Option<SweepRow> = match &cfg.sweep {
        Some(axes) => {
            let rows = sweep_expand(axes)?;
            let row = rows.get(index as usize).ok_or_else(|| {
                Error::InvalidParam(format!(
                    "sample index {index} outside sweep expansion of {}",
                    rows.len()
                ))
            })?;
            Some(row.clone())
        }
        None => None,
    };
    // The model seed: sweeps reuse their base seed so only the swept axis
    // varies between rows of one base model.
    let seed = match &sweep_row {
        Some(row) => derive_seed(cfg.seed, row.base_seed),
        None => derive_seed(cfg.seed, index as u64),
    };
    let mut rng = stream_rng(seed, tag::PARAMS);
    let melanosome = pick(&mut rng, &cfg.melanosome_presets);
    let blood = pick(&mut rng, &cfg.blood_presets);
    let regularity = pick(&mut rng, &cfg.lesion_regularity);
    let time_points = rng.gen_range(cfg.lesion_time_points[0]..=cfg.lesion_time_points[1]);
    let hair = rng.gen::<f64>() < cfg.hair_probability;
    let env = pick_env(&mut rng, &cfg.env_maps);
    let split = split_label(cfg, rng.gen());

    let mut p = SampleParams {
        index,
        seed,
        melanosome,
        blood,
        regularity,
        time_points,
        hair,
        env,
        split,
    };
    if let Some(row) = sweep_row {
        if let Some(b) = row.blood {
            p.blood = b;
        }
        if let Some(m) = row.melanosome {
            p.melanosome = m;
        }
        if let Some(r) = row.regularity {
            p.regularity = r;
        }
        if let Some(h) = row.hair {
            p.hair = h;
        }
    }
    Ok(p)
}

fn pick_env(rng: &mut impl Rng, list: &[String]) -> String {
    list[rng.gen_range(0..list.len())].clone()
}

/// Assemble the full skin model for one sample.
pub fn build_model(cfg: &GenerationConfig, params: &SampleParams) -> Result<SkinModel> {
    let lesion_params = LesionParams {
        time_points: params.time_points,
        irregularity_prob: params.regularity,
        seed: derive_seed(params.seed, tag::LESION),
        ..Default::default()
    };
    let g = cfg.lesion_grid;
    let lesion = grow(&lesion_params, [g, g, g], &[])?.volume;

    let mut layer_rng = stream_rng(params.seed, tag::LAYERS);
    let stack = build_layers(&cfg.layers, &mut layer_rng)?;

    // Blood network spans the dermis slab under the camera footprint.
    let derm_top = stack.nominal_derm_top_mm();
    let hypo_top = stack.nominal_hypo_top_mm();
    let half = stack.extent_mm[0].min(stack.extent_mm[1]) * 0.35;
    let mut blood_rng = stream_rng(params.seed, tag::BLOOD);
    let n_start = blood_rng.gen_range(4..=8);
    let n_end = blood_rng.gen_range(6..=12);
    let blood_cfg = BloodConfig {
        bounds_min: [-half, -half, hypo_top],
        bounds_max: [half, half, derm_top],
        node_count: cfg.blood_nodes.max(n_start + n_end + 8),
        start_count: n_start,
        end_count: n_end,
        ..Default::default()
    };
    let network = generate_blood_network(&blood_cfg, &mut blood_rng)?;
    let res = cfg.blood_field_resolution.max(8);
    let spacing = 2.0 * half / res as f64;
    let spec = FieldSpec {
        dims: [res, res, ((derm_top - hypo_top) / spacing).ceil().max(2.0) as usize],
        origin_mm: [-half, -half, hypo_top],
        spacing_mm: spacing,
    };
    let field = bake_blood_field(&network, &spec, 0.35)?;

    let mut model = embed_lesion(stack, lesion, LesionPlacement::default())?
        .with_fractions(params.melanosome, params.blood)
        .with_blood(network, field, 0.08);
    if params.hair {
        let mut hair_rng = stream_rng(params.seed, tag::HAIR);
        let hair = generate_hair(&cfg.hair, &model.layers, &mut hair_rng)?;
        model = model.with_hair(hair);
    }
    Ok(model)
}

/// Render one sample end to end. Returns the row plus wall time.
fn generate_one(cfg: &GenerationConfig, index: u32, out_dir: &Path) -> (ManifestRow, u64) {
    let start = Instant::now();
    let row = match try_generate_one(cfg, index, out_dir) {
        Ok(row) => row,
        Err(e) => failed_row(cfg, index, &e),
    };
    (row, start.elapsed().as_millis() as u64)
}

fn failed_row(cfg: &GenerationConfig, index: u32, err: &Error) -> ManifestRow {
    ManifestRow {
        id: format!("{index:05}"),
        index,
        seed: derive_seed(cfg.seed, index as u64),
        split: String::new(),
        melanosome: f64::NAN,
        blood: f64::NAN,
        regularity: f64::NAN,
        time_points: 0,
        hair: false,
        env: String::new(),
        resolution: cfg.resolution,
        spp: cfg.spp,
        crop_fraction: 0.0,
        ita_deg: None,
        ita_category: String::new(),
        circularity: None,
        relative_area: None,
        image_path: String::new(),
        mask_path: String::new(),
        status: format!("error: {err}"),
    }
}

fn try_generate_one(cfg: &GenerationConfig, index: u32, out_dir: &Path) -> Result<ManifestRow> {
    let params = sample_params(cfg, index)?;
    let model = build_model(cfg, &params)?;
    let env = load_envmap(&params.env)?;
    let scene = RenderScene::assemble(model, cfg.scene.clone(), env)?;
    let cam = Camera::default().with_resolution(cfg.resolution, cfg.resolution);
    let rcfg = RenderConfig {
        spp: cfg.spp,
        max_depth: cfg.max_depth,
        rr_start: cfg.rr_start,
        wavelengths_per_path: 4,
        seed: derive_seed(params.seed, tag::RENDER),
    };
    let out = render(&scene, &cam, &rcfg)?;

    let mut image = RgbImage8 {
        width: out.width,
        height: out.height,
        data: out.rgb8.clone(),
    };
    let mut mask = out.mask.clone();
    let mut crop_fraction = 0.0;
    if cfg.crop_enabled {
        let mut crop_rng = stream_rng(params.seed, tag::CROP);
        let (ci, cm, f) = center_crop_random(&image, &mask, &mut crop_rng, cfg.crop_max_fraction)?;
        image = ci;
        mask = cm;
        crop_fraction = f;
    }

    let id = format!("{index:05}");
    let image_rel = format!("images/{id}.png");
    let mask_rel = format!("masks/{id}.png");
    image.save(&out_dir.join(&image_rel))?;
    mask.save_png(&out_dir.join(&mask_rel))?;

    let ita_deg = ita(&image, &mask).ok();
    let circ = circularity(&mask).ok();
    let rel_area = (!mask.is_empty()).then(|| relative_area(&mask));
    Ok(ManifestRow {
        id,
        index,
        seed: params.seed,
        split: params.split,
        melanosome: params.melanosome,
        blood: params.blood,
        regularity: params.regularity,
        time_points: params.time_points,
        hair: params.hair,
        env: params.env,
        resolution: cfg.resolution,
        spp: cfg.spp,
        crop_fraction,
        ita_deg,
        ita_category: ita_deg.map(|v| ita_category(v).label().to_string()).unwrap_or_default(),
        circularity: circ,
        relative_area: rel_area,
        image_path: image_rel,
        mask_path: mask_rel,
        status: "ok".into(),
    })
}

/// Batch wall-time report (diagnostic; not part of the stable outputs).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetReport {
    pub requested: u32,
    pub generated: u32,
    pub skipped_existing: u32,
    pub failed: u32,
    pub total_ms: u64,
    pub per_image_ms: Vec<u64>,
    pub p50_ms: u64,
    pub p95_ms: u64,
}

fn percentile(sorted: &[u64], q: f64) -> u64 {
    if sorted.is_empty() {
        return 0;
    }
    let idx = ((sorted.len() as f64 - 1.0) * q).round() as usize;
    sorted[idx]
}

/// Worker cap: `SSYNTH_THREADS` bounds the rayon pool for the batch.
pub fn worker_pool() -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var("SSYNTH_THREADS") {
        let n: usize = v.parse().map_err(|_| {
            Error::Config(format!("SSYNTH_THREADS must be a positive integer, got {v:?}"))
        })?;
        if n == 0 {
            return Err(Error::Config("SSYNTH_THREADS must be >= 1".into()));
        }
        builder = builder.num_threads(n);
    }
    builder
        .build()
        .map_err(|e| Error::Config(format!("cannot build worker pool: {e}")))
}

/// Generate (or resume) a dataset into `out_dir`: `images/<id>.png`,
/// `masks/<id>.png`, `manifest.csv`, `config.echo.json`, `run_report.json`.
///
/// Samples whose manifest row is `ok` and whose files exist are skipped, so
/// an interrupted batch resumes where it stopped. Failures are logged in
/// the manifest without aborting the batch.
pub fn generate_dataset(cfg: &GenerationConfig, out_dir: &Path) -> Result<DatasetReport> {
    cfg.validate()?;
    let count = cfg.effective_count()?;
    std::fs::create_dir_all(out_dir.join("images")).map_err(|e| Error::io(out_dir, e))?;
    std::fs::create_dir_all(out_dir.join("masks")).map_err(|e| Error::io(out_dir, e))?;
    std::fs::write(
        out_dir.join("config.echo.json"),
        super::config::echo_config(cfg)?,
    )
    .map_err(|e| Error::io(out_dir, e))?;

    // Resume: keep rows whose outputs are complete.
    let manifest_path = out_dir.join("manifest.csv");
    let mut done: Vec<ManifestRow> = Vec::new();
    if manifest_path.exists() {
        for row in read_manifest(&manifest_path)? {
            let complete = row.status == "ok"
                && out_dir.join(&row.image_path).exists()
                && out_dir.join(&row.mask_path).exists()
                && row.index < count;
            if complete {
                done.push(row);
            }
        }
    }
    let done_ids: std::collections::BTreeSet<u32> = done.iter().map(|r| r.index).collect();
    let todo: Vec<u32> = (0..count).filter(|i| !done_ids.contains(i)).collect();

    let start = Instant::now();
    let progress = Mutex::new(ProgressLog::open(&manifest_path)?);
    let pool = worker_pool()?;
    let results: Vec<(ManifestRow, u64)> = pool.install(|| {
        todo.par_iter()
            .map(|&i| {
                let (row, ms) = generate_one(cfg, i, out_dir);
                // Serialize progress appends through one writer.
                if let Ok(mut log) = progress.lock() {
                    log.append(&row);
                }
                (row, ms)
            })
            .collect()
    });
    drop(progress);

    let mut per_image_ms: Vec<u64> = results.iter().map(|(_, ms)| *ms).collect();
    let failed = results.iter().filter(|(r, _)| r.status != "ok").count() as u32;
    let generated = results.len() as u32 - failed;
    let skipped = done.len() as u32;

    // Final manifest: union of completed and new rows, sorted, byte-stable.
    let mut all_rows = done;
    all_rows.extend(results.into_iter().map(|(r, _)| r));
    write_manifest(&manifest_path, &all_rows)?;

    per_image_ms.sort_unstable();
    let report = DatasetReport {
        requested: count,
        generated,
        skipped_existing: skipped,
        failed,
        total_ms: start.elapsed().as_millis() as u64,
        p50_ms: percentile(&per_image_ms, 0.5),
        p95_ms: percentile(&per_image_ms, 0.95),
        per_image_ms,
    };
    let report_text = serde_json::to_string_pretty(&report).map_err(|e| Error::Json {
        path: out_dir.join("run_report.json"),
        source: e,
    })?;
    std::fs::write(out_dir.join("run_report.json"), report_text)
        .map_err(|e| Error::io(out_dir, e))?;
    Ok(report)
}

/// Crash-safe progress appender: rows land on disk as they finish (in
/// completion order); the sorted rewrite at the end makes the final file
/// deterministic.
struct ProgressLog {
    writer: csv::Writer<std::fs::File>,
}

impl ProgressLog {
    fn open(path: &Path) -> Result<ProgressLog> {
        let existed = path.exists();
        let file = std::fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| Error::io(path, e))?;
        let writer = csv::WriterBuilder::new()
            .quote_style(csv::QuoteStyle::NonNumeric)
            .has_headers(!existed)
            .from_writer(file);
        Ok(ProgressLog { writer })
    }

    fn append(&mut self, row: &ManifestRow) {
        // Progress logging is best-effort; the final rewrite is what counts.
        let _ = self.writer.serialize(row);
        let _ = self.writer.flush();
    }
}

/// Paths produced for one sample id.
pub fn sample_paths(out_dir: &Path, index: u32) -> (PathBuf, PathBuf) {
    (
        out_dir.join(format!("images/{index:05}.png")),
        out_dir.join(format!("masks/{index:05}.png")),
    )
}
