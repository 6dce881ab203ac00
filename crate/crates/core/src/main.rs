//! Command-line entry points for the skin simulation toolkit.

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use skinsim::lesion::{self, LesionParams, VoxelSidecar};
use skinsim::mask::BinaryMask;
use skinsim::metrics::{self, RgbImage8};
use skinsim::pipeline::{self, GenerationConfig};
use skinsim::render::{self, Camera, RenderConfig, RenderScene};
use std::path::PathBuf;

#[derive(Parser)]
#[command(
    name = "skinsim",
    about = "Procedural skin models, spectral rendering, and dataset tooling",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Grow a lesion volume and write voxel snapshots.
    GrowLesion(GrowLesionArgs),
    /// Build a full skin model and serialize it to a directory.
    BuildSkin(BuildSkinArgs),
    /// Render a single image + mask for a seed.
    Render(RenderArgs),
    /// Generate a dataset from a config file.
    Generate(GenerateArgs),
    /// Compute per-image metrics for an image/mask folder pair.
    Metrics(MetricsArgs),
    /// Merge manifest CSVs, deduplicating by id.
    ManifestMerge(ManifestMergeArgs),
}

#[derive(Args)]
struct GrowLesionArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Number of growth time points; snapshots are written for 1..=T.
    #[arg(long, default_value_t = 5)]
    timepoints: u32,
    /// Cubic grid edge in voxels.
    #[arg(long, default_value_t = 96)]
    grid: usize,
    /// Irregularity probability C_p.
    #[arg(long, default_value_t = 0.0001)]
    cp: f64,
    #[arg(long, default_value = "out/lesion")]
    out: PathBuf,
}

#[derive(Args)]
struct BuildSkinArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Optional config file for model parameters.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = "out/skin")]
    out: PathBuf,
}

#[derive(Args)]
struct RenderArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 256)]
    resolution: usize,
    #[arg(long, default_value_t = 32)]
    spp: u32,
    /// Environment: uniform(L), sky-gradient, or a .pfm/.hdr path.
    #[arg(long, default_value = "sky-gradient")]
    env: String,
    /// Also write the linear radiance buffer as PFM.
    #[arg(long)]
    radiance: bool,
    #[arg(long, default_value = "out/render")]
    out: PathBuf,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Override the config's sample count.
    #[arg(long)]
    count: Option<u32>,
}

#[derive(Args)]
struct MetricsArgs {
    /// Directory of RGB images (png/jpeg).
    #[arg(long)]
    images: PathBuf,
    /// Directory of masks (png, nonzero = lesion), matched by file stem.
    #[arg(long)]
    masks: PathBuf,
    /// Output CSV path.
    #[arg(long)]
    out: PathBuf,
    /// Optional ITA-category histogram CSV.
    #[arg(long)]
    hist: Option<PathBuf>,
}

#[derive(Args)]
struct ManifestMergeArgs {
    /// Input manifest CSVs.
    inputs: Vec<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

fn main() {
    let cli = Cli::parse();
    if let Err(err) = run(cli) {
        // Machine-readable failure on stderr.
        eprintln!("{}", serde_json::json!({ "error": format!("{err:#}") }));
        std::process::exit(1);
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GrowLesion(args) => grow_lesion(args),
        Command::BuildSkin(args) => build_skin(args),
        Command::Render(args) => render_one(args),
        Command::Generate(args) => generate(args),
        Command::Metrics(args) => metrics_cmd(args),
        Command::ManifestMerge(args) => manifest_merge(args),
    }
}

fn grow_lesion(args: GrowLesionArgs) -> Result<()> {
    std::fs::create_dir_all(&args.out)
        .with_context(|| format!("creating {}", args.out.display()))?;
    let params = LesionParams {
        time_points: args.timepoints,
        irregularity_prob: args.cp,
        seed: args.seed,
        ..Default::default()
    };
    let snapshots: Vec<u32> = (1..=args.timepoints).collect();
    let result = lesion::grow(&params, [args.grid, args.grid, args.grid], &snapshots)?;
    for (t, vol) in &result.snapshots {
        let base = args.out.join(format!("lesion_t{t:03}"));
        lesion::write_voxels(&base.with_extension("vox"), vol)?;
        lesion::write_sidecar(
            &base.with_extension("json"),
            &VoxelSidecar {
                params: params.clone(),
                seed: args.seed,
                dims: vol.dims(),
                pitch_um: vol.pitch_um(),
                occupied: vol.occupied_count(),
                time_point: *t,
            },
        )?;
    }
    println!(
        "wrote {} snapshots to {} (final occupancy {})",
        result.snapshots.len(),
        args.out.display(),
        result.volume.occupied_count()
    );
    Ok(())
}

fn load_config(path: &Option<PathBuf>, seed: u64) -> Result<GenerationConfig> {
    let mut cfg = match path {
        Some(p) => pipeline::parse_config(p)?,
        None => GenerationConfig {
            seed,
            ..Default::default()
        },
    };
    cfg.seed = seed;
    Ok(cfg)
}

fn build_skin(args: BuildSkinArgs) -> Result<()> {
    let cfg = load_config(&args.config, args.seed)?;
    let params = pipeline::sample_params(&cfg, 0)?;
    let model = pipeline::build_model(&cfg, &params)?;
    model.save_dir(&args.out)?;
    println!("wrote skin model to {}", args.out.display());
    Ok(())
}

fn render_one(args: RenderArgs) -> Result<()> {
    std::fs::create_dir_all(&args.out)
        .with_context(|| format!("creating {}", args.out.display()))?;
    let mut cfg = load_config(&args.config, args.seed)?;
    cfg.resolution = args.resolution;
    cfg.spp = args.spp;
    let params = pipeline::sample_params(&cfg, 0)?;
    let model = pipeline::build_model(&cfg, &params)?;
    let env = render::load_envmap(&args.env)?;
    let scene = RenderScene::assemble(model, cfg.scene.clone(), env)?;
    let cam = Camera::default().with_resolution(args.resolution, args.resolution);
    let rcfg = RenderConfig {
        spp: args.spp,
        seed: args.seed,
        ..Default::default()
    };
    let pool = pipeline::worker_pool()?;
    let out = pool.install(|| render::render(&scene, &cam, &rcfg))?;
    out.save_png(&args.out.join("image.png"))?;
    out.mask.save_png(&args.out.join("mask.png"))?;
    out.save_meta_json(&args.out.join("meta.json"))?;
    if args.radiance {
        out.save_radiance_pfm(&args.out.join("radiance.pfm"))?;
    }
    println!(
        "rendered {}x{} @ {} spp in {} ms -> {}",
        out.width,
        out.height,
        out.meta.spp,
        out.meta.elapsed_ms,
        args.out.display()
    );
    Ok(())
}

fn generate(args: GenerateArgs) -> Result<()> {
    let mut cfg = pipeline::parse_config(&args.config)?;
    if let Some(count) = args.count {
        cfg.count = count;
    }
    let report = pipeline::generate_dataset(&cfg, &args.out)?;
    println!(
        "generated {} (skipped {}, failed {}) in {} ms; p50 {} ms, p95 {} ms",
        report.generated,
        report.skipped_existing,
        report.failed,
        report.total_ms,
        report.p50_ms,
        report.p95_ms
    );
    Ok(())
}

fn metrics_cmd(args: MetricsArgs) -> Result<()> {
    let mut stems: Vec<(String, PathBuf)> = Vec::new();
    for entry in std::fs::read_dir(&args.images)
        .with_context(|| format!("reading {}", args.images.display()))?
    {
        let path = entry?.path();
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .unwrap_or("")
            .to_ascii_lowercase();
        if matches!(ext.as_str(), "png" | "jpg" | "jpeg") {
            let stem = path
                .file_stem()
                .and_then(|s| s.to_str())
                .unwrap_or_default()
                .to_string();
            stems.push((stem, path));
        }
    }
    stems.sort();
    anyhow::ensure!(!stems.is_empty(), "no images found in {}", args.images.display());

    let mut w = csv::Writer::from_path(&args.out)
        .with_context(|| format!("creating {}", args.out.display()))?;
    w.write_record(["id", "ita_deg", "ita_category", "circularity", "relative_area"])?;
    let mut hist: std::collections::BTreeMap<String, usize> = Default::default();
    let mut rows = 0usize;
    for (stem, img_path) in stems {
        let mask_path = find_mask(&args.masks, &stem);
        let image = RgbImage8::load(&img_path)?;
        let mask = match &mask_path {
            Some(p) => BinaryMask::load_png(p)?,
            None => BinaryMask::new(image.width, image.height),
        };
        anyhow::ensure!(
            mask.width == image.width && mask.height == image.height,
            "mask size mismatch for {stem}"
        );
        let ita = metrics::ita(&image, &mask)?;
        let cat = metrics::ita_category(ita).label().to_string();
        let circ = metrics::circularity(&mask).ok();
        let rel = metrics::relative_area(&mask);
        w.write_record([
            stem.clone(),
            format!("{ita:.4}"),
            cat.clone(),
            circ.map(|c| format!("{c:.4}")).unwrap_or_default(),
            format!("{rel:.6}"),
        ])?;
        *hist.entry(cat).or_default() += 1;
        rows += 1;
    }
    w.flush()?;
    if let Some(hist_path) = args.hist {
        let mut hw = csv::Writer::from_path(&hist_path)?;
        hw.write_record(["ita_category", "count"])?;
        for (cat, count) in hist {
            hw.write_record([cat, count.to_string()])?;
        }
        hw.flush()?;
    }
    println!("wrote {rows} rows to {}", args.out.display());
    Ok(())
}

fn find_mask(dir: &std::path::Path, stem: &str) -> Option<PathBuf> {
    // Match by stem, also accepting common segmentation suffixes.
    [
        dir.join(format!("{stem}.png")),
        dir.join(format!("{stem}_segmentation.png")),
        dir.join(format!("{stem}_mask.png")),
    ]
    .into_iter()
    .find(|cand| cand.exists())
}

fn manifest_merge(args: ManifestMergeArgs) -> Result<()> {
    anyhow::ensure!(!args.inputs.is_empty(), "need at least one input manifest");
    let n = pipeline::merge_manifests(&args.inputs, &args.out)?;
    println!("merged {} rows into {}", n, args.out.display());
    Ok(())
}
