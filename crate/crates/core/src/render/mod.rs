//! Spectral volumetric Monte Carlo renderer.
//!
//! [`render`] shoots `spp` wavelength-packet paths per pixel, accumulates
//! spectral radiance on the shared 16-sample grid, converts to linear and
//! gamma-encoded sRGB, and produces the pixel-aligned binary lesion mask.
//! Pixels own independent RNG streams derived from `(seed, pixel index)`,
//! so output is bit-identical for any thread count or tile schedule.

pub mod bsdf;
pub mod camera;
pub mod color;
pub mod envmap;
pub mod geom;
pub mod maskpass;
pub mod phase;
pub mod scene;
pub mod tracer;

pub use camera::Camera;
pub use envmap::{load_envmap, EnvMap};
pub use maskpass::render_mask;
pub use scene::{Backing, RenderScene, SceneConfig};
pub use tracer::{trace_path, TraceConfig, TraceStats};

use crate::mask::BinaryMask;
use crate::optics::{Spectrum, LAMBDA_MIN, LAMBDA_SPAN, LAMBDA_STEP, SPECTRUM_SAMPLES};
use crate::rng::derive_seed;
use crate::{Error, Result};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Sampling budget and path-termination settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenderConfig {
    pub spp: u32,
    pub max_depth: u32,
    /// Path depth after which Russian roulette starts.
    pub rr_start: u32,
    /// Jointly traced wavelengths per path (hero + rotations), 1..=4.
    pub wavelengths_per_path: u32,
    pub seed: u64,
}

impl Default for RenderConfig {
    fn default() -> Self {
        Self {
            spp: 124,
            max_depth: 512,
            rr_start: 16,
            wavelengths_per_path: 4,
            seed: 0,
        }
    }
}

impl RenderConfig {
    pub fn validate(&self) -> Result<()> {
        if self.spp < 1 {
            return Err(Error::InvalidParam("spp must be >= 1".into()));
        }
        if self.max_depth < 2 {
            return Err(Error::InvalidParam("max_depth must be >= 2".into()));
        }
        if !(1..=4).contains(&self.wavelengths_per_path) {
            return Err(Error::InvalidParam(
                "wavelengths_per_path must be in 1..=4".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RenderMeta {
    pub seed: u64,
    pub spp: u32,
    pub width: usize,
    pub height: usize,
    pub elapsed_ms: u64,
    /// Non-finite radiance samples replaced by zero.
    pub nonfinite_samples: u32,
    /// Lane weights truncated at the firefly cap.
    pub weight_capped: u32,
    /// Interface samples discarded for geometric side inconsistency.
    pub interface_rejects: u32,
    /// Tentative collisions where local extinction exceeded the majorant.
    pub majorant_breaches: u32,
    /// Paths cut by the per-path event budget.
    pub event_cap_hits: u32,
}

pub struct RenderOutput {
    pub width: usize,
    pub height: usize,
    /// Gamma-encoded 8-bit image.
    pub rgb8: Vec<[u8; 3]>,
    /// Linear radiance buffer (sRGB primaries, pre-gamma, unclamped).
    pub linear: Vec<[f32; 3]>,
    pub mask: BinaryMask,
    pub meta: RenderMeta,
}

impl RenderOutput {
    pub fn mean_luminance(&self) -> f64 {
        let mut acc = 0.0;
        for p in &self.linear {
            acc += 0.2126 * p[0] as f64 + 0.7152 * p[1] as f64 + 0.0722 * p[2] as f64;
        }
        acc / self.linear.len() as f64
    }

    pub fn save_png(&self, path: &Path) -> Result<()> {
        let mut img = image::RgbImage::new(self.width as u32, self.height as u32);
        for y in 0..self.height {
            for x in 0..self.width {
                let p = self.rgb8[y * self.width + x];
                img.put_pixel(x as u32, y as u32, image::Rgb(p));
            }
        }
        img.save(path).map_err(|e| Error::Image {
            path: path.to_path_buf(),
            source: e,
        })
    }

    pub fn save_radiance_pfm(&self, path: &Path) -> Result<()> {
        let mut img = crate::pfm::PfmImage::new_color(self.width, self.height);
        for (dst, src) in img.data.chunks_exact_mut(3).zip(self.linear.iter()) {
            dst.copy_from_slice(src);
        }
        crate::pfm::write(path, &img)
    }

    pub fn save_meta_json(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(&self.meta).map_err(|e| Error::Json {
            path: path.to_path_buf(),
            source: e,
        })?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

struct PixelAccum {
    bins: [f64; SPECTRUM_SAMPLES],
    weights: [f64; SPECTRUM_SAMPLES],
    stats: TraceStats,
}

fn render_pixel(
    scene: &RenderScene,
    cam: &Camera,
    cfg: &RenderConfig,
    trace_cfg: &TraceConfig,
    px: usize,
    py: usize,
) -> PixelAccum {
    let pixel_index = (py * cam.width + px) as u64;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, pixel_index));
    let mut acc = PixelAccum {
        bins: [0.0; SPECTRUM_SAMPLES],
        weights: [0.0; SPECTRUM_SAMPLES],
        stats: TraceStats::default(),
    };
    let n_lambda = cfg.wavelengths_per_path.max(1) as usize;
    for s in 0..cfg.spp {
        let jx: f64 = rng.gen();
        let jy: f64 = rng.gen();
        let (o, d) = cam.primary_ray(px, py, jx, jy);
        // Hero wavelength stratified over spp covers the whole spectrum;
        // the companion lanes sit close to the hero (one grid step apart)
        // so their extinctions stay comparable and the tracking ratio
        // weights stay tame.
        let u = (s as f64 + rng.gen::<f64>()) / cfg.spp as f64;
        let hero = LAMBDA_MIN + LAMBDA_SPAN * u;
        let mut lambdas = [hero; 4];
        for (j, l) in lambdas.iter_mut().enumerate() {
            let shifted = hero - LAMBDA_MIN + j as f64 * LAMBDA_STEP;
            *l = LAMBDA_MIN + shifted % LAMBDA_SPAN;
        }
        let radiance = trace_path(scene, o, d, &lambdas, trace_cfg, &mut rng, &mut acc.stats);
        for j in 0..n_lambda {
            splat(&mut acc, lambdas[j], radiance[j]);
        }
    }
    acc
}

/// Weighted bin averages; bins no sample touched (possible at very low spp)
/// are reconstructed from their nearest covered neighbors.
fn resolve_bins(acc: &PixelAccum) -> [f64; SPECTRUM_SAMPLES] {
    let mut values = [0.0f64; SPECTRUM_SAMPLES];
    let mut covered = [false; SPECTRUM_SAMPLES];
    for i in 0..SPECTRUM_SAMPLES {
        if acc.weights[i] > 0.0 {
            values[i] = acc.bins[i] / acc.weights[i];
            covered[i] = true;
        }
    }
    if covered.iter().all(|&c| c) {
        return values;
    }
    if !covered.iter().any(|&c| c) {
        return values;
    }
    for i in 0..SPECTRUM_SAMPLES {
        if covered[i] {
            continue;
        }
        let left = (0..i).rev().find(|&j| covered[j]);
        let right = (i + 1..SPECTRUM_SAMPLES).find(|&j| covered[j]);
        values[i] = match (left, right) {
            (Some(l), Some(r)) => {
                let t = (i - l) as f64 / (r - l) as f64;
                values[l] * (1.0 - t) + values[r] * t
            }
            (Some(l), None) => values[l],
            (None, Some(r)) => values[r],
            (None, None) => 0.0,
        };
    }
    values
}

/// Linear splat of one wavelength sample into the two nearest grid bins.
fn splat(acc: &mut PixelAccum, lambda: f64, value: f64) {
    let pos = (lambda - LAMBDA_MIN) / LAMBDA_STEP;
    let i0 = (pos.floor() as usize).min(SPECTRUM_SAMPLES - 1);
    let i1 = (i0 + 1).min(SPECTRUM_SAMPLES - 1);
    let f = (pos - i0 as f64).clamp(0.0, 1.0);
    acc.bins[i0] += value * (1.0 - f);
    acc.weights[i0] += 1.0 - f;
    acc.bins[i1] += value * f;
    acc.weights[i1] += f;
}

/// Render the scene: RGB image plus the aligned lesion mask.
pub fn render(scene: &RenderScene, cam: &Camera, cfg: &RenderConfig) -> Result<RenderOutput> {
    cfg.validate()?;
    cam.validate()?;
    let start = std::time::Instant::now();
    let trace_cfg = TraceConfig {
        max_depth: cfg.max_depth,
        rr_start: cfg.rr_start,
    };
    let (w, h) = (cam.width, cam.height);
    let sys = color::ColorSystem::global();

    let mut linear = vec![[0.0f32; 3]; w * h];
    let mut stats_all: Vec<TraceStats> = Vec::new();
    linear
        .par_chunks_mut(w)
        .enumerate()
        .map(|(py, row)| {
            let mut row_stats = TraceStats::default();
            for (px, out) in row.iter_mut().enumerate() {
                let acc = render_pixel(scene, cam, cfg, &trace_cfg, px, py);
                row_stats.absorb(acc.stats);
                let values = resolve_bins(&acc);
                let rgb = sys.linear_rgb(&Spectrum::from_values(values));
                *out = [rgb[0] as f32, rgb[1] as f32, rgb[2] as f32];
            }
            row_stats
        })
        .collect_into_vec(&mut stats_all);

    let mut stats = TraceStats::default();
    for s in stats_all {
        stats.absorb(s);
    }
    let rgb8 = linear
        .iter()
        .map(|p| color::encode_rgb8([p[0] as f64, p[1] as f64, p[2] as f64]))
        .collect();

    let mask = if scene.skin_enabled {
        render_mask(&scene.model, cam)?
    } else {
        BinaryMask::new(w, h)
    };
    Ok(RenderOutput {
        width: w,
        height: h,
        rgb8,
        linear,
        mask,
        meta: RenderMeta {
            seed: cfg.seed,
            spp: cfg.spp,
            width: w,
            height: h,
            elapsed_ms: start.elapsed().as_millis() as u64,
            nonfinite_samples: stats.nonfinite,
            weight_capped: stats.weight_capped,
            interface_rejects: stats.interface_rejects,
            majorant_breaches: stats.majorant_breaches,
            event_cap_hits: stats.event_cap_hits,
        },
    })
}

/// Convert a spectral buffer to linear + 8-bit sRGB rows. Exposed for
/// callers that accumulate their own spectra.
pub fn spectral_to_srgb(spectra: &[Spectrum]) -> (Vec<[f32; 3]>, Vec<[u8; 3]>) {
    let sys = color::ColorSystem::global();
    let linear: Vec<[f32; 3]> = spectra
        .iter()
        .map(|s| {
            let rgb = sys.linear_rgb(s);
            [rgb[0] as f32, rgb[1] as f32, rgb[2] as f32]
        })
        .collect();
    let rgb8 = linear
        .iter()
        .map(|p| color::encode_rgb8([p[0] as f64, p[1] as f64, p[2] as f64]))
        .collect();
    (linear, rgb8)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn env_only_scene_returns_env_color_exactly() {
        let scene = RenderScene::environment_only(EnvMap::uniform(0.6)).unwrap();
        let cam = Camera::default().with_resolution(16, 16);
        let cfg = RenderConfig {
            spp: 8,
            seed: 1,
            ..Default::default()
        };
        let out = render(&scene, &cam, &cfg).unwrap();
        for p in &out.linear {
            for c in p {
                assert!((*c as f64 - 0.6).abs() < 1e-5, "pixel {p:?}");
            }
        }
    }

    #[test]
    fn render_is_deterministic_across_thread_counts() {
        let scene = RenderScene::environment_only(EnvMap::SkyGradient { scale: 1.0 }).unwrap();
        let cam = Camera::default().with_resolution(24, 24);
        let cfg = RenderConfig {
            spp: 4,
            seed: 7,
            ..Default::default()
        };
        let pool1 = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let pool8 = rayon::ThreadPoolBuilder::new().num_threads(8).build().unwrap();
        let a = pool1.install(|| render(&scene, &cam, &cfg).unwrap());
        let b = pool8.install(|| render(&scene, &cam, &cfg).unwrap());
        assert_eq!(a.linear, b.linear);
        assert_eq!(a.rgb8, b.rgb8);
    }
}
