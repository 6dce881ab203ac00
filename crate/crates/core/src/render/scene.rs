//! Renderable scene: a skin model with resolved spectral materials, an
//! environment, and acceleration data for hair and lesion lookups.
//!
//! Geometry convention: world z up, the air-skin interface at the z = 0
//! plane (the epidermis-top heightfield contributes shading normals, its
//! micrometre relief being subpixel at the default camera). Layer
//! boundaries below are heightfield-valued; fields extend clamp-to-edge
//! laterally so every camera ray sees skin.

use super::geom::Vec3;
use crate::anatomy::SkinModel;
use crate::optics::{
    material_for_layer, ChromophoreTable, LayerKind, LayerOpticsConfig, OpticalMaterial,
    Spectrum, TissueFractions,
};
use crate::render::envmap::EnvMap;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

/// What happens to light reaching the bottom of the hypodermis slab.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Backing {
    /// Fully absorbing black backing (default).
    Absorb,
    /// Lossless specular reflector; used by energy-conservation tests.
    Mirror,
}

/// Scene assembly knobs beyond the skin model itself.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneConfig {
    pub optics: LayerOpticsConfig,
    /// Multiplier on the epidermal melanin term inside lesion voxels.
    pub lesion_melanin_multiplier: f64,
    /// Oxygen saturation / water / fat fractions shared by the mixing rules.
    pub fractions: TissueFractions,
    pub backing: Backing,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            optics: LayerOpticsConfig::default(),
            lesion_melanin_multiplier: 20.0,
            fractions: TissueFractions::default(),
            backing: Backing::Absorb,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Layer {
    Air,
    Epidermis,
    Papillary,
    Dermis,
    Hypodermis,
    Backing,
}

pub struct HairSegment {
    pub a: Vec3,
    pub b: Vec3,
    pub radius: f64,
}

/// Uniform 2D lateral grid over hair segments.
pub struct HairAccel {
    pub segments: Vec<HairSegment>,
    cells: Vec<Vec<u32>>,
    nx: usize,
    ny: usize,
    min: [f64; 2],
    size: [f64; 2],
    /// Vertical band containing all hair (z range, inflated by radii).
    pub z_band: [f64; 2],
}

impl HairAccel {
    fn build(model: &SkinModel) -> Option<HairAccel> {
        let mut segments = Vec::new();
        for strand in &model.hair.strands {
            for w in strand.points.windows(2) {
                segments.push(HairSegment {
                    a: w[0],
                    b: w[1],
                    radius: strand.radius_mm,
                });
            }
        }
        if segments.is_empty() {
            return None;
        }
        let mut z_lo = f64::INFINITY;
        let mut z_hi = f64::NEG_INFINITY;
        for s in &segments {
            z_lo = z_lo.min(s.a[2].min(s.b[2]) - s.radius);
            z_hi = z_hi.max(s.a[2].max(s.b[2]) + s.radius);
        }
        let ext = model.layers.extent_mm;
        // Strands can arc slightly past the extent; pad the grid bounds.
        let pad = 1.0;
        let min = [-ext[0] / 2.0 - pad, -ext[1] / 2.0 - pad];
        let size = [ext[0] + 2.0 * pad, ext[1] + 2.0 * pad];
        let (nx, ny) = (32usize, 32usize);
        let mut cells = vec![Vec::new(); nx * ny];
        for (i, s) in segments.iter().enumerate() {
            let lo = [
                s.a[0].min(s.b[0]) - s.radius,
                s.a[1].min(s.b[1]) - s.radius,
            ];
            let hi = [
                s.a[0].max(s.b[0]) + s.radius,
                s.a[1].max(s.b[1]) + s.radius,
            ];
            let cx0 = (((lo[0] - min[0]) / size[0] * nx as f64).floor() as isize).clamp(0, nx as isize - 1);
            let cx1 = (((hi[0] - min[0]) / size[0] * nx as f64).floor() as isize).clamp(0, nx as isize - 1);
            let cy0 = (((lo[1] - min[1]) / size[1] * ny as f64).floor() as isize).clamp(0, ny as isize - 1);
            let cy1 = (((hi[1] - min[1]) / size[1] * ny as f64).floor() as isize).clamp(0, ny as isize - 1);
            for cy in cy0..=cy1 {
                for cx in cx0..=cx1 {
                    cells[cy as usize * nx + cx as usize].push(i as u32);
                }
            }
        }
        Some(HairAccel {
            segments,
            cells,
            nx,
            ny,
            min,
            size,
            z_band: [z_lo, z_hi],
        })
    }

    fn cell_of(&self, x: f64, y: f64) -> (isize, isize) {
        (
            (((x - self.min[0]) / self.size[0]) * self.nx as f64).floor() as isize,
            (((y - self.min[1]) / self.size[1]) * self.ny as f64).floor() as isize,
        )
    }

    /// Nearest capsule hit along [t_min, t_max]; returns (t, segment id).
    pub fn intersect(&self, o: Vec3, d: Vec3, t_min: f64, t_max: f64) -> Option<(f64, u32)> {
        // Clip to the vertical band first.
        let (mut t0, mut t1) = (t_min, t_max);
        if d[2].abs() > 1e-15 {
            let ta = (self.z_band[0] - o[2]) / d[2];
            let tb = (self.z_band[1] - o[2]) / d[2];
            let (ta, tb) = (ta.min(tb), ta.max(tb));
            t0 = t0.max(ta);
            t1 = t1.min(tb);
        } else if o[2] < self.z_band[0] || o[2] > self.z_band[1] {
            return None;
        }
        if t0 > t1 {
            return None;
        }
        // Walk lateral cells in t order.
        let start = [o[0] + d[0] * t0, o[1] + d[1] * t0];
        let (mut cx, mut cy) = self.cell_of(start[0], start[1]);
        let step_x: isize = if d[0] > 0.0 { 1 } else { -1 };
        let step_y: isize = if d[1] > 0.0 { 1 } else { -1 };
        let cell_w = self.size[0] / self.nx as f64;
        let cell_h = self.size[1] / self.ny as f64;
        let next_boundary = |c: isize, step: isize, min: f64, w: f64| -> f64 {
            let edge = if step > 0 { c + 1 } else { c };
            min + edge as f64 * w
        };
        let mut t_next_x = if d[0].abs() > 1e-15 {
            (next_boundary(cx, step_x, self.min[0], cell_w) - o[0]) / d[0]
        } else {
            f64::INFINITY
        };
        let mut t_next_y = if d[1].abs() > 1e-15 {
            (next_boundary(cy, step_y, self.min[1], cell_h) - o[1]) / d[1]
        } else {
            f64::INFINITY
        };
        let dt_x = (cell_w / d[0].abs()).abs();
        let dt_y = (cell_h / d[1].abs()).abs();

        let mut best: Option<(f64, u32)> = None;
        loop {
            if cx < 0 || cy < 0 || cx >= self.nx as isize || cy >= self.ny as isize {
                break;
            }
            for &si in &self.cells[cy as usize * self.nx + cx as usize] {
                let s = &self.segments[si as usize];
                if let Some(t) = ray_capsule(o, d, s.a, s.b, s.radius) {
                    if t >= t_min && t <= t1 && best.is_none_or(|(bt, _)| t < bt) {
                        best = Some((t, si));
                    }
                }
            }
            let t_exit = t_next_x.min(t_next_y);
            if let Some((bt, _)) = best {
                if bt <= t_exit {
                    break;
                }
            }
            if t_exit > t1 {
                break;
            }
            if t_next_x < t_next_y {
                cx += step_x;
                t_next_x += dt_x;
            } else {
                cy += step_y;
                t_next_y += dt_y;
            }
        }
        best
    }

    /// Surface normal of a capsule at a hit point.
    pub fn normal_at(&self, seg: u32, p: Vec3) -> Vec3 {
        let s = &self.segments[seg as usize];
        let ab = [s.b[0] - s.a[0], s.b[1] - s.a[1], s.b[2] - s.a[2]];
        let ap = [p[0] - s.a[0], p[1] - s.a[1], p[2] - s.a[2]];
        let len2 = ab[0] * ab[0] + ab[1] * ab[1] + ab[2] * ab[2];
        let t = if len2 > 0.0 {
            ((ap[0] * ab[0] + ap[1] * ab[1] + ap[2] * ab[2]) / len2).clamp(0.0, 1.0)
        } else {
            0.0
        };
        let q = [s.a[0] + t * ab[0], s.a[1] + t * ab[1], s.a[2] + t * ab[2]];
        super::geom::normalize([p[0] - q[0], p[1] - q[1], p[2] - q[2]])
    }
}

/// Capsule intersection: cylinder body plus spherical caps.
fn ray_capsule(o: Vec3, d: Vec3, a: Vec3, b: Vec3, r: f64) -> Option<f64> {
    let ba = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
    let oa = [o[0] - a[0], o[1] - a[1], o[2] - a[2]];
    let baba = ba[0] * ba[0] + ba[1] * ba[1] + ba[2] * ba[2];
    let bard = ba[0] * d[0] + ba[1] * d[1] + ba[2] * d[2];
    let baoa = ba[0] * oa[0] + ba[1] * oa[1] + ba[2] * oa[2];
    let rdoa = d[0] * oa[0] + d[1] * oa[1] + d[2] * oa[2];
    let oaoa = oa[0] * oa[0] + oa[1] * oa[1] + oa[2] * oa[2];
    let k2 = baba - bard * bard;
    let k1 = baba * rdoa - baoa * bard;
    let k0 = baba * oaoa - baoa * baoa - r * r * baba;
    let h = k1 * k1 - k2 * k0;
    if k2.abs() > 1e-15 {
        if h < 0.0 {
            return None;
        }
        let t = (-k1 - h.sqrt()) / k2;
        let y = baoa + t * bard;
        if y > 0.0 && y < baba && t > 1e-9 {
            return Some(t);
        }
        // Cap sphere on the side the cylinder hit missed.
        let center = if y <= 0.0 { a } else { b };
        if let Some(t) = ray_sphere(o, d, center, r) {
            return Some(t);
        }
        return None;
    }
    // Ray parallel to the axis: nearest cap wins.
    match (ray_sphere(o, d, a, r), ray_sphere(o, d, b, r)) {
        (Some(x), Some(y)) => Some(x.min(y)),
        (x, None) => x,
        (None, y) => y,
    }
}

fn ray_sphere(o: Vec3, d: Vec3, c: Vec3, r: f64) -> Option<f64> {
    let oc = [o[0] - c[0], o[1] - c[1], o[2] - c[2]];
    let b = oc[0] * d[0] + oc[1] * d[1] + oc[2] * d[2];
    let cc = oc[0] * oc[0] + oc[1] * oc[1] + oc[2] * oc[2] - r * r;
    let h = b * b - cc;
    if h < 0.0 {
        return None;
    }
    let t = -b - h.sqrt();
    (t > 1e-9).then_some(t)
}

/// Build the depth bands: breakpoints at the extremes of each boundary
/// heightfield, each band bounding the extinction of every layer that can
/// occur inside it (plus the vessel blood term where dermal layers can).
fn build_bands(
    model: &SkinModel,
    materials: &[OpticalMaterial; 5],
    blood_extra: &Spectrum,
) -> Vec<MajorantBand> {
    let layers = &model.layers;
    let um = crate::anatomy::layers::UM_PER_MM;
    let pap = (
        layers.nominal_pap_top_mm() + layers.pap_top.min() / um,
        layers.nominal_pap_top_mm() + layers.pap_top.max() / um,
    );
    let derm = (
        layers.nominal_derm_top_mm() + layers.derm_top.min() / um,
        layers.nominal_derm_top_mm() + layers.derm_top.max() / um,
    );
    let hypo = (
        layers.nominal_hypo_top_mm() + layers.hypo_top.min() / um,
        layers.nominal_hypo_top_mm() + layers.hypo_top.max() / um,
    );
    let backing = layers.backing_z_mm();
    let mut breaks = vec![0.0, pap.0, pap.1, derm.0, derm.1, hypo.0, hypo.1, backing];
    breaks.retain(|z| *z >= backing - 1e-12 && *z <= 1e-12);
    breaks.sort_by(|a, b| b.partial_cmp(a).unwrap());
    breaks.dedup_by(|a, b| (*a - *b).abs() < 1e-12);

    let mu_t = |idx: usize, i: usize| -> f64 {
        materials[idx].absorption.sample(i) + materials[idx].scattering.sample(i)
    };
    let mut bands = Vec::new();
    for w in breaks.windows(2) {
        let (hi, lo) = (w[0], w[1]);
        // Layer L possibly occurs in (lo, hi] iff the interval intersects
        // L's possible depth range.
        let epi = hi > pap.0;
        let pap_l = hi > derm.0 && lo < pap.1;
        let derm_l = hi > hypo.0 && lo < derm.1;
        let hypo_l = lo < hypo.1;
        let dermal = pap_l || derm_l;
        let mut maxes = [0.0f64; crate::optics::SPECTRUM_SAMPLES];
        for (i, v) in maxes.iter_mut().enumerate() {
            if epi {
                *v = v.max(mu_t(LAYER_INDEX_EPI, i));
            }
            if pap_l {
                *v = v.max(mu_t(LAYER_INDEX_PAP, i));
            }
            if derm_l {
                *v = v.max(mu_t(LAYER_INDEX_DERM, i));
            }
            if hypo_l {
                *v = v.max(mu_t(LAYER_INDEX_HYPO, i));
            }
            if dermal {
                *v += blood_extra.sample(i);
            }
        }
        bands.push(MajorantBand {
            z_lo: lo,
            max_mu_t: Spectrum::from_values(maxes),
        });
    }
    bands
}

/// Per-wavelength-packet cache of medium coefficients and majorants.
pub struct PacketCoeffs {
    /// mu_a, mu_s per layer material at the packet wavelengths:
    /// [epidermis, papillary, dermis, hypodermis, lesion].
    pub mu_a: [[f64; 4]; 5],
    pub mu_s: [[f64; 4]; 5],
    /// Extra absorption where the baked blood field reads 1.
    pub blood_extra_a: [f64; 4],
    /// Majorant extinction per depth band (top to bottom).
    pub band_majorants: Vec<f64>,
    /// Extinction bound for lesion voxels.
    pub lesion_mu_t: f64,
}

/// Horizontal slab of depth where a fixed set of layers can occur; used for
/// piecewise-constant tracking majorants. The boundary heightfields only
/// wander within their amplitude, so each band's layer set is exact.
struct MajorantBand {
    /// Band covers z in (z_lo, z_hi].
    z_lo: f64,
    max_mu_t: Spectrum,
}

pub struct RenderScene {
    pub model: SkinModel,
    pub config: SceneConfig,
    pub env: EnvMap,
    pub materials: [OpticalMaterial; 5],
    /// Absorption added where the vessel field saturates.
    pub blood_extra: Spectrum,
    pub hair_albedo: Spectrum,
    pub hair: Option<HairAccel>,
    /// False renders the environment alone (no interface, media or hair).
    pub skin_enabled: bool,
    lesion_bounds: ([f64; 3], [f64; 3]),
    /// Depth bands ordered top to bottom, starting at z = 0.
    bands: Vec<MajorantBand>,
    max_mu_t_lesion: Spectrum,
}

const LAYER_INDEX_EPI: usize = 0;
const LAYER_INDEX_PAP: usize = 1;
const LAYER_INDEX_DERM: usize = 2;
const LAYER_INDEX_HYPO: usize = 3;
const LAYER_INDEX_LESION: usize = 4;

impl RenderScene {
    pub fn assemble(model: SkinModel, config: SceneConfig, env: EnvMap) -> Result<RenderScene> {
        config.optics.validate()?;
        let table = ChromophoreTable::bundled();
        let epi_fr = TissueFractions {
            melanosome: model.melanosome_fraction,
            ..config.fractions
        };
        let derm_fr = TissueFractions {
            blood: model.blood_fraction,
            ..config.fractions
        };
        let hypo_fr = config.fractions;
        let epidermis = material_for_layer(LayerKind::Epidermis, &epi_fr, &config.optics, table)?;
        let papillary = material_for_layer(LayerKind::Dermis, &derm_fr, &config.optics, table)?;
        let dermis = papillary.clone();
        let hypodermis = material_for_layer(LayerKind::Hypodermis, &hypo_fr, &config.optics, table)?;

        // Lesion: epidermal scattering with an amplified melanin term.
        if config.lesion_melanin_multiplier < 0.0 {
            return Err(Error::InvalidParam("lesion melanin multiplier must be >= 0".into()));
        }
        let lesion_melanin =
            (config.lesion_melanin_multiplier * model.melanosome_fraction).min(1.0);
        let lesion_fr = TissueFractions {
            melanosome: lesion_melanin,
            ..config.fractions
        };
        let lesion = material_for_layer(LayerKind::Epidermis, &lesion_fr, &config.optics, table)?;

        // Vessel-local blood absorption on top of the dermis baseline.
        let boost = if model.blood_field.is_some() {
            model.vessel_blood_boost.clamp(0.0, 1.0)
        } else {
            0.0
        };
        let blood_extra = Spectrum::from_fn(|l| {
            let s = config.fractions.oxygen_saturation;
            boost
                * (s * table.oxyhemoglobin.eval(l)
                    + (1.0 - s) * table.deoxyhemoglobin.eval(l))
        });

        let hair_albedo = Spectrum::from_fn(|l| {
            // Dark melanin-tinted fiber: brighter toward red.
            0.04 + 0.10 * ((l - 500.0) / 280.0).clamp(0.0, 1.0)
        });

        let materials = [epidermis, papillary, dermis, hypodermis, lesion];
        let bands = build_bands(&model, &materials, &blood_extra);
        let mut max_les = [0.0f64; crate::optics::SPECTRUM_SAMPLES];
        for (i, v) in max_les.iter_mut().enumerate() {
            *v = materials[LAYER_INDEX_LESION].absorption.sample(i)
                + materials[LAYER_INDEX_LESION].scattering.sample(i);
        }

        let hair = HairAccel::build(&model);
        let lesion_bounds = model.lesion_world_bounds();
        Ok(RenderScene {
            model,
            config,
            env,
            materials,
            blood_extra,
            hair_albedo,
            hair,
            skin_enabled: true,
            lesion_bounds,
            bands,
            max_mu_t_lesion: Spectrum::from_values(max_les),
        })
    }

    /// A scene with no skin: camera rays see the environment directly.
    pub fn environment_only(env: EnvMap) -> Result<RenderScene> {
        use crate::anatomy::{build_layers, embed_lesion, LayerConfig, LesionPlacement};
        use crate::lesion::{new_lesion, LesionParams};
        use rand_chacha::rand_core::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
        let cfg = LayerConfig {
            epi_top_noise_um: [0.0, 0.0],
            pap_top_noise_um: [0.0, 0.0],
            derm_top_noise_um: [0.0, 0.0],
            hypo_top_noise_um: [0.0, 0.0],
            grid: [2, 2],
            ..Default::default()
        };
        let stack = build_layers(&cfg, &mut rng)?;
        let lesion = new_lesion(
            &LesionParams {
                time_points: 1,
                ..Default::default()
            },
            [8, 8, 8],
        )?;
        let model = embed_lesion(stack, lesion, LesionPlacement::default())?;
        let mut scene = RenderScene::assemble(model, SceneConfig::default(), env)?;
        scene.skin_enabled = false;
        Ok(scene)
    }

    pub fn interface_ior(&self) -> f64 {
        self.config.optics.ior
    }

    pub fn interface_roughness(&self) -> f64 {
        self.config.optics.roughness
    }

    pub fn backing_z(&self) -> f64 {
        self.model.layers.backing_z_mm()
    }

    /// Shading normal at the interface, from the epidermis-top heightfield.
    pub fn interface_normal(&self, x: f64, y: f64) -> Vec3 {
        let (gx, gy) = self.model.layers.epi_top.gradient(x, y);
        // Heights are um over mm lateral: convert slope to mm/mm.
        super::geom::normalize([-gx / 1000.0, -gy / 1000.0, 1.0])
    }

    pub fn layer_at(&self, p: Vec3) -> Layer {
        let z = p[2];
        if z > 0.0 {
            return Layer::Air;
        }
        let (x, y) = (p[0], p[1]);
        if z > self.model.layers.pap_top_z_mm(x, y) {
            Layer::Epidermis
        } else if z > self.model.layers.derm_top_z_mm(x, y) {
            Layer::Papillary
        } else if z > self.model.layers.hypo_top_z_mm(x, y) {
            Layer::Dermis
        } else if z > self.model.layers.backing_z_mm() {
            Layer::Hypodermis
        } else {
            Layer::Backing
        }
    }

    pub fn in_lesion_bounds(&self, p: Vec3) -> bool {
        let (lo, hi) = self.lesion_bounds;
        p[0] >= lo[0]
            && p[0] <= hi[0]
            && p[1] >= lo[1]
            && p[1] <= hi[1]
            && p[2] >= lo[2]
            && p[2] <= hi[2]
    }

    pub fn lesion_bounds(&self) -> ([f64; 3], [f64; 3]) {
        self.lesion_bounds
    }

    /// Distances at which the ray crosses the lesion bounding box, if any.
    pub fn lesion_bounds_span(&self, o: Vec3, d: Vec3) -> Option<(f64, f64)> {
        let (lo, hi) = self.lesion_bounds;
        let mut t0 = f64::NEG_INFINITY;
        let mut t1 = f64::INFINITY;
        for a in 0..3 {
            if d[a].abs() < 1e-15 {
                if o[a] < lo[a] || o[a] > hi[a] {
                    return None;
                }
            } else {
                let ta = (lo[a] - o[a]) / d[a];
                let tb = (hi[a] - o[a]) / d[a];
                let (ta, tb) = (ta.min(tb), ta.max(tb));
                t0 = t0.max(ta);
                t1 = t1.min(tb);
            }
        }
        (t0 <= t1).then_some((t0, t1))
    }

    pub fn packet_coeffs(&self, lambdas: &[f64; 4]) -> PacketCoeffs {
        let mut mu_a = [[0.0; 4]; 5];
        let mut mu_s = [[0.0; 4]; 5];
        for (li, m) in self.materials.iter().enumerate() {
            for (wi, &l) in lambdas.iter().enumerate() {
                mu_a[li][wi] = m.absorption.eval(l);
                mu_s[li][wi] = m.scattering.eval(l);
            }
        }
        let mut blood_extra_a = [0.0; 4];
        let mut lesion_mu_t = 0.0f64;
        for (wi, &l) in lambdas.iter().enumerate() {
            blood_extra_a[wi] = self.blood_extra.eval(l);
            lesion_mu_t = lesion_mu_t.max(self.max_mu_t_lesion.eval(l));
        }
        // Nudge the bounds up so points where the local extinction equals
        // the bound exactly (clamp-extended edges) cannot round above it.
        const SAFETY: f64 = 1.0 + 1e-9;
        let band_majorants = self
            .bands
            .iter()
            .map(|b| {
                lambdas
                    .iter()
                    .map(|&l| b.max_mu_t.eval(l))
                    .fold(0.0, f64::max)
                    * SAFETY
            })
            .collect();
        PacketCoeffs {
            mu_a,
            mu_s,
            blood_extra_a,
            band_majorants,
            lesion_mu_t: lesion_mu_t * SAFETY,
        }
    }

    /// Band index containing depth z (bands ordered top to bottom).
    pub fn band_at(&self, z: f64) -> usize {
        for (i, b) in self.bands.iter().enumerate() {
            if z > b.z_lo {
                return i;
            }
        }
        self.bands.len().saturating_sub(1)
    }

    /// Depth range (z_lo, z_hi] of a band.
    pub fn band_range(&self, idx: usize) -> (f64, f64) {
        let hi = if idx == 0 { 0.0 } else { self.bands[idx - 1].z_lo };
        (self.bands[idx].z_lo, hi)
    }

    /// Tracking majorant for a band, optionally inside the lesion bounds.
    pub fn majorant(&self, coeffs: &PacketCoeffs, band: usize, in_lesion: bool) -> f64 {
        let m = coeffs.band_majorants[band];
        if in_lesion {
            m.max(coeffs.lesion_mu_t)
        } else {
            m
        }
    }

    /// Medium coefficients at a point for the packet wavelengths. Returns
    /// None in air or backing.
    pub fn medium_at(
        &self,
        p: Vec3,
        coeffs: &PacketCoeffs,
    ) -> Option<([f64; 4], [f64; 4], f64)> {
        let layer = self.layer_at(p);
        let idx = match layer {
            Layer::Air | Layer::Backing => return None,
            Layer::Epidermis => {
                if self.in_lesion_bounds(p) && self.model.lesion_occupied_at_world(p) {
                    LAYER_INDEX_LESION
                } else {
                    LAYER_INDEX_EPI
                }
            }
            Layer::Papillary | Layer::Dermis => {
                if self.in_lesion_bounds(p) && self.model.lesion_occupied_at_world(p) {
                    LAYER_INDEX_LESION
                } else if layer == Layer::Papillary {
                    LAYER_INDEX_PAP
                } else {
                    LAYER_INDEX_DERM
                }
            }
            Layer::Hypodermis => LAYER_INDEX_HYPO,
        };
        let mut mu_a = coeffs.mu_a[idx];
        let mu_s = coeffs.mu_s[idx];
        if idx == LAYER_INDEX_PAP || idx == LAYER_INDEX_DERM {
            if let Some(field) = &self.model.blood_field {
                let f = field.sample(p);
                if f > 0.0 {
                    for (a, e) in mu_a.iter_mut().zip(coeffs.blood_extra_a.iter()) {
                        *a += f * e;
                    }
                }
            }
        }
        Some((mu_a, mu_s, self.materials[idx].anisotropy))
    }
}
