//! Full skin model assembly: layer slabs, blood, hair, and lesion placement.

pub mod blood;
pub mod hair;
pub mod layers;
pub mod noise;

pub use blood::{
    bake_blood_field, generate_blood_network, BloodConfig, BloodNetwork, FieldSpec, ScalarField3,
};
pub use hair::{generate_hair, HairConfig, HairSet};
pub use layers::{build_layers, LayerConfig, LayerStack};
pub use noise::Heightfield;

use crate::lesion::{self, LesionVolume};
use crate::{pfm, Error, Result};
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Where to put the lesion laterally; the seed plane is aligned to the
/// epidermis/dermis boundary (sunk deeper only if the epidermis is too thin
/// to contain the lesion's outward bulge).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LesionPlacement {
    pub center_mm: [f64; 2],
}

impl Default for LesionPlacement {
    fn default() -> Self {
        Self { center_mm: [0.0, 0.0] }
    }
}

/// The renderable scene description.
#[derive(Debug, Clone, PartialEq)]
pub struct SkinModel {
    pub layers: LayerStack,
    pub lesion: LesionVolume,
    /// World position (mm) of lesion voxel (0,0,0)'s center. Lesion x/y
    /// indices map to +x/+y; the lesion depth index grows toward -z.
    pub lesion_origin_mm: [f64; 3],
    pub blood_network: Option<BloodNetwork>,
    pub blood_field: Option<ScalarField3>,
    pub hair: HairSet,
    /// Melanosome volume fraction of the epidermis.
    pub melanosome_fraction: f64,
    /// Baseline whole-blood volume fraction of the dermis.
    pub blood_fraction: f64,
    /// Extra blood fraction where the baked vessel field reads 1.
    pub vessel_blood_boost: f64,
}

impl SkinModel {
    pub fn lesion_pitch_mm(&self) -> f64 {
        self.lesion.pitch_um() as f64 / 1000.0
    }

    /// World-space center of a lesion voxel.
    pub fn lesion_voxel_center_mm(&self, v: [usize; 3]) -> [f64; 3] {
        let p = self.lesion_pitch_mm();
        [
            self.lesion_origin_mm[0] + v[0] as f64 * p,
            self.lesion_origin_mm[1] + v[1] as f64 * p,
            self.lesion_origin_mm[2] - v[2] as f64 * p,
        ]
    }

    /// Occupancy lookup at a world point (false outside the lesion grid).
    pub fn lesion_occupied_at_world(&self, p: [f64; 3]) -> bool {
        let pitch = self.lesion_pitch_mm();
        let ix = (p[0] - self.lesion_origin_mm[0]) / pitch + 0.5;
        let iy = (p[1] - self.lesion_origin_mm[1]) / pitch + 0.5;
        let iz = (self.lesion_origin_mm[2] - p[2]) / pitch + 0.5;
        if ix < 0.0 || iy < 0.0 || iz < 0.0 {
            return false;
        }
        let (ix, iy, iz) = (ix as usize, iy as usize, iz as usize);
        let [nx, ny, nz] = self.lesion.dims();
        if ix >= nx || iy >= ny || iz >= nz {
            return false;
        }
        self.lesion.occupied_at(ix, iy, iz)
    }

    /// Axis-aligned world bounds of the lesion grid (not just occupied
    /// voxels), as (min, max).
    pub fn lesion_world_bounds(&self) -> ([f64; 3], [f64; 3]) {
        let p = self.lesion_pitch_mm();
        let [nx, ny, nz] = self.lesion.dims();
        let o = self.lesion_origin_mm;
        let min = [o[0] - 0.5 * p, o[1] - 0.5 * p, o[2] - (nz as f64 - 0.5) * p];
        let max = [
            o[0] + (nx as f64 - 0.5) * p,
            o[1] + (ny as f64 - 0.5) * p,
            o[2] + 0.5 * p,
        ];
        (min, max)
    }

    pub fn with_blood(mut self, network: BloodNetwork, field: ScalarField3, boost: f64) -> Self {
        self.blood_network = Some(network);
        self.blood_field = Some(field);
        self.vessel_blood_boost = boost;
        self
    }

    pub fn with_hair(mut self, hair: HairSet) -> Self {
        self.hair = hair;
        self
    }

    pub fn with_fractions(mut self, melanosome: f64, blood: f64) -> Self {
        self.melanosome_fraction = melanosome;
        self.blood_fraction = blood;
        self
    }

    /// Serialize to a directory: boundary heightfields as PFM, the blood
    /// field and lesion in the flat voxel format, hair as CSV, parameters
    /// as JSON.
    pub fn save_dir(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for (name, hf) in [
            ("epi_top", &self.layers.epi_top),
            ("pap_top", &self.layers.pap_top),
            ("derm_top", &self.layers.derm_top),
            ("hypo_top", &self.layers.hypo_top),
        ] {
            pfm::write(&dir.join(format!("{name}.pfm")), &hf.to_pfm())?;
        }
        lesion::write_voxels(&dir.join("lesion.vox"), &self.lesion)?;
        if let Some(field) = &self.blood_field {
            write_field_voxels(&dir.join("blood_field.vox"), field)?;
        }
        if !self.hair.is_empty() {
            self.hair.save_csv(&dir.join("hair.csv"))?;
        }
        let params = ModelParams {
            extent_mm: self.layers.extent_mm,
            epidermis_um: self.layers.epidermis_um,
            papillary_um: self.layers.papillary_um,
            dermis_mm: self.layers.dermis_mm,
            hypodermis_mm: self.layers.hypodermis_mm,
            lesion_origin_mm: self.lesion_origin_mm,
            lesion_dims: self.lesion.dims(),
            lesion_pitch_um: self.lesion.pitch_um(),
            melanosome_fraction: self.melanosome_fraction,
            blood_fraction: self.blood_fraction,
            vessel_blood_boost: self.vessel_blood_boost,
            hair_strands: self.hair.strands.len(),
        };
        let text = serde_json::to_string_pretty(&params).map_err(|e| Error::Json {
            path: dir.join("model.json"),
            source: e,
        })?;
        std::fs::write(dir.join("model.json"), text).map_err(|e| Error::io(dir, e))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ModelParams {
    extent_mm: [f64; 2],
    epidermis_um: f64,
    papillary_um: f64,
    dermis_mm: f64,
    hypodermis_mm: f64,
    lesion_origin_mm: [f64; 3],
    lesion_dims: [usize; 3],
    lesion_pitch_um: u32,
    melanosome_fraction: f64,
    blood_fraction: f64,
    vessel_blood_boost: f64,
    hair_strands: usize,
}

/// Blood field serialized in the flat voxel container (values quantized to
/// bytes, 0..=255 mapping to 0..=1).
fn write_field_voxels(path: &Path, field: &ScalarField3) -> Result<()> {
    use std::io::Write;
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut header = Vec::with_capacity(16);
    for d in field.spec.dims {
        header.extend_from_slice(&(d as u32).to_le_bytes());
    }
    header.extend_from_slice(&((field.spec.spacing_mm * 1000.0).round() as u32).to_le_bytes());
    f.write_all(&header).map_err(|e| Error::io(path, e))?;
    let bytes: Vec<u8> = field
        .data
        .iter()
        .map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
        .collect();
    f.write_all(&bytes).map_err(|e| Error::io(path, e))
}

/// Place a grown lesion into a layer stack.
///
/// The seed plane lands on the epidermis/dermis boundary at the placement
/// center. Because the automaton can bulge up to one voxel outward of its
/// seed plane, placement sinks the lesion just enough that every voxel
/// stays below the epidermis top surface even where the epidermis is at its
/// thinnest.
pub fn embed_lesion(
    stack: LayerStack,
    lesion: LesionVolume,
    placement: LesionPlacement,
) -> Result<SkinModel> {
    let pitch = lesion.pitch_um() as f64 / 1000.0;
    let [nx, ny, _] = lesion.dims();
    let width = nx as f64 * pitch;
    let depth = ny as f64 * pitch;
    if width > stack.extent_mm[0] || depth > stack.extent_mm[1] {
        return Err(Error::InvalidParam(format!(
            "lesion grid {width:.1}x{depth:.1} mm exceeds stack extent {:?} mm",
            stack.extent_mm
        )));
    }
    let [cx, cy] = placement.center_mm;
    if cx.abs() + width / 2.0 > stack.extent_mm[0] / 2.0
        || cy.abs() + depth / 2.0 > stack.extent_mm[1] / 2.0
    {
        return Err(Error::InvalidParam("lesion placement exceeds stack extent".into()));
    }

    let seed = lesion.seed_voxel();
    // Outward bulge actually present in the volume, in voxels.
    let min_occ_z = lesion
        .occupied_voxels()
        .iter()
        .map(|v| v[2])
        .min()
        .ok_or_else(|| Error::EmptyInput("cannot embed an empty lesion".into()))?;
    let bulge = (seed[2] - min_occ_z) as f64;

    let boundary_z = stack.pap_top_z_mm(cx, cy);
    let epi_top_min = stack.epi_top.min() / layers::UM_PER_MM;
    // Highest allowed seed-plane z so the top lesion voxel face stays below
    // the lowest point of the epidermis surface.
    let max_seed_z = epi_top_min - (bulge + 0.5) * pitch - 0.005;
    let seed_z = boundary_z.min(max_seed_z);

    let origin = [
        cx - seed[0] as f64 * pitch,
        cy - seed[1] as f64 * pitch,
        seed_z + seed[2] as f64 * pitch,
    ];
    Ok(SkinModel {
        layers: stack,
        lesion,
        lesion_origin_mm: origin,
        blood_network: None,
        blood_field: None,
        hair: HairSet::default(),
        melanosome_fraction: 0.06,
        blood_fraction: 0.02,
        vessel_blood_boost: 0.08,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lesion::{grow, LesionParams};
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn small_lesion(seed: u64) -> LesionVolume {
        let params = LesionParams {
            time_points: 6,
            seed,
            ..Default::default()
        };
        grow(&params, [64, 64, 64], &[]).unwrap().volume
    }

    fn stack() -> LayerStack {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        build_layers(&LayerConfig::default(), &mut rng).unwrap()
    }

    #[test]
    fn default_placement_centers_lesion() {
        let model = embed_lesion(stack(), small_lesion(1), LesionPlacement::default()).unwrap();
        let seed = model.lesion.seed_voxel();
        let c = model.lesion_voxel_center_mm(seed);
        assert!(c[0].abs() < 1e-9 && c[1].abs() < 1e-9);
    }

    #[test]
    fn all_lesion_voxels_below_epidermis_top() {
        for seed in 0..10 {
            let model = embed_lesion(stack(), small_lesion(seed), LesionPlacement::default()).unwrap();
            let pitch = model.lesion_pitch_mm();
            for v in model.lesion.occupied_voxels() {
                let c = model.lesion_voxel_center_mm(v);
                let surf = model.layers.epi_top_z_mm(c[0], c[1]);
                assert!(
                    c[2] + 0.5 * pitch <= surf + 1e-9,
                    "voxel {v:?} at z={} pokes above surface {}",
                    c[2],
                    surf
                );
            }
        }
    }

    #[test]
    fn oversized_lesion_is_rejected() {
        let params = LesionParams {
            time_points: 1,
            ..Default::default()
        };
        // 600 voxels at 50 um = 30 mm, wider than the 20 mm stack.
        let lesion =
            crate::lesion::new_lesion_with_pitch(&params, [600, 600, 16], 50).unwrap();
        assert!(embed_lesion(stack(), lesion, LesionPlacement::default()).is_err());
    }

    #[test]
    fn embedding_is_rigid_translation() {
        let lesion = small_lesion(9);
        let mask_before = crate::lesion::project_mask(&lesion, crate::lesion::Axis::Z).unwrap();
        let model = embed_lesion(stack(), lesion, LesionPlacement::default()).unwrap();
        let mask_after = crate::lesion::project_mask(&model.lesion, crate::lesion::Axis::Z).unwrap();
        assert_eq!(mask_before, mask_after);
    }

    #[test]
    fn world_occupancy_lookup_roundtrips() {
        let model = embed_lesion(stack(), small_lesion(5), LesionPlacement::default()).unwrap();
        for v in model.lesion.occupied_voxels().iter().take(200) {
            let c = model.lesion_voxel_center_mm(*v);
            assert!(model.lesion_occupied_at_world(c));
        }
        let (lo, _hi) = model.lesion_world_bounds();
        assert!(!model.lesion_occupied_at_world([lo[0] - 1.0, 0.0, lo[2]]));
    }

    #[test]
    fn save_dir_writes_expected_files() {
        let model = embed_lesion(stack(), small_lesion(2), LesionPlacement::default()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        model.save_dir(dir.path()).unwrap();
        for f in ["epi_top.pfm", "pap_top.pfm", "derm_top.pfm", "hypo_top.pfm", "lesion.vox", "model.json"] {
            assert!(dir.path().join(f).exists(), "{f} missing");
        }
        // Heightfield PFM reads back with matching dimensions.
        let img = crate::pfm::read(&dir.path().join("epi_top.pfm")).unwrap();
        assert_eq!(img.width, model.layers.epi_top.nx);
        assert_eq!(img.height, model.layers.epi_top.ny);
    }
}
