//! Layer slab construction with rough boundaries.
//!
//! World coordinates: x/y lateral (mm, centered on the sample), z up. The
//! epidermis top sits near z = 0; layer boundaries below it are stored as
//! um offset heightfields around their nominal depths.

use super::noise::Heightfield;
use crate::{Error, Result};
use rand::Rng;
use serde::{Deserialize, Serialize};

pub const UM_PER_MM: f64 = 1000.0;

/// Sampling ranges for [`build_layers`]. Thickness ranges for the top two
/// layers follow reported anatomy (epidermis 20-150 um, dermis 1-4 mm);
/// papillary and hypodermis values are modeling defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerConfig {
    pub extent_mm: [f64; 2],
    pub grid: [usize; 2],
    /// Epidermis thickness range, um.
    pub epidermis_um: [f64; 2],
    /// Papillary dermis thickness range, um.
    pub papillary_um: [f64; 2],
    /// Dermis thickness range, mm.
    pub dermis_mm: [f64; 2],
    /// Hypodermis slab thickness, mm (absorbing backing below it).
    pub hypodermis_mm: f64,
    /// Roughness amplitude ranges, um, for the four boundary heightfields.
    pub epi_top_noise_um: [f64; 2],
    pub pap_top_noise_um: [f64; 2],
    pub derm_top_noise_um: [f64; 2],
    pub hypo_top_noise_um: [f64; 2],
    /// Noise frequency range (cells across the extent).
    pub noise_frequency: [f64; 2],
}

impl Default for LayerConfig {
    fn default() -> Self {
        Self {
            extent_mm: [20.0, 20.0],
            grid: [96, 96],
            epidermis_um: [20.0, 150.0],
            papillary_um: [150.0, 250.0],
            dermis_mm: [1.0, 4.0],
            hypodermis_mm: 3.0,
            epi_top_noise_um: [2.0, 12.0],
            pap_top_noise_um: [0.0, 6.0],
            derm_top_noise_um: [0.0, 40.0],
            hypo_top_noise_um: [20.0, 150.0],
            noise_frequency: [2.0, 8.0],
        }
    }
}

impl LayerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.extent_mm[0] <= 0.0 || self.extent_mm[1] <= 0.0 {
            return Err(Error::InvalidParam("layer extent must be positive".into()));
        }
        if self.grid[0] < 2 || self.grid[1] < 2 {
            return Err(Error::InvalidParam("layer grid must be at least 2x2".into()));
        }
        for (name, r) in [
            ("epidermis_um", self.epidermis_um),
            ("papillary_um", self.papillary_um),
            ("dermis_mm", self.dermis_mm),
            ("epi_top_noise_um", self.epi_top_noise_um),
            ("pap_top_noise_um", self.pap_top_noise_um),
            ("derm_top_noise_um", self.derm_top_noise_um),
            ("hypo_top_noise_um", self.hypo_top_noise_um),
            ("noise_frequency", self.noise_frequency),
        ] {
            if r[0] < 0.0 || r[1] < r[0] {
                return Err(Error::InvalidParam(format!("bad range {name}: {r:?}")));
            }
        }
        if self.hypodermis_mm <= 0.0 {
            return Err(Error::InvalidParam("hypodermis thickness must be positive".into()));
        }
        Ok(())
    }
}

/// The assembled slab: nominal thicknesses plus per-boundary offset fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerStack {
    pub extent_mm: [f64; 2],
    pub epidermis_um: f64,
    pub papillary_um: f64,
    pub dermis_mm: f64,
    pub hypodermis_mm: f64,
    /// Offset fields in um around each boundary's nominal depth.
    pub epi_top: Heightfield,
    pub pap_top: Heightfield,
    pub derm_top: Heightfield,
    pub hypo_top: Heightfield,
}

impl LayerStack {
    /// Nominal boundary depths (negative z, mm) below the epidermis top.
    pub fn nominal_pap_top_mm(&self) -> f64 {
        -self.epidermis_um / UM_PER_MM
    }

    pub fn nominal_derm_top_mm(&self) -> f64 {
        -(self.epidermis_um + self.papillary_um) / UM_PER_MM
    }

    pub fn nominal_hypo_top_mm(&self) -> f64 {
        self.nominal_derm_top_mm() - self.dermis_mm
    }

    /// Bottom of the hypodermis slab; everything below is absorbing backing.
    pub fn backing_z_mm(&self) -> f64 {
        self.nominal_hypo_top_mm() - self.hypodermis_mm
    }

    pub fn epi_top_z_mm(&self, x: f64, y: f64) -> f64 {
        self.epi_top.sample(x, y) / UM_PER_MM
    }

    pub fn pap_top_z_mm(&self, x: f64, y: f64) -> f64 {
        self.nominal_pap_top_mm() + self.pap_top.sample(x, y) / UM_PER_MM
    }

    pub fn derm_top_z_mm(&self, x: f64, y: f64) -> f64 {
        self.nominal_derm_top_mm() + self.derm_top.sample(x, y) / UM_PER_MM
    }

    pub fn hypo_top_z_mm(&self, x: f64, y: f64) -> f64 {
        self.nominal_hypo_top_mm() + self.hypo_top.sample(x, y) / UM_PER_MM
    }

    /// Minimum epidermis thickness over the boundary grids, um.
    pub fn min_epidermis_thickness_um(&self) -> f64 {
        let mut min = f64::INFINITY;
        for y in 0..self.epi_top.ny {
            for x in 0..self.epi_top.nx {
                let (px, py) = self.grid_point_mm(x, y);
                let t = (self.epi_top_z_mm(px, py) - self.pap_top_z_mm(px, py)) * UM_PER_MM;
                min = min.min(t);
            }
        }
        min
    }

    fn grid_point_mm(&self, x: usize, y: usize) -> (f64, f64) {
        (
            ((x as f64 + 0.5) / self.epi_top.nx as f64 - 0.5) * self.extent_mm[0],
            ((y as f64 + 0.5) / self.epi_top.ny as f64 - 0.5) * self.extent_mm[1],
        )
    }

    /// Boundaries must be strictly depth-ordered at every lateral sample.
    pub fn validate_ordering(&self) -> Result<()> {
        for y in 0..self.epi_top.ny {
            for x in 0..self.epi_top.nx {
                let (px, py) = self.grid_point_mm(x, y);
                let zs = [
                    self.epi_top_z_mm(px, py),
                    self.pap_top_z_mm(px, py),
                    self.derm_top_z_mm(px, py),
                    self.hypo_top_z_mm(px, py),
                    self.backing_z_mm(),
                ];
                for w in zs.windows(2) {
                    if w[1] >= w[0] {
                        return Err(Error::InvalidParam(format!(
                            "layer inversion at ({px:.2},{py:.2}) mm: {zs:?}"
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

fn sample_range(rng: &mut impl Rng, r: [f64; 2]) -> f64 {
    if r[0] == r[1] {
        r[0]
    } else {
        rng.gen_range(r[0]..r[1])
    }
}

/// Generate a [`LayerStack`]: sample thicknesses and roughness from the
/// config ranges, synthesize boundary noise, and enforce ordering by
/// capping each boundary's amplitude against the adjacent layer thickness.
///
/// A configured minimum amplitude that already reaches the sampled layer
/// thickness cannot be capped away and is rejected.
pub fn build_layers(config: &LayerConfig, rng: &mut impl Rng) -> Result<LayerStack> {
    config.validate()?;
    let epidermis_um = sample_range(rng, config.epidermis_um);
    let papillary_um = sample_range(rng, config.papillary_um);
    let dermis_mm = sample_range(rng, config.dermis_mm);
    let dermis_um = dermis_mm * UM_PER_MM;
    let hypodermis_um = config.hypodermis_mm * UM_PER_MM;

    // Budget: a boundary's noise eats into the layers on both sides, so the
    // amplitudes of the two bounding surfaces must sum below the thickness.
    let caps = [
        ("epidermis", config.epi_top_noise_um, epidermis_um),
        ("papillary dermis", config.pap_top_noise_um, papillary_um.min(epidermis_um)),
        ("dermis", config.derm_top_noise_um, dermis_um.min(papillary_um)),
        ("hypodermis", config.hypo_top_noise_um, hypodermis_um.min(dermis_um)),
    ];
    let mut amplitudes = [0.0f64; 4];
    for (i, (layer, range, thickness)) in caps.iter().enumerate() {
        if range[0] >= *thickness {
            return Err(Error::InvalidParam(format!(
                "roughness amplitude {} um reaches {layer} thickness {thickness:.1} um",
                range[0]
            )));
        }
        let amp = sample_range(rng, *range);
        // Cap at 45% of the bounding thickness so the two adjacent
        // boundaries can never meet.
        amplitudes[i] = amp.min(0.45 * thickness);
    }

    let [nx, ny] = config.grid;
    let mut fields = Vec::with_capacity(4);
    for amp in amplitudes {
        let freq = sample_range(rng, config.noise_frequency);
        let seed = rng.gen::<u64>();
        fields.push(Heightfield::from_noise(nx, ny, config.extent_mm, amp, freq, seed));
    }
    let stack = LayerStack {
        extent_mm: config.extent_mm,
        epidermis_um,
        papillary_um,
        dermis_mm,
        hypodermis_mm: config.hypodermis_mm,
        hypo_top: fields.pop().unwrap(),
        derm_top: fields.pop().unwrap(),
        pap_top: fields.pop().unwrap(),
        epi_top: fields.pop().unwrap(),
    };
    stack.validate_ordering()?;
    Ok(stack)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_roughness_gives_flat_boundaries() {
        let config = LayerConfig {
            epi_top_noise_um: [0.0, 0.0],
            pap_top_noise_um: [0.0, 0.0],
            derm_top_noise_um: [0.0, 0.0],
            hypo_top_noise_um: [0.0, 0.0],
            epidermis_um: [85.0, 85.0],
            papillary_um: [200.0, 200.0],
            dermis_mm: [2.0, 2.0],
            ..Default::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let stack = build_layers(&config, &mut rng).unwrap();
        assert_eq!(stack.epi_top_z_mm(0.0, 0.0), 0.0);
        assert!((stack.pap_top_z_mm(1.0, -2.0) + 0.085).abs() < 1e-12);
        assert!((stack.derm_top_z_mm(0.0, 0.0) + 0.285).abs() < 1e-12);
        assert!((stack.hypo_top_z_mm(3.0, 3.0) + 2.285).abs() < 1e-12);
    }

    #[test]
    fn amplitude_cap_bounds_thickness() {
        // Nominal 85 um epidermis with a 10 um top amplitude and flat bottom
        // keeps thickness at or above 75 um everywhere.
        let config = LayerConfig {
            epidermis_um: [85.0, 85.0],
            epi_top_noise_um: [10.0, 10.0],
            pap_top_noise_um: [0.0, 0.0],
            ..Default::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let stack = build_layers(&config, &mut rng).unwrap();
        assert!(stack.min_epidermis_thickness_um() >= 75.0 - 1e-9);
    }

    #[test]
    fn amplitude_reaching_thickness_is_rejected() {
        let config = LayerConfig {
            epidermis_um: [85.0, 85.0],
            epi_top_noise_um: [100.0, 120.0],
            ..Default::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert!(build_layers(&config, &mut rng).is_err());
    }

    #[test]
    fn sampled_thicknesses_stay_in_ranges() {
        let config = LayerConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..1000 {
            let stack = build_layers(&config, &mut rng).unwrap();
            assert!((20.0..=150.0).contains(&stack.epidermis_um));
            assert!((1.0..=4.0).contains(&stack.dermis_mm));
        }
    }

    #[test]
    fn ordering_holds_for_random_configs() {
        let config = LayerConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..1000 {
            let stack = build_layers(&config, &mut rng).unwrap();
            stack.validate_ordering().unwrap();
        }
    }
}
