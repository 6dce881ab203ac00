//! Spectral optical materials for the skin layers.
//!
//! Absorption comes from linear chromophore mixing per layer; scattering
//! follows the reduced-scattering power law `a * (lambda/500)^-b` combined
//! with the similarity relation `mu_s = mu_s' / (1 - g)`.

pub mod chromophores;
pub mod spectrum;

pub use chromophores::{ChromophoreCurve, ChromophoreTable};
pub use spectrum::{
    lambda_at, Spectrum, LAMBDA_MAX, LAMBDA_MIN, LAMBDA_SPAN, LAMBDA_STEP, SPECTRUM_SAMPLES,
};

use crate::{Error, Result};
use serde::{Deserialize, Serialize};

/// Tissue types with distinct optical mixing rules.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LayerKind {
    Epidermis,
    Dermis,
    Hypodermis,
    Blood,
}

/// Volume fractions entering the chromophore mixing rules.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TissueFractions {
    /// Melanosome volume fraction in the epidermis (M).
    pub melanosome: f64,
    /// Whole-blood volume fraction in the dermis (B).
    pub blood: f64,
    /// Hemoglobin oxygen saturation (S).
    pub oxygen_saturation: f64,
    /// Water volume fraction (W).
    pub water: f64,
    /// Fat volume fraction in the hypodermis (F).
    pub fat: f64,
}

impl Default for TissueFractions {
    fn default() -> Self {
        Self {
            melanosome: 0.06,
            blood: 0.02,
            oxygen_saturation: 0.75,
            water: 0.65,
            fat: 0.7,
        }
    }
}

impl TissueFractions {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("melanosome", self.melanosome),
            ("blood", self.blood),
            ("oxygen_saturation", self.oxygen_saturation),
            ("water", self.water),
            ("fat", self.fat),
        ] {
            if !(0.0..=1.0).contains(&v) || !v.is_finite() {
                return Err(Error::InvalidParam(format!("fraction {name}={v} outside [0,1]")));
            }
        }
        Ok(())
    }
}

/// Reduced-scattering power law: `a * (lambda / 500)^-b` in 1/mm.
pub fn reduced_scattering(lambda_nm: f64, a_per_mm: f64, b: f64) -> f64 {
    debug_assert!(lambda_nm > 0.0 && a_per_mm >= 0.0);
    a_per_mm * (lambda_nm / 500.0).powf(-b)
}

/// Similarity relation turning reduced scattering into the scattering
/// coefficient: `mu_s = mu_s' / (1 - g)`. Rejects `g = 1` (degenerate) and
/// anything outside `[0, 1)`.
pub fn scattering_from_reduced(mu_s_reduced: f64, g: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&g) {
        return Err(Error::InvalidParam(format!(
            "anisotropy g={g} must be in [0,1) for the similarity relation"
        )));
    }
    Ok(mu_s_reduced / (1.0 - g))
}

/// Chromophore mixing per layer, evaluated at one wavelength (1/mm).
///
/// * epidermis:  `M * mel + baseline`
/// * dermis:     `B * (S * oxy + (1-S) * deoxy) + W * water + baseline`
/// * hypodermis: `F * fat + W * water + baseline`
/// * blood:      `S * oxy + (1-S) * deoxy`
pub fn layer_absorption(
    kind: LayerKind,
    lambda_nm: f64,
    fractions: &TissueFractions,
    table: &ChromophoreTable,
    baseline_per_mm: f64,
) -> Result<f64> {
    fractions.validate()?;
    if baseline_per_mm < 0.0 {
        return Err(Error::InvalidParam("baseline absorption must be >= 0".into()));
    }
    let s = fractions.oxygen_saturation;
    let blood_mix = |l: f64| {
        s * table.oxyhemoglobin.eval(l) + (1.0 - s) * table.deoxyhemoglobin.eval(l)
    };
    let v = match kind {
        LayerKind::Epidermis => fractions.melanosome * table.eumelanin.eval(lambda_nm) + baseline_per_mm,
        LayerKind::Dermis => {
            fractions.blood * blood_mix(lambda_nm)
                + fractions.water * table.water.eval(lambda_nm)
                + baseline_per_mm
        }
        LayerKind::Hypodermis => {
            fractions.fat * table.fat.eval(lambda_nm)
                + fractions.water * table.water.eval(lambda_nm)
                + baseline_per_mm
        }
        LayerKind::Blood => blood_mix(lambda_nm),
    };
    Ok(v)
}

/// Reduced-scattering power-law parameters for one layer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScatteringPower {
    /// Value at 500 nm, 1/mm.
    pub a: f64,
    /// Spectral slope exponent.
    pub b: f64,
}

/// Per-layer optics configuration. The scattering power-law parameters are
/// config defaults, not literature constants; override as needed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerOpticsConfig {
    pub epidermis_scatter: ScatteringPower,
    pub dermis_scatter: ScatteringPower,
    pub hypodermis_scatter: ScatteringPower,
    /// Henyey-Greenstein anisotropy shared by all layers.
    pub anisotropy: f64,
    /// Refractive index shared by all layers; internal boundaries are
    /// index-matched so only the air interface refracts.
    pub ior: f64,
    /// Microfacet roughness of the air interface.
    pub roughness: f64,
    /// Wavelength-flat residual absorption added per layer, 1/mm.
    pub baseline_absorption: f64,
}

impl Default for LayerOpticsConfig {
    fn default() -> Self {
        Self {
            epidermis_scatter: ScatteringPower { a: 4.0, b: 1.2 },
            dermis_scatter: ScatteringPower { a: 3.0, b: 1.3 },
            hypodermis_scatter: ScatteringPower { a: 2.0, b: 0.7 },
            anisotropy: 0.9,
            ior: 1.4,
            roughness: 0.1,
            baseline_absorption: 0.015,
        }
    }
}

impl LayerOpticsConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, sp) in [
            ("epidermis", self.epidermis_scatter),
            ("dermis", self.dermis_scatter),
            ("hypodermis", self.hypodermis_scatter),
        ] {
            if sp.a < 0.0 || !sp.a.is_finite() || !sp.b.is_finite() {
                return Err(Error::InvalidParam(format!(
                    "{name} scattering power law invalid: a={}, b={}",
                    sp.a, sp.b
                )));
            }
        }
        if !(0.0..1.0).contains(&self.anisotropy) {
            return Err(Error::InvalidParam(format!(
                "anisotropy {} outside [0,1)",
                self.anisotropy
            )));
        }
        if self.ior < 1.0 {
            return Err(Error::InvalidParam(format!("ior {} must be >= 1", self.ior)));
        }
        if self.roughness <= 0.0 {
            return Err(Error::InvalidParam(format!(
                "roughness {} must be > 0",
                self.roughness
            )));
        }
        if self.baseline_absorption < 0.0 {
            return Err(Error::InvalidParam("baseline absorption must be >= 0".into()));
        }
        Ok(())
    }

    fn scatter_for(&self, kind: LayerKind) -> ScatteringPower {
        match kind {
            LayerKind::Epidermis => self.epidermis_scatter,
            LayerKind::Dermis | LayerKind::Blood => self.dermis_scatter,
            LayerKind::Hypodermis => self.hypodermis_scatter,
        }
    }
}

/// Spectral material of one medium: absorption and scattering coefficient
/// spectra plus the phase/surface parameters the tracer needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpticalMaterial {
    pub absorption: Spectrum,
    pub scattering: Spectrum,
    /// Mean scattering cosine, in [-1, 1].
    pub anisotropy: f64,
    pub ior: f64,
    pub roughness: f64,
}

impl OpticalMaterial {
    pub fn validate(&self) -> Result<()> {
        self.absorption.validate_coefficient("absorption")?;
        self.scattering.validate_coefficient("scattering")?;
        if !(-1.0..=1.0).contains(&self.anisotropy) {
            return Err(Error::InvalidParam(format!(
                "anisotropy {} outside [-1,1]",
                self.anisotropy
            )));
        }
        if self.ior < 1.0 {
            return Err(Error::InvalidParam(format!("ior {} must be >= 1", self.ior)));
        }
        if self.roughness <= 0.0 {
            return Err(Error::InvalidParam("roughness must be > 0".into()));
        }
        Ok(())
    }
}

/// Assemble the full material for one layer kind from the mixing rules and
/// the scattering power law. Pure: identical inputs give identical output.
pub fn material_for_layer(
    kind: LayerKind,
    fractions: &TissueFractions,
    config: &LayerOpticsConfig,
    table: &ChromophoreTable,
) -> Result<OpticalMaterial> {
    config.validate()?;
    fractions.validate()?;
    let sp = config.scatter_for(kind);
    let mut absorption = [0.0; SPECTRUM_SAMPLES];
    let mut scattering = [0.0; SPECTRUM_SAMPLES];
    for (i, (a, s)) in absorption.iter_mut().zip(scattering.iter_mut()).enumerate() {
        let l = lambda_at(i);
        *a = layer_absorption(kind, l, fractions, table, config.baseline_absorption)?;
        let reduced = reduced_scattering(l, sp.a, sp.b);
        *s = scattering_from_reduced(reduced, config.anisotropy)?;
    }
    let material = OpticalMaterial {
        absorption: Spectrum::from_values(absorption),
        scattering: Spectrum::from_values(scattering),
        anisotropy: config.anisotropy,
        ior: config.ior,
        roughness: config.roughness,
    };
    material.validate()?;
    Ok(material)
}

/// Melanosome-fraction sweep presets for the skin-tone series.
pub const MELANOSOME_PRESETS: [f64; 5] = [0.01, 0.06, 0.12, 0.22, 0.33];

/// Blood-fraction sweep presets for the dermal-blood series.
pub const BLOOD_PRESETS: [f64; 3] = [0.005, 0.02, 0.05];
