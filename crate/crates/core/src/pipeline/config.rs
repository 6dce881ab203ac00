//! Generation configuration: strict JSON parsing, validation, and the
//! resolved-config echo.

use crate::anatomy::{HairConfig, LayerConfig};
use crate::render::SceneConfig;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::path::Path;

use super::sweep::SweepAxes;

/// Lesion regularity presets (irregularity probability C_p). Other values
/// require `allow_nonpreset_regularity`.
pub const REGULARITY_PRESETS: [f64; 2] = [0.0001, 0.001];

fn d_resolution() -> usize {
    256
}
fn d_spp() -> u32 {
    32
}
fn d_max_depth() -> u32 {
    512
}
fn d_rr_start() -> u32 {
    16
}
fn d_melanosome() -> Vec<f64> {
    crate::optics::MELANOSOME_PRESETS.to_vec()
}
fn d_blood() -> Vec<f64> {
    crate::optics::BLOOD_PRESETS.to_vec()
}
fn d_regularity() -> Vec<f64> {
    REGULARITY_PRESETS.to_vec()
}
fn d_time_points() -> [u32; 2] {
    [12, 20]
}
fn d_lesion_grid() -> usize {
    96
}
fn d_hair_probability() -> f64 {
    0.5
}
fn d_env_maps() -> Vec<String> {
    vec!["sky-gradient".into(), "uniform(1.0)".into()]
}
fn d_true() -> bool {
    true
}
fn d_crop_max() -> f64 {
    0.6
}
fn d_split() -> [f64; 3] {
    [0.8, 0.1, 0.1]
}
fn d_blood_nodes() -> usize {
    160
}
fn d_blood_field_res() -> usize {
    40
}

/// Everything the dataset factory needs. `seed` and `count` are required;
/// every other key has a documented default and unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerationConfig {
    /// Master seed; per-sample seeds derive from (seed, index).
    pub seed: u64,
    /// Number of samples to generate (ignored when `sweep` is set).
    pub count: u32,
    #[serde(default = "d_resolution")]
    pub resolution: usize,
    #[serde(default = "d_spp")]
    pub spp: u32,
    #[serde(default = "d_max_depth")]
    pub max_depth: u32,
    #[serde(default = "d_rr_start")]
    pub rr_start: u32,
    /// Melanosome volume fraction choices, sampled per image.
    #[serde(default = "d_melanosome")]
    pub melanosome_presets: Vec<f64>,
    /// Dermal blood fraction choices.
    #[serde(default = "d_blood")]
    pub blood_presets: Vec<f64>,
    /// Lesion irregularity probability choices.
    #[serde(default = "d_regularity")]
    pub lesion_regularity: Vec<f64>,
    #[serde(default)]
    pub allow_nonpreset_regularity: bool,
    /// Inclusive range of lesion growth time points.
    #[serde(default = "d_time_points")]
    pub lesion_time_points: [u32; 2],
    /// Lesion voxel grid edge.
    #[serde(default = "d_lesion_grid")]
    pub lesion_grid: usize,
    /// Probability that a sample grows hair.
    #[serde(default = "d_hair_probability")]
    pub hair_probability: f64,
    #[serde(default)]
    pub hair: HairConfig,
    /// Environment sources (builtin names or .pfm/.hdr paths).
    #[serde(default = "d_env_maps")]
    pub env_maps: Vec<String>,
    #[serde(default = "d_true")]
    pub crop_enabled: bool,
    #[serde(default = "d_crop_max")]
    pub crop_max_fraction: f64,
    #[serde(default)]
    pub layers: LayerConfig,
    #[serde(default)]
    pub scene: SceneConfig,
    /// Blood network size knobs.
    #[serde(default = "d_blood_nodes")]
    pub blood_nodes: usize,
    #[serde(default = "d_blood_field_res")]
    pub blood_field_resolution: usize,
    /// Train/val/test fractions stamped into the manifest.
    #[serde(default = "d_split")]
    pub split_fractions: [f64; 3],
    /// Controlled-variation sweep; overrides random sampling when present.
    #[serde(default)]
    pub sweep: Option<SweepAxes>,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        // Round-trip through the derive defaults.
        serde_json::from_str(r#"{"seed": 0, "count": 1}"#).expect("defaults are valid")
    }
}

impl GenerationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.count < 1 {
            return Err(Error::Config("count: must be >= 1".into()));
        }
        if self.resolution < 16 {
            return Err(Error::Config("resolution: must be >= 16".into()));
        }
        if self.spp < 1 {
            return Err(Error::Config("spp: must be >= 1".into()));
        }
        for (key, list) in [
            ("melanosome_presets", &self.melanosome_presets),
            ("blood_presets", &self.blood_presets),
        ] {
            if list.is_empty() {
                return Err(Error::Config(format!("{key}: must not be empty")));
            }
            for &v in list {
                if !(0.0..=1.0).contains(&v) {
                    return Err(Error::Config(format!("{key}: value {v} outside [0,1]")));
                }
            }
        }
        if self.lesion_regularity.is_empty() {
            return Err(Error::Config("lesion_regularity: must not be empty".into()));
        }
        for &cp in &self.lesion_regularity {
            if !(0.0..=1.0).contains(&cp) {
                return Err(Error::Config(format!(
                    "lesion_regularity: value {cp} outside [0,1]"
                )));
            }
            if !self.allow_nonpreset_regularity && !REGULARITY_PRESETS.contains(&cp) {
                return Err(Error::Config(format!(
                    "lesion_regularity: {cp} is not a preset ({REGULARITY_PRESETS:?}); \
                     set allow_nonpreset_regularity to override"
                )));
            }
        }
        if self.lesion_time_points[0] < 1 || self.lesion_time_points[1] < self.lesion_time_points[0]
        {
            return Err(Error::Config(format!(
                "lesion_time_points: bad range {:?}",
                self.lesion_time_points
            )));
        }
        if self.lesion_grid < 16 {
            return Err(Error::Config("lesion_grid: must be >= 16".into()));
        }
        if !(0.0..=1.0).contains(&self.hair_probability) {
            return Err(Error::Config("hair_probability: outside [0,1]".into()));
        }
        if self.env_maps.is_empty() {
            return Err(Error::Config("env_maps: must not be empty".into()));
        }
        if !(0.0..1.0).contains(&self.crop_max_fraction) {
            return Err(Error::Config("crop_max_fraction: outside [0,1)".into()));
        }
        let split_sum: f64 = self.split_fractions.iter().sum();
        if (split_sum - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "split_fractions: must sum to 1, got {split_sum}"
            )));
        }
        self.layers.validate()?;
        self.scene.optics.validate()?;
        self.hair.validate()?;
        if let Some(sweep) = &self.sweep {
            sweep.validate()?;
        }
        Ok(())
    }

    /// Effective sample count: the sweep expansion when present.
    pub fn effective_count(&self) -> Result<u32> {
        match &self.sweep {
            Some(axes) => Ok(axes.expansion_len()? as u32),
            None => Ok(self.count),
        }
    }
}

/// Strict parse: unknown keys and out-of-range values are errors. Missing
/// required keys report the full required set.
pub fn parse_config(path: &Path) -> Result<GenerationConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config_str(&text, path)
}

pub fn parse_config_str(text: &str, path: &Path) -> Result<GenerationConfig> {
    let cfg: GenerationConfig = serde_json::from_str(text).map_err(|e| {
        Error::Config(format!(
            "{} in {}; required keys: seed (u64), count (u32 >= 1)",
            e,
            path.display()
        ))
    })?;
    cfg.validate()?;
    Ok(cfg)
}

/// Fully resolved config as pretty JSON; `parse(echo(c)) == c`.
pub fn echo_config(cfg: &GenerationConfig) -> Result<String> {
    serde_json::to_string_pretty(cfg).map_err(|e| Error::Json {
        path: "<echo>".into(),
        source: e,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_lists_required_keys() {
        let err = parse_config_str("", Path::new("empty.json")).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("seed"), "{msg}");
        assert!(msg.contains("count"), "{msg}");
        let err = parse_config_str("{}", Path::new("empty.json")).unwrap_err();
        assert!(err.to_string().contains("seed"));
    }

    #[test]
    fn unknown_keys_rejected() {
        let err =
            parse_config_str(r#"{"seed": 1, "count": 1, "bogus": 3}"#, Path::new("x")).unwrap_err();
        assert!(err.to_string().contains("bogus"));
    }

    #[test]
    fn echo_round_trips() {
        let cfg = parse_config_str(
            r#"{"seed": 42, "count": 3, "spp": 8, "resolution": 64}"#,
            Path::new("x"),
        )
        .unwrap();
        let echoed = echo_config(&cfg).unwrap();
        let back = parse_config_str(&echoed, Path::new("echo")).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn nonpreset_regularity_needs_override() {
        let err = parse_config_str(
            r#"{"seed": 1, "count": 1, "lesion_regularity": [0.5]}"#,
            Path::new("x"),
        )
        .unwrap_err();
        assert!(err.to_string().contains("preset"));
        let ok = parse_config_str(
            r#"{"seed": 1, "count": 1, "lesion_regularity": [0.5],
                "allow_nonpreset_regularity": true}"#,
            Path::new("x"),
        );
        assert!(ok.is_ok());
    }

    #[test]
    fn out_of_range_values_name_the_key() {
        let err = parse_config_str(
            r#"{"seed": 1, "count": 1, "melanosome_presets": [1.5]}"#,
            Path::new("x"),
        )
        .unwrap_err();
        assert!(err.to_string().contains("melanosome_presets"));
    }
}
