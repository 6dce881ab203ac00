//! Environment lighting.
//!
//! Directional radiance comes from an equirectangular float image (PFM or
//! Radiance HDR) or one of two builtin sources, `uniform(L)` and
//! `sky-gradient`. Lookup maps azimuth to the horizontal image axis and
//! polar angle (from +z, world up) to the vertical axis, with point
//! sampling so a texel's radiance is returned exactly.

use super::color::uplift_rgb;
use crate::pfm::{self, PfmImage};
use crate::{Error, Result};
use std::path::Path;

#[derive(Debug, Clone, PartialEq)]
pub enum EnvMap {
    /// Isotropic radiance.
    Uniform([f64; 3]),
    /// Procedural sky: zenith and horizon colors blended by elevation, a
    /// darker constant below the horizon.
    SkyGradient { scale: f64 },
    /// Equirectangular radiance image.
    Equirect {
        width: usize,
        height: usize,
        texels: Vec<[f32; 3]>,
        scale: f64,
    },
}

const SKY_ZENITH: [f64; 3] = [0.45, 0.65, 1.05];
const SKY_HORIZON: [f64; 3] = [1.0, 0.88, 0.72];
const SKY_GROUND: [f64; 3] = [0.22, 0.18, 0.15];

impl EnvMap {
    pub fn uniform(level: f64) -> Self {
        EnvMap::Uniform([level, level, level])
    }

    /// RGB radiance arriving from direction `dir` (unit, world space).
    pub fn radiance_rgb(&self, dir: [f64; 3]) -> [f64; 3] {
        match self {
            EnvMap::Uniform(rgb) => *rgb,
            EnvMap::SkyGradient { scale } => {
                let z = dir[2];
                if z < 0.0 {
                    [
                        SKY_GROUND[0] * scale,
                        SKY_GROUND[1] * scale,
                        SKY_GROUND[2] * scale,
                    ]
                } else {
                    let t = z.clamp(0.0, 1.0);
                    [
                        (SKY_HORIZON[0] * (1.0 - t) + SKY_ZENITH[0] * t) * scale,
                        (SKY_HORIZON[1] * (1.0 - t) + SKY_ZENITH[1] * t) * scale,
                        (SKY_HORIZON[2] * (1.0 - t) + SKY_ZENITH[2] * t) * scale,
                    ]
                }
            }
            EnvMap::Equirect {
                width,
                height,
                texels,
                scale,
            } => {
                // Azimuth maps to u in [0, 1) (the +pi seam wraps to 0);
                // polar angle from +z maps to v in [0, 1].
                let azimuth = dir[1].atan2(dir[0]);
                let polar = dir[2].clamp(-1.0, 1.0).acos();
                let mut u = (azimuth + std::f64::consts::PI) / std::f64::consts::TAU;
                if u >= 1.0 {
                    u -= 1.0;
                }
                let v = polar / std::f64::consts::PI;
                let x = ((u * *width as f64) as usize).min(width - 1);
                let y = ((v * *height as f64) as usize).min(height - 1);
                let t = texels[y * width + x];
                [t[0] as f64 * scale, t[1] as f64 * scale, t[2] as f64 * scale]
            }
        }
    }

    /// Spectral radiance at one wavelength via the smooth-band uplift.
    #[inline]
    pub fn radiance(&self, dir: [f64; 3], lambda_nm: f64) -> f64 {
        uplift_rgb(self.radiance_rgb(dir), lambda_nm)
    }

    pub fn to_pfm(&self, width: usize, height: usize) -> PfmImage {
        let mut img = PfmImage::new_color(width, height);
        for y in 0..height {
            for x in 0..width {
                let u = (x as f64 + 0.5) / width as f64;
                let v = (y as f64 + 0.5) / height as f64;
                let azimuth = u * std::f64::consts::TAU - std::f64::consts::PI;
                let polar = v * std::f64::consts::PI;
                let dir = [
                    polar.sin() * azimuth.cos(),
                    polar.sin() * azimuth.sin(),
                    polar.cos(),
                ];
                let rgb = self.radiance_rgb(dir);
                let px = img.pixel_mut(x, y);
                px[0] = rgb[0] as f32;
                px[1] = rgb[1] as f32;
                px[2] = rgb[2] as f32;
            }
        }
        img
    }
}

fn from_pfm(img: PfmImage) -> Result<EnvMap> {
    let texels: Vec<[f32; 3]> = match img.channels {
        3 => img
            .data
            .chunks_exact(3)
            .map(|c| [c[0], c[1], c[2]])
            .collect(),
        1 => img.data.iter().map(|&v| [v, v, v]).collect(),
        c => {
            return Err(Error::InvalidParam(format!(
                "environment pfm must have 1 or 3 channels, got {c}"
            )))
        }
    };
    if texels.iter().any(|t| t.iter().any(|v| *v < 0.0 || !v.is_finite())) {
        return Err(Error::InvalidParam(
            "environment radiance must be finite and nonnegative".into(),
        ));
    }
    Ok(EnvMap::Equirect {
        width: img.width,
        height: img.height,
        texels,
        scale: 1.0,
    })
}

/// Load an environment: a builtin name (`uniform(L)`, `sky-gradient`) or a
/// path to a `.pfm` / `.hdr` file.
pub fn load_envmap(spec: &str) -> Result<EnvMap> {
    let trimmed = spec.trim();
    if trimmed == "sky-gradient" {
        return Ok(EnvMap::SkyGradient { scale: 1.0 });
    }
    if let Some(rest) = trimmed.strip_prefix("uniform(") {
        let inner = rest.strip_suffix(')').ok_or_else(|| {
            Error::InvalidParam(format!("malformed builtin env name: {spec:?}"))
        })?;
        let level: f64 = inner.trim().parse().map_err(|_| {
            Error::InvalidParam(format!("bad uniform level in env name: {spec:?}"))
        })?;
        if level < 0.0 {
            return Err(Error::InvalidParam("uniform env level must be >= 0".into()));
        }
        return Ok(EnvMap::uniform(level));
    }
    let path = Path::new(trimmed);
    match path.extension().and_then(|e| e.to_str()) {
        Some("pfm") => from_pfm(pfm::read(path)?),
        Some("hdr") => {
            let img = image::open(path)
                .map_err(|e| Error::Image {
                    path: path.to_path_buf(),
                    source: e,
                })?
                .into_rgb32f();
            let (w, h) = (img.width() as usize, img.height() as usize);
            let texels = img.pixels().map(|p| [p.0[0], p.0[1], p.0[2]]).collect::<Vec<_>>();
            let texels = if texels.len() == w * h {
                texels
            } else {
                return Err(Error::InvalidParam("hdr decode size mismatch".into()));
            };
            Ok(EnvMap::Equirect {
                width: w,
                height: h,
                texels,
                scale: 1.0,
            })
        }
        _ => Err(Error::InvalidParam(format!(
            "unknown environment {spec:?}; expected uniform(L), sky-gradient, *.pfm or *.hdr"
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_returns_level_everywhere() {
        let env = load_envmap("uniform(1.0)").unwrap();
        for dir in [[0.0, 0.0, 1.0], [1.0, 0.0, 0.0], [0.0, -1.0, 0.0]] {
            assert_eq!(env.radiance_rgb(dir), [1.0, 1.0, 1.0]);
        }
    }

    #[test]
    fn two_texel_equirect_splits_azimuths() {
        let env = EnvMap::Equirect {
            width: 2,
            height: 1,
            texels: vec![[1.0, 0.0, 0.0], [0.0, 0.0, 1.0]],
            scale: 1.0,
        };
        // Azimuth -pi maps to the left (red) texel, azimuth 0 to the right.
        let left = env.radiance_rgb([-1.0, 0.0, 0.0]);
        let right = env.radiance_rgb([1.0, 0.0, 0.0]);
        assert_eq!(left, [1.0, 0.0, 0.0]);
        assert_eq!(right, [0.0, 0.0, 1.0]);
    }

    #[test]
    fn pfm_roundtrip_preserves_lookup() {
        let env = EnvMap::SkyGradient { scale: 1.0 };
        let img = env.to_pfm(16, 8);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("env.pfm");
        pfm::write(&path, &img).unwrap();
        let back = load_envmap(path.to_str().unwrap()).unwrap();
        let reread = match &back {
            EnvMap::Equirect { texels, .. } => texels.clone(),
            _ => panic!("expected equirect"),
        };
        let orig: Vec<[f32; 3]> = img.data.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect();
        assert_eq!(orig, reread);
    }

    #[test]
    fn malformed_names_and_files_error() {
        assert!(load_envmap("uniform(").is_err());
        assert!(load_envmap("uniform(x)").is_err());
        assert!(load_envmap("nope").is_err());
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.pfm");
        std::fs::write(&path, b"PF\n2 2\n-1.0\nshort").unwrap();
        match load_envmap(path.to_str().unwrap()) {
            Err(Error::Parse { offset, .. }) => assert!(offset > 0),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn sky_gradient_brighter_up_than_down() {
        let env = EnvMap::SkyGradient { scale: 1.0 };
        let up = env.radiance_rgb([0.0, 0.0, 1.0]);
        let down = env.radiance_rgb([0.0, 0.0, -1.0]);
        assert!(up[2] > down[2]);
    }
}
