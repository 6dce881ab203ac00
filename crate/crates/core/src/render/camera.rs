//! Perspective camera.
//!
//! The sensor sits above the skin center looking straight down (-z), the
//! default pose mirroring a dermoscopic capture: 15 mm standoff, 75 degree
//! field of view.

use super::geom::{normalize, Vec3};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Camera {
    /// Camera position, mm. Default: 15 mm above the surface center.
    pub position: [f64; 3],
    /// Full field of view along image width, degrees.
    pub fov_deg: f64,
    pub width: usize,
    pub height: usize,
}

impl Default for Camera {
    fn default() -> Self {
        Self {
            position: [0.0, 0.0, 15.0],
            fov_deg: 75.0,
            width: 1024,
            height: 1024,
        }
    }
}

impl Camera {
    pub fn with_resolution(mut self, width: usize, height: usize) -> Self {
        self.width = width;
        self.height = height;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fov_deg > 0.0 && self.fov_deg < 180.0) {
            return Err(Error::InvalidParam(format!(
                "fov {} must be in (0, 180) degrees",
                self.fov_deg
            )));
        }
        if self.width < 16 || self.height < 16 {
            return Err(Error::InvalidParam(format!(
                "resolution {}x{} below 16x16",
                self.width, self.height
            )));
        }
        Ok(())
    }

    /// Primary ray through pixel (px, py) at sub-pixel offset (jx, jy) in
    /// [0, 1). Looks down -z; image x maps to world +x, image y (downward
    /// on screen) to world -y.
    pub fn primary_ray(&self, px: usize, py: usize, jx: f64, jy: f64) -> (Vec3, Vec3) {
        let tan_half = (self.fov_deg.to_radians() / 2.0).tan();
        let aspect = self.height as f64 / self.width as f64;
        let ndc_x = ((px as f64 + jx) / self.width as f64) * 2.0 - 1.0;
        let ndc_y = 1.0 - ((py as f64 + jy) / self.height as f64) * 2.0;
        let dir = normalize([ndc_x * tan_half, ndc_y * tan_half * aspect, -1.0]);
        (self.position, dir)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn center_ray_looks_straight_down() {
        let cam = Camera::default().with_resolution(64, 64);
        let (o, d) = cam.primary_ray(32, 32, 0.0, 0.0);
        assert_eq!(o, [0.0, 0.0, 15.0]);
        assert!(d[0].abs() < 1e-12 && d[1].abs() < 1e-12);
        assert!(d[2] < 0.0);
    }

    #[test]
    fn corner_rays_span_the_fov() {
        let cam = Camera::default().with_resolution(64, 64);
        let (_, d) = cam.primary_ray(0, 0, 0.0, 0.0);
        let half = (75.0f64.to_radians() / 2.0).tan();
        // Left edge of the image plane sits at tan(fov/2) horizontally.
        assert!((d[0] / -d[2] + half).abs() < 1e-9);
    }

    #[test]
    fn validation_bounds() {
        assert!(Camera::default().with_resolution(8, 8).validate().is_err());
        let cam = Camera {
            fov_deg: 0.0,
            ..Default::default()
        };
        assert!(cam.validate().is_err());
        assert!(Camera::default().validate().is_ok());
    }
}
