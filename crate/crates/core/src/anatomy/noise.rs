//! Band-limited value noise and the heightfield container used for layer
//! boundaries.

use crate::pfm::PfmImage;
use serde::{Deserialize, Serialize};

fn hash2(ix: i64, iy: i64, seed: u64) -> u64 {
    let mut h = seed ^ 0x51_7c_c1_b7_27_22_0a_95;
    h = h.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ (ix as u64).wrapping_mul(0xc2b2_ae3d_27d4_eb4f);
    h = h.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ (iy as u64).wrapping_mul(0x1656_67b1_9e37_79f9);
    h ^= h >> 29;
    h = h.wrapping_mul(0xbf58_476d_1ce4_e5b9);
    h ^= h >> 32;
    h
}

/// Lattice value in [-1, 1].
fn lattice(ix: i64, iy: i64, seed: u64) -> f64 {
    (hash2(ix, iy, seed) >> 11) as f64 / ((1u64 << 53) as f64) * 2.0 - 1.0
}

fn smooth(t: f64) -> f64 {
    // Quintic fade; C2-continuous across cells.
    t * t * t * (t * (t * 6.0 - 15.0) + 10.0)
}

/// Single-octave value noise at lattice coordinates (u, v), output [-1, 1].
fn value_noise(u: f64, v: f64, seed: u64) -> f64 {
    let iu = u.floor();
    let iv = v.floor();
    let fu = smooth(u - iu);
    let fv = smooth(v - iv);
    let (iu, iv) = (iu as i64, iv as i64);
    let a = lattice(iu, iv, seed);
    let b = lattice(iu + 1, iv, seed);
    let c = lattice(iu, iv + 1, seed);
    let d = lattice(iu + 1, iv + 1, seed);
    let top = a * (1.0 - fu) + b * fu;
    let bot = c * (1.0 - fu) + d * fu;
    top * (1.0 - fv) + bot * fv
}

/// Two-octave fractal value noise, normalized to [-1, 1].
pub fn fractal_noise(u: f64, v: f64, seed: u64) -> f64 {
    let n0 = value_noise(u, v, seed);
    let n1 = value_noise(u * 2.0 + 13.7, v * 2.0 + 7.3, seed.wrapping_add(1));
    (n0 + 0.5 * n1) / 1.5
}

/// Regular grid of heights over a centered rectangle.
///
/// The grid covers `[-extent/2, extent/2]` in x and y with samples at cell
/// centers; sampling is bilinear with clamp-to-edge extension, so queries
/// outside the extent return the boundary value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Heightfield {
    pub nx: usize,
    pub ny: usize,
    pub extent_mm: [f64; 2],
    /// Row-major `[y][x]` heights; units are the caller's (um for boundary
    /// offsets).
    pub data: Vec<f64>,
}

impl Heightfield {
    pub fn flat(nx: usize, ny: usize, extent_mm: [f64; 2], value: f64) -> Self {
        Self {
            nx,
            ny,
            extent_mm,
            data: vec![value; nx * ny],
        }
    }

    /// Fill from band-limited value noise: `amplitude * noise(freq)` where
    /// `frequency` counts noise cells across the extent.
    pub fn from_noise(
        nx: usize,
        ny: usize,
        extent_mm: [f64; 2],
        amplitude: f64,
        frequency: f64,
        seed: u64,
    ) -> Self {
        let mut hf = Self::flat(nx, ny, extent_mm, 0.0);
        for y in 0..ny {
            for x in 0..nx {
                let u = (x as f64 + 0.5) / nx as f64 * frequency;
                let v = (y as f64 + 0.5) / ny as f64 * frequency;
                hf.data[y * nx + x] = amplitude * fractal_noise(u, v, seed);
            }
        }
        hf
    }

    #[inline]
    fn at(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.nx + x]
    }

    /// Continuous grid coordinates of a world point, clamped to the grid.
    #[inline]
    fn grid_coords(&self, x_mm: f64, y_mm: f64) -> (f64, f64) {
        let gx = (x_mm / self.extent_mm[0] + 0.5) * self.nx as f64 - 0.5;
        let gy = (y_mm / self.extent_mm[1] + 0.5) * self.ny as f64 - 0.5;
        (
            gx.clamp(0.0, (self.nx - 1) as f64),
            gy.clamp(0.0, (self.ny - 1) as f64),
        )
    }

    /// Bilinear sample at world coordinates (mm), clamp-to-edge.
    pub fn sample(&self, x_mm: f64, y_mm: f64) -> f64 {
        let (gx, gy) = self.grid_coords(x_mm, y_mm);
        let x0 = gx.floor() as usize;
        let y0 = gy.floor() as usize;
        let x1 = (x0 + 1).min(self.nx - 1);
        let y1 = (y0 + 1).min(self.ny - 1);
        let fx = gx - x0 as f64;
        let fy = gy - y0 as f64;
        let top = self.at(x0, y0) * (1.0 - fx) + self.at(x1, y0) * fx;
        let bot = self.at(x0, y1) * (1.0 - fx) + self.at(x1, y1) * fx;
        top * (1.0 - fy) + bot * fy
    }

    /// Gradient (d/dx, d/dy) of the bilinear surface in height-units per mm.
    pub fn gradient(&self, x_mm: f64, y_mm: f64) -> (f64, f64) {
        let (gx, gy) = self.grid_coords(x_mm, y_mm);
        let x0 = gx.floor() as usize;
        let y0 = gy.floor() as usize;
        let x1 = (x0 + 1).min(self.nx - 1);
        let y1 = (y0 + 1).min(self.ny - 1);
        let fx = gx - x0 as f64;
        let fy = gy - y0 as f64;
        let sx = self.nx as f64 / self.extent_mm[0];
        let sy = self.ny as f64 / self.extent_mm[1];
        let ddx = ((self.at(x1, y0) - self.at(x0, y0)) * (1.0 - fy)
            + (self.at(x1, y1) - self.at(x0, y1)) * fy)
            * sx;
        let ddy = ((self.at(x0, y1) - self.at(x0, y0)) * (1.0 - fx)
            + (self.at(x1, y1) - self.at(x1, y0)) * fx)
            * sy;
        (ddx, ddy)
    }

    pub fn min(&self) -> f64 {
        self.data.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.data.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn to_pfm(&self) -> PfmImage {
        let mut img = PfmImage::new_gray(self.nx, self.ny);
        for (dst, src) in img.data.iter_mut().zip(self.data.iter()) {
            *dst = *src as f32;
        }
        img
    }
}
