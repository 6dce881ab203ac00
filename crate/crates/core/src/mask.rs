//! Binary 2D masks shared by the lesion projector, the renderer's mask pass,
//! and the analysis metrics.

use crate::{Error, Result};
use std::path::Path;

/// Dense row-major binary mask. `true` = foreground (lesion).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    pub width: usize,
    pub height: usize,
    data: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            data: vec![false; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut m = Self::new(width, height);
        for y in 0..height {
            for x in 0..width {
                m.data[y * width + x] = f(x, y);
            }
        }
        m
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.data[y * self.width + x]
    }

    /// Out-of-bounds coordinates read as background.
    #[inline]
    pub fn get_i(&self, x: isize, y: isize) -> bool {
        if x < 0 || y < 0 || x as usize >= self.width || y as usize >= self.height {
            false
        } else {
            self.get(x as usize, y as usize)
        }
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: bool) {
        self.data[y * self.width + x] = v;
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&v| v).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.data.iter().any(|&v| v)
    }

    pub fn pixels(&self) -> &[bool] {
        &self.data
    }

    /// Centroid of foreground pixels (pixel-center coordinates).
    pub fn centroid(&self) -> Option<(f64, f64)> {
        let mut sx = 0.0;
        let mut sy = 0.0;
        let mut n = 0usize;
        for y in 0..self.height {
            for x in 0..self.width {
                if self.get(x, y) {
                    sx += x as f64;
                    sy += y as f64;
                    n += 1;
                }
            }
        }
        if n == 0 {
            None
        } else {
            Some((sx / n as f64, sy / n as f64))
        }
    }

    /// Crop a rectangle `[x0, x0+w) x [y0, y0+h)`.
    pub fn crop(&self, x0: usize, y0: usize, w: usize, h: usize) -> Result<BinaryMask> {
        if x0 + w > self.width || y0 + h > self.height {
            return Err(Error::ShapeMismatch(format!(
                "crop {}x{}+{}+{} exceeds mask {}x{}",
                w, h, x0, y0, self.width, self.height
            )));
        }
        Ok(BinaryMask::from_fn(w, h, |x, y| self.get(x0 + x, y0 + y)))
    }

    /// Write as an 8-bit grayscale PNG (foreground = 255).
    pub fn save_png(&self, path: &Path) -> Result<()> {
        let mut img = image::GrayImage::new(self.width as u32, self.height as u32);
        for y in 0..self.height {
            for x in 0..self.width {
                img.put_pixel(
                    x as u32,
                    y as u32,
                    image::Luma([if self.get(x, y) { 255 } else { 0 }]),
                );
            }
        }
        img.save(path).map_err(|e| Error::Image {
            path: path.to_path_buf(),
            source: e,
        })
    }

    /// Load from any grayscale/color image; nonzero luma = foreground.
    pub fn load_png(path: &Path) -> Result<BinaryMask> {
        let img = image::open(path)
            .map_err(|e| Error::Image {
                path: path.to_path_buf(),
                source: e,
            })?
            .into_luma8();
        let (w, h) = (img.width() as usize, img.height() as usize);
        Ok(BinaryMask::from_fn(w, h, |x, y| {
            img.get_pixel(x as u32, y as u32)[0] != 0
        }))
    }
}
