//! Image/mask analysis: ITA skin tone and categories, lesion shape
//! statistics, Dice overlap, and the center-crop augmentation.

pub mod lab;
pub mod shape;

pub use lab::{lab_to_srgb8, srgb8_to_lab, Lab};
pub use shape::{circularity, disk_mask, mask_stats, perimeter, relative_area, MaskStats};

use crate::mask::BinaryMask;
use crate::{Error, Result};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::path::Path;

/// 8-bit RGB image, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbImage8 {
    pub width: usize,
    pub height: usize,
    pub data: Vec<[u8; 3]>,
}

impl RgbImage8 {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            data: vec![[0; 3]; width * height],
        }
    }

    pub fn filled(width: usize, height: usize, rgb: [u8; 3]) -> Self {
        Self {
            width,
            height,
            data: vec![rgb; width * height],
        }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> [u8; 3] {
        self.data[y * self.width + x]
    }

    pub fn load(path: &Path) -> Result<Self> {
        let img = image::open(path)
            .map_err(|e| Error::Image {
                path: path.to_path_buf(),
                source: e,
            })?
            .into_rgb8();
        let (w, h) = (img.width() as usize, img.height() as usize);
        Ok(Self {
            width: w,
            height: h,
            data: img.pixels().map(|p| p.0).collect(),
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut img = image::RgbImage::new(self.width as u32, self.height as u32);
        for y in 0..self.height {
            for x in 0..self.width {
                img.put_pixel(x as u32, y as u32, image::Rgb(self.get(x, y)));
            }
        }
        img.save(path).map_err(|e| Error::Image {
            path: path.to_path_buf(),
            source: e,
        })
    }

    pub fn crop(&self, x0: usize, y0: usize, w: usize, h: usize) -> Result<Self> {
        if x0 + w > self.width || y0 + h > self.height {
            return Err(Error::ShapeMismatch(format!(
                "crop {}x{}+{}+{} exceeds image {}x{}",
                w, h, x0, y0, self.width, self.height
            )));
        }
        let mut out = Self::new(w, h);
        for y in 0..h {
            for x in 0..w {
                out.data[y * w + x] = self.get(x0 + x, y0 + y);
            }
        }
        Ok(out)
    }
}

/// Individual typology angle from mean lightness and yellow-blue chroma:
/// `atan2(L* - 50, b*)` in degrees. Higher values mean lighter skin.
pub fn ita_from_mean_lab(mean_l: f64, mean_b: f64) -> f64 {
    (mean_l - 50.0).atan2(mean_b).to_degrees()
}

/// ITA of the non-lesion region of an image: mean L* and b* over pixels
/// where the mask is background, then the angle.
pub fn ita(image: &RgbImage8, lesion_mask: &BinaryMask) -> Result<f64> {
    if image.width != lesion_mask.width || image.height != lesion_mask.height {
        return Err(Error::ShapeMismatch(format!(
            "image {}x{} vs mask {}x{}",
            image.width, image.height, lesion_mask.width, lesion_mask.height
        )));
    }
    let mut sum_l = 0.0;
    let mut sum_b = 0.0;
    let mut n = 0usize;
    for y in 0..image.height {
        for x in 0..image.width {
            if !lesion_mask.get(x, y) {
                let lab = srgb8_to_lab(image.get(x, y));
                sum_l += lab.l;
                sum_b += lab.b;
                n += 1;
            }
        }
    }
    if n == 0 {
        return Err(Error::EmptyInput("non-lesion region is empty".into()));
    }
    Ok(ita_from_mean_lab(sum_l / n as f64, sum_b / n as f64))
}

/// Skin tone categories over ITA, darkest to lightest. The two darkest
/// conventional bands are folded together.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ItaCategory {
    DarkTan1,
    Tan2,
    Intermediate,
    Light,
    VeryLight,
}

impl ItaCategory {
    pub fn label(&self) -> &'static str {
        match self {
            ItaCategory::DarkTan1 => "dark+tan1",
            ItaCategory::Tan2 => "tan2",
            ItaCategory::Intermediate => "intermediate",
            ItaCategory::Light => "light",
            ItaCategory::VeryLight => "very-light",
        }
    }

    /// Ordinal for monotonicity checks (0 = darkest).
    pub fn rank(&self) -> u8 {
        match self {
            ItaCategory::DarkTan1 => 0,
            ItaCategory::Tan2 => 1,
            ItaCategory::Intermediate => 2,
            ItaCategory::Light => 3,
            ItaCategory::VeryLight => 4,
        }
    }
}

/// Threshold bands: > 55 very-light, 41..=55 light, 28..=41 intermediate,
/// 19..=28 tan2, <= 19 dark+tan1. Boundary values belong to the lower bin.
pub fn ita_category(ita_deg: f64) -> ItaCategory {
    if ita_deg > 55.0 {
        ItaCategory::VeryLight
    } else if ita_deg > 41.0 {
        ItaCategory::Light
    } else if ita_deg > 28.0 {
        ItaCategory::Intermediate
    } else if ita_deg > 19.0 {
        ItaCategory::Tan2
    } else {
        ItaCategory::DarkTan1
    }
}

/// Dice overlap `2|A n B| / (|A| + |B|)`; 1 when both masks are empty.
pub fn dice(a: &BinaryMask, b: &BinaryMask) -> Result<f64> {
    if a.width != b.width || a.height != b.height {
        return Err(Error::ShapeMismatch(format!(
            "dice: {}x{} vs {}x{}",
            a.width, a.height, b.width, b.height
        )));
    }
    let mut inter = 0usize;
    for (pa, pb) in a.pixels().iter().zip(b.pixels().iter()) {
        if *pa && *pb {
            inter += 1;
        }
    }
    let total = a.count() + b.count();
    if total == 0 {
        return Ok(1.0);
    }
    Ok(2.0 * inter as f64 / total as f64)
}

/// Random center crop applied identically to an image and its mask: the
/// crop fraction is uniform on [0, max_fraction] and the output side is
/// `round(side * (1 - f))`. Results below 16 px re-draw (bounded retries).
pub fn center_crop_random(
    image: &RgbImage8,
    mask: &BinaryMask,
    rng: &mut impl Rng,
    max_fraction: f64,
) -> Result<(RgbImage8, BinaryMask, f64)> {
    if image.width != image.height {
        return Err(Error::InvalidParam("center crop requires square input".into()));
    }
    if image.width != mask.width || image.height != mask.height {
        return Err(Error::ShapeMismatch("image/mask size mismatch in crop".into()));
    }
    if !(0.0..1.0).contains(&max_fraction) {
        return Err(Error::InvalidParam(format!(
            "crop max fraction {max_fraction} outside [0,1)"
        )));
    }
    let side = image.width;
    for _ in 0..64 {
        let f = if max_fraction == 0.0 {
            0.0
        } else {
            rng.gen_range(0.0..=max_fraction)
        };
        let out_side = ((side as f64) * (1.0 - f)).round() as usize;
        if out_side < 16 {
            continue;
        }
        let off = (side - out_side) / 2;
        let img = image.crop(off, off, out_side, out_side)?;
        let msk = mask.crop(off, off, out_side, out_side)?;
        return Ok((img, msk, f));
    }
    Err(Error::InvalidParam(format!(
        "crop of {side} px image cannot reach the 16 px minimum"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn ita_zero_when_l_is_50() {
        for b in [1.0, 5.0, 30.0] {
            assert!(ita_from_mean_lab(50.0, b).abs() < 1e-12);
        }
    }

    #[test]
    fn ita_reference_value() {
        // atan((71-50)/19) in degrees.
        let v = ita_from_mean_lab(71.0, 19.0);
        assert!((v - 47.8624).abs() < 0.01, "{v}");
    }

    #[test]
    fn ita_all_false_mask_equals_whole_image() {
        let img = RgbImage8::filled(16, 16, [200, 160, 140]);
        let empty = BinaryMask::new(16, 16);
        let a = ita(&img, &empty).unwrap();
        // A mask covering nothing is the same region as no mask at all.
        let b = {
            let lab = srgb8_to_lab([200, 160, 140]);
            ita_from_mean_lab(lab.l, lab.b)
        };
        assert!((a - b).abs() < 1e-9);
    }

    #[test]
    fn ita_requires_non_lesion_pixels() {
        let img = RgbImage8::filled(8, 8, [100, 100, 100]);
        let full = BinaryMask::from_fn(8, 8, |_, _| true);
        assert!(ita(&img, &full).is_err());
    }

    #[test]
    fn category_bands_and_boundaries() {
        assert_eq!(ita_category(60.0), ItaCategory::VeryLight);
        assert_eq!(ita_category(55.0), ItaCategory::Light);
        assert_eq!(ita_category(41.0), ItaCategory::Intermediate);
        assert_eq!(ita_category(28.0), ItaCategory::Tan2);
        assert_eq!(ita_category(19.0), ItaCategory::DarkTan1);
        assert_eq!(ita_category(5.0), ItaCategory::DarkTan1);
        assert_eq!(ita_category(-30.0), ItaCategory::DarkTan1);
    }

    #[test]
    fn category_is_monotone_step_function() {
        let mut prev = ita_category(-90.0).rank();
        let mut deg = -90.0;
        while deg <= 90.0 {
            let r = ita_category(deg).rank();
            assert!(r >= prev);
            prev = r;
            deg += 0.25;
        }
    }

    #[test]
    fn dice_identities() {
        let a = BinaryMask::from_fn(10, 10, |x, _| x < 5);
        assert_eq!(dice(&a, &a).unwrap(), 1.0);
        let b = BinaryMask::from_fn(10, 10, |x, _| x >= 5);
        assert_eq!(dice(&a, &b).unwrap(), 0.0);
        // |A| = |B| = 100 with overlap 50.
        let big_a = BinaryMask::from_fn(20, 20, |x, y| y < 10 && x < 10);
        let big_b = BinaryMask::from_fn(20, 20, |x, y| y < 10 && (5..15).contains(&x));
        assert_eq!(dice(&big_a, &big_b).unwrap(), 0.5);
        // Both empty.
        let e = BinaryMask::new(4, 4);
        assert_eq!(dice(&e, &e).unwrap(), 1.0);
        // Shape mismatch.
        assert!(dice(&a, &BinaryMask::new(4, 4)).is_err());
    }

    #[test]
    fn dice_is_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        use rand::Rng;
        for _ in 0..50 {
            let a = BinaryMask::from_fn(12, 12, |_, _| rng.gen_bool(0.3));
            let b = BinaryMask::from_fn(12, 12, |_, _| rng.gen_bool(0.3));
            assert_eq!(dice(&a, &b).unwrap(), dice(&b, &a).unwrap());
        }
    }

    #[test]
    fn dice_grows_with_overlap_at_fixed_sizes() {
        // Two 10x10 blocks sliding past each other: |A| and |B| stay fixed
        // while the overlap grows, so dice must increase monotonically.
        let a = BinaryMask::from_fn(40, 20, |x, y| y < 10 && x < 10);
        let mut prev = -1.0;
        for shift in (0..=10).rev() {
            let b = BinaryMask::from_fn(40, 20, |x, y| {
                y < 10 && (shift..shift + 10).contains(&x)
            });
            let d = dice(&a, &b).unwrap();
            assert!(d >= prev, "dice not monotone: {d} after {prev}");
            prev = d;
        }
        assert_eq!(prev, 1.0);
    }

    #[test]
    fn crop_identity_at_zero_fraction() {
        let img = RgbImage8::filled(32, 32, [10, 20, 30]);
        let mask = BinaryMask::from_fn(32, 32, |x, y| x == y);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (ci, cm, f) = center_crop_random(&img, &mask, &mut rng, 0.0).unwrap();
        assert_eq!(f, 0.0);
        assert_eq!(ci, img);
        assert_eq!(cm, mask);
    }

    #[test]
    fn crop_keeps_image_and_mask_aligned() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        // Encode coordinates into pixels so alignment is checkable.
        let img = {
            let mut i = RgbImage8::new(64, 64);
            for y in 0..64 {
                for x in 0..64 {
                    i.data[y * 64 + x] = [x as u8, y as u8, 0];
                }
            }
            i
        };
        let mask = BinaryMask::from_fn(64, 64, |x, y| (x + y) % 7 == 0);
        for _ in 0..100 {
            let (ci, cm, f) = center_crop_random(&img, &mask, &mut rng, 0.6).unwrap();
            assert_eq!(ci.width, cm.width);
            assert!(f <= 0.6);
            let off = (64 - ci.width) / 2;
            for y in 0..ci.height {
                for x in 0..ci.width {
                    let p = ci.get(x, y);
                    assert_eq!(p[0] as usize, x + off);
                    assert_eq!(p[1] as usize, y + off);
                    assert_eq!(cm.get(x, y), mask.get(x + off, y + off));
                }
            }
        }
    }

    #[test]
    fn crop_rejects_non_square() {
        let img = RgbImage8::new(32, 16);
        let mask = BinaryMask::new(32, 16);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(center_crop_random(&img, &mask, &mut rng, 0.5).is_err());
    }
}
