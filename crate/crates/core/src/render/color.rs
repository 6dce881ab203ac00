//! Spectral radiance to sRGB conversion and RGB-to-spectrum uplift.
//!
//! Spectra integrate against the bundled CIE 1931 2-degree observer tables,
//! then adapt from the scene's equal-energy reference white to D65 (a
//! Bradford transform) before the sRGB matrix and gamma encode. Anchoring
//! the adaptation at the *measured* flat-spectrum white of our coarse grid
//! makes a flat spectrum of radiance L land exactly on neutral gray (L,L,L)
//! in linear sRGB, which in turn makes uniform environments photometrically
//! consistent end to end: the uplift bases below form a partition of unity,
//! so uplifting gray produces a flat spectrum.

use crate::optics::{lambda_at, Spectrum, LAMBDA_STEP, SPECTRUM_SAMPLES};
use std::sync::OnceLock;

/// 3x3 matrix, row-major.
#[derive(Debug, Clone, Copy)]
pub struct Mat3(pub [[f64; 3]; 3]);

impl Mat3 {
    pub fn mul_vec(&self, v: [f64; 3]) -> [f64; 3] {
        let m = &self.0;
        [
            m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
            m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
            m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2],
        ]
    }

    pub fn mul(&self, o: &Mat3) -> Mat3 {
        let mut r = [[0.0; 3]; 3];
        for (i, row) in r.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                *cell = (0..3).map(|k| self.0[i][k] * o.0[k][j]).sum();
            }
        }
        Mat3(r)
    }

    pub fn inverse(&self) -> Mat3 {
        let m = &self.0;
        let det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
        let inv = 1.0 / det;
        Mat3([
            [
                (m[1][1] * m[2][2] - m[1][2] * m[2][1]) * inv,
                (m[0][2] * m[2][1] - m[0][1] * m[2][2]) * inv,
                (m[0][1] * m[1][2] - m[0][2] * m[1][1]) * inv,
            ],
            [
                (m[1][2] * m[2][0] - m[1][0] * m[2][2]) * inv,
                (m[0][0] * m[2][2] - m[0][2] * m[2][0]) * inv,
                (m[0][2] * m[1][0] - m[0][0] * m[1][2]) * inv,
            ],
            [
                (m[1][0] * m[2][1] - m[1][1] * m[2][0]) * inv,
                (m[0][1] * m[2][0] - m[0][0] * m[2][1]) * inv,
                (m[0][0] * m[1][1] - m[0][1] * m[1][0]) * inv,
            ],
        ])
    }
}

const BRADFORD: Mat3 = Mat3([
    [0.8951, 0.2664, -0.1614],
    [-0.7502, 1.7135, 0.0367],
    [0.0389, -0.0685, 1.0296],
]);

const D65_WHITE: [f64; 3] = [0.95047, 1.0, 1.08883];

/// Linear sRGB from XYZ, D65 white.
const XYZ_TO_SRGB: Mat3 = Mat3([
    [3.2404542, -1.5371385, -0.4985314],
    [-0.9692660, 1.8760108, 0.0415560],
    [0.0556434, -0.2040259, 1.0572252],
]);

/// CIE observer sampled on the shared wavelength grid, plus the combined
/// XYZ -> linear sRGB matrix with the E -> D65 Bradford adaptation baked in.
pub struct ColorSystem {
    /// (xbar, ybar, zbar) at each grid wavelength.
    cmf: [[f64; 3]; SPECTRUM_SAMPLES],
    /// 1 / (sum of ybar * dl): normalizes a flat unit spectrum to Y = 1.
    luminance_norm: f64,
    to_srgb: Mat3,
}

impl ColorSystem {
    pub fn global() -> &'static ColorSystem {
        static SYS: OnceLock<ColorSystem> = OnceLock::new();
        SYS.get_or_init(ColorSystem::build)
    }

    fn build() -> ColorSystem {
        let table = parse_cmf(include_str!("../../data/cie_xyz_1931_2deg.dat"));
        let mut cmf = [[0.0; 3]; SPECTRUM_SAMPLES];
        for (i, out) in cmf.iter_mut().enumerate() {
            *out = interp_cmf(&table, lambda_at(i));
        }
        let mut white = [0.0; 3];
        for row in &cmf {
            for (w, v) in white.iter_mut().zip(row.iter()) {
                *w += v * LAMBDA_STEP;
            }
        }
        let luminance_norm = 1.0 / white[1];
        // Reference white of a flat spectrum on this grid, normalized Y=1.
        let e_white = [
            white[0] * luminance_norm,
            1.0,
            white[2] * luminance_norm,
        ];
        let cone_src = BRADFORD.mul_vec(e_white);
        let cone_dst = BRADFORD.mul_vec(D65_WHITE);
        let scale = Mat3([
            [cone_dst[0] / cone_src[0], 0.0, 0.0],
            [0.0, cone_dst[1] / cone_src[1], 0.0],
            [0.0, 0.0, cone_dst[2] / cone_src[2]],
        ]);
        let cat = BRADFORD.inverse().mul(&scale).mul(&BRADFORD);
        ColorSystem {
            cmf,
            luminance_norm,
            to_srgb: XYZ_TO_SRGB.mul(&cat),
        }
    }

    /// Integrate a spectral radiance against the observer. A flat spectrum
    /// of value L yields Y = L.
    pub fn xyz(&self, s: &Spectrum) -> [f64; 3] {
        let mut xyz = [0.0; 3];
        for (i, row) in self.cmf.iter().enumerate() {
            let v = s.sample(i) * LAMBDA_STEP;
            xyz[0] += row[0] * v;
            xyz[1] += row[1] * v;
            xyz[2] += row[2] * v;
        }
        [
            xyz[0] * self.luminance_norm,
            xyz[1] * self.luminance_norm,
            xyz[2] * self.luminance_norm,
        ]
    }

    /// Linear sRGB (unclamped) from spectral radiance.
    pub fn linear_rgb(&self, s: &Spectrum) -> [f64; 3] {
        self.to_srgb.mul_vec(self.xyz(s))
    }
}

fn parse_cmf(text: &str) -> Vec<(f64, [f64; 3])> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| {
            let v: Vec<f64> = l
                .split_whitespace()
                .map(|t| t.parse().expect("bundled CMF table is numeric"))
                .collect();
            (v[0], [v[1], v[2], v[3]])
        })
        .collect()
}

fn interp_cmf(table: &[(f64, [f64; 3])], lambda: f64) -> [f64; 3] {
    if lambda <= table[0].0 {
        return table[0].1;
    }
    if lambda >= table[table.len() - 1].0 {
        return table[table.len() - 1].1;
    }
    let i = table.partition_point(|&(l, _)| l <= lambda) - 1;
    let (l0, a) = table[i];
    let (l1, b) = table[i + 1];
    let t = (lambda - l0) / (l1 - l0);
    [
        a[0] * (1.0 - t) + b[0] * t,
        a[1] * (1.0 - t) + b[1] * t,
        a[2] * (1.0 - t) + b[2] * t,
    ]
}

/// sRGB transfer function (linear -> encoded), input clamped to [0, 1].
pub fn srgb_encode(c: f64) -> f64 {
    let c = c.clamp(0.0, 1.0);
    if c <= 0.003_130_8 {
        12.92 * c
    } else {
        1.055 * c.powf(1.0 / 2.4) - 0.055
    }
}

/// Inverse sRGB transfer function (encoded -> linear).
pub fn srgb_decode(c: f64) -> f64 {
    if c <= 0.04045 {
        c / 12.92
    } else {
        ((c + 0.055) / 1.055).powf(2.4)
    }
}

pub fn encode_rgb8(linear: [f64; 3]) -> [u8; 3] {
    let q = |c: f64| (srgb_encode(c) * 255.0).round().clamp(0.0, 255.0) as u8;
    [q(linear[0]), q(linear[1]), q(linear[2])]
}

fn smoothstep(x: f64, a: f64, b: f64) -> f64 {
    let t = ((x - a) / (b - a)).clamp(0.0, 1.0);
    t * t * (3.0 - 2.0 * t)
}

/// Smooth band basis functions used to uplift environment RGB to spectra.
/// They partition unity, so gray RGB uplifts to an exactly flat spectrum.
pub fn uplift_bases(lambda_nm: f64) -> [f64; 3] {
    let blue = 1.0 - smoothstep(lambda_nm, 465.0, 515.0);
    let red = smoothstep(lambda_nm, 555.0, 605.0);
    let green = 1.0 - blue - red;
    [red, green, blue]
}

/// Spectral radiance of an RGB environment color at one wavelength.
#[inline]
pub fn uplift_rgb(rgb: [f64; 3], lambda_nm: f64) -> f64 {
    let [r, g, b] = uplift_bases(lambda_nm);
    rgb[0] * r + rgb[1] * g + rgb[2] * b
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_spectrum_is_black() {
        let sys = ColorSystem::global();
        let rgb = sys.linear_rgb(&Spectrum::zero());
        assert_eq!(rgb, [0.0, 0.0, 0.0]);
        assert_eq!(encode_rgb8(rgb), [0, 0, 0]);
    }

    #[test]
    fn flat_spectrum_is_neutral() {
        // Truncated sRGB matrix constants leave ~1e-7 residual.
        let sys = ColorSystem::global();
        let rgb = sys.linear_rgb(&Spectrum::splat(0.5));
        assert!((rgb[0] - 0.5).abs() < 1e-6, "{rgb:?}");
        assert!((rgb[1] - 0.5).abs() < 1e-6);
        assert!((rgb[2] - 0.5).abs() < 1e-6);
        let enc = encode_rgb8(rgb);
        assert!(enc[0].abs_diff(enc[1]) < 3 && enc[1].abs_diff(enc[2]) < 3);
    }

    #[test]
    fn conversion_is_linear_before_clamp() {
        let sys = ColorSystem::global();
        let s = Spectrum::from_fn(|l| 0.1 + 0.2 * ((l - 380.0) / 400.0));
        let a = sys.linear_rgb(&s);
        let b = sys.linear_rgb(&s.scale(2.0));
        for i in 0..3 {
            assert!((b[i] - 2.0 * a[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn srgb_transfer_roundtrip() {
        for i in 0..=100 {
            let c = i as f64 / 100.0;
            let r = srgb_decode(srgb_encode(c));
            assert!((r - c).abs() < 1e-9);
        }
    }

    #[test]
    fn uplift_partitions_unity() {
        let mut l = 380.0;
        while l <= 780.0 {
            let [r, g, b] = uplift_bases(l);
            assert!((r + g + b - 1.0).abs() < 1e-12);
            assert!(r >= 0.0 && g >= 0.0 && b >= 0.0);
            l += 2.5;
        }
        // Gray uplifts flat.
        assert!((uplift_rgb([0.7, 0.7, 0.7], 550.0) - 0.7).abs() < 1e-12);
    }

    #[test]
    fn long_wavelengths_read_red_channel() {
        assert!((uplift_rgb([1.0, 0.0, 0.0], 700.0) - 1.0).abs() < 1e-12);
        assert!((uplift_rgb([0.0, 0.0, 1.0], 420.0) - 1.0).abs() < 1e-12);
        assert!((uplift_rgb([0.0, 1.0, 0.0], 535.0) - 1.0).abs() < 1e-12);
    }
}
