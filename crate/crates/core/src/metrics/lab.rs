//! sRGB <-> CIELAB conversion (D65 white, 2-degree observer).

use crate::render::color::{srgb_decode, srgb_encode};

const D65: [f64; 3] = [0.95047, 1.0, 1.08883];
const EPSILON: f64 = 216.0 / 24389.0;
const KAPPA: f64 = 24389.0 / 27.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lab {
    pub l: f64,
    pub a: f64,
    pub b: f64,
}

fn srgb8_to_xyz(rgb: [u8; 3]) -> [f64; 3] {
    let r = srgb_decode(rgb[0] as f64 / 255.0);
    let g = srgb_decode(rgb[1] as f64 / 255.0);
    let b = srgb_decode(rgb[2] as f64 / 255.0);
    [
        0.4124564 * r + 0.3575761 * g + 0.1804375 * b,
        0.2126729 * r + 0.7151522 * g + 0.0721750 * b,
        0.0193339 * r + 0.1191920 * g + 0.9503041 * b,
    ]
}

fn f(t: f64) -> f64 {
    if t > EPSILON {
        t.cbrt()
    } else {
        (KAPPA * t + 16.0) / 116.0
    }
}

pub fn srgb8_to_lab(rgb: [u8; 3]) -> Lab {
    let xyz = srgb8_to_xyz(rgb);
    let fx = f(xyz[0] / D65[0]);
    let fy = f(xyz[1] / D65[1]);
    let fz = f(xyz[2] / D65[2]);
    Lab {
        l: 116.0 * fy - 16.0,
        a: 500.0 * (fx - fy),
        b: 200.0 * (fy - fz),
    }
}

pub fn lab_to_srgb8(lab: Lab) -> [u8; 3] {
    let fy = (lab.l + 16.0) / 116.0;
    let fx = fy + lab.a / 500.0;
    let fz = fy - lab.b / 200.0;
    let finv = |t: f64| {
        let t3 = t * t * t;
        if t3 > EPSILON {
            t3
        } else {
            (116.0 * t - 16.0) / KAPPA
        }
    };
    let xyz = [finv(fx) * D65[0], finv(fy) * D65[1], finv(fz) * D65[2]];
    let r = 3.2404542 * xyz[0] - 1.5371385 * xyz[1] - 0.4985314 * xyz[2];
    let g = -0.9692660 * xyz[0] + 1.8760108 * xyz[1] + 0.0415560 * xyz[2];
    let b = 0.0556434 * xyz[0] - 0.2040259 * xyz[1] + 1.0572252 * xyz[2];
    let q = |c: f64| (srgb_encode(c) * 255.0).round().clamp(0.0, 255.0) as u8;
    [q(r), q(g), q(b)]
}
