//! Hair strand generation.
//!
//! Strand count follows a Poisson draw around `density x area`; each strand
//! is a constant-segment-length random walk rooted on the epidermis top
//! surface, with a curvature parameter controlling how much the direction
//! wanders per unit length.

use super::layers::LayerStack;
use crate::{Error, Result};
use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HairConfig {
    pub density_per_cm2: f64,
    pub length_mm: f64,
    pub thickness_um: f64,
    /// Direction wander, radians per mm of strand length.
    pub curvature_per_mm: f64,
    pub segments_per_strand: usize,
}

impl Default for HairConfig {
    fn default() -> Self {
        Self {
            density_per_cm2: 12.0,
            length_mm: 4.0,
            thickness_um: 60.0,
            curvature_per_mm: 0.8,
            segments_per_strand: 12,
        }
    }
}

impl HairConfig {
    pub fn validate(&self) -> Result<()> {
        if self.density_per_cm2 < 0.0 {
            return Err(Error::InvalidParam("hair density must be >= 0".into()));
        }
        if self.length_mm <= 0.0 || self.thickness_um <= 0.0 {
            return Err(Error::InvalidParam("hair length and thickness must be > 0".into()));
        }
        if self.segments_per_strand == 0 {
            return Err(Error::InvalidParam("hair needs at least one segment".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HairStrand {
    /// Polyline points, mm; first point lies on the epidermis top surface.
    pub points: Vec<[f64; 3]>,
    pub radius_mm: f64,
}

impl HairStrand {
    pub fn arc_length_mm(&self) -> f64 {
        self.points
            .windows(2)
            .map(|w| {
                let d = [w[1][0] - w[0][0], w[1][1] - w[0][1], w[1][2] - w[0][2]];
                (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt()
            })
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct HairSet {
    pub strands: Vec<HairStrand>,
}

impl HairSet {
    pub fn is_empty(&self) -> bool {
        self.strands.is_empty()
    }

    /// CSV export: one row per point, `strand,point,x_mm,y_mm,z_mm,radius_um`.
    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| Error::Csv {
            path: path.to_path_buf(),
            source: e,
        })?;
        w.write_record(["strand", "point", "x_mm", "y_mm", "z_mm", "radius_um"])
            .map_err(|e| Error::Csv {
                path: path.to_path_buf(),
                source: e,
            })?;
        for (si, s) in self.strands.iter().enumerate() {
            for (pi, p) in s.points.iter().enumerate() {
                w.write_record([
                    si.to_string(),
                    pi.to_string(),
                    format!("{:.6}", p[0]),
                    format!("{:.6}", p[1]),
                    format!("{:.6}", p[2]),
                    format!("{:.3}", s.radius_mm * 1000.0),
                ])
                .map_err(|e| Error::Csv {
                    path: path.to_path_buf(),
                    source: e,
                })?;
            }
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

fn normalize(v: [f64; 3]) -> [f64; 3] {
    let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    [v[0] / n, v[1] / n, v[2] / n]
}

/// Rotate `v` by `angle` around unit axis `k` (Rodrigues).
fn rotate(v: [f64; 3], k: [f64; 3], angle: f64) -> [f64; 3] {
    let (s, c) = angle.sin_cos();
    let kv = [
        k[1] * v[2] - k[2] * v[1],
        k[2] * v[0] - k[0] * v[2],
        k[0] * v[1] - k[1] * v[0],
    ];
    let kd = k[0] * v[0] + k[1] * v[1] + k[2] * v[2];
    [
        v[0] * c + kv[0] * s + k[0] * kd * (1.0 - c),
        v[1] * c + kv[1] * s + k[1] * kd * (1.0 - c),
        v[2] * c + kv[2] * s + k[2] * kd * (1.0 - c),
    ]
}

fn perpendicular(v: [f64; 3], rng: &mut impl Rng) -> [f64; 3] {
    // Random unit vector orthogonal to v.
    loop {
        let r = normalize([
            rng.gen::<f64>() * 2.0 - 1.0,
            rng.gen::<f64>() * 2.0 - 1.0,
            rng.gen::<f64>() * 2.0 - 1.0,
        ]);
        let d = r[0] * v[0] + r[1] * v[1] + r[2] * v[2];
        let p = [r[0] - d * v[0], r[1] - d * v[1], r[2] - d * v[2]];
        let n = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
        if n > 1e-6 {
            return [p[0] / n, p[1] / n, p[2] / n];
        }
    }
}

pub fn generate_hair(config: &HairConfig, stack: &LayerStack, rng: &mut impl Rng) -> Result<HairSet> {
    config.validate()?;
    if config.density_per_cm2 == 0.0 {
        return Ok(HairSet::default());
    }
    let area_cm2 = stack.extent_mm[0] * stack.extent_mm[1] / 100.0;
    let mean = config.density_per_cm2 * area_cm2;
    let count = Poisson::new(mean)
        .map_err(|_| Error::InvalidParam(format!("bad hair density mean {mean}")))?
        .sample(rng)
        .round() as usize;

    let seg_len = config.length_mm / config.segments_per_strand as f64;
    let mut strands = Vec::with_capacity(count);
    for _ in 0..count {
        let x = rng.gen_range(-stack.extent_mm[0] / 2.0..stack.extent_mm[0] / 2.0);
        let y = rng.gen_range(-stack.extent_mm[1] / 2.0..stack.extent_mm[1] / 2.0);
        let root = [x, y, stack.epi_top_z_mm(x, y)];
        // Initial direction: up, tilted by a random polar angle.
        let tilt = rng.gen_range(0.0..0.9f64);
        let azim = rng.gen_range(0.0..std::f64::consts::TAU);
        let mut dir = [
            tilt.sin() * azim.cos(),
            tilt.sin() * azim.sin(),
            tilt.cos(),
        ];
        let mut points = Vec::with_capacity(config.segments_per_strand + 1);
        points.push(root);
        let mut p = root;
        for _ in 0..config.segments_per_strand {
            p = [
                p[0] + dir[0] * seg_len,
                p[1] + dir[1] * seg_len,
                p[2] + dir[2] * seg_len,
            ];
            points.push(p);
            let axis = perpendicular(dir, rng);
            let angle = config.curvature_per_mm * seg_len * (rng.gen::<f64>() * 2.0 - 1.0);
            dir = normalize(rotate(dir, axis, angle));
            // Keep the strand from diving back through the surface.
            if dir[2] < -0.2 {
                dir[2] = -dir[2];
                dir = normalize(dir);
            }
        }
        strands.push(HairStrand {
            points,
            radius_mm: config.thickness_um / 2.0 / 1000.0,
        });
    }
    Ok(HairSet { strands })
}
