//! Deterministic lesion mask pass.
//!
//! A pixel is foreground iff the camera's primary ray, continued as a
//! straight line (refraction deliberately ignored), passes through any
//! occupied lesion voxel. Voxel traversal is an exact 3D DDA, so the mask
//! is noise-free and reproducible.

use super::camera::Camera;
use super::geom::Vec3;
use crate::anatomy::SkinModel;
use crate::mask::BinaryMask;
use crate::{Error, Result};

/// Render the binary lesion mask for a camera.
pub fn render_mask(model: &SkinModel, camera: &Camera) -> Result<BinaryMask> {
    camera.validate()?;
    if model.lesion.occupied_count() == 0 {
        return Err(Error::EmptyInput("mask pass needs an embedded lesion".into()));
    }
    let mut mask = BinaryMask::new(camera.width, camera.height);
    for py in 0..camera.height {
        for px in 0..camera.width {
            let (o, d) = camera.primary_ray(px, py, 0.5, 0.5);
            mask.set(px, py, ray_hits_lesion(model, o, d));
        }
    }
    Ok(mask)
}

/// Straight-line occupancy test against the lesion voxel grid.
pub fn ray_hits_lesion(model: &SkinModel, o: Vec3, d: Vec3) -> bool {
    let [nx, ny, nz] = model.lesion.dims();
    let pitch = model.lesion_pitch_mm();
    let org = model.lesion_origin_mm;
    // Grid space: voxel (i,j,k) occupies [i-0.5, i+0.5) etc.; the lesion
    // depth axis k runs against world z.
    let go = [
        (o[0] - org[0]) / pitch + 0.5,
        (o[1] - org[1]) / pitch + 0.5,
        (org[2] - o[2]) / pitch + 0.5,
    ];
    let gd = [d[0] / pitch, d[1] / pitch, -d[2] / pitch];
    let dims = [nx as f64, ny as f64, nz as f64];

    // Clip to the grid box.
    let mut t0 = 0.0f64;
    let mut t1 = f64::INFINITY;
    for a in 0..3 {
        if gd[a].abs() < 1e-15 {
            if go[a] < 0.0 || go[a] >= dims[a] {
                return false;
            }
        } else {
            let ta = (0.0 - go[a]) / gd[a];
            let tb = (dims[a] - go[a]) / gd[a];
            let (ta, tb) = (ta.min(tb), ta.max(tb));
            t0 = t0.max(ta);
            t1 = t1.min(tb);
        }
    }
    if t0 > t1 {
        return false;
    }

    // Amanatides-Woo traversal from the entry point.
    let entry = [
        go[0] + gd[0] * (t0 + 1e-9),
        go[1] + gd[1] * (t0 + 1e-9),
        go[2] + gd[2] * (t0 + 1e-9),
    ];
    let mut cell = [
        (entry[0].floor() as i64).clamp(0, nx as i64 - 1),
        (entry[1].floor() as i64).clamp(0, ny as i64 - 1),
        (entry[2].floor() as i64).clamp(0, nz as i64 - 1),
    ];
    let mut step = [0i64; 3];
    let mut t_next = [f64::INFINITY; 3];
    let mut t_delta = [f64::INFINITY; 3];
    for a in 0..3 {
        if gd[a] > 1e-15 {
            step[a] = 1;
            t_next[a] = t0 + ((cell[a] + 1) as f64 - entry[a]) / gd[a];
            t_delta[a] = 1.0 / gd[a];
        } else if gd[a] < -1e-15 {
            step[a] = -1;
            t_next[a] = t0 + (cell[a] as f64 - entry[a]) / gd[a];
            t_delta[a] = -1.0 / gd[a];
        }
    }
    loop {
        if model
            .lesion
            .occupied_at(cell[0] as usize, cell[1] as usize, cell[2] as usize)
        {
            return true;
        }
        // Advance along the smallest next crossing.
        let axis = if t_next[0] <= t_next[1] && t_next[0] <= t_next[2] {
            0
        } else if t_next[1] <= t_next[2] {
            1
        } else {
            2
        };
        cell[axis] += step[axis];
        if cell[axis] < 0 || cell[axis] >= dims[axis] as i64 || t_next[axis] > t1 {
            return false;
        }
        t_next[axis] += t_delta[axis];
    }
}
