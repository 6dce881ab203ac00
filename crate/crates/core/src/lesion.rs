//! Probabilistic 3D growing-lesion automaton.
//!
//! A lesion starts as one occupied voxel and grows over discrete time
//! points. Each time point perturbs a fixed per-offset probability stencil
//! and runs one or two growth passes; in a pass every occupied ("active")
//! cell tries to occupy each neighbor independently with the stencil's
//! probability for that offset. Cells may additionally trigger bursts of
//! recursive local growth, which is what produces irregular lesion shapes.
//!
//! Axes: `x`/`y` are lateral, `z` is the depth axis with +z pointing inward
//! (away from the skin surface). Offsets toward the surface carry zero or
//! near-zero probability, and creation is hard-clamped at a plane two
//! voxels outward of the seed, so a lesion can bulge slightly toward the
//! surface but never escape it.

use crate::mask::BinaryMask;
use crate::rng::derive_seed;
use crate::{Error, Result};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};
use std::path::Path;

/// Stencil support: offsets span -2..=2 on each axis.
pub const STENCIL_RADIUS: i32 = 2;
const STENCIL_DIM: usize = 5;

/// Birth-time sentinel for unoccupied voxels.
const EMPTY: u16 = u16::MAX;

/// Per-offset growth probabilities over the 5x5x5 neighborhood.
///
/// Index order is `[dz+2][dy+2][dx+2]` with dz the depth offset (+ inward).
/// Offsets with probability zero stay exactly zero under perturbation.
#[derive(Debug, Clone, PartialEq)]
pub struct GrowthStencil {
    p: [[[f64; STENCIL_DIM]; STENCIL_DIM]; STENCIL_DIM],
}

impl GrowthStencil {
    /// Default growth probabilities.
    ///
    /// Depth slices, outward to inward:
    /// * dz=-2: the single axial cell, probability 0.
    /// * dz=-1: 3x3 plane; corners 0, edge-adjacent 0.0001, center 0.001.
    /// * dz= 0: 5x5 diamond; axial distance 2 -> 0.1, axial distance 1 ->
    ///   0.3, diagonals -> 0.2, rest 0.
    /// * dz=+1: 3x3 plane; ring 0.1, center 0.5.
    /// * dz=+2: the single axial cell, probability 0.5.
    pub fn base() -> Self {
        let mut p = [[[0.0f64; STENCIL_DIM]; STENCIL_DIM]; STENCIL_DIM];
        // dz = -1 (outward plane)
        for dy in -1i32..=1 {
            for dx in -1i32..=1 {
                let v = match dx.abs() + dy.abs() {
                    0 => 0.001,
                    1 => 0.0001,
                    _ => 0.0,
                };
                p[1][(dy + 2) as usize][(dx + 2) as usize] = v;
            }
        }
        // dz = 0 (central plane, diamond of taxicab radius 2)
        for dy in -2i32..=2 {
            for dx in -2i32..=2 {
                let v = match (dx.abs(), dy.abs()) {
                    (1, 0) | (0, 1) => 0.3, // axial neighbors
                    (1, 1) => 0.2,          // diagonal neighbors
                    (2, 0) | (0, 2) => 0.1, // axial distance 2
                    _ => 0.0,
                };
                p[2][(dy + 2) as usize][(dx + 2) as usize] = v;
            }
        }
        // dz = +1 (inward plane)
        for dy in -1i32..=1 {
            for dx in -1i32..=1 {
                let v = if dx == 0 && dy == 0 { 0.5 } else { 0.1 };
                p[3][(dy + 2) as usize][(dx + 2) as usize] = v;
            }
        }
        // dz = +2 (axial inward)
        p[4][2][2] = 0.5;
        GrowthStencil { p }
    }

    /// Build a stencil from explicit probabilities, `[dz+2][dy+2][dx+2]`.
    pub fn from_probabilities(
        p: [[[f64; STENCIL_DIM]; STENCIL_DIM]; STENCIL_DIM],
    ) -> Result<Self> {
        let s = GrowthStencil { p };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        for plane in &self.p {
            for row in plane {
                for &v in row {
                    if !(0.0..=1.0).contains(&v) || !v.is_finite() {
                        return Err(Error::InvalidParam(format!(
                            "stencil probability {v} outside [0,1]"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    #[inline]
    pub fn probability(&self, dx: i32, dy: i32, dz: i32) -> f64 {
        self.p[(dz + STENCIL_RADIUS) as usize][(dy + STENCIL_RADIUS) as usize]
            [(dx + STENCIL_RADIUS) as usize]
    }

    /// All offsets with nonzero probability, in a fixed iteration order.
    pub fn nonzero_offsets(&self) -> Vec<(i32, i32, i32, f64)> {
        let mut v = Vec::new();
        for dz in -STENCIL_RADIUS..=STENCIL_RADIUS {
            for dy in -STENCIL_RADIUS..=STENCIL_RADIUS {
                for dx in -STENCIL_RADIUS..=STENCIL_RADIUS {
                    let p = self.probability(dx, dy, dz);
                    if p > 0.0 {
                        v.push((dx, dy, dz, p));
                    }
                }
            }
        }
        v
    }

    /// Expected number of new cells spawned by one isolated active cell in
    /// one pass: the sum of all offset probabilities.
    pub fn expected_new_cells(&self) -> f64 {
        self.p
            .iter()
            .flat_map(|pl| pl.iter())
            .flat_map(|r| r.iter())
            .sum()
    }
}

/// Growth parameters.
///
/// `time_points` is the number of growth time points T. Each time point
/// draws a step count uniformly from {1,2} and runs that many passes with a
/// freshly perturbed stencil. `irregularity_prob` (C_p), `irregularity_iters`
/// (C_i) and `max_recursion` (C_r) control the recursive bursts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LesionParams {
    pub time_points: u32,
    /// Std-dev of the multiplicative stencil perturbation.
    pub sigma: f64,
    /// Probability that an active cell triggers a recursive burst (C_p).
    pub irregularity_prob: f64,
    /// Number of passes run by each recursive burst (C_i).
    pub irregularity_iters: u32,
    /// Maximum recursion depth for bursts (C_r).
    pub max_recursion: u32,
    pub seed: u64,
}

impl Default for LesionParams {
    fn default() -> Self {
        Self {
            time_points: 20,
            sigma: 0.5,
            irregularity_prob: 0.0001,
            irregularity_iters: 10,
            max_recursion: 2,
            seed: 0,
        }
    }
}

impl LesionParams {
    pub fn validate(&self) -> Result<()> {
        if self.time_points < 1 {
            return Err(Error::InvalidParam("time_points must be >= 1".into()));
        }
        if self.time_points as usize >= EMPTY as usize {
            return Err(Error::InvalidParam("time_points exceeds birth-time range".into()));
        }
        if !(0.0..=1.0).contains(&self.irregularity_prob) {
            return Err(Error::InvalidParam(format!(
                "irregularity_prob {} outside [0,1]",
                self.irregularity_prob
            )));
        }
        if self.sigma < 0.0 || !self.sigma.is_finite() {
            return Err(Error::InvalidParam(format!("sigma {} must be >= 0", self.sigma)));
        }
        Ok(())
    }
}

/// Dense occupancy volume with per-voxel birth time.
#[derive(Debug, Clone, PartialEq)]
pub struct LesionVolume {
    dims: [usize; 3],
    pitch_um: u32,
    /// Birth time point per voxel; `EMPTY` marks unoccupied. Index order is
    /// `(z * ny + y) * nx + x`.
    birth: Vec<u16>,
    seed_voxel: [usize; 3],
    /// Plane index of the surface clamp: creation at z <= this is forbidden.
    clamp_z: usize,
    occupied: usize,
}

/// Default voxel pitch: 50 um gives mm-scale lesions on a 128^3 grid.
pub const DEFAULT_PITCH_UM: u32 = 50;
/// Default lesion grid extent.
pub const DEFAULT_GRID: [usize; 3] = [128, 128, 128];

impl LesionVolume {
    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn pitch_um(&self) -> u32 {
        self.pitch_um
    }

    pub fn seed_voxel(&self) -> [usize; 3] {
        self.seed_voxel
    }

    /// Surface clamp plane (depth index). No voxel at or outward of this
    /// plane is ever created; occupied voxels satisfy `z > clamp plane`.
    pub fn surface_clamp_z(&self) -> usize {
        self.clamp_z
    }

    pub fn occupied_count(&self) -> usize {
        self.occupied
    }

    #[inline]
    fn idx(&self, x: usize, y: usize, z: usize) -> usize {
        (z * self.dims[1] + y) * self.dims[0] + x
    }

    #[inline]
    pub fn occupied_at(&self, x: usize, y: usize, z: usize) -> bool {
        self.birth[self.idx(x, y, z)] != EMPTY
    }

    /// Birth time point of a voxel, or None if unoccupied.
    pub fn birth_time(&self, x: usize, y: usize, z: usize) -> Option<u16> {
        match self.birth[self.idx(x, y, z)] {
            EMPTY => None,
            t => Some(t),
        }
    }

    pub fn occupied_voxels(&self) -> Vec<[usize; 3]> {
        let mut v = Vec::with_capacity(self.occupied);
        let [nx, ny, nz] = self.dims;
        for z in 0..nz {
            for y in 0..ny {
                for x in 0..nx {
                    if self.occupied_at(x, y, z) {
                        v.push([x, y, z]);
                    }
                }
            }
        }
        v
    }

    /// Inclusive bounding box of occupied voxels: (min, max).
    pub fn bounding_box(&self) -> Option<([usize; 3], [usize; 3])> {
        let mut lo = [usize::MAX; 3];
        let mut hi = [0usize; 3];
        let mut any = false;
        for v in self.occupied_voxels() {
            any = true;
            for a in 0..3 {
                lo[a] = lo[a].min(v[a]);
                hi[a] = hi[a].max(v[a]);
            }
        }
        any.then_some((lo, hi))
    }

    /// Try to occupy; returns true if the voxel was newly created. Out-of-grid
    /// targets and targets at or outward of the surface clamp are ignored.
    fn occupy(&mut self, x: i64, y: i64, z: i64, time: u16) -> bool {
        if x < 0 || y < 0 || z < 0 {
            return false;
        }
        let (x, y, z) = (x as usize, y as usize, z as usize);
        if x >= self.dims[0] || y >= self.dims[1] || z >= self.dims[2] {
            return false;
        }
        if z <= self.clamp_z {
            return false;
        }
        let i = self.idx(x, y, z);
        if self.birth[i] == EMPTY {
            self.birth[i] = time;
            self.occupied += 1;
            true
        } else {
            false
        }
    }

    /// True when every occupied voxel is reachable from the seed through
    /// 26-connected occupied neighbors.
    pub fn is_26_connected(&self) -> bool {
        if self.occupied == 0 {
            return false;
        }
        let [nx, ny, nz] = self.dims;
        let mut seen = vec![false; self.birth.len()];
        let start = self.idx(self.seed_voxel[0], self.seed_voxel[1], self.seed_voxel[2]);
        if self.birth[start] == EMPTY {
            return false;
        }
        let mut stack = vec![self.seed_voxel];
        seen[start] = true;
        let mut visited = 1usize;
        while let Some([x, y, z]) = stack.pop() {
            for dz in -1i64..=1 {
                for dy in -1i64..=1 {
                    for dx in -1i64..=1 {
                        if dx == 0 && dy == 0 && dz == 0 {
                            continue;
                        }
                        let (tx, ty, tz) = (x as i64 + dx, y as i64 + dy, z as i64 + dz);
                        if tx < 0 || ty < 0 || tz < 0 {
                            continue;
                        }
                        let (tx, ty, tz) = (tx as usize, ty as usize, tz as usize);
                        if tx >= nx || ty >= ny || tz >= nz {
                            continue;
                        }
                        let i = self.idx(tx, ty, tz);
                        if !seen[i] && self.birth[i] != EMPTY {
                            seen[i] = true;
                            visited += 1;
                            stack.push([tx, ty, tz]);
                        }
                    }
                }
            }
        }
        visited == self.occupied
    }

    /// True if `other` contains every occupied voxel of `self`.
    pub fn is_subset_of(&self, other: &LesionVolume) -> bool {
        if self.dims != other.dims {
            return false;
        }
        self.birth
            .iter()
            .zip(other.birth.iter())
            .all(|(&a, &b)| a == EMPTY || b != EMPTY)
    }
}

/// Projection axis for [`project_mask`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Axis {
    X,
    Y,
    Z,
}

/// Create a volume holding the single seed voxel at the grid center.
///
/// The grid must keep the seed at least `2 * time_points` voxels away from
/// every lateral boundary so growth is not immediately truncated.
pub fn new_lesion(params: &LesionParams, grid_shape: [usize; 3]) -> Result<LesionVolume> {
    new_lesion_with_pitch(params, grid_shape, DEFAULT_PITCH_UM)
}

pub fn new_lesion_with_pitch(
    params: &LesionParams,
    grid_shape: [usize; 3],
    pitch_um: u32,
) -> Result<LesionVolume> {
    params.validate()?;
    let [nx, ny, nz] = grid_shape;
    if nx < 8 || ny < 8 || nz < 8 {
        return Err(Error::InvalidParam(format!(
            "grid {nx}x{ny}x{nz} too small; need at least 8 voxels per axis"
        )));
    }
    let seed = [nx / 2, ny / 2, nz / 2];
    let margin = 2 * params.time_points as usize;
    let lateral_margin = seed[0]
        .min(nx - 1 - seed[0])
        .min(seed[1])
        .min(ny - 1 - seed[1]);
    if lateral_margin < margin {
        return Err(Error::InvalidParam(format!(
            "grid {nx}x{ny}x{nz} leaves lateral margin {lateral_margin} < 2*T = {margin}"
        )));
    }
    let clamp_z = seed[2].saturating_sub(2);
    let mut vol = LesionVolume {
        dims: grid_shape,
        pitch_um,
        birth: vec![EMPTY; nx * ny * nz],
        seed_voxel: seed,
        clamp_z,
        occupied: 0,
    };
    let i = vol.idx(seed[0], seed[1], seed[2]);
    vol.birth[i] = 0;
    vol.occupied = 1;
    Ok(vol)
}

/// Multiplicatively perturb every nonzero stencil probability:
/// `p -> clamp(p * (1 + e), 0, 1)` with `e ~ N(0, sigma)` drawn
/// independently per offset. Zero offsets are untouched.
pub fn perturb_stencil(
    base: &GrowthStencil,
    sigma: f64,
    rng: &mut impl Rng,
) -> GrowthStencil {
    if sigma == 0.0 {
        return base.clone();
    }
    let normal = Normal::new(0.0, sigma).expect("sigma validated nonnegative");
    let mut out = base.clone();
    for dz in 0..STENCIL_DIM {
        for dy in 0..STENCIL_DIM {
            for dx in 0..STENCIL_DIM {
                let p = out.p[dz][dy][dx];
                if p > 0.0 {
                    let eps = normal.sample(rng);
                    out.p[dz][dy][dx] = (p * (1.0 + eps)).clamp(0.0, 1.0);
                }
            }
        }
    }
    out
}

/// One growth time point: draws `s ~ U{1,2}` and runs `s` passes.
///
/// In each pass every occupied cell attempts each stencil offset as an
/// independent Bernoulli trial, and additionally triggers (with probability
/// C_p, while `depth < max_recursion`) a recursive burst of
/// `irregularity_iters` local passes seeded at its own location.
pub fn grow_step(
    volume: &mut LesionVolume,
    stencil: &GrowthStencil,
    params: &LesionParams,
    rng: &mut impl Rng,
    depth: u32,
    time: u16,
) -> Result<()> {
    if volume.occupied == 0 {
        return Err(Error::EmptyInput("grow_step on empty volume".into()));
    }
    if depth > params.max_recursion {
        return Err(Error::InvalidParam(format!(
            "recursion depth {depth} exceeds max_recursion {}",
            params.max_recursion
        )));
    }
    let steps = rng.gen_range(1..=2u32);
    for _ in 0..steps {
        grow_pass(volume, stencil, params, rng, depth, time);
    }
    Ok(())
}

/// One growth pass: every occupied cell attempts each stencil offset once.
pub fn grow_pass(
    volume: &mut LesionVolume,
    stencil: &GrowthStencil,
    params: &LesionParams,
    rng: &mut impl Rng,
    depth: u32,
    time: u16,
) {
    let offsets = stencil.nonzero_offsets();
    let active = volume.occupied_voxels();
    for cell in active {
        let created = spawn_neighbors(volume, &offsets, cell, rng, time);
        // Cells roll their irregularity trigger once, when created; testing
        // every occupied cell every pass would fire thousands of bursts on
        // a grown lesion and round it off instead of distorting it.
        for c in created {
            maybe_trigger_burst(volume, params, rng, depth, time, c);
        }
    }
}

/// Bernoulli growth attempts from one cell; returns newly created cells.
fn spawn_neighbors(
    volume: &mut LesionVolume,
    offsets: &[(i32, i32, i32, f64)],
    cell: [usize; 3],
    rng: &mut impl Rng,
    time: u16,
) -> Vec<[usize; 3]> {
    let mut created = Vec::new();
    for &(dx, dy, dz, p) in offsets {
        if rng.gen::<f64>() < p {
            let (tx, ty, tz) = (
                cell[0] as i64 + dx as i64,
                cell[1] as i64 + dy as i64,
                cell[2] as i64 + dz as i64,
            );
            if volume.occupy(tx, ty, tz, time) {
                created.push([tx as usize, ty as usize, tz as usize]);
            }
        }
    }
    created
}

fn maybe_trigger_burst(
    volume: &mut LesionVolume,
    params: &LesionParams,
    rng: &mut impl Rng,
    depth: u32,
    time: u16,
    cell: [usize; 3],
) {
    if depth >= params.max_recursion || params.irregularity_prob == 0.0 {
        return;
    }
    if rng.gen::<f64>() < params.irregularity_prob {
        let stencil = perturb_stencil(&GrowthStencil::base(), params.sigma, rng);
        recursive_burst(volume, &stencil, params, rng, depth + 1, time, cell);
    }
}

/// Local recursive growth: `irregularity_iters` iterations of the stencil
/// starting at the triggering cell, with the anchor moving to the last
/// cell each iteration created. The walk extrudes a protrusion — a large
/// perimeter disturbance at small volume — which is what distinguishes
/// irregular lesions from the rounded bulk. Cells the burst creates can
/// trigger deeper bursts of their own (at birth) while depth allows.
fn recursive_burst(
    volume: &mut LesionVolume,
    stencil: &GrowthStencil,
    params: &LesionParams,
    rng: &mut impl Rng,
    depth: u32,
    time: u16,
    seed_cell: [usize; 3],
) {
    let offsets = stencil.nonzero_offsets();
    let mut anchor = seed_cell;
    for _ in 0..params.irregularity_iters {
        let created = spawn_neighbors(volume, &offsets, anchor, rng, time);
        if let Some(&last) = created.last() {
            anchor = last;
        }
        for c in created {
            maybe_trigger_burst(volume, params, rng, depth, time, c);
        }
    }
}

/// Result of a full growth run: the final volume plus snapshots taken after
/// the requested time points (time 0 snapshots the bare seed).
#[derive(Debug, Clone)]
pub struct GrowthResult {
    pub volume: LesionVolume,
    pub snapshots: Vec<(u32, LesionVolume)>,
}

/// Run the full automaton: seed, then `time_points` iterations of
/// (perturb stencil; grow step), then the connectivity closure.
/// Deterministic given `params.seed`.
pub fn grow(
    params: &LesionParams,
    grid_shape: [usize; 3],
    snapshot_times: &[u32],
) -> Result<GrowthResult> {
    grow_with_stencil(params, grid_shape, &GrowthStencil::base(), snapshot_times)
}

/// Same as [`grow`] but with a caller-supplied base stencil.
pub fn grow_with_stencil(
    params: &LesionParams,
    grid_shape: [usize; 3],
    base: &GrowthStencil,
    snapshot_times: &[u32],
) -> Result<GrowthResult> {
    base.validate()?;
    let mut volume = new_lesion(params, grid_shape)?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(params.seed, 0x6c65_7369_6f6e));
    let mut snapshots = Vec::new();
    if snapshot_times.contains(&0) {
        snapshots.push((0, volume.clone()));
    }
    for t in 1..=params.time_points {
        let stencil = perturb_stencil(base, params.sigma, &mut rng);
        grow_step(&mut volume, &stencil, params, &mut rng, 0, t as u16)?;
        if t == params.time_points {
            // Distance-2 offsets spawn satellites one gap away from their
            // donor; bridge them so the returned volume is 26-connected.
            connect_satellites(&mut volume, t as u16);
        }
        if snapshot_times.contains(&t) {
            snapshots.push((t, volume.clone()));
        }
    }
    Ok(GrowthResult { volume, snapshots })
}

/// Connectivity closure: BFS from the seed where, besides the 26
/// neighbors, Chebyshev-distance-2 jumps between occupied cells are
/// traversable by materializing a midpoint cell adjacent to both ends.
/// Every cell was created within distance 2 of an occupied donor, so the
/// jump graph is connected and one sweep makes the volume 26-connected.
fn connect_satellites(volume: &mut LesionVolume, time: u16) {
    let [nx, ny, nz] = volume.dims;
    let mut reached = vec![false; volume.birth.len()];
    let seed = volume.seed_voxel;
    reached[volume.idx(seed[0], seed[1], seed[2])] = true;
    let mut stack = vec![seed];
    while let Some([x, y, z]) = stack.pop() {
        for dz in -2i64..=2 {
            for dy in -2i64..=2 {
                for dx in -2i64..=2 {
                    if dx == 0 && dy == 0 && dz == 0 {
                        continue;
                    }
                    let (tx, ty, tz) = (x as i64 + dx, y as i64 + dy, z as i64 + dz);
                    if tx < 0 || ty < 0 || tz < 0 {
                        continue;
                    }
                    let (txu, tyu, tzu) = (tx as usize, ty as usize, tz as usize);
                    if txu >= nx || tyu >= ny || tzu >= nz {
                        continue;
                    }
                    let ti = volume.idx(txu, tyu, tzu);
                    if reached[ti] || volume.birth[ti] == EMPTY {
                        continue;
                    }
                    if dx.abs().max(dy.abs()).max(dz.abs()) == 2 {
                        // Materialize the bridging midpoint.
                        let (mx, my, mz) = (
                            x as i64 + dx.clamp(-1, 1),
                            y as i64 + dy.clamp(-1, 1),
                            z as i64 + dz.clamp(-1, 1),
                        );
                        volume.occupy(mx, my, mz, time);
                        let mi = volume.idx(mx as usize, my as usize, mz as usize);
                        if volume.birth[mi] == EMPTY {
                            // Midpoint rejected (clamp plane); leave this
                            // satellite for another route.
                            continue;
                        }
                        if !reached[mi] {
                            reached[mi] = true;
                            stack.push([mx as usize, my as usize, mz as usize]);
                        }
                    }
                    reached[ti] = true;
                    stack.push([txu, tyu, tzu]);
                }
            }
        }
    }
}

/// Project occupancy along one axis into a binary mask.
///
/// Output layout: `Z -> (x, y)`, `Y -> (x, z)`, `X -> (y, z)`; a pixel is
/// set iff any voxel along the projected column is occupied.
pub fn project_mask(volume: &LesionVolume, axis: Axis) -> Result<BinaryMask> {
    if volume.occupied == 0 {
        return Err(Error::EmptyInput("project_mask on empty volume".into()));
    }
    let [nx, ny, nz] = volume.dims;
    let mask = match axis {
        Axis::Z => BinaryMask::from_fn(nx, ny, |x, y| {
            (0..nz).any(|z| volume.occupied_at(x, y, z))
        }),
        Axis::Y => BinaryMask::from_fn(nx, nz, |x, z| {
            (0..ny).any(|y| volume.occupied_at(x, y, z))
        }),
        Axis::X => BinaryMask::from_fn(ny, nz, |y, z| {
            (0..nx).any(|x| volume.occupied_at(x, y, z))
        }),
    };
    Ok(mask)
}

/// Sidecar metadata written next to each voxel file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VoxelSidecar {
    pub params: LesionParams,
    pub seed: u64,
    pub dims: [usize; 3],
    pub pitch_um: u32,
    pub occupied: usize,
    pub time_point: u32,
}

/// Write the flat binary occupancy format: header of 3 little-endian u32
/// dims then a u32 pitch in um, followed by one byte per voxel (1 =
/// occupied) in `z`-major, `x`-fastest order.
pub fn write_voxels(path: &Path, volume: &LesionVolume) -> Result<()> {
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut header = Vec::with_capacity(16);
    for d in volume.dims {
        header.extend_from_slice(&(d as u32).to_le_bytes());
    }
    header.extend_from_slice(&volume.pitch_um.to_le_bytes());
    f.write_all(&header).map_err(|e| Error::io(path, e))?;
    let bytes: Vec<u8> = volume
        .birth
        .iter()
        .map(|&b| u8::from(b != EMPTY))
        .collect();
    f.write_all(&bytes).map_err(|e| Error::io(path, e))
}

/// Read the flat binary occupancy format back into occupancy-only form
/// (birth times are not stored in the binary; they live in the sidecar run).
pub fn read_voxels(path: &Path) -> Result<(Vec<u8>, [usize; 3], u32)> {
    let mut f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut header = [0u8; 16];
    f.read_exact(&mut header).map_err(|e| Error::io(path, e))?;
    let dims = [
        u32::from_le_bytes(header[0..4].try_into().unwrap()) as usize,
        u32::from_le_bytes(header[4..8].try_into().unwrap()) as usize,
        u32::from_le_bytes(header[8..12].try_into().unwrap()) as usize,
    ];
    let pitch = u32::from_le_bytes(header[12..16].try_into().unwrap());
    let mut data = Vec::new();
    f.read_to_end(&mut data).map_err(|e| Error::io(path, e))?;
    let expect = dims[0] * dims[1] * dims[2];
    if data.len() != expect {
        return Err(Error::Parse {
            what: format!("voxel file {}", path.display()),
            offset: 16 + data.len(),
            msg: format!("expected {expect} voxel bytes, found {}", data.len()),
        });
    }
    Ok((data, dims, pitch))
}

pub fn write_sidecar(path: &Path, sidecar: &VoxelSidecar) -> Result<()> {
    let text = serde_json::to_string_pretty(sidecar).map_err(|e| Error::Json {
        path: path.to_path_buf(),
        source: e,
    })?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn base_stencil_sums_to_expected_branching() {
        let s = GrowthStencil::base();
        // 0.0014 (outward plane) + 2.4 (central) + 1.3 (inward plane) + 0.5
        assert!((s.expected_new_cells() - 4.2014).abs() < 1e-12);
    }

    #[test]
    fn base_stencil_outward_axial_is_zero() {
        let s = GrowthStencil::base();
        assert_eq!(s.probability(0, 0, -2), 0.0);
        assert_eq!(s.probability(1, 1, -1), 0.0); // outward corner
        assert_eq!(s.probability(0, 0, 2), 0.5);
        assert_eq!(s.probability(0, 0, 0), 0.0); // the cell itself
        assert_eq!(s.probability(2, 2, 0), 0.0); // outside the diamond
        assert_eq!(s.probability(1, 0, 0), 0.3);
        assert_eq!(s.probability(1, 1, 0), 0.2);
        assert_eq!(s.probability(2, 0, 0), 0.1);
    }

    #[test]
    fn perturb_sigma_zero_is_identity() {
        let base = GrowthStencil::base();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(perturb_stencil(&base, 0.0, &mut rng), base);
    }

    #[test]
    fn perturb_preserves_zeros_and_range() {
        let base = GrowthStencil::base();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..1000 {
            let p = perturb_stencil(&base, 0.5, &mut rng);
            for dz in -2..=2 {
                for dy in -2..=2 {
                    for dx in -2..=2 {
                        let b = base.probability(dx, dy, dz);
                        let v = p.probability(dx, dy, dz);
                        if b == 0.0 {
                            assert_eq!(v, 0.0, "zero offset perturbed at {dx},{dy},{dz}");
                        }
                        assert!((0.0..=1.0).contains(&v));
                    }
                }
            }
        }
    }

    #[test]
    fn perturb_clamps_large_negative_draws() {
        // With sigma large, multiplicative noise must clamp at 0 and 1.
        let base = GrowthStencil::base();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut saw_zero = false;
        let mut saw_one = false;
        for _ in 0..2000 {
            let p = perturb_stencil(&base, 4.0, &mut rng);
            if p.probability(0, 0, 1) == 0.0 {
                saw_zero = true;
            }
            if p.probability(0, 0, 1) == 1.0 {
                saw_one = true;
            }
        }
        assert!(saw_zero && saw_one);
    }

    #[test]
    fn new_lesion_seeds_center() {
        let params = LesionParams {
            time_points: 5,
            ..Default::default()
        };
        let vol = new_lesion(&params, [64, 64, 64]).unwrap();
        assert_eq!(vol.occupied_count(), 1);
        assert!(vol.occupied_at(32, 32, 32));
        assert_eq!(vol.birth_time(32, 32, 32), Some(0));
        assert_eq!(vol.surface_clamp_z(), 30);
    }

    #[test]
    fn new_lesion_rejects_insufficient_margin() {
        let params = LesionParams {
            time_points: 200,
            ..Default::default()
        };
        assert!(new_lesion(&params, [64, 64, 64]).is_err());
    }

    #[test]
    fn t1_seed_is_seed_independent() {
        let shape = [32, 32, 32];
        let a = new_lesion(
            &LesionParams {
                time_points: 1,
                seed: 7,
                ..Default::default()
            },
            shape,
        )
        .unwrap();
        let b = new_lesion(
            &LesionParams {
                time_points: 1,
                seed: 1234,
                ..Default::default()
            },
            shape,
        )
        .unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn zero_stencil_never_grows() {
        let params = LesionParams {
            time_points: 10,
            irregularity_prob: 0.0,
            ..Default::default()
        };
        let zero = GrowthStencil::from_probabilities([[[0.0; 5]; 5]; 5]).unwrap();
        let res = grow_with_stencil(&params, [64, 64, 64], &zero, &[]).unwrap();
        assert_eq!(res.volume.occupied_count(), 1);
    }

    #[test]
    fn one_pass_stays_within_chebyshev_radius_two() {
        let params = LesionParams {
            time_points: 1,
            sigma: 0.0,
            irregularity_prob: 0.0,
            seed: 11,
            ..Default::default()
        };
        for seed in 0..20 {
            let p = LesionParams { seed, ..params.clone() };
            let res = grow(&p, [32, 32, 32], &[]).unwrap();
            // One time point runs at most two passes; the first pass alone
            // stays within radius 2, so bound per pass count.
            for v in res.volume.occupied_voxels() {
                let d = (0..3)
                    .map(|a| (v[a] as i64 - 16).unsigned_abs())
                    .max()
                    .unwrap();
                assert!(d <= 4, "voxel {v:?} too far after one time point");
            }
        }
    }

    #[test]
    fn grow_is_deterministic() {
        let params = LesionParams {
            time_points: 8,
            seed: 99,
            irregularity_prob: 0.001,
            ..Default::default()
        };
        let a = grow(&params, [96, 96, 96], &[4]).unwrap();
        let b = grow(&params, [96, 96, 96], &[4]).unwrap();
        assert_eq!(a.volume, b.volume);
        assert_eq!(a.snapshots[0].1, b.snapshots[0].1);
    }

    #[test]
    fn snapshots_are_monotone() {
        let params = LesionParams {
            time_points: 5,
            seed: 5,
            ..Default::default()
        };
        let res = grow(&params, [64, 64, 64], &[1, 2, 3, 4, 5]).unwrap();
        assert_eq!(res.snapshots.len(), 5);
        for w in res.snapshots.windows(2) {
            assert!(w[0].1.occupied_count() <= w[1].1.occupied_count());
            assert!(w[0].1.is_subset_of(&w[1].1));
        }
    }

    #[test]
    fn surface_clamp_holds_under_adversarial_outward_stencil() {
        // Outward offsets forced to high probability; the clamp plane must
        // still bound growth.
        let mut p = [[[0.0f64; 5]; 5]; 5];
        p[0][2][2] = 0.9; // dz = -2 axial
        for row in p[1].iter_mut() {
            *row = [0.9; 5]; // entire dz = -1 plane
        }
        p[3][2][2] = 0.3;
        let stencil = GrowthStencil::from_probabilities(p).unwrap();
        let params = LesionParams {
            time_points: 10,
            sigma: 0.5,
            irregularity_prob: 0.0,
            seed: 17,
            ..Default::default()
        };
        let res = grow_with_stencil(&params, [64, 64, 64], &stencil, &[]).unwrap();
        let clamp = res.volume.surface_clamp_z();
        for v in res.volume.occupied_voxels() {
            assert!(v[2] > clamp, "voxel {v:?} at or outward of clamp {clamp}");
        }
    }

    #[test]
    fn project_single_seed_is_single_pixel() {
        let params = LesionParams {
            time_points: 1,
            ..Default::default()
        };
        let vol = new_lesion(&params, [32, 32, 32]).unwrap();
        for axis in [Axis::X, Axis::Y, Axis::Z] {
            let m = project_mask(&vol, axis).unwrap();
            assert_eq!(m.count(), 1);
        }
    }

    #[test]
    fn project_cube_is_square() {
        let params = LesionParams {
            time_points: 1,
            ..Default::default()
        };
        let mut vol = new_lesion(&params, [32, 32, 32]).unwrap();
        for z in 15..18 {
            for y in 15..18 {
                for x in 15..18 {
                    vol.occupy(x, y, z, 1);
                }
            }
        }
        for axis in [Axis::X, Axis::Y, Axis::Z] {
            let m = project_mask(&vol, axis).unwrap();
            assert_eq!(m.count(), 9, "axis {axis:?}");
        }
    }

    #[test]
    fn projection_area_bounds_slice_area() {
        let params = LesionParams {
            time_points: 6,
            seed: 21,
            ..Default::default()
        };
        let res = grow(&params, [64, 64, 64], &[]).unwrap();
        let proj = project_mask(&res.volume, Axis::Z).unwrap();
        let [nx, ny, nz] = res.volume.dims();
        let max_slice = (0..nz)
            .map(|z| {
                (0..ny)
                    .flat_map(|y| (0..nx).map(move |x| (x, y)))
                    .filter(|&(x, y)| res.volume.occupied_at(x, y, z))
                    .count()
            })
            .max()
            .unwrap();
        assert!(proj.count() >= max_slice);
    }

    #[test]
    fn voxel_file_roundtrip() {
        let params = LesionParams {
            time_points: 4,
            seed: 2,
            ..Default::default()
        };
        let res = grow(&params, [48, 48, 48], &[]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("lesion.vox");
        write_voxels(&path, &res.volume).unwrap();
        let (data, dims, pitch) = read_voxels(&path).unwrap();
        assert_eq!(dims, res.volume.dims());
        assert_eq!(pitch, res.volume.pitch_um());
        assert_eq!(
            data.iter().filter(|&&b| b == 1).count(),
            res.volume.occupied_count()
        );
    }
}
