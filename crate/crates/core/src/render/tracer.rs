//! The volumetric transport loop.
//!
//! Light paths start at the camera in air, refract through the rough
//! interface, and random-walk inside the layered media. Heterogeneous
//! extinction (layers, baked blood field, lesion voxels) is handled by
//! null-collision tracking against piecewise majorants: a conservative
//! bound outside the lesion's bounding box and a larger one inside, so the
//! optically dense lesion does not slow the rest of the volume down.
//!
//! Each path carries four jointly sampled wavelengths (one hero making the
//! stochastic decisions, the rest following with probability-ratio weights)
//! so spectrally sharp absorbers resolve without per-wavelength paths.

use super::bsdf::RoughDielectric;
use super::geom::{at, dot, neg, normalize, orthonormal_basis, Vec3};
use super::phase::sample_hg;
use super::scene::{Backing, PacketCoeffs, RenderScene};
use rand::Rng;

const EPS_HOP: f64 = 1e-6;
/// Hard cap on total tracking events (incl. null collisions) per path.
const MAX_EVENTS: u32 = 1 << 16;

#[derive(Debug, Clone, Copy, Default)]
pub struct TraceStats {
    /// Radiance samples replaced by zero because they went non-finite.
    pub nonfinite: u32,
    /// Lane weights truncated at the firefly cap.
    pub weight_capped: u32,
    /// Interface samples discarded for geometric side inconsistency.
    pub interface_rejects: u32,
    /// Tentative collisions where local extinction exceeded the majorant.
    pub majorant_breaches: u32,
    /// Paths cut by the per-path event budget.
    pub event_cap_hits: u32,
}

impl TraceStats {
    pub fn absorb(&mut self, other: TraceStats) {
        self.nonfinite += other.nonfinite;
        self.weight_capped += other.weight_capped;
        self.interface_rejects += other.interface_rejects;
        self.majorant_breaches += other.majorant_breaches;
        self.event_cap_hits += other.event_cap_hits;
    }

    /// Total anomalous events (diagnostic).
    pub fn clamped_total(&self) -> u32 {
        self.weight_capped + self.interface_rejects + self.majorant_breaches + self.event_cap_hits
    }
}

#[derive(Debug, Clone, Copy)]
pub struct TraceConfig {
    pub max_depth: u32,
    pub rr_start: u32,
}

impl Default for TraceConfig {
    fn default() -> Self {
        Self {
            max_depth: 512,
            rr_start: 16,
        }
    }
}

enum MediumOutcome {
    /// Real collision happened; position/direction already updated.
    Scattered,
    HitTop(Vec3),
    HitBottom(Vec3),
    Dead,
}

struct PathState {
    o: Vec3,
    d: Vec3,
    w: [f64; 4],
    depth: u32,
    events: u32,
}

/// Trace one path, returning spectral radiance at the packet wavelengths.
pub fn trace_path(
    scene: &RenderScene,
    origin: Vec3,
    dir: Vec3,
    lambdas: &[f64; 4],
    cfg: &TraceConfig,
    rng: &mut impl Rng,
    stats: &mut TraceStats,
) -> [f64; 4] {
    let coeffs = scene.packet_coeffs(lambdas);
    trace_path_with_coeffs(scene, origin, dir, lambdas, &coeffs, cfg, rng, stats)
}

#[allow(clippy::too_many_arguments)]
pub fn trace_path_with_coeffs(
    scene: &RenderScene,
    origin: Vec3,
    dir: Vec3,
    lambdas: &[f64; 4],
    coeffs: &PacketCoeffs,
    cfg: &TraceConfig,
    rng: &mut impl Rng,
    stats: &mut TraceStats,
) -> [f64; 4] {
    let mut st = PathState {
        o: origin,
        d: normalize(dir),
        w: [1.0; 4],
        depth: 0,
        events: 0,
    };
    let mut radiance = [0.0f64; 4];

    loop {
        if st.depth >= cfg.max_depth || st.events >= MAX_EVENTS {
            break;
        }
        if st.depth >= cfg.rr_start && !russian_roulette(&mut st, rng) {
            break;
        }

        if st.o[2] > 0.0 || !scene.skin_enabled {
            match air_step(scene, &mut st, lambdas, rng, stats) {
                AirOutcome::Escaped => {
                    for i in 0..4 {
                        radiance[i] = st.w[i] * scene.env.radiance(st.d, lambdas[i]);
                    }
                    break;
                }
                AirOutcome::Continue => continue,
                AirOutcome::Dead => break,
            }
        }

        match medium_walk(scene, &mut st, coeffs, cfg, rng, stats) {
            MediumOutcome::Scattered => continue,
            MediumOutcome::HitTop(p) => {
                if !interface_event(scene, &mut st, p, rng, stats) {
                    break;
                }
                st.depth += 1;
            }
            MediumOutcome::HitBottom(p) => match scene.config.backing {
                Backing::Absorb => break,
                Backing::Mirror => {
                    st.d = [st.d[0], st.d[1], -st.d[2]];
                    st.o = [p[0], p[1], scene.backing_z() + EPS_HOP];
                    st.depth += 1;
                }
            },
            MediumOutcome::Dead => break,
        }
    }

    for v in radiance.iter_mut() {
        if !v.is_finite() {
            stats.nonfinite += 1;
            *v = 0.0;
        }
    }
    radiance
}

/// Russian roulette on the maximum lane weight. Paths at or above unit
/// throughput always survive (and are not inflated), so lossless scenes
/// keep their weights exactly.
fn russian_roulette(st: &mut PathState, rng: &mut impl Rng) -> bool {
    let q = st.w.iter().cloned().fold(0.0, f64::max).clamp(0.05, 1.0);
    if q >= 1.0 {
        return true;
    }
    if rng.gen::<f64>() >= q {
        return false;
    }
    for v in st.w.iter_mut() {
        *v /= q;
    }
    true
}

enum AirOutcome {
    Escaped,
    Continue,
    Dead,
}

fn air_step(
    scene: &RenderScene,
    st: &mut PathState,
    lambdas: &[f64; 4],
    rng: &mut impl Rng,
    stats: &mut TraceStats,
) -> AirOutcome {
    let t_plane = if scene.skin_enabled && st.d[2] < -1e-15 {
        Some(-st.o[2] / st.d[2])
    } else {
        None
    };
    let t_hair = scene
        .hair
        .as_ref()
        .filter(|_| scene.skin_enabled)
        .and_then(|h| h.intersect(st.o, st.d, EPS_HOP, t_plane.unwrap_or(f64::INFINITY)));
    match (t_hair, t_plane) {
        (Some((t, seg)), _) => {
            let p = at(st.o, st.d, t);
            let mut n = scene.hair.as_ref().unwrap().normal_at(seg, p);
            if dot(n, st.d) > 0.0 {
                n = neg(n);
            }
            for (wv, &l) in st.w.iter_mut().zip(lambdas.iter()) {
                *wv *= scene.hair_albedo.eval(l);
            }
            let u1: f64 = rng.gen();
            let u2: f64 = rng.gen();
            let r = u1.sqrt();
            let phi = std::f64::consts::TAU * u2;
            st.d = local_to_world(n, [r * phi.cos(), r * phi.sin(), (1.0 - u1).max(0.0).sqrt()]);
            st.o = at(p, n, EPS_HOP);
            st.depth += 1;
            st.events += 1;
            AirOutcome::Continue
        }
        (None, Some(t)) => {
            let p = at(st.o, st.d, t);
            st.events += 1;
            if interface_event(scene, st, p, rng, stats) {
                st.depth += 1;
                AirOutcome::Continue
            } else {
                AirOutcome::Dead
            }
        }
        (None, None) => AirOutcome::Escaped,
    }
}

/// Null-collision tracking until a real scatter or a slab boundary.
fn medium_walk(
    scene: &RenderScene,
    st: &mut PathState,
    coeffs: &PacketCoeffs,
    cfg: &TraceConfig,
    rng: &mut impl Rng,
    stats: &mut TraceStats,
) -> MediumOutcome {
    let backing_z = scene.backing_z();
    let t_top = if st.d[2] > 1e-15 {
        (0.0 - st.o[2]) / st.d[2]
    } else {
        f64::INFINITY
    };
    let t_bot = if st.d[2] < -1e-15 {
        (backing_z - st.o[2]) / st.d[2]
    } else {
        f64::INFINITY
    };
    let t_surface = t_top.min(t_bot);
    let lesion_span = scene.lesion_bounds_span(st.o, st.d);

    let mut t_cur = 0.0f64;
    loop {
        st.events += 1;
        if st.events >= MAX_EVENTS {
            stats.event_cap_hits += 1;
            return MediumOutcome::Dead;
        }
        let p_cur = at(st.o, st.d, t_cur + EPS_HOP);
        let in_lesion_region = scene.in_lesion_bounds(p_cur);
        let band = scene.band_at(p_cur[2]);
        let majorant = scene.majorant(coeffs, band, in_lesion_region);
        // End of the current constant-majorant region along the ray: the
        // slab surface, the band's depth bounds, or the lesion box.
        let mut t_region_end = t_surface;
        let (band_lo, band_hi) = scene.band_range(band);
        if st.d[2] < -1e-15 {
            t_region_end = t_region_end.min((band_lo - st.o[2]) / st.d[2]);
        } else if st.d[2] > 1e-15 {
            t_region_end = t_region_end.min((band_hi - st.o[2]) / st.d[2]);
        }
        if let Some((t_in, t_out)) = lesion_span {
            if in_lesion_region {
                if t_out > t_cur {
                    t_region_end = t_region_end.min(t_out);
                }
            } else if t_in > t_cur {
                t_region_end = t_region_end.min(t_in);
            }
        }

        let t_next = if majorant <= 1e-12 {
            f64::INFINITY
        } else {
            t_cur - (1.0 - rng.gen::<f64>()).ln() / majorant
        };
        if t_next >= t_region_end {
            if t_region_end >= t_surface {
                // A real slab boundary.
                return if t_surface == t_bot && t_bot <= t_top {
                    MediumOutcome::HitBottom(at(st.o, st.d, t_bot))
                } else if t_top.is_finite() {
                    MediumOutcome::HitTop(at(st.o, st.d, t_top))
                } else {
                    // Horizontal ray in a transparent slab: nothing to hit.
                    MediumOutcome::Dead
                };
            }
            t_cur = t_region_end + EPS_HOP;
            continue;
        }

        t_cur = t_next;
        let p = at(st.o, st.d, t_cur);
        let (mu_a, mu_s, g) = scene
            .medium_at(p, coeffs)
            .unwrap_or(([0.0; 4], [0.0; 4], 0.0));
        // Collision classification by the packet-average extinction keeps
        // the per-wavelength ratio weights bounded (by the lane count) even
        // when one wavelength is near the majorant and another is nearly
        // transparent.
        let mut mu_t_avg =
            mu_a.iter().zip(mu_s.iter()).map(|(a, s)| a + s).sum::<f64>() / 4.0;
        if mu_t_avg > majorant * (1.0 + 1e-9) {
            stats.majorant_breaches += 1;
            mu_t_avg = majorant;
        } else {
            mu_t_avg = mu_t_avg.min(majorant);
        }
        let p_real = mu_t_avg / majorant;
        if rng.gen::<f64>() < p_real {
            // Real collision: the albedo enters the weight, the direction
            // comes from the phase function.
            for (w, s) in st.w.iter_mut().zip(mu_s.iter()) {
                *w *= (s / majorant) / p_real;
            }
            if st.w.iter().all(|&v| v <= 0.0) {
                return MediumOutcome::Dead;
            }
            clamp_weights(st, stats);
            let (nd, _) = sample_hg(st.d, g, rng);
            st.d = nd;
            st.o = p;
            st.depth += 1;
            if st.depth >= cfg.max_depth {
                return MediumOutcome::Dead;
            }
            return MediumOutcome::Scattered;
        }
        // Null collision: ratio-reweight every wavelength lane.
        for ((w, a), s) in st.w.iter_mut().zip(mu_a.iter()).zip(mu_s.iter()) {
            let ratio = (1.0 - (a + s) / majorant) / (1.0 - p_real);
            if ratio >= 0.0 {
                *w *= ratio;
            } else {
                if ratio <= -1e-9 {
                    stats.majorant_breaches += 1;
                }
                *w = 0.0;
            }
        }
        clamp_weights(st, stats);
    }
}

/// Firefly guard: ratio weights are bounded per event but can still compound
/// over long chains; cap them (logged) at a level far above anything a
/// well-behaved path reaches.
const WEIGHT_CAP: f64 = 512.0;

fn clamp_weights(st: &mut PathState, stats: &mut TraceStats) {
    for v in st.w.iter_mut() {
        if *v > WEIGHT_CAP {
            *v = WEIGHT_CAP;
            stats.weight_capped += 1;
        }
    }
}

fn local_to_world(n: Vec3, local: Vec3) -> Vec3 {
    let (t, b) = orthonormal_basis(n);
    normalize([
        t[0] * local[0] + b[0] * local[1] + n[0] * local[2],
        t[1] * local[0] + b[1] * local[1] + n[1] * local[2],
        t[2] * local[0] + b[2] * local[1] + n[2] * local[2],
    ])
}

/// Refract/reflect at the air-skin interface at plane point `p`. Returns
/// false when the path should terminate (side-inconsistent sample).
fn interface_event(
    scene: &RenderScene,
    st: &mut PathState,
    p: Vec3,
    rng: &mut impl Rng,
    stats: &mut TraceStats,
) -> bool {
    let bsdf = RoughDielectric::new(scene.interface_ior(), scene.interface_roughness());
    let mut n = scene.interface_normal(p[0], p[1]);
    let wi_world = neg(st.d);
    // The shading normal must present the same side as the geometric plane.
    if dot(n, wi_world) * wi_world[2] <= 0.0 {
        n = [0.0, 0.0, 1.0];
    }
    let (t, b) = orthonormal_basis(n);
    let wi_local = [dot(wi_world, t), dot(wi_world, b), dot(wi_world, n)];
    let sample = match bsdf.sample(wi_local, rng) {
        Some(s) => s,
        None => {
            stats.interface_rejects += 1;
            return false;
        }
    };
    let wo = local_to_world(n, sample.direction);
    let incoming_from_above = st.d[2] < 0.0;
    let goes_down = wo[2] < 0.0;
    let consistent = if sample.refracted {
        incoming_from_above == goes_down
    } else {
        incoming_from_above != goes_down
    };
    if !consistent || wo[2].abs() < 1e-12 {
        stats.interface_rejects += 1;
        return false;
    }
    let factor = sample.weight * sample.radiance_scale;
    for v in st.w.iter_mut() {
        *v *= factor;
    }
    st.d = wo;
    st.o = [p[0], p[1], if goes_down { -EPS_HOP } else { EPS_HOP }];
    true
}
