//! Rough dielectric microfacet BSDF for the air-skin interface.
//!
//! GGX distribution with Smith shadowing, sampled through the distribution
//! of visible normals so the sample weight `G1(wo)` never exceeds one.
//! Directions live in the local shading frame (+z = outward normal) and
//! point away from the surface; `wi.z > 0` means the ray arrived from air.
//!
//! `eval` implements the reciprocal microfacet BRDF/BTDF values so tests can
//! check reciprocity; transport uses `sample` only. The `radiance_scale`
//! carried by samples is the eta^2 radiance compression across a refractive
//! boundary; it cancels over any enter/exit pair.

use super::geom::{add, dot, neg, normalize, scale, Vec3};
use rand::Rng;

/// Below this roughness the interface is treated as a smooth dielectric.
pub const SMOOTH_ALPHA: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoughDielectric {
    /// Interior index of refraction (exterior is 1).
    pub eta: f64,
    /// GGX roughness.
    pub alpha: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BsdfSample {
    pub direction: Vec3,
    /// Microfacet sample weight, always in [0, 1].
    pub weight: f64,
    /// Radiance compression factor (eta_i/eta_o)^2 for refraction, 1 for
    /// reflection; applied by radiance-transport integrators.
    pub radiance_scale: f64,
    pub refracted: bool,
}

/// Fresnel reflectance for an interface with interior index `eta` given the
/// signed cosine between the incident direction and the (upper-oriented)
/// microfacet normal. Returns (F, cos_theta_t, eta_i / eta_t).
fn fresnel_dielectric(cos_signed: f64, eta: f64) -> (f64, f64, f64) {
    let (eta_i, eta_t) = if cos_signed >= 0.0 { (1.0, eta) } else { (eta, 1.0) };
    let ratio = eta_i / eta_t;
    let c = cos_signed.abs().min(1.0);
    let sin_t2 = ratio * ratio * (1.0 - c * c);
    if sin_t2 >= 1.0 {
        return (1.0, 0.0, ratio); // total internal reflection
    }
    let cos_t = (1.0 - sin_t2).sqrt();
    let r_par = (eta_t * c - eta_i * cos_t) / (eta_t * c + eta_i * cos_t);
    let r_perp = (eta_i * c - eta_t * cos_t) / (eta_i * c + eta_t * cos_t);
    (0.5 * (r_par * r_par + r_perp * r_perp), cos_t, ratio)
}

fn ggx_lambda(w: Vec3, alpha: f64) -> f64 {
    let c2 = w[2] * w[2];
    if c2 >= 1.0 {
        return 0.0;
    }
    let tan2 = (1.0 - c2) / c2;
    0.5 * (-1.0 + (1.0 + alpha * alpha * tan2).sqrt())
}

fn ggx_d(m: Vec3, alpha: f64) -> f64 {
    if m[2] <= 0.0 {
        return 0.0;
    }
    let a2 = alpha * alpha;
    let t = m[2] * m[2] * (a2 - 1.0) + 1.0;
    a2 / (std::f64::consts::PI * t * t)
}

/// Smith masking toward the upper-oriented microfacet normal `m`; zero for
/// directions that see the facet's back.
fn g1(w: Vec3, m: Vec3, alpha: f64) -> f64 {
    if dot(w, m) * w[2] <= 0.0 {
        return 0.0;
    }
    1.0 / (1.0 + ggx_lambda(w, alpha))
}

/// Sample the GGX distribution of visible normals for a view direction in
/// the upper hemisphere.
fn sample_vndf(view: Vec3, alpha: f64, u1: f64, u2: f64) -> Vec3 {
    let vh = normalize([alpha * view[0], alpha * view[1], view[2]]);
    let lensq = vh[0] * vh[0] + vh[1] * vh[1];
    let t1 = if lensq > 1e-18 {
        let inv = 1.0 / lensq.sqrt();
        [-vh[1] * inv, vh[0] * inv, 0.0]
    } else {
        [1.0, 0.0, 0.0]
    };
    let t2 = [
        vh[1] * t1[2] - vh[2] * t1[1],
        vh[2] * t1[0] - vh[0] * t1[2],
        vh[0] * t1[1] - vh[1] * t1[0],
    ];
    let r = u1.sqrt();
    let phi = std::f64::consts::TAU * u2;
    let p1 = r * phi.cos();
    let mut p2 = r * phi.sin();
    let s = 0.5 * (1.0 + vh[2]);
    p2 = (1.0 - s) * (1.0 - p1 * p1).max(0.0).sqrt() + s * p2;
    let p3 = (1.0 - p1 * p1 - p2 * p2).max(0.0).sqrt();
    let nh = [
        p1 * t1[0] + p2 * t2[0] + p3 * vh[0],
        p1 * t1[1] + p2 * t2[1] + p3 * vh[1],
        p1 * t1[2] + p2 * t2[2] + p3 * vh[2],
    ];
    normalize([alpha * nh[0], alpha * nh[1], nh[2].max(1e-9)])
}

fn reflect_about(wi: Vec3, m: Vec3) -> Vec3 {
    let c = dot(wi, m);
    add(scale(m, 2.0 * c), neg(wi))
}

/// Refraction of `wi` about the upper-oriented microfacet normal `m`, given
/// the signed incident cosine and precomputed transmitted cosine.
fn refract_about(wi: Vec3, m: Vec3, cos_signed: f64, cos_t: f64, ratio: f64) -> Vec3 {
    let side = if cos_signed >= 0.0 { 1.0 } else { -1.0 };
    normalize(add(
        scale(wi, -ratio),
        scale(m, (ratio * cos_signed.abs() - cos_t) * side),
    ))
}

impl RoughDielectric {
    pub fn new(eta: f64, alpha: f64) -> Self {
        Self { eta, alpha }
    }

    fn is_smooth(&self) -> bool {
        self.alpha <= SMOOTH_ALPHA
    }

    /// Sample an outgoing direction for incident `wi` (unit, local frame,
    /// pointing away from the surface). Returns None for degenerate
    /// geometry or side-inconsistent samples, whose contribution is zero.
    pub fn sample(&self, wi: Vec3, rng: &mut impl Rng) -> Option<BsdfSample> {
        if wi[2] == 0.0 {
            return None;
        }
        let m = if self.is_smooth() {
            [0.0, 0.0, 1.0]
        } else {
            let view = if wi[2] >= 0.0 { wi } else { neg(wi) };
            sample_vndf(view, self.alpha, rng.gen(), rng.gen())
        };
        let cos_signed = dot(wi, m);
        if cos_signed == 0.0 {
            return None;
        }
        let (f, cos_t, ratio) = fresnel_dielectric(cos_signed, self.eta);
        if rng.gen::<f64>() < f {
            let wo = reflect_about(wi, m);
            if wo[2] * wi[2] <= 0.0 {
                return None;
            }
            let weight = if self.is_smooth() { 1.0 } else { g1(wo, m, self.alpha) };
            Some(BsdfSample {
                direction: wo,
                weight,
                radiance_scale: 1.0,
                refracted: false,
            })
        } else {
            let wo = refract_about(wi, m, cos_signed, cos_t, ratio);
            if wo[2] * wi[2] >= 0.0 {
                return None;
            }
            let weight = if self.is_smooth() { 1.0 } else { g1(wo, m, self.alpha) };
            Some(BsdfSample {
                direction: wo,
                weight,
                // Radiance compresses by (eta_i/eta_o)^2 across the boundary.
                radiance_scale: ratio * ratio,
                refracted: true,
            })
        }
    }

    /// Microfacet BRDF/BTDF value (reciprocal formulation). Reflection when
    /// `wi` and `wo` share a hemisphere, transmission otherwise.
    pub fn eval(&self, wi: Vec3, wo: Vec3) -> f64 {
        let alpha = self.alpha.max(SMOOTH_ALPHA);
        if wi[2] == 0.0 || wo[2] == 0.0 {
            return 0.0;
        }
        if wi[2] * wo[2] > 0.0 {
            // Reflection: half vector oriented upward.
            let mut m = add(wi, wo);
            if dot(m, m) < 1e-24 {
                return 0.0;
            }
            m = normalize(m);
            if m[2] < 0.0 {
                m = neg(m);
            }
            let (f, _, _) = fresnel_dielectric(dot(wi, m), self.eta);
            let g = g1(wi, m, alpha) * g1(wo, m, alpha);
            f * ggx_d(m, alpha) * g / (4.0 * wi[2].abs() * wo[2].abs())
        } else {
            // Transmission: generalized half vector.
            let (eta_i, eta_o) = if wi[2] > 0.0 { (1.0, self.eta) } else { (self.eta, 1.0) };
            let mut m = neg(add(scale(wi, eta_i), scale(wo, eta_o)));
            if dot(m, m) < 1e-24 {
                return 0.0;
            }
            m = normalize(m);
            if m[2] < 0.0 {
                m = neg(m);
            }
            let c_i = dot(wi, m);
            let c_o = dot(wo, m);
            let (f, _, _) = fresnel_dielectric(c_i, self.eta);
            let g = g1(wi, m, alpha) * g1(wo, m, alpha);
            let denom = eta_i * c_i + eta_o * c_o;
            if denom.abs() < 1e-12 {
                return 0.0;
            }
            let jac = (c_i * c_o / (wi[2] * wo[2])).abs();
            jac * eta_o * eta_o * (1.0 - f) * ggx_d(m, alpha) * g / (denom * denom)
        }
    }
}
