//! Henyey-Greenstein phase function and its exact importance sampler.

use super::geom::{from_local, Vec3};
use rand::Rng;

const INV_FOUR_PI: f64 = 1.0 / (4.0 * std::f64::consts::PI);

/// Phase function value for scattering cosine `cos_theta` between the
/// incoming propagation direction and the new direction.
#[inline]
pub fn hg_phase(cos_theta: f64, g: f64) -> f64 {
    let denom = 1.0 + g * g - 2.0 * g * cos_theta;
    INV_FOUR_PI * (1.0 - g * g) / (denom * denom.sqrt())
}

/// Sample a new propagation direction given the current one. The sampled
/// deflection cosine has mean exactly `g`; `g = 0` degenerates to a uniform
/// sphere direction. Returns (direction, phase value == pdf).
pub fn sample_hg(dir: Vec3, g: f64, rng: &mut impl Rng) -> (Vec3, f64) {
    let u1: f64 = rng.gen();
    let u2: f64 = rng.gen();
    let cos_theta = if g.abs() < 1e-3 {
        1.0 - 2.0 * u1
    } else {
        let sq = (1.0 - g * g) / (1.0 - g + 2.0 * g * u1);
        (1.0 + g * g - sq * sq) / (2.0 * g)
    };
    let sin_theta = (1.0 - cos_theta * cos_theta).max(0.0).sqrt();
    let phi = std::f64::consts::TAU * u2;
    let local = [sin_theta * phi.cos(), sin_theta * phi.sin(), cos_theta];
    let out = from_local(dir, local);
    (out, hg_phase(cos_theta, g))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::render::geom::dot;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn phase_integrates_to_one() {
        // Quadrature over the sphere: 2*pi * int p(cos) dcos = 1.
        for g in [0.0, 0.3, 0.9, -0.5] {
            let n = 20_000;
            let mut acc = 0.0;
            for i in 0..n {
                let c = -1.0 + (i as f64 + 0.5) * 2.0 / n as f64;
                acc += hg_phase(c, g) * (2.0 / n as f64);
            }
            let integral = acc * std::f64::consts::TAU;
            assert!((integral - 1.0).abs() < 1e-4, "g={g}: {integral}");
        }
    }

    #[test]
    fn isotropic_sampling_is_uniform() {
        // Chi-square over 10 cos-theta bins for g = 0.
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 100_000usize;
        let mut bins = [0usize; 10];
        let dir = [0.0, 0.0, 1.0];
        for _ in 0..n {
            let (out, _) = sample_hg(dir, 0.0, &mut rng);
            let c = dot(dir, out).clamp(-1.0, 1.0);
            let b = (((c + 1.0) / 2.0) * 10.0).min(9.0) as usize;
            bins[b] += 1;
        }
        let expect = n as f64 / 10.0;
        let chi2: f64 = bins.iter().map(|&o| (o as f64 - expect).powi(2) / expect).sum();
        // 9 dof, alpha = 0.001 critical value is 27.88.
        assert!(chi2 < 27.88, "chi2 = {chi2}, bins {bins:?}");
    }

    #[test]
    fn sampled_mean_cosine_matches_g() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let dir = [0.6, -0.64, 0.48];
        for g in [0.3, 0.9] {
            let n = 1_000_000usize;
            let mut acc = 0.0;
            for _ in 0..n {
                let (out, _) = sample_hg(dir, g, &mut rng);
                acc += dot(dir, out);
            }
            let mean = acc / n as f64;
            assert!((mean - g).abs() < 0.01, "g={g}: mean {mean}");
        }
    }

    #[test]
    fn sample_returns_unit_vectors_and_pdf() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let dir = [0.0, 1.0, 0.0];
        for _ in 0..1000 {
            let (out, p) = sample_hg(dir, 0.7, &mut rng);
            let n = (out[0] * out[0] + out[1] * out[1] + out[2] * out[2]).sqrt();
            assert!((n - 1.0).abs() < 1e-9);
            let c = dot(dir, out);
            assert!((p - hg_phase(c, 0.7)).abs() < 1e-9);
        }
    }
}
