//! Fixed-grid spectra.
//!
//! All spectral quantities live on one shared wavelength grid so no
//! operation ever resamples: 16 uniform samples spanning 380-780 nm
//! inclusive. Values are context-dependent (radiance, or coefficients in
//! 1/mm); evaluation between grid points interpolates linearly and clamps
//! at the ends.

use crate::{Error, Result};
use serde::{Deserialize, Serialize};

pub const SPECTRUM_SAMPLES: usize = 16;
pub const LAMBDA_MIN: f64 = 380.0;
pub const LAMBDA_MAX: f64 = 780.0;
pub const LAMBDA_SPAN: f64 = LAMBDA_MAX - LAMBDA_MIN;
/// Grid spacing in nm.
pub const LAMBDA_STEP: f64 = LAMBDA_SPAN / (SPECTRUM_SAMPLES as f64 - 1.0);

/// Wavelength of grid sample `i`.
#[inline]
pub fn lambda_at(i: usize) -> f64 {
    LAMBDA_MIN + i as f64 * LAMBDA_STEP
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    values: [f64; SPECTRUM_SAMPLES],
}

impl Spectrum {
    pub const fn zero() -> Self {
        Self {
            values: [0.0; SPECTRUM_SAMPLES],
        }
    }

    pub const fn splat(v: f64) -> Self {
        Self {
            values: [v; SPECTRUM_SAMPLES],
        }
    }

    /// Build by evaluating `f` at each grid wavelength.
    pub fn from_fn(mut f: impl FnMut(f64) -> f64) -> Self {
        let mut values = [0.0; SPECTRUM_SAMPLES];
        for (i, v) in values.iter_mut().enumerate() {
            *v = f(lambda_at(i));
        }
        Self { values }
    }

    pub const fn from_values(values: [f64; SPECTRUM_SAMPLES]) -> Self {
        Self { values }
    }

    pub fn values(&self) -> &[f64; SPECTRUM_SAMPLES] {
        &self.values
    }

    #[inline]
    pub fn sample(&self, i: usize) -> f64 {
        self.values[i]
    }

    /// Linear interpolation at an arbitrary wavelength, clamped to the grid.
    pub fn eval(&self, lambda_nm: f64) -> f64 {
        let t = (lambda_nm - LAMBDA_MIN) / LAMBDA_STEP;
        if t <= 0.0 {
            return self.values[0];
        }
        if t >= (SPECTRUM_SAMPLES - 1) as f64 {
            return self.values[SPECTRUM_SAMPLES - 1];
        }
        let i = t.floor() as usize;
        let f = t - i as f64;
        self.values[i] * (1.0 - f) + self.values[i + 1] * f
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        let mut out = *self;
        for v in out.values.iter_mut() {
            *v = f(*v);
        }
        out
    }

    pub fn zip(&self, other: &Spectrum, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut out = *self;
        for (v, o) in out.values.iter_mut().zip(other.values.iter()) {
            *v = f(*v, *o);
        }
        out
    }

    pub fn add(&self, other: &Spectrum) -> Self {
        self.zip(other, |a, b| a + b)
    }

    pub fn scale(&self, k: f64) -> Self {
        self.map(|v| v * k)
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn all_nonnegative(&self) -> bool {
        self.values.iter().all(|&v| v >= 0.0)
    }

    /// Coefficient spectra must be finite and nonnegative.
    pub fn validate_coefficient(&self, what: &str) -> Result<()> {
        if !self.is_finite() || !self.all_nonnegative() {
            return Err(Error::InvalidParam(format!(
                "{what} spectrum has negative or non-finite samples"
            )));
        }
        Ok(())
    }
}
