//! Tabulated chromophore absorption curves.
//!
//! Curves are two-column text files (`wavelength_nm  absorption_per_mm` at
//! unit concentration or volume fraction, `#` comments allowed), linearly
//! interpolated in wavelength. A bundled compilation ships with the crate;
//! custom files can be loaded from a directory to swap in different
//! literature data without touching code.

use crate::{Error, Result};
use std::path::Path;
use std::sync::OnceLock;

#[derive(Debug, Clone, PartialEq)]
pub struct ChromophoreCurve {
    /// (wavelength nm, absorption 1/mm), strictly increasing wavelengths.
    rows: Vec<(f64, f64)>,
}

impl ChromophoreCurve {
    pub fn parse(name: &str, text: &str) -> Result<Self> {
        let mut rows = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut it = line.split_whitespace();
            let parse = |tok: Option<&str>| -> Result<f64> {
                tok.and_then(|t| t.parse::<f64>().ok()).ok_or(Error::Parse {
                    what: format!("chromophore table {name}"),
                    offset: lineno + 1,
                    msg: format!("bad row: {line:?}"),
                })
            };
            let l = parse(it.next())?;
            let v = parse(it.next())?;
            rows.push((l, v));
        }
        let curve = ChromophoreCurve { rows };
        curve.validate(name)?;
        Ok(curve)
    }

    fn validate(&self, name: &str) -> Result<()> {
        if self.rows.len() < 2 {
            return Err(Error::InvalidParam(format!(
                "chromophore table {name} needs at least 2 rows"
            )));
        }
        for w in self.rows.windows(2) {
            if w[1].0 <= w[0].0 {
                return Err(Error::InvalidParam(format!(
                    "chromophore table {name}: wavelengths not strictly increasing at {}",
                    w[1].0
                )));
            }
        }
        if self.rows.iter().any(|&(_, v)| v <= 0.0 || !v.is_finite()) {
            return Err(Error::InvalidParam(format!(
                "chromophore table {name}: all values must be positive"
            )));
        }
        Ok(())
    }

    /// Linear interpolation, clamped to the table's wavelength range.
    pub fn eval(&self, lambda_nm: f64) -> f64 {
        let rows = &self.rows;
        if lambda_nm <= rows[0].0 {
            return rows[0].1;
        }
        if lambda_nm >= rows[rows.len() - 1].0 {
            return rows[rows.len() - 1].1;
        }
        let i = rows.partition_point(|&(l, _)| l <= lambda_nm) - 1;
        let (l0, v0) = rows[i];
        let (l1, v1) = rows[i + 1];
        let t = (lambda_nm - l0) / (l1 - l0);
        v0 * (1.0 - t) + v1 * t
    }
}

/// The chromophore set used by the layer mixing rules.
#[derive(Debug, Clone)]
pub struct ChromophoreTable {
    pub eumelanin: ChromophoreCurve,
    pub oxyhemoglobin: ChromophoreCurve,
    pub deoxyhemoglobin: ChromophoreCurve,
    pub water: ChromophoreCurve,
    pub fat: ChromophoreCurve,
}

impl ChromophoreTable {
    /// The compilation bundled with the crate.
    pub fn bundled() -> &'static ChromophoreTable {
        static TABLE: OnceLock<ChromophoreTable> = OnceLock::new();
        TABLE.get_or_init(|| {
            ChromophoreTable {
                eumelanin: ChromophoreCurve::parse(
                    "eumelanin",
                    include_str!("../../data/eumelanin.dat"),
                )
                .expect("bundled eumelanin table is valid"),
                oxyhemoglobin: ChromophoreCurve::parse(
                    "oxyhemoglobin",
                    include_str!("../../data/oxyhemoglobin.dat"),
                )
                .expect("bundled oxyhemoglobin table is valid"),
                deoxyhemoglobin: ChromophoreCurve::parse(
                    "deoxyhemoglobin",
                    include_str!("../../data/deoxyhemoglobin.dat"),
                )
                .expect("bundled deoxyhemoglobin table is valid"),
                water: ChromophoreCurve::parse("water", include_str!("../../data/water.dat"))
                    .expect("bundled water table is valid"),
                fat: ChromophoreCurve::parse("fat", include_str!("../../data/fat.dat"))
                    .expect("bundled fat table is valid"),
            }
        })
    }

    /// Load `eumelanin.dat`, `oxyhemoglobin.dat`, `deoxyhemoglobin.dat`,
    /// `water.dat`, `fat.dat` from a directory.
    pub fn from_dir(dir: &Path) -> Result<ChromophoreTable> {
        let load = |name: &str| -> Result<ChromophoreCurve> {
            let path = dir.join(format!("{name}.dat"));
            let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
            ChromophoreCurve::parse(name, &text)
        };
        Ok(ChromophoreTable {
            eumelanin: load("eumelanin")?,
            oxyhemoglobin: load("oxyhemoglobin")?,
            deoxyhemoglobin: load("deoxyhemoglobin")?,
            water: load("water")?,
            fat: load("fat")?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optics::spectrum::{LAMBDA_MAX, LAMBDA_MIN};

    #[test]
    fn bundled_tables_parse_and_are_positive() {
        let t = ChromophoreTable::bundled();
        for curve in [
            &t.eumelanin,
            &t.oxyhemoglobin,
            &t.deoxyhemoglobin,
            &t.water,
            &t.fat,
        ] {
            let mut l = LAMBDA_MIN;
            while l <= LAMBDA_MAX {
                assert!(curve.eval(l) > 0.0, "curve nonpositive at {l}");
                l += 5.0;
            }
        }
    }

    #[test]
    fn melanin_absorption_decreases_with_wavelength() {
        let t = ChromophoreTable::bundled();
        assert!(t.eumelanin.eval(450.0) > t.eumelanin.eval(700.0));
        let mut prev = t.eumelanin.eval(LAMBDA_MIN);
        let mut l = LAMBDA_MIN + 10.0;
        while l <= LAMBDA_MAX {
            let v = t.eumelanin.eval(l);
            assert!(v < prev);
            prev = v;
            l += 10.0;
        }
    }

    #[test]
    fn deoxy_exceeds_oxy_in_red() {
        let t = ChromophoreTable::bundled();
        assert!(t.deoxyhemoglobin.eval(660.0) > 3.0 * t.oxyhemoglobin.eval(660.0));
    }

    #[test]
    fn interpolation_is_linear_between_anchors() {
        let c = ChromophoreCurve::parse("test", "400 1.0\n500 3.0\n").unwrap();
        assert!((c.eval(450.0) - 2.0).abs() < 1e-12);
        assert_eq!(c.eval(300.0), 1.0);
        assert_eq!(c.eval(600.0), 3.0);
    }

    #[test]
    fn parse_rejects_bad_rows() {
        assert!(ChromophoreCurve::parse("bad", "400 1.0\nnot a row\n").is_err());
        assert!(ChromophoreCurve::parse("bad", "500 1.0\n400 2.0\n").is_err());
        assert!(ChromophoreCurve::parse("bad", "400 0.0\n500 1.0\n").is_err());
    }
}
