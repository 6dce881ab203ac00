//! Controlled-variation sweeps: Cartesian expansion of declared parameter
//! axes over a set of base model seeds.

use crate::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepAxes {
    /// One base skin/lesion model per seed.
    pub base_seeds: Vec<u64>,
    #[serde(default)]
    pub blood: Option<Vec<f64>>,
    #[serde(default)]
    pub melanosome: Option<Vec<f64>>,
    #[serde(default)]
    pub regularity: Option<Vec<f64>>,
    #[serde(default)]
    pub hair: Option<Vec<bool>>,
}

/// One fully resolved sweep row. Fields are None when the axis was not
/// declared (the sampler then uses its usual per-seed draw).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub base_seed: u64,
    pub blood: Option<f64>,
    pub melanosome: Option<f64>,
    pub regularity: Option<f64>,
    pub hair: Option<bool>,
}

impl SweepAxes {
    pub fn validate(&self) -> Result<()> {
        if self.base_seeds.is_empty() {
            return Err(Error::Config("sweep.base_seeds: must not be empty".into()));
        }
        fn check<T>(name: &str, axis: &Option<Vec<T>>) -> Result<()> {
            if let Some(v) = axis {
                if v.is_empty() {
                    return Err(Error::Config(format!("sweep.{name}: declared axis is empty")));
                }
            }
            Ok(())
        }
        check("blood", &self.blood)?;
        check("melanosome", &self.melanosome)?;
        check("regularity", &self.regularity)?;
        check("hair", &self.hair)?;
        Ok(())
    }

    fn axis_len<T>(axis: &Option<Vec<T>>) -> usize {
        axis.as_ref().map_or(1, |v| v.len())
    }

    pub fn expansion_len(&self) -> Result<usize> {
        self.validate()?;
        Ok(self.base_seeds.len()
            * Self::axis_len(&self.blood)
            * Self::axis_len(&self.melanosome)
            * Self::axis_len(&self.regularity)
            * Self::axis_len(&self.hair))
    }
}

/// Expand the declared axes against the base seeds. Row count is the
/// product of all axis lengths times the seed count; row order iterates
/// seeds outermost, then blood, melanosome, regularity, hair.
pub fn sweep_expand(axes: &SweepAxes) -> Result<Vec<SweepRow>> {
    axes.validate()?;
    let mut rows = Vec::with_capacity(axes.expansion_len()?);
    let opts = |v: &Option<Vec<f64>>| -> Vec<Option<f64>> {
        match v {
            Some(list) => list.iter().copied().map(Some).collect(),
            None => vec![None],
        }
    };
    let hair_opts: Vec<Option<bool>> = match &axes.hair {
        Some(list) => list.iter().copied().map(Some).collect(),
        None => vec![None],
    };
    for &seed in &axes.base_seeds {
        for &blood in &opts(&axes.blood) {
            for &mel in &opts(&axes.melanosome) {
                for &reg in &opts(&axes.regularity) {
                    for &hair in &hair_opts {
                        rows.push(SweepRow {
                            base_seed: seed,
                            blood,
                            melanosome: mel,
                            regularity: reg,
                            hair,
                        });
                    }
                }
            }
        }
    }
    Ok(rows)
}
