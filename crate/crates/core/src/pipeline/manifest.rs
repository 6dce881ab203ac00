//! Dataset manifest: one CSV row per generated image.
//!
//! The manifest is byte-stable for a given (config, master seed): rows are
//! sorted by id on finalization and carry no wall-clock fields (timing goes
//! to the separate run report).

use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestRow {
    pub id: String,
    pub index: u32,
    pub seed: u64,
    pub split: String,
    pub melanosome: f64,
    pub blood: f64,
    pub regularity: f64,
    pub time_points: u32,
    pub hair: bool,
    pub env: String,
    pub resolution: usize,
    pub spp: u32,
    pub crop_fraction: f64,
    pub ita_deg: Option<f64>,
    pub ita_category: String,
    pub circularity: Option<f64>,
    pub relative_area: Option<f64>,
    pub image_path: String,
    pub mask_path: String,
    pub status: String,
}

fn csv_writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    csv::WriterBuilder::new()
        .quote_style(csv::QuoteStyle::NonNumeric)
        .from_path(path)
        .map_err(|e| Error::Csv {
            path: path.to_path_buf(),
            source: e,
        })
}

/// Write rows (sorted by id) to a manifest CSV.
pub fn write_manifest(path: &Path, rows: &[ManifestRow]) -> Result<()> {
    let mut sorted: Vec<&ManifestRow> = rows.iter().collect();
    sorted.sort_by(|a, b| a.id.cmp(&b.id));
    let mut w = csv_writer(path)?;
    for row in sorted {
        w.serialize(row).map_err(|e| Error::Csv {
            path: path.to_path_buf(),
            source: e,
        })?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_manifest(path: &Path) -> Result<Vec<ManifestRow>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::Csv {
        path: path.to_path_buf(),
        source: e,
    })?;
    let mut rows = Vec::new();
    for rec in r.deserialize() {
        rows.push(rec.map_err(|e| Error::Csv {
            path: path.to_path_buf(),
            source: e,
        })?);
    }
    Ok(rows)
}

/// Merge manifests: duplicate ids must carry identical content; output is
/// sorted by id.
pub fn merge_manifests(inputs: &[std::path::PathBuf], out: &Path) -> Result<usize> {
    let mut by_id: BTreeMap<String, ManifestRow> = BTreeMap::new();
    for path in inputs {
        for row in read_manifest(path)? {
            match by_id.get(&row.id) {
                None => {
                    by_id.insert(row.id.clone(), row);
                }
                Some(existing) if *existing == row => {}
                Some(_) => {
                    return Err(Error::Config(format!(
                        "manifest merge conflict: id {} differs between inputs",
                        row.id
                    )));
                }
            }
        }
    }
    let rows: Vec<ManifestRow> = by_id.into_values().collect();
    write_manifest(out, &rows)?;
    Ok(rows.len())
}
