//! Feature CSV + JSON manifest ingestion.
//!
//! CSV layout: header `label,f0,f1,...,f{d-1}`, one sample per row, base-10
//! integer labels, decimal float features. Floats are written in Rust's
//! shortest round-trip form so a save/load cycle is bit-exact.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::LatentDataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub domain_id: String,
    pub class_count: usize,
    /// Relative to the manifest's directory.
    pub features_csv: String,
}

pub fn load_dataset(manifest_path: impl AsRef<Path>) -> Result<LatentDataset> {
    let manifest_path = manifest_path.as_ref();
    let text = fs::read_to_string(manifest_path).map_err(|e| Error::io(manifest_path, e))?;
    let manifest: DatasetManifest = serde_json::from_str(&text)?;
    let csv_path = manifest_path
        .parent()
        .unwrap_or_else(|| Path::new("."))
        .join(&manifest.features_csv);
    read_features_csv(&csv_path, &manifest.domain_id, manifest.class_count)
}

fn row_err(path: &Path, row: usize, message: impl Into<String>) -> Error {
    Error::Row {
        path: path.to_path_buf(),
        row,
        message: message.into(),
    }
}

fn read_features_csv(path: &Path, domain_id: &str, class_count: usize) -> Result<LatentDataset> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(file);

    let header = reader.headers()?.clone();
    if header.get(0) != Some("label") || header.len() < 2 {
        return Err(row_err(path, 1, "header must be `label,f0,...`"));
    }
    for (j, name) in header.iter().skip(1).enumerate() {
        if name != format!("f{j}") {
            return Err(row_err(path, 1, format!("expected column f{j}, found `{name}`")));
        }
    }
    let dim = header.len() - 1;

    let mut values = Vec::new();
    let mut labels = Vec::new();
    for (i, record) in reader.records().enumerate() {
        // Line numbers as shown in an editor: header is line 1.
        let row = i + 2;
        let record = record?;
        if record.len() != dim + 1 {
            return Err(row_err(
                path,
                row,
                format!("expected {} fields, found {}", dim + 1, record.len()),
            ));
        }
        let label: usize = record[0]
            .trim()
            .parse()
            .map_err(|_| row_err(path, row, format!("invalid label `{}`", &record[0])))?;
        if label >= class_count {
            return Err(row_err(
                path,
                row,
                format!("label {label} >= class_count {class_count}"),
            ));
        }
        for field in record.iter().skip(1) {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| row_err(path, row, format!("invalid feature `{field}`")))?;
            if !v.is_finite() {
                return Err(row_err(path, row, format!("non-finite feature `{field}`")));
            }
            values.push(v);
        }
        labels.push(label);
    }

    let features = Array2::from_shape_vec((labels.len(), dim), values)
        .map_err(|e| Error::invalid(e.to_string()))?;
    LatentDataset::new(domain_id, class_count, features, labels)
}

/// Writes `<manifest stem>.csv` beside the manifest and the manifest itself.
pub fn save_dataset(dataset: &LatentDataset, manifest_path: impl AsRef<Path>) -> Result<()> {
    let manifest_path = manifest_path.as_ref();
    let stem = manifest_path
        .file_stem()
        .and_then(|s| s.to_str())
        .ok_or_else(|| Error::invalid("manifest path has no file stem"))?;
    let csv_name = format!("{stem}.csv");
    let csv_path: PathBuf = manifest_path
        .parent()
        .unwrap_or_else(|| Path::new("."))
        .join(&csv_name);

    let mut out = String::new();
    out.push_str("label");
    for j in 0..dataset.dim() {
        out.push_str(&format!(",f{j}"));
    }
    out.push('\n');
    for (row, &label) in dataset.features().outer_iter().zip(dataset.labels()) {
        out.push_str(&label.to_string());
        for v in row {
            out.push(',');
            out.push_str(&v.to_string());
        }
        out.push('\n');
    }
    fs::write(&csv_path, out).map_err(|e| Error::io(&csv_path, e))?;

    let manifest = DatasetManifest {
        domain_id: dataset.domain_id.clone(),
        class_count: dataset.class_count,
        features_csv: csv_name,
    };
    let mut f = fs::File::create(manifest_path).map_err(|e| Error::io(manifest_path, e))?;
    serde_json::to_writer_pretty(&mut f, &manifest)?;
    f.write_all(b"\n").map_err(|e| Error::io(manifest_path, e))?;
    Ok(())
}
