//! File formats: dataset and label CSVs, per-chain trace CSVs, summary and manifest
//! documents, model-selection tables.
//!
//! Floats are written with 17 significant digits so every value reads back bit-exact.

mod report;
mod trace;

pub use report::{
    build_summary, read_manifest, read_summary, write_manifest, write_selection, write_selection_table,
    write_summary, AcceptanceSummary, BgrSection, ChainStream, Conventions, DiagnosticsSection,
    MapSection, RunManifest, SummaryDocument,
};
pub use trace::{read_traces, write_traces, ACCEPTANCE_FILE};

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::simplex::{validate_dataset, AllocationVector, CompositionDataset, ValidationOptions};

/// Formats a float with 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub(crate) fn parse_f64(s: &str) -> Option<f64> {
    s.trim().parse::<f64>().ok()
}

/// Explicit column mapping for files whose headers differ from the default layout.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ColumnSelection {
    /// Header of the id column.
    pub id_column: Option<String>,
    /// Headers of the part columns, in model order.
    pub parts: Option<Vec<String>>,
}

/// Reads a dataset CSV.
///
/// A header row is required. The first column holds observation ids when its header is
/// `id` (any case) or any of its values is non-numeric; all remaining columns are parts,
/// named by their headers.
pub fn read_dataset_csv(path: impl AsRef<Path>, opts: ValidationOptions) -> Result<CompositionDataset> {
    read_dataset_csv_with(path, opts, &ColumnSelection::default())
}

/// Reads a dataset CSV with an explicit column mapping. Unselected columns are ignored
/// once `parts` is given.
pub fn read_dataset_csv_with(
    path: impl AsRef<Path>,
    opts: ValidationOptions,
    columns: &ColumnSelection,
) -> Result<CompositionDataset> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    let headers: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    let records: Vec<csv::StringRecord> = reader.records().collect::<std::result::Result<_, _>>()?;
    if headers.is_empty() {
        return Err(Error::format(path, "missing header row"));
    }
    let position = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::format(path, format!("no column named `{name}`")))
    };
    let id_col = match &columns.id_column {
        Some(name) => Some(position(name)?),
        None => {
            let detected = headers[0].eq_ignore_ascii_case("id")
                || records.iter().any(|r| r.get(0).and_then(parse_f64).is_none());
            detected.then_some(0)
        }
    };
    let part_cols: Vec<usize> = match &columns.parts {
        Some(names) => names.iter().map(|n| position(n)).collect::<Result<_>>()?,
        None => (0..headers.len()).filter(|&c| Some(c) != id_col).collect(),
    };
    let mut ids = Vec::with_capacity(records.len());
    let mut rows = Vec::with_capacity(records.len());
    for (row, rec) in records.iter().enumerate() {
        if rec.len() != headers.len() {
            return Err(Error::format(
                path,
                format!("data row {} has {} fields, header has {}", row + 1, rec.len(), headers.len()),
            ));
        }
        if let Some(c) = id_col {
            ids.push(rec[c].to_string());
        }
        let values = part_cols
            .iter()
            .map(|&col| {
                let field = &rec[col];
                parse_f64(field).ok_or_else(|| {
                    Error::format(
                        path,
                        format!("data row {}, column `{}`: `{field}` is not a number", row + 1, headers[col]),
                    )
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(values);
    }
    let names = part_cols.iter().map(|&c| headers[c].clone()).collect();
    let data = validate_dataset(&rows, opts)?.with_part_names(names)?;
    if id_col.is_some() {
        data.with_ids(ids)
    } else {
        Ok(data)
    }
}

fn part_headers(data: &CompositionDataset) -> Vec<String> {
    match data.part_names() {
        Some(names) => names.to_vec(),
        None => (1..=data.r()).map(|i| format!("p{i}")).collect(),
    }
}

fn observation_ids(data: &CompositionDataset) -> Vec<String> {
    match data.ids() {
        Some(ids) => ids.to_vec(),
        None => (1..=data.n()).map(|j| j.to_string()).collect(),
    }
}

/// Writes a dataset in the schema read by [`read_dataset_csv`], always with an `id` column.
pub fn write_dataset_csv(path: impl AsRef<Path>, data: &CompositionDataset) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["id".to_string()];
    header.extend(part_headers(data));
    w.write_record(&header)?;
    for (id, row) in observation_ids(data).into_iter().zip(data.rows()) {
        let mut rec = vec![id];
        rec.extend(row.iter().map(|&v| fmt_f64(v)));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `id,label` rows with one-based labels.
pub fn write_labels_csv(path: impl AsRef<Path>, data: &CompositionDataset, z: &AllocationVector) -> Result<()> {
    if z.len() != data.n() {
        return Err(Error::LengthMismatch(z.len(), data.n()));
    }
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["id", "label"])?;
    for (id, l) in observation_ids(data).into_iter().zip(z.labels()) {
        w.write_record([id, (l + 1).to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a labels file written by [`write_labels_csv`] (last column, one-based).
pub fn read_labels_csv(path: impl AsRef<Path>) -> Result<AllocationVector> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    let mut labels = Vec::new();
    for (row, rec) in reader.records().enumerate() {
        let rec = rec?;
        let field = rec.get(rec.len().saturating_sub(1)).unwrap_or("");
        match field.parse::<usize>() {
            Ok(l) if l >= 1 => labels.push(l - 1),
            _ => {
                return Err(Error::format(path, format!("row {}: bad label `{field}`", row + 1)));
            }
        }
    }
    Ok(AllocationVector(labels))
}

/// Reads a cluster-parameter file: one row per cluster, comma-separated, optional header.
pub fn read_rho_csv(path: impl AsRef<Path>) -> Result<Vec<Vec<f64>>> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec?;
        let parsed: Option<Vec<f64>> = rec.iter().map(parse_f64).collect();
        match parsed {
            Some(v) => rows.push(v),
            None if rows.is_empty() => continue,
            None => return Err(Error::format(path, "non-numeric parameter value")),
        }
    }
    if rows.is_empty() {
        return Err(Error::format(path, "no parameter rows"));
    }
    Ok(rows)
}
