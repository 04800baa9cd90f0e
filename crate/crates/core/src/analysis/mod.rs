//! Label matrices over the document database, the dataset filters, and phi
//! correlation between property columns.

mod correlation;
mod filters;

use serde::{Deserialize, Serialize};

use crate::docstore::{labels_of, ApiMeta, ApiRecord, DocDatabase};
use crate::taxonomy::PropertyCatalog;
pub use correlation::{correlate, correlate_with, phi, report_pairs, CorrelationMatrix, PairReport, PairRow};
pub use filters::{apply_prefilters, small_dataset};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AnalysisError {
    #[error("columns differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("correlation matrices have different labels")]
    LabelMismatch,
    #[error("malformed label file: {0}")]
    Malformed(String),
    #[error("row {row}: unknown property `{label}`")]
    UnknownLabel { row: String, label: String },
    #[error("duplicate row `{0}`")]
    DuplicateRow(String),
}

/// Grouping fields carried along with each matrix row.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RowMeta {
    pub name: String,
    pub impl_type: String,
    pub signature: String,
    pub meta: ApiMeta,
}

impl RowMeta {
    pub fn of(record: &ApiRecord) -> Self {
        Self {
            name: record.name().to_string(),
            impl_type: record.impl_type.clone(),
            signature: record.signature.raw.clone(),
            meta: record.meta.clone(),
        }
    }
}

/// Binary API × primary-property matrix.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LabelMatrix {
    pub rows: Vec<String>,
    pub columns: Vec<String>,
    pub cells: Vec<Vec<bool>>,
    pub row_meta: Vec<RowMeta>,
}

impl LabelMatrix {
    pub fn empty(catalog: &PropertyCatalog) -> Self {
        Self { rows: vec![], columns: catalog.primary_ids().map(str::to_string).collect(), cells: vec![], row_meta: vec![] }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn column(&self, j: usize) -> Vec<bool> {
        self.cells.iter().map(|r| r[j]).collect()
    }

    /// Column index of a property id.
    pub fn column_of(&self, id: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == id)
    }

    pub(crate) fn push(&mut self, id: String, cells: Vec<bool>, meta: RowMeta) {
        self.rows.push(id);
        self.cells.push(cells);
        self.row_meta.push(meta);
    }

    /// Keeps the rows at the given indices, in that order.
    pub(crate) fn select(&self, keep: &[usize]) -> Self {
        Self {
            rows: keep.iter().map(|&i| self.rows[i].clone()).collect(),
            columns: self.columns.clone(),
            cells: keep.iter().map(|&i| self.cells[i].clone()).collect(),
            row_meta: keep.iter().map(|&i| self.row_meta[i].clone()).collect(),
        }
    }
}

/// One row per record (after the pre-filters when `prefilter` is set), in
/// identifier order.
pub fn build_matrix(db: &DocDatabase, catalog: &PropertyCatalog, prefilter: bool) -> LabelMatrix {
    let records: Vec<ApiRecord> = db.iter().cloned().collect();
    let records = if prefilter { apply_prefilters(&records) } else { records };
    let mut m = LabelMatrix::empty(catalog);
    for r in &records {
        let labels = labels_of(r, catalog);
        let cells = m.columns.iter().map(|c| labels.contains(c)).collect();
        m.push(r.identifier.to_string(), cells, RowMeta::of(r));
    }
    m
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct LabelFile {
    #[serde(default)]
    api: Vec<LabelRow>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct LabelRow {
    identifier: String,
    #[serde(default)]
    name: Option<String>,
    #[serde(default)]
    impl_type: String,
    #[serde(default)]
    signature: String,
    labels: Vec<String>,
    #[serde(default)]
    meta: ApiMeta,
}

/// Loads a labelled API set: an array of `[[api]]` tables with
/// `identifier`, `labels` and optional `name`, `impl_type`, `signature` and
/// `meta`. Labels may be sub-property ids; they project to their parent.
/// When `name` is absent it is taken from the identifier's last segment.
pub fn load_label_matrix(source: &str, catalog: &PropertyCatalog) -> Result<LabelMatrix, AnalysisError> {
    let file: LabelFile = toml::from_str(source).map_err(|e| AnalysisError::Malformed(e.to_string()))?;
    let mut m = LabelMatrix::empty(catalog);
    let mut seen = std::collections::HashSet::new();
    for row in file.api {
        if !seen.insert(row.identifier.clone()) {
            return Err(AnalysisError::DuplicateRow(row.identifier));
        }
        let mut cells = vec![false; m.columns.len()];
        for label in &row.labels {
            let primary = catalog
                .primary_of(label)
                .ok_or_else(|| AnalysisError::UnknownLabel { row: row.identifier.clone(), label: label.clone() })?;
            let j = m.column_of(primary).expect("primary ids are columns");
            cells[j] = true;
        }
        let name = row.name.unwrap_or_else(|| last_segment(&row.identifier).to_string());
        let meta = RowMeta { name, impl_type: row.impl_type, signature: row.signature, meta: row.meta };
        m.push(row.identifier, cells, meta);
    }
    Ok(m)
}

fn last_segment(id: &str) -> &str {
    let tail = id.rsplit(['#', '/']).next().unwrap_or(id);
    let tail = tail.strip_suffix(".html").unwrap_or(tail);
    tail.rsplit_once('.').map_or(tail, |(_, n)| n)
}
