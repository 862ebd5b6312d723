//! The three CSV files describing a selection, and their zip packaging.

use std::io::{Cursor, Read, Write};
use std::path::Path;

use chrono::{DateTime, Datelike, Timelike, Utc};
use serde::{Deserialize, Serialize};
use zip::write::SimpleFileOptions;

use crate::error::{Error, Result};
use crate::selection::{condition_pseudocode, scope_text, Selection, Vocabulary};
use crate::summaries::{summary_records, Facet, PathSummary};

pub const CONDITION_FILE: &str = "condition.csv";
pub const SELECTION_FILE: &str = "selection.csv";
pub const SUMMARY_FILE: &str = "summary.csv";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExportBundle {
    pub collection_id: String,
    pub created_at: DateTime<Utc>,
    pub condition_csv: String,
    pub selection_csv: String,
    pub summary_csv: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConditionRow {
    pub position: usize,
    pub pseudocode: String,
    pub negated: bool,
    pub scope: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelectionRow {
    pub uri: String,
    pub label: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub path_index: usize,
    pub path_label: String,
    pub set: String,
    pub facet: Facet,
    pub bucket_key: String,
    pub count: u64,
    pub is_other: bool,
}

fn writer() -> csv::Writer<Vec<u8>> {
    csv::WriterBuilder::new().has_headers(false).terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new())
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    String::from_utf8(bytes).map_err(|e| Error::format("export", e.to_string()))
}

/// Builds the bundle. `labels` holds one `(uri, label)` per selected entity, in
/// selection order; `subset` must summarise exactly the selected entities.
pub fn export(
    collection_id: &str,
    sel: &Selection,
    labels: &[(String, String)],
    full: &[PathSummary],
    subset: &[PathSummary],
    vocab: &Vocabulary<'_>,
    created_at: DateTime<Utc>,
) -> Result<ExportBundle> {
    if labels.len() != sel.entity_ids.len() {
        return Err(Error::Unresolved(format!(
            "{} labels for {} selected entities",
            labels.len(),
            sel.entity_ids.len()
        )));
    }
    if let Some(s) = subset.iter().find(|s| s.entity_count != sel.entity_ids.len()) {
        return Err(Error::Unresolved(format!(
            "subset summary of path {} covers {} entities, the selection has {}",
            s.path_index,
            s.entity_count,
            sel.entity_ids.len()
        )));
    }

    let mut w = writer();
    w.write_record(["position", "pseudocode", "negated", "scope"])?;
    for (position, c) in sel.query_used.conditions.iter().enumerate() {
        w.serialize(ConditionRow {
            position,
            pseudocode: condition_pseudocode(c, vocab),
            negated: c.negated,
            scope: scope_text(sel.query_used.scope).to_string(),
        })?;
    }
    let condition_csv = finish(w)?;

    let mut w = writer();
    w.write_record(["uri", "label"])?;
    for (uri, label) in labels {
        w.serialize(SelectionRow { uri: uri.clone(), label: label.clone() })?;
    }
    let selection_csv = finish(w)?;

    let mut w = writer();
    w.write_record(["path_index", "path_label", "set", "facet", "bucket_key", "count", "is_other"])?;
    // An empty selection has no subset distribution to report.
    let subset: &[PathSummary] = if sel.entity_ids.is_empty() { &[] } else { subset };
    for (set, summaries) in [("full", full), ("subset", subset)] {
        for r in summary_records(summaries) {
            let path_label = vocab.paths.get(r.path_index).map(|p| p.label.clone()).unwrap_or_default();
            w.serialize(SummaryRow {
                path_index: r.path_index,
                path_label,
                set: set.to_string(),
                facet: r.facet,
                bucket_key: r.bucket_key,
                count: r.count,
                is_other: r.is_other,
            })?;
        }
    }
    let summary_csv = finish(w)?;

    Ok(ExportBundle { collection_id: collection_id.to_string(), created_at, condition_csv, selection_csv, summary_csv })
}

impl ExportBundle {
    pub fn files(&self) -> [(&'static str, &str); 3] {
        [
            (CONDITION_FILE, self.condition_csv.as_str()),
            (SELECTION_FILE, self.selection_csv.as_str()),
            (SUMMARY_FILE, self.summary_csv.as_str()),
        ]
    }

    /// `export_<collection>_<YYYYMMDDTHHMMSSZ>.zip`
    pub fn zip_name(&self) -> String {
        format!("export_{}_{}.zip", self.collection_id, self.created_at.format("%Y%m%dT%H%M%SZ"))
    }

    /// Zip archive of the three files, stamped with `created_at` so identical bundles
    /// give identical bytes.
    pub fn to_zip(&self) -> Result<Vec<u8>> {
        let t = self.created_at;
        let stamp = zip::DateTime::from_date_and_time(
            t.year().clamp(1980, 2107) as u16,
            t.month() as u8,
            t.day() as u8,
            t.hour() as u8,
            t.minute() as u8,
            t.second() as u8,
        )
        .unwrap_or_default();
        let options = SimpleFileOptions::default()
            .compression_method(zip::CompressionMethod::Deflated)
            .last_modified_time(stamp)
            .unix_permissions(0o644);
        let mut zip = zip::ZipWriter::new(Cursor::new(Vec::new()));
        for (name, content) in self.files() {
            zip.start_file(name, options)?;
            zip.write_all(content.as_bytes())?;
        }
        Ok(zip.finish()?.into_inner())
    }

    pub fn write_dir(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        for (name, content) in self.files() {
            std::fs::write(dir.join(name), content)?;
        }
        Ok(())
    }
}

/// Reads the three files back out of an export zip.
pub fn read_zip(bytes: &[u8]) -> Result<[String; 3]> {
    let mut archive = zip::ZipArchive::new(Cursor::new(bytes))?;
    let mut read = |name: &str| -> Result<String> {
        let mut s = String::new();
        archive.by_name(name)?.read_to_string(&mut s)?;
        Ok(s)
    };
    Ok([read(CONDITION_FILE)?, read(SELECTION_FILE)?, read(SUMMARY_FILE)?])
}

fn parse<T: for<'de> Deserialize<'de>>(text: &str) -> Result<Vec<T>> {
    csv::Reader::from_reader(text.as_bytes()).deserialize().map(|r| r.map_err(Error::from)).collect()
}

pub fn parse_conditions(text: &str) -> Result<Vec<ConditionRow>> {
    parse(text)
}

pub fn parse_selection(text: &str) -> Result<Vec<SelectionRow>> {
    parse(text)
}

pub fn parse_summary(text: &str) -> Result<Vec<SummaryRow>> {
    parse(text)
}
