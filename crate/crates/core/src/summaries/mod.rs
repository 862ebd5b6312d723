//! Bucketed distributions of the values, datatypes and languages found at the end
//! of a path for a set of entities, and their comparison against the full set.

pub mod dates;
pub mod ks;

use std::collections::HashMap;
use std::io::{Read, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use dates::{bin_key, Granularity};
pub use ks::{ks_two_sample, KsStatistic};

use crate::error::{Error, Result};
use crate::vectors::{CellValues, EntityVectorStore};

pub const OTHER_KEY: &str = "OTHER";

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Facet {
    Values,
    Datatypes,
    Languages,
}

impl Facet {
    pub const ALL: [Facet; 3] = [Facet::Values, Facet::Datatypes, Facet::Languages];

    pub fn as_str(self) -> &'static str {
        match self {
            Facet::Values => "values",
            Facet::Datatypes => "datatypes",
            Facet::Languages => "languages",
        }
    }

    pub fn parse(s: &str) -> Option<Facet> {
        Facet::ALL.into_iter().find(|f| f.as_str() == s)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum DateBinning {
    Off,
    Auto,
    Fixed { granularity: Granularity },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryConfig {
    /// Buckets holding strictly less than this fraction of a facet's occurrences
    /// merge into OTHER.
    pub detail_threshold: f64,
    pub significance_alpha: f64,
    /// Candidate granularities for automatic date binning, coarsest first.
    pub date_granularities: Vec<Granularity>,
    pub date_binning: DateBinning,
}

impl Default for SummaryConfig {
    fn default() -> Self {
        SummaryConfig {
            detail_threshold: 0.05,
            significance_alpha: 0.1,
            date_granularities: Granularity::ALL.to_vec(),
            date_binning: DateBinning::Auto,
        }
    }
}

impl SummaryConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.detail_threshold > 0.0 && self.detail_threshold < 1.0) {
            return Err(Error::InvalidConfig("detail_threshold must lie strictly between 0 and 1".into()));
        }
        if !(self.significance_alpha > 0.0 && self.significance_alpha < 1.0) {
            return Err(Error::InvalidConfig("significance_alpha must lie strictly between 0 and 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bucket {
    pub key: String,
    pub count: u64,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FacetSummary {
    /// Count descending, then key.
    pub buckets: Vec<Bucket>,
    pub other_count: u64,
    /// Keys merged into OTHER, sorted.
    pub other_keys: Vec<String>,
}

impl FacetSummary {
    /// Applies the detail threshold to raw counts. `forced_other` holds occurrences
    /// that always go to OTHER (e.g. unparseable dates), keyed by their raw text.
    pub fn from_counts(counts: HashMap<String, u64>, forced_other: HashMap<String, u64>, threshold: f64) -> Self {
        let total: u64 = counts.values().sum::<u64>() + forced_other.values().sum::<u64>();
        let mut summary = FacetSummary::default();
        for (key, count) in counts {
            // Compare shares, not counts against `threshold * total`, whose rounding
            // can push an exact-threshold bucket into OTHER.
            if (count as f64 / total as f64) < threshold {
                summary.other_count += count;
                summary.other_keys.push(key);
            } else {
                summary.buckets.push(Bucket { key, count });
            }
        }
        for (key, count) in forced_other {
            summary.other_count += count;
            summary.other_keys.push(key);
        }
        summary.buckets.sort_by(|a, b| b.count.cmp(&a.count).then_with(|| a.key.cmp(&b.key)));
        summary.other_keys.sort();
        summary.other_keys.dedup();
        summary
    }

    pub fn total(&self) -> u64 {
        self.buckets.iter().map(|b| b.count).sum::<u64>() + self.other_count
    }

    /// Detailed buckets plus OTHER when it is non-empty.
    pub fn bucket_count(&self) -> usize {
        self.buckets.len() + usize::from(self.other_count > 0)
    }

    pub fn is_empty(&self) -> bool {
        self.total() == 0
    }

    pub fn count_of(&self, key: &str) -> u64 {
        self.buckets.iter().find(|b| b.key == key).map_or(0, |b| b.count)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathSummary {
    pub path_index: usize,
    pub entity_count: usize,
    /// Entities of the set having at least one value at the end of the path.
    pub covered_count: usize,
    /// `covered_count / entity_count`, 0 for an empty set.
    pub completeness_in_set: f64,
    pub values: FacetSummary,
    pub datatypes: FacetSummary,
    pub languages: FacetSummary,
    pub unique_value_count: usize,
    /// Granularity the values facet was binned at, for date paths.
    pub granularity: Option<Granularity>,
}

impl PathSummary {
    pub fn facet(&self, facet: Facet) -> &FacetSummary {
        match facet {
            Facet::Values => &self.values,
            Facet::Datatypes => &self.datatypes,
            Facet::Languages => &self.languages,
        }
    }
}

/// Datatypes and languages are counted only for values that carry one.
fn facet_keys<'a>(cell: &'a CellValues, facet: Facet) -> Box<dyn Iterator<Item = &'a str> + 'a> {
    match facet {
        Facet::Values => Box::new(cell.values.iter().map(String::as_str)),
        Facet::Datatypes => Box::new((0..cell.values.len()).filter_map(|i| cell.datatype(i))),
        Facet::Languages => Box::new((0..cell.values.len()).filter_map(|i| cell.language(i))),
    }
}

/// Summarises subsets of one store. Date granularities are chosen once per path
/// from the whole collection so that every subset is binned like the full set.
pub struct Summarizer<'a> {
    store: &'a EntityVectorStore,
    cfg: SummaryConfig,
    granularity: Vec<Option<Granularity>>,
}

impl<'a> Summarizer<'a> {
    pub fn new(store: &'a EntityVectorStore, cfg: &SummaryConfig) -> Result<Self> {
        cfg.validate()?;
        let granularity = (0..store.path_count()).into_par_iter().map(|p| path_granularity(store, p, cfg)).collect();
        Ok(Summarizer { store, cfg: cfg.clone(), granularity })
    }

    /// Rebuilds a summarizer from granularities computed earlier by [`Summarizer::new`].
    pub fn with_granularities(
        store: &'a EntityVectorStore,
        cfg: &SummaryConfig,
        granularity: Vec<Option<Granularity>>,
    ) -> Result<Self> {
        cfg.validate()?;
        if granularity.len() != store.path_count() {
            return Err(Error::LengthMismatch { left: granularity.len(), right: store.path_count() });
        }
        Ok(Summarizer { store, cfg: cfg.clone(), granularity })
    }

    pub fn granularities(&self) -> &[Option<Granularity>] {
        &self.granularity
    }

    pub fn config(&self) -> &SummaryConfig {
        &self.cfg
    }

    pub fn store(&self) -> &EntityVectorStore {
        self.store
    }

    pub fn granularity(&self, path_index: usize) -> Option<Granularity> {
        self.granularity.get(path_index).copied().flatten()
    }

    /// Bucket key a value falls in on this path's values facet.
    pub fn value_key(&self, path_index: usize, value: &str) -> String {
        match self.granularity(path_index) {
            Some(g) => bin_key(value, g).unwrap_or_else(|| value.to_string()),
            None => value.to_string(),
        }
    }

    pub fn summarize(&self, entity_ids: &[usize], path_index: usize) -> Result<PathSummary> {
        if path_index >= self.store.path_count() {
            return Err(Error::UnknownPath(path_index));
        }
        if let Some(&bad) = entity_ids.iter().find(|&&e| e >= self.store.entity_count()) {
            return Err(Error::UnknownEntity(bad));
        }
        let granularity = self.granularity(path_index);
        let mut counts: [HashMap<String, u64>; 3] = Default::default();
        let mut unbinned: HashMap<String, u64> = HashMap::new();
        let mut covered = 0;
        for &e in entity_ids {
            let Some(cell) = self.store.cell(e, path_index) else { continue };
            covered += 1;
            for value in &cell.values {
                match granularity {
                    Some(g) => match bin_key(value, g) {
                        Some(k) => *counts[0].entry(k).or_default() += 1,
                        None => *unbinned.entry(value.clone()).or_default() += 1,
                    },
                    None => *counts[0].entry(value.clone()).or_default() += 1,
                }
            }
            for (slot, facet) in [(1, Facet::Datatypes), (2, Facet::Languages)] {
                for key in facet_keys(cell, facet) {
                    *counts[slot].entry(key.to_string()).or_default() += 1;
                }
            }
        }
        let unique_value_count = counts[0].len() + unbinned.len();
        let t = self.cfg.detail_threshold;
        let [values, datatypes, languages] = counts;
        Ok(PathSummary {
            path_index,
            entity_count: entity_ids.len(),
            covered_count: covered,
            completeness_in_set: if entity_ids.is_empty() { 0.0 } else { covered as f64 / entity_ids.len() as f64 },
            values: FacetSummary::from_counts(values, unbinned, t),
            datatypes: FacetSummary::from_counts(datatypes, HashMap::new(), t),
            languages: FacetSummary::from_counts(languages, HashMap::new(), t),
            unique_value_count,
            granularity,
        })
    }

    /// Summaries of every path, in path order.
    pub fn summarize_all(&self, entity_ids: &[usize]) -> Result<Vec<PathSummary>> {
        (0..self.store.path_count()).into_par_iter().map(|p| self.summarize(entity_ids, p)).collect()
    }
}

/// One-off summary of a single path.
pub fn summarize(
    entity_ids: &[usize],
    path_index: usize,
    store: &EntityVectorStore,
    cfg: &SummaryConfig,
) -> Result<PathSummary> {
    cfg.validate()?;
    if path_index >= store.path_count() {
        return Err(Error::UnknownPath(path_index));
    }
    let granularity = path_granularity(store, path_index, cfg);
    Summarizer { store, cfg: cfg.clone(), granularity: single(store.path_count(), path_index, granularity) }
        .summarize(entity_ids, path_index)
}

fn single(n: usize, at: usize, g: Option<Granularity>) -> Vec<Option<Granularity>> {
    let mut v = vec![None; n];
    v[at] = g;
    v
}

/// A path is binned as dates when every datatype found on it is a date type.
fn path_granularity(store: &EntityVectorStore, path_index: usize, cfg: &SummaryConfig) -> Option<Granularity> {
    let fixed = match &cfg.date_binning {
        DateBinning::Off => return None,
        DateBinning::Auto => None,
        DateBinning::Fixed { granularity } => Some(*granularity),
    };
    let mut values: Vec<&str> = Vec::new();
    let mut any_date = false;
    for e in 0..store.entity_count() {
        let Some(cell) = store.cell(e, path_index) else { continue };
        for i in 0..cell.values.len() {
            match cell.datatype(i) {
                Some(dt) if dates::is_date_datatype(dt) => any_date = true,
                _ => return None,
            }
            values.push(&cell.values[i]);
        }
    }
    if !any_date {
        return None;
    }
    Some(fixed.unwrap_or_else(|| auto_granularity(&values, &cfg.date_granularities, cfg.detail_threshold)))
}

/// Bins `values` at `granularity` and applies the detail threshold. Values that do
/// not parse, or lack the precision, land in OTHER.
pub fn bin_dates(values: &[&str], granularity: Granularity, threshold: f64) -> FacetSummary {
    let mut counts: HashMap<String, u64> = HashMap::new();
    let mut unbinned: HashMap<String, u64> = HashMap::new();
    for v in values {
        match bin_key(v, granularity) {
            Some(k) => *counts.entry(k).or_default() += 1,
            None => *unbinned.entry(v.to_string()).or_default() += 1,
        }
    }
    FacetSummary::from_counts(counts, unbinned, threshold)
}

/// The coarsest candidate granularity producing at least two detailed buckets;
/// year when none does.
pub fn auto_granularity(values: &[&str], candidates: &[Granularity], threshold: f64) -> Granularity {
    let mut sorted = candidates.to_vec();
    sorted.sort();
    sorted.into_iter().find(|&g| bin_dates(values, g, threshold).buckets.len() >= 2).unwrap_or(Granularity::Year)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub facet: Facet,
    pub statistic: f64,
    pub p_value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonFlag {
    pub path_index: usize,
    /// No entity of the subset has the path.
    pub missing_in_subset: bool,
    /// Some facet differs with `p < significance_alpha`.
    pub significantly_different: bool,
    pub tests: Vec<KsResult>,
}

/// Aligned frequency vectors of two facet summaries: union of detailed keys (full
/// set order first) plus one OTHER slot when either side has one.
pub fn aligned_frequencies(full: &FacetSummary, subset: &FacetSummary) -> (Vec<f64>, Vec<f64>) {
    let mut keys: Vec<&str> = full.buckets.iter().map(|b| b.key.as_str()).collect();
    for b in &subset.buckets {
        if !keys.contains(&b.key.as_str()) {
            keys.push(&b.key);
        }
    }
    let with_other = full.other_count > 0 || subset.other_count > 0;
    let vector = |s: &FacetSummary| -> Vec<f64> {
        let total = s.total() as f64;
        let mut v: Vec<f64> = keys.iter().map(|k| s.count_of(k) as f64 / total).collect();
        if with_other {
            v.push(s.other_count as f64 / total);
        }
        v
    };
    (vector(full), vector(subset))
}

/// Compares a subset summary with the full-set summary of the same path by running
/// the two-sample test on the aligned frequency vectors of each facet. Facets empty
/// on either side are skipped.
pub fn compare(full: &PathSummary, subset: &PathSummary, cfg: &SummaryConfig) -> Result<ComparisonFlag> {
    if full.path_index != subset.path_index {
        return Err(Error::InvalidConfig(format!(
            "cannot compare path {} with path {}",
            full.path_index, subset.path_index
        )));
    }
    let mut tests = Vec::new();
    for facet in Facet::ALL {
        let (f, s) = (full.facet(facet), subset.facet(facet));
        if f.is_empty() || s.is_empty() {
            continue;
        }
        let (a, b) = aligned_frequencies(f, s);
        let r = ks_two_sample(&a, &b)?;
        tests.push(KsResult { facet, statistic: r.statistic, p_value: r.p_value });
    }
    Ok(ComparisonFlag {
        path_index: full.path_index,
        missing_in_subset: subset.covered_count == 0,
        significantly_different: tests.iter().any(|t| t.p_value < cfg.significance_alpha),
        tests,
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SummaryRecord {
    pub path_index: usize,
    pub facet: Facet,
    pub bucket_key: String,
    pub count: u64,
    pub is_other: bool,
}

/// Flattens summaries into one record per bucket; OTHER is written only when non-empty.
pub fn summary_records(summaries: &[PathSummary]) -> Vec<SummaryRecord> {
    let mut out = Vec::new();
    for s in summaries {
        for facet in Facet::ALL {
            let f = s.facet(facet);
            for b in &f.buckets {
                out.push(SummaryRecord {
                    path_index: s.path_index,
                    facet,
                    bucket_key: b.key.clone(),
                    count: b.count,
                    is_other: false,
                });
            }
            if f.other_count > 0 {
                out.push(SummaryRecord {
                    path_index: s.path_index,
                    facet,
                    bucket_key: OTHER_KEY.to_string(),
                    count: f.other_count,
                    is_other: true,
                });
            }
        }
    }
    out
}

pub fn write_summaries_csv(w: impl Write, summaries: &[PathSummary]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).terminator(csv::Terminator::Any(b'\n')).from_writer(w);
    w.write_record(["path_index", "facet", "bucket_key", "count", "is_other"])?;
    for r in summary_records(summaries) {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_summary_records(r: impl Read) -> Result<Vec<SummaryRecord>> {
    let mut reader = csv::Reader::from_reader(r);
    reader.deserialize().map(|r| r.map_err(Error::from)).collect()
}
