//! Retrieval of a collection's full entity list from a quota-limited endpoint.
//!
//! An endpoint returns at most `quota` rows per query and offers no reliable paging,
//! so the collection is split along the values of one path: one query per value,
//! plus one for the entities lacking the path, each returning fewer than `quota` rows.

use std::collections::HashMap;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gateway::{Endpoint, QueryKind, ResultTable};
use crate::paths::{EnumerationConfig, PathPattern};
use crate::term::Term;

pub const ENTITIES_FILE: &str = "entities.csv";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HarvestConfig {
    pub quota: usize,
    pub max_unique_values: usize,
    pub escalation_factor: usize,
    pub escalation_cap: usize,
    /// Fetch the collection with a single query when it fits under the quota.
    pub fast_path: bool,
}

impl HarvestConfig {
    pub fn new(quota: usize) -> Self {
        HarvestConfig {
            quota: quota.max(1),
            max_unique_values: 30,
            escalation_factor: 2,
            escalation_cap: 1024,
            fast_path: true,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.quota == 0 || self.max_unique_values == 0 {
            return Err(Error::InvalidConfig("quota and max_unique_values must be positive".into()));
        }
        if self.escalation_factor < 2 {
            return Err(Error::InvalidConfig("escalation_factor must be at least 2".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PartitionPlan {
    pub total_entities: u64,
    /// `None` means a single direct listing.
    pub partition_path: Option<PathPattern>,
    pub value_buckets: Vec<(Term, u64)>,
    /// Entities not described by the partition path.
    pub uncovered_count: u64,
}

impl PartitionPlan {
    pub fn direct(total_entities: u64) -> Self {
        PartitionPlan { total_entities, partition_path: None, value_buckets: Vec::new(), uncovered_count: 0 }
    }
}

/// Chooses how to split the collection.
///
/// Paths are scanned in completeness order; a path qualifies when it ends in at most
/// `max_unique_values` distinct values, every value is held by fewer than `quota`
/// entities, and fewer than `quota` entities lack it. When no path qualifies the
/// value budget is multiplied by `escalation_factor` and the scan repeats, up to
/// `escalation_cap`.
pub fn plan_partition(
    paths: &[PathPattern],
    total_entities: u64,
    cfg: &HarvestConfig,
    scope: &EnumerationConfig,
    endpoint: &dyn Endpoint,
) -> Result<PartitionPlan> {
    cfg.validate()?;
    let quota = cfg.quota as u64;
    if total_entities == 0 || (cfg.fast_path && total_entities < quota) {
        return Ok(PartitionPlan::direct(total_entities));
    }

    // Histograms already known to be complete, keyed by path index.
    let mut complete: HashMap<usize, Vec<(Term, u64)>> = HashMap::new();
    let mut max_unique = cfg.max_unique_values.min(cfg.escalation_cap.max(1));
    loop {
        for path in paths {
            let uncovered = total_entities.saturating_sub(path.covered_count);
            if uncovered >= quota {
                continue;
            }
            let buckets = match complete.get(&path.index) {
                Some(b) => Some(b.clone()),
                None => fetch_histogram(path, max_unique, scope, endpoint)?,
            };
            let Some(buckets) = buckets else { continue };
            complete.insert(path.index, buckets.clone());
            if buckets.len() > max_unique || buckets.iter().any(|(t, _)| matches!(t, Term::Blank { .. })) {
                continue;
            }
            let highest = buckets.iter().map(|(_, c)| *c).max().unwrap_or(0);
            if highest < quota {
                return Ok(PartitionPlan {
                    total_entities,
                    partition_path: Some(path.clone()),
                    value_buckets: buckets,
                    uncovered_count: uncovered,
                });
            }
        }
        if max_unique >= cfg.escalation_cap {
            return Err(Error::Unpartitionable { quota: cfg.quota, max_unique_values: max_unique });
        }
        max_unique = (max_unique * cfg.escalation_factor).min(cfg.escalation_cap);
        tracing::debug!(max_unique, "escalating unique-value budget");
    }
}

/// Fetches at most `max_unique + 1` histogram rows; `None` when the path has more
/// distinct values than that (or than the endpoint can list).
fn fetch_histogram(
    path: &PathPattern,
    max_unique: usize,
    scope: &EnumerationConfig,
    endpoint: &dyn Endpoint,
) -> Result<Option<Vec<(Term, u64)>>> {
    let q = scope.query(QueryKind::ValueHistogramAtPath).with_path(path.predicates.clone()).with_limit(max_unique + 1);
    let table = endpoint.execute(&q)?;
    if table.len() > max_unique || table.len() >= endpoint.quota() {
        return Ok(None);
    }
    let mut buckets = Vec::with_capacity(table.len());
    for row in table.rows {
        let mut cells = row.into_iter();
        let value = cells.next().flatten();
        let count = cells.next().flatten().and_then(|c| c.as_count());
        match (value, count) {
            (Some(v), Some(c)) => buckets.push((v, c)),
            _ => return Err(Error::Integrity("histogram row without value or count".into())),
        }
    }
    Ok(Some(buckets))
}

/// Dense, insertion-ordered entity identifiers.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct EntityIndex {
    uris: Vec<String>,
    ids: HashMap<String, usize>,
}

impl EntityIndex {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds `uri` unless present; returns its id either way.
    pub fn insert(&mut self, uri: impl Into<String>) -> usize {
        let uri = uri.into();
        if let Some(&id) = self.ids.get(&uri) {
            return id;
        }
        let id = self.uris.len();
        self.ids.insert(uri.clone(), id);
        self.uris.push(uri);
        id
    }

    pub fn len(&self) -> usize {
        self.uris.len()
    }

    pub fn is_empty(&self) -> bool {
        self.uris.is_empty()
    }

    pub fn uri(&self, id: usize) -> Option<&str> {
        self.uris.get(id).map(String::as_str)
    }

    pub fn id(&self, uri: &str) -> Option<usize> {
        self.ids.get(uri).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, &str)> {
        self.uris.iter().enumerate().map(|(i, u)| (i, u.as_str()))
    }

    pub fn uris(&self) -> &[String] {
        &self.uris
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_path(path)?;
        w.write_record(["id", "uri"])?;
        for (id, uri) in self.iter() {
            w.write_record([id.to_string().as_str(), uri])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let mut r = csv::Reader::from_path(path)?;
        let mut index = EntityIndex::new();
        for record in r.records() {
            let record = record?;
            let id: usize = record
                .get(0)
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| Error::format(ENTITIES_FILE, "bad id column"))?;
            let uri = record.get(1).ok_or_else(|| Error::format(ENTITIES_FILE, "missing uri"))?;
            if id != index.len() || index.id(uri).is_some() {
                return Err(Error::format(ENTITIES_FILE, format!("ids must be dense and unique (row {id})")));
            }
            index.insert(uri);
        }
        Ok(index)
    }
}

/// Executes a plan and merges the results, keeping first-seen order.
pub fn harvest(plan: &PartitionPlan, scope: &EnumerationConfig, endpoint: &dyn Endpoint) -> Result<EntityIndex> {
    let quota = endpoint.quota();
    let tables: Vec<ResultTable> = match &plan.partition_path {
        None => {
            if plan.total_entities == 0 {
                Vec::new()
            } else {
                vec![endpoint.execute(&scope.query(QueryKind::ListEntities))?]
            }
        }
        Some(path) => {
            let mut tables: Vec<ResultTable> = plan
                .value_buckets
                .par_iter()
                .map(|(value, _)| {
                    let q = scope
                        .query(QueryKind::EntitiesWithValueAtPath)
                        .with_path(path.predicates.clone())
                        .with_value(value.clone());
                    endpoint.execute(&q).map_err(Error::from)
                })
                .collect::<Result<_>>()?;
            let q = scope.query(QueryKind::EntitiesWithoutPath).with_path(path.predicates.clone());
            tables.push(endpoint.execute(&q)?);
            tables
        }
    };

    let mut index = EntityIndex::new();
    for table in tables {
        if table.len() >= quota {
            return Err(Error::Integrity(format!(
                "a harvest query returned {} rows, reaching the quota of {quota}; results may be truncated",
                table.len()
            )));
        }
        for row in table.rows {
            match row.into_iter().next().flatten() {
                Some(Term::Iri { value }) => {
                    index.insert(value);
                }
                Some(other) => {
                    return Err(Error::Integrity(format!("entity {other} is not an IRI")));
                }
                None => return Err(Error::Integrity("unbound entity in harvest result".into())),
            }
        }
    }
    if index.len() as u64 != plan.total_entities {
        return Err(Error::Integrity(format!(
            "harvested {} entities but the collection counts {}",
            index.len(),
            plan.total_entities
        )));
    }
    Ok(index)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn index_is_dense_and_deduplicated() {
        let mut idx = EntityIndex::new();
        assert_eq!(idx.insert("http://e/a"), 0);
        assert_eq!(idx.insert("http://e/b"), 1);
        assert_eq!(idx.insert("http://e/a"), 0);
        assert_eq!(idx.len(), 2);
        assert_eq!(idx.uri(1), Some("http://e/b"));
        assert_eq!(idx.id("http://e/b"), Some(1));
    }

    #[test]
    fn entities_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join(ENTITIES_FILE);
        let mut idx = EntityIndex::new();
        idx.insert("http://e/a,b");
        idx.insert("http://e/c");
        idx.write_csv(&file).unwrap();
        assert_eq!(std::fs::read_to_string(&file).unwrap(), "id,uri\n0,\"http://e/a,b\"\n1,http://e/c\n");
        assert_eq!(EntityIndex::read_csv(&file).unwrap(), idx);
    }

    #[test]
    fn config_validation() {
        let mut cfg = HarvestConfig::new(10);
        cfg.escalation_factor = 1;
        assert!(cfg.validate().is_err());
    }
}
