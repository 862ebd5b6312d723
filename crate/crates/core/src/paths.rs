//! Discovery of the property-path patterns describing a collection.

use std::cmp::Ordering;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gateway::{Endpoint, QueryKind, StructuredQuery};
use crate::term::{PrefixMap, RDF_TYPE};

pub const PATHS_FILE: &str = "paths.csv";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathPattern {
    /// Dense 0-based position in completeness-descending order.
    pub index: usize,
    pub predicates: Vec<String>,
    pub depth: usize,
    pub completeness: f64,
    pub covered_count: u64,
    /// Prefixed predicates joined by `/`.
    pub label: String,
}

impl PathPattern {
    pub fn new(predicates: Vec<String>, covered_count: u64, total: u64, prefixes: &PrefixMap) -> Self {
        let label = predicates.iter().map(|p| prefixes.compact(p)).collect::<Vec<_>>().join("/");
        PathPattern {
            index: 0,
            depth: predicates.len(),
            completeness: completeness(covered_count, total),
            covered_count,
            predicates,
            label,
        }
    }
}

fn completeness(covered: u64, total: u64) -> f64 {
    if total == 0 {
        0.0
    } else {
        covered as f64 / total as f64
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnumerationConfig {
    /// The collection's similarity criterion: entities are instances of this class.
    pub class_uri: String,
    pub membership_predicate: String,
    pub max_depth: usize,
    pub min_coverage: f64,
    /// Whether the membership predicate itself is reported as a depth-1 path. It is
    /// complete by construction, but its other values can still be worth summarising
    /// (e.g. secondary `instance of` values).
    pub include_membership_path: bool,
    pub prefixes: PrefixMap,
}

impl EnumerationConfig {
    pub fn new(class_uri: impl Into<String>, max_depth: usize) -> Self {
        EnumerationConfig {
            class_uri: class_uri.into(),
            membership_predicate: RDF_TYPE.to_string(),
            max_depth,
            min_coverage: 0.0,
            include_membership_path: false,
            prefixes: PrefixMap::default(),
        }
    }

    pub(crate) fn query(&self, kind: QueryKind) -> StructuredQuery {
        StructuredQuery::new(kind, self.class_uri.clone()).with_membership(self.membership_predicate.clone())
    }
}

/// Ordered path list together with the entity count its rates are relative to.
#[derive(Clone, Debug, PartialEq)]
pub struct Enumeration {
    pub total_entities: u64,
    pub paths: Vec<PathPattern>,
}

/// Counts the collection's instances. This is the fixed denominator of every rate.
pub fn count_entities(cfg: &EnumerationConfig, endpoint: &dyn Endpoint) -> Result<u64> {
    Ok(endpoint.execute(&cfg.query(QueryKind::CountAllEntities))?.single_count()?)
}

/// Breadth-first enumeration of path patterns up to `cfg.max_depth`.
///
/// Depth-1 candidates are the predicates of the collection entities; each depth-d
/// pattern is extended by the predicates found at its end, which is empty whenever
/// the chain ends at literals. Queries of one depth level run concurrently.
pub fn enumerate_paths(cfg: &EnumerationConfig, endpoint: &dyn Endpoint) -> Result<Enumeration> {
    if cfg.max_depth == 0 {
        return Err(Error::InvalidConfig("max_depth must be at least 1".into()));
    }
    let total = count_entities(cfg, endpoint)?;
    if total == 0 {
        return Err(Error::EmptyCollection(cfg.class_uri.clone()));
    }

    let mut found: Vec<PathPattern> = Vec::new();
    let mut frontier: Vec<Vec<String>> = vec![Vec::new()];
    for depth in 1..=cfg.max_depth {
        let level: Vec<Vec<PathPattern>> =
            frontier.par_iter().map(|prefix| expand(cfg, endpoint, prefix, total)).collect::<Result<_>>()?;
        let level: Vec<PathPattern> = level.into_iter().flatten().collect();
        frontier =
            if depth < cfg.max_depth { level.iter().map(|p| p.predicates.clone()).collect() } else { Vec::new() };
        found.extend(level);
        if frontier.is_empty() {
            break;
        }
    }

    sort_and_index(&mut found);
    let paths = prune(found, cfg.min_coverage);
    Ok(Enumeration { total_entities: total, paths })
}

fn expand(cfg: &EnumerationConfig, endpoint: &dyn Endpoint, prefix: &[String], total: u64) -> Result<Vec<PathPattern>> {
    let q = cfg.query(QueryKind::DistinctPredicatesAtDepth).with_path(prefix.iter().cloned());
    let table = endpoint.execute(&q)?;
    if table.len() >= endpoint.quota() {
        return Err(Error::Integrity(format!("predicate listing after [{}] hit the endpoint quota", prefix.join(" "))));
    }
    let mut patterns = Vec::new();
    for row in table.rows {
        let Some(predicate) = row.into_iter().next().flatten().and_then(|t| t.as_iri().map(String::from)) else {
            continue;
        };
        if prefix.is_empty() && predicate == cfg.membership_predicate && !cfg.include_membership_path {
            continue;
        }
        let mut predicates = prefix.to_vec();
        predicates.push(predicate);
        let covered = endpoint
            .execute(&cfg.query(QueryKind::CountEntitiesWithPath).with_path(predicates.clone()))?
            .single_count()?;
        if covered > 0 {
            patterns.push(PathPattern::new(predicates, covered, total, &cfg.prefixes));
        }
    }
    Ok(patterns)
}

/// Completeness descending, then depth ascending, then predicate list.
pub fn path_order(a: &PathPattern, b: &PathPattern) -> Ordering {
    b.covered_count
        .cmp(&a.covered_count)
        .then_with(|| b.completeness.total_cmp(&a.completeness))
        .then_with(|| a.depth.cmp(&b.depth))
        .then_with(|| a.predicates.cmp(&b.predicates))
}

pub fn sort_and_index(paths: &mut [PathPattern]) {
    paths.sort_by(path_order);
    for (i, p) in paths.iter_mut().enumerate() {
        p.index = i;
    }
}

/// Drops patterns below `min_coverage` and re-assigns dense indices.
pub fn prune(paths: Vec<PathPattern>, min_coverage: f64) -> Vec<PathPattern> {
    let mut kept: Vec<PathPattern> = paths.into_iter().filter(|p| p.completeness >= min_coverage).collect();
    for (i, p) in kept.iter_mut().enumerate() {
        p.index = i;
    }
    kept
}

#[derive(Serialize, Deserialize)]
struct PathRecord {
    index: usize,
    predicates: String,
    depth: usize,
    covered_count: u64,
    completeness: f64,
    label: String,
}

pub fn write_paths(path: impl AsRef<Path>, paths: &[PathPattern]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_path(path)?;
    for p in paths {
        w.serialize(PathRecord {
            index: p.index,
            predicates: p.predicates.join(" "),
            depth: p.depth,
            covered_count: p.covered_count,
            completeness: p.completeness,
            label: p.label.clone(),
        })?;
    }
    if paths.is_empty() {
        w.write_record(["index", "predicates", "depth", "covered_count", "completeness", "label"])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_paths(path: impl AsRef<Path>) -> Result<Vec<PathPattern>> {
    let mut r = csv::Reader::from_path(path)?;
    let mut paths = Vec::new();
    for record in r.deserialize() {
        let rec: PathRecord = record?;
        let predicates: Vec<String> = rec.predicates.split(' ').map(String::from).collect();
        if predicates.len() != rec.depth || rec.index != paths.len() {
            return Err(Error::format(PATHS_FILE, format!("inconsistent row for index {}", rec.index)));
        }
        paths.push(PathPattern {
            index: rec.index,
            predicates,
            depth: rec.depth,
            completeness: rec.completeness,
            covered_count: rec.covered_count,
            label: rec.label,
        });
    }
    Ok(paths)
}
