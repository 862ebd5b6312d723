//! Conjunctive selection queries resolved against the local store.

use std::collections::{BTreeSet, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::paths::PathPattern;
use crate::projection::{zones, ProjectedMap};
use crate::summaries::{Facet, PathSummary, Summarizer, OTHER_KEY};
use crate::term::{iri_tail, PrefixMap, RDFS_LABEL};
use crate::vectors::{CompletenessMatrix, EntityVectorStore};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ConditionKind {
    Zone {
        zone_id: usize,
    },
    Lasso {
        polygon: Vec<[f64; 2]>,
    },
    /// Holds when the entity has at least one value at the end of the path.
    PathPresence {
        path_index: usize,
    },
    /// Holds when any value of the cell falls in the bucket. With `other_keys` the
    /// condition targets an OTHER bucket and matches exactly those keys.
    ValueAtPath {
        path_index: usize,
        #[serde(default = "values_facet")]
        facet: Facet,
        bucket_key: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        other_keys: Option<Vec<String>>,
    },
}

fn values_facet() -> Facet {
    Facet::Values
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Condition {
    #[serde(flatten)]
    pub kind: ConditionKind,
    /// Switches HAVING to NOT HAVING.
    #[serde(default)]
    pub negated: bool,
}

impl Condition {
    pub fn having(kind: ConditionKind) -> Self {
        Condition { kind, negated: false }
    }

    pub fn not_having(kind: ConditionKind) -> Self {
        Condition { kind, negated: true }
    }

    pub fn zone(zone_id: usize) -> ConditionKind {
        ConditionKind::Zone { zone_id }
    }

    pub fn path(path_index: usize) -> ConditionKind {
        ConditionKind::PathPresence { path_index }
    }

    pub fn value(path_index: usize, bucket_key: impl Into<String>) -> ConditionKind {
        ConditionKind::ValueAtPath { path_index, facet: Facet::Values, bucket_key: bucket_key.into(), other_keys: None }
    }

    /// Condition on the OTHER bucket of `facet`, capturing its current member keys.
    pub fn other(path_index: usize, facet: Facet, summary: &PathSummary) -> ConditionKind {
        ConditionKind::ValueAtPath {
            path_index,
            facet,
            bucket_key: OTHER_KEY.to_string(),
            other_keys: Some(summary.facet(facet).other_keys.clone()),
        }
    }

    pub fn negate(mut self) -> Self {
        self.negated = !self.negated;
        self
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scope {
    #[default]
    WholeSet,
    CurrentSelection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectionQuery {
    pub conditions: Vec<Condition>,
    #[serde(default)]
    pub scope: Scope,
    /// Entity ids of the current selection, required with [`Scope::CurrentSelection`].
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub current_ids: Option<Vec<usize>>,
}

impl SelectionQuery {
    pub fn new(conditions: Vec<Condition>, scope: Scope) -> Self {
        SelectionQuery { conditions, scope, current_ids: None }
    }

    pub fn with_current(mut self, ids: Vec<usize>) -> Self {
        self.current_ids = Some(ids);
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub query_used: SelectionQuery,
    /// Ascending.
    pub entity_ids: Vec<usize>,
    pub manually_removed: BTreeSet<usize>,
}

impl Selection {
    pub fn len(&self) -> usize {
        self.entity_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entity_ids.is_empty()
    }
}

/// Everything a condition can be evaluated against.
pub struct SelectionContext<'a> {
    pub summarizer: &'a Summarizer<'a>,
    pub matrix: &'a CompletenessMatrix,
    pub map: Option<&'a ProjectedMap>,
}

impl SelectionContext<'_> {
    fn store(&self) -> &EntityVectorStore {
        self.summarizer.store()
    }
}

enum Compiled<'a> {
    Members(HashSet<usize>),
    Lasso(&'a [[f64; 2]], &'a ProjectedMap),
    Present(usize),
    Keys { path: usize, facet: Facet, keys: HashSet<&'a str> },
}

fn compile<'a>(c: &'a Condition, ctx: &SelectionContext<'a>) -> Result<Compiled<'a>> {
    let n_paths = ctx.store().path_count();
    let check_path = |p: usize| if p < n_paths { Ok(p) } else { Err(Error::UnknownPath(p)) };
    Ok(match &c.kind {
        ConditionKind::Zone { zone_id } => {
            let map = ctx.map.ok_or(Error::NoMap)?;
            Compiled::Members(map.zone(*zone_id)?.member_entity_ids.iter().copied().collect())
        }
        ConditionKind::Lasso { polygon } => {
            if polygon.len() < 3 {
                return Err(Error::InvalidQuery("a lasso needs at least 3 vertices".into()));
            }
            Compiled::Lasso(polygon, ctx.map.ok_or(Error::NoMap)?)
        }
        ConditionKind::PathPresence { path_index } => Compiled::Present(check_path(*path_index)?),
        ConditionKind::ValueAtPath { path_index, facet, bucket_key, other_keys } => {
            let keys = match other_keys {
                Some(keys) => keys.iter().map(String::as_str).collect(),
                None => HashSet::from([bucket_key.as_str()]),
            };
            Compiled::Keys { path: check_path(*path_index)?, facet: *facet, keys }
        }
    })
}

fn holds(c: &Compiled<'_>, entity: usize, ctx: &SelectionContext<'_>) -> bool {
    match c {
        Compiled::Members(set) => set.contains(&entity),
        Compiled::Lasso(polygon, map) => map.coordinates.get(entity).is_some_and(|p| zones::contains(polygon, *p)),
        Compiled::Present(path) => !ctx.matrix.get(entity, *path),
        Compiled::Keys { path, facet, keys } => {
            let Some(cell) = ctx.store().cell(entity, *path) else { return false };
            (0..cell.values.len()).any(|i| match facet {
                Facet::Values => keys.contains(ctx.summarizer.value_key(*path, &cell.values[i]).as_str()),
                Facet::Datatypes => cell.datatype(i).is_some_and(|d| keys.contains(d)),
                Facet::Languages => cell.language(i).is_some_and(|l| keys.contains(l)),
            })
        }
    }
}

/// Filters the base set (all entities, or the current selection) by every condition.
pub fn resolve(q: &SelectionQuery, ctx: &SelectionContext<'_>) -> Result<Selection> {
    if q.conditions.is_empty() {
        return Err(Error::EmptyQuery);
    }
    let n = ctx.store().entity_count();
    if ctx.matrix.n_rows() != n {
        return Err(Error::Integrity("matrix and store disagree on the entity count".into()));
    }
    let base: Vec<usize> = match q.scope {
        Scope::WholeSet => (0..n).collect(),
        Scope::CurrentSelection => {
            let current = q.current_ids.as_ref().ok_or(Error::NoCurrentSelection)?;
            if let Some(&bad) = current.iter().find(|&&e| e >= n) {
                return Err(Error::UnknownEntity(bad));
            }
            let set: BTreeSet<usize> = current.iter().copied().collect();
            set.into_iter().collect()
        }
    };
    let compiled: Vec<(Compiled<'_>, bool)> =
        q.conditions.iter().map(|c| Ok((compile(c, ctx)?, c.negated))).collect::<Result<_>>()?;
    let entity_ids =
        base.into_iter().filter(|&e| compiled.iter().all(|(c, negated)| holds(c, e, ctx) != *negated)).collect();
    Ok(Selection { query_used: q.clone(), entity_ids, manually_removed: BTreeSet::new() })
}

/// Checks that every bucket key a condition names occurs in the full-set summary of
/// its path, either as a detailed bucket or among the OTHER keys.
pub fn validate_buckets(q: &SelectionQuery, full: &[PathSummary]) -> Result<()> {
    for c in &q.conditions {
        let ConditionKind::ValueAtPath { path_index, facet, bucket_key, other_keys } = &c.kind else { continue };
        let summary = full.iter().find(|s| s.path_index == *path_index).ok_or(Error::UnknownPath(*path_index))?;
        let f = summary.facet(*facet);
        let known = |k: &str| {
            f.buckets.iter().any(|b| b.key == k) || f.other_keys.binary_search_by(|o| o.as_str().cmp(k)).is_ok()
        };
        let keys: Vec<&str> = match other_keys {
            Some(keys) => keys.iter().map(String::as_str).collect(),
            None => vec![bucket_key.as_str()],
        };
        if let Some(bad) = keys.into_iter().find(|k| !known(k)) {
            return Err(Error::InvalidQuery(format!(
                "bucket {bad:?} does not occur in the {} of path {path_index}",
                facet.as_str()
            )));
        }
    }
    Ok(())
}

/// Moves `ids` that belong to the selection into `manually_removed`; others are ignored.
pub fn remove_entities(sel: &Selection, ids: &[usize]) -> Selection {
    let drop: HashSet<usize> = ids.iter().copied().collect();
    let mut out = sel.clone();
    out.entity_ids.retain(|e| !drop.contains(e));
    out.manually_removed.extend(sel.entity_ids.iter().filter(|e| drop.contains(e)));
    out
}

/// Names used when rendering conditions.
pub struct Vocabulary<'a> {
    pub paths: &'a [PathPattern],
    pub prefixes: &'a PrefixMap,
}

impl Vocabulary<'_> {
    fn path(&self, index: usize) -> String {
        self.paths.get(index).map_or_else(|| format!("#{index}"), |p| p.label.clone())
    }

    fn value(&self, key: &str) -> String {
        if key.contains("://") {
            self.prefixes.compact(key)
        } else {
            format!("{key:?}")
        }
    }

    fn clause(&self, kind: &ConditionKind) -> String {
        match kind {
            ConditionKind::Zone { zone_id } => format!("the zone {zone_id}"),
            ConditionKind::Lasso { polygon } => format!("the lasso region of {} vertices", polygon.len()),
            ConditionKind::PathPresence { path_index } => format!("the path {}", self.path(*path_index)),
            ConditionKind::ValueAtPath { path_index, facet, bucket_key, other_keys } => {
                let noun = match facet {
                    Facet::Values => "value",
                    Facet::Datatypes => "datatype",
                    Facet::Languages => "language",
                };
                let shown = match (other_keys, facet) {
                    (Some(_), _) => OTHER_KEY.to_string(),
                    (None, Facet::Values) => self.value(bucket_key),
                    (None, _) => bucket_key.clone(),
                };
                format!("the {noun} {shown} at the end of the path {}", self.path(*path_index))
            }
        }
    }
}

pub fn condition_pseudocode(c: &Condition, vocab: &Vocabulary<'_>) -> String {
    format!("{} {}", if c.negated { "NOT HAVING" } else { "HAVING" }, vocab.clause(&c.kind))
}

pub fn scope_text(scope: Scope) -> &'static str {
    match scope {
        Scope::WholeSet => "the whole set",
        Scope::CurrentSelection => "the current selection",
    }
}

/// `SELECT entities HAVING ... [AND ...] among the whole set`.
pub fn to_pseudocode(q: &SelectionQuery, vocab: &Vocabulary<'_>) -> Result<String> {
    if q.conditions.is_empty() {
        return Err(Error::EmptyQuery);
    }
    let clauses: Vec<String> = q.conditions.iter().map(|c| condition_pseudocode(c, vocab)).collect();
    Ok(format!("SELECT entities {} among {}", clauses.join(" AND "), scope_text(q.scope)))
}

/// `(uri, label)` per id: the label in `preferred_language` when there is one, else
/// the first label, else the tail of the URI.
pub fn resolve_labels(
    ids: &[usize],
    preferred_language: Option<&str>,
    store: &EntityVectorStore,
) -> Result<Vec<(String, String)>> {
    resolve_labels_with(ids, preferred_language, store, RDFS_LABEL)
}

pub fn resolve_labels_with(
    ids: &[usize],
    preferred_language: Option<&str>,
    store: &EntityVectorStore,
    label_predicate: &str,
) -> Result<Vec<(String, String)>> {
    let label_path = store.find_path(label_predicate);
    let preferred = preferred_language.map(str::to_ascii_lowercase);
    ids.iter()
        .map(|&id| {
            let uri = store.entities.uri(id).ok_or(Error::UnknownEntity(id))?.to_string();
            let cell = label_path.and_then(|p| store.cell(id, p));
            let label = cell.and_then(|c| {
                let pick = preferred
                    .as_deref()
                    .and_then(|lang| (0..c.values.len()).find(|&i| c.language(i) == Some(lang)))
                    .unwrap_or(0);
                c.values.get(pick).cloned()
            });
            let label = label.unwrap_or_else(|| iri_tail(&uri).to_string());
            Ok((uri, label))
        })
        .collect()
}
