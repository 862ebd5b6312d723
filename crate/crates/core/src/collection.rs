//! A collection directory: the ingest pipeline that fills it stage by stage, and the
//! loaded, queryable form of its files.
//!
//! Layout of `<data>/<collection_id>/`:
//! `collection.json`, `paths.csv`, `entities.csv`, `vectors.ndjson`, `matrix.bin`,
//! `coordinates.csv`, `zones.json`, `projection.json`.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::export::{export, ExportBundle};
use crate::gateway::{Endpoint, DEFAULT_MAX_DEPTH};
use crate::harvest::{harvest, plan_partition, EntityIndex, HarvestConfig, ENTITIES_FILE};
use crate::paths::{enumerate_paths, read_paths, write_paths, EnumerationConfig, PATHS_FILE};
use crate::projection::{
    default_color_path, load_map, persist_map, project_with, JobControl, ProjectedMap, ProjectionConfig, ZoneConfig,
    COORDINATES_FILE, PROJECTION_FILE, ZONES_FILE,
};
use crate::selection::{
    resolve, resolve_labels, to_pseudocode, validate_buckets, Scope, Selection, SelectionContext, SelectionQuery,
    Vocabulary,
};
use crate::summaries::{compare, ComparisonFlag, Granularity, PathSummary, Summarizer, SummaryConfig, OTHER_KEY};
use crate::term::{iri_tail, PrefixMap, RDF_TYPE};
use crate::vectors::{
    self, build_vectors, to_matrix, CompletenessMatrix, EntityVectorStore, MATRIX_FILE, VECTORS_FILE,
};

pub const DESCRIPTOR_FILE: &str = "collection.json";
const STAGING_DIR: &str = ".staging";
const STAGE_FILES: [&str; 7] =
    [PATHS_FILE, ENTITIES_FILE, VECTORS_FILE, MATRIX_FILE, COORDINATES_FILE, ZONES_FILE, PROJECTION_FILE];

fn default_depth() -> usize {
    3
}

fn default_membership() -> String {
    RDF_TYPE.to_string()
}

/// What to ingest and from where.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IngestSpec {
    pub class_uri: String,
    /// Endpoint URL, or path of an N-Triples fixture.
    pub source: String,
    #[serde(default = "default_depth")]
    pub max_depth: usize,
    #[serde(default = "default_membership")]
    pub membership_predicate: String,
    #[serde(default)]
    pub include_membership_path: bool,
    #[serde(default)]
    pub min_coverage: f64,
    #[serde(default)]
    pub quota: Option<usize>,
}

impl IngestSpec {
    pub fn new(class_uri: impl Into<String>, source: impl Into<String>, max_depth: usize) -> Self {
        IngestSpec {
            class_uri: class_uri.into(),
            source: source.into(),
            max_depth,
            membership_predicate: default_membership(),
            include_membership_path: false,
            min_coverage: 0.0,
            quota: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_depth == 0 || self.max_depth > DEFAULT_MAX_DEPTH {
            return Err(Error::InvalidConfig(format!("max_depth must be between 1 and {DEFAULT_MAX_DEPTH}")));
        }
        if !(0.0..=1.0).contains(&self.min_coverage) {
            return Err(Error::InvalidConfig("min_coverage must lie in [0, 1]".into()));
        }
        oxrdf::NamedNode::new(self.class_uri.as_str()).map_err(|e| Error::InvalidConfig(format!("class_uri: {e}")))?;
        Ok(())
    }

    pub fn enumeration(&self) -> EnumerationConfig {
        let mut cfg = EnumerationConfig::new(self.class_uri.clone(), self.max_depth);
        cfg.membership_predicate = self.membership_predicate.clone();
        cfg.include_membership_path = self.include_membership_path;
        cfg.min_coverage = self.min_coverage;
        cfg
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "snake_case")]
pub enum IngestStatus {
    Pending,
    Harvesting,
    Vectorizing,
    Projecting,
    Ready,
    Failed { reason: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CollectionDescriptor {
    pub collection_id: String,
    pub class_uri: String,
    pub source: String,
    pub entity_count: u64,
    pub path_count: usize,
    pub status: IngestStatus,
    pub spec: IngestSpec,
    pub updated_at: DateTime<Utc>,
}

impl CollectionDescriptor {
    pub fn new(collection_id: impl Into<String>, spec: &IngestSpec) -> Self {
        CollectionDescriptor {
            collection_id: collection_id.into(),
            class_uri: spec.class_uri.clone(),
            source: spec.source.clone(),
            entity_count: 0,
            path_count: 0,
            status: IngestStatus::Pending,
            spec: spec.clone(),
            updated_at: Utc::now(),
        }
    }

    pub fn read(dir: impl AsRef<Path>) -> Result<Self> {
        Ok(serde_json::from_slice(&fs::read(dir.as_ref().join(DESCRIPTOR_FILE))?)?)
    }

    pub fn write(&mut self, dir: impl AsRef<Path>) -> Result<()> {
        self.updated_at = Utc::now();
        write_atomic(&dir.as_ref().join(DESCRIPTOR_FILE), &serde_json::to_vec_pretty(self)?)
    }
}

fn write_atomic(target: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = target.with_extension("tmp");
    fs::write(&tmp, bytes)?;
    fs::rename(tmp, target)?;
    Ok(())
}

/// Lowercase, dash-separated identifier derived from the class IRI.
pub fn slug(class_uri: &str) -> String {
    let mut out = String::new();
    for c in iri_tail(class_uri).chars() {
        if c.is_ascii_alphanumeric() {
            out.push(c.to_ascii_lowercase());
        } else if !out.ends_with('-') && !out.is_empty() {
            out.push('-');
        }
    }
    let out = out.trim_end_matches('-').to_string();
    if out.is_empty() {
        "collection".into()
    } else {
        out
    }
}

fn exists(dir: &Path, files: &[&str]) -> bool {
    files.iter().all(|f| dir.join(f).is_file())
}

/// Moves `files` from the staging directory into `dir`, last file last.
fn commit(dir: &Path, staging: &Path, files: &[&str]) -> Result<()> {
    for f in files {
        fs::rename(staging.join(f), dir.join(f))?;
    }
    Ok(())
}

/// Runs or resumes the pipeline in `dir`: path enumeration and entity harvest,
/// vectors and matrix, then the default projection. A stage whose files are all
/// present is skipped. The descriptor is rewritten at every status change and
/// records the failure reason when a stage fails.
pub fn ingest(
    dir: &Path,
    collection_id: &str,
    spec: &IngestSpec,
    endpoint: &dyn Endpoint,
    control: &JobControl,
) -> Result<CollectionDescriptor> {
    spec.validate()?;
    fs::create_dir_all(dir)?;
    let mut desc = match CollectionDescriptor::read(dir) {
        Ok(d) if d.spec == *spec && d.collection_id == collection_id => d,
        _ => {
            // Stage files written under other ingest settings must not be resumed from.
            for name in STAGE_FILES {
                match fs::remove_file(dir.join(name)) {
                    Err(e) if e.kind() != std::io::ErrorKind::NotFound => return Err(e.into()),
                    _ => {}
                }
            }
            CollectionDescriptor::new(collection_id, spec)
        }
    };
    match run_stages(dir, &mut desc, endpoint, control) {
        Ok(()) => Ok(desc),
        Err(e) => {
            desc.status = IngestStatus::Failed { reason: e.to_string() };
            desc.write(dir)?;
            Err(e)
        }
    }
}

fn run_stages(
    dir: &Path,
    desc: &mut CollectionDescriptor,
    endpoint: &dyn Endpoint,
    control: &JobControl,
) -> Result<()> {
    let spec = desc.spec.clone();
    let scope = spec.enumeration();
    let staging = dir.join(STAGING_DIR);
    fs::create_dir_all(&staging)?;
    let check = || if control.is_cancelled() { Err(Error::Cancelled) } else { Ok(()) };

    desc.status = IngestStatus::Harvesting;
    desc.write(dir)?;
    let paths = if exists(dir, &[PATHS_FILE]) && desc.entity_count > 0 {
        read_paths(dir.join(PATHS_FILE))?
    } else {
        let enumeration = enumerate_paths(&scope, endpoint)?;
        write_paths(staging.join(PATHS_FILE), &enumeration.paths)?;
        commit(dir, &staging, &[PATHS_FILE])?;
        desc.entity_count = enumeration.total_entities;
        enumeration.paths
    };
    desc.path_count = paths.len();
    desc.write(dir)?;
    control.set_progress(0.2);
    check()?;

    let entities = if exists(dir, &[ENTITIES_FILE]) {
        EntityIndex::read_csv(dir.join(ENTITIES_FILE))?
    } else {
        let cfg = HarvestConfig::new(endpoint.quota());
        let plan = plan_partition(&paths, desc.entity_count, &cfg, &scope, endpoint)?;
        let index = harvest(&plan, &scope, endpoint)?;
        index.write_csv(staging.join(ENTITIES_FILE))?;
        commit(dir, &staging, &[ENTITIES_FILE])?;
        index
    };
    if entities.len() as u64 != desc.entity_count {
        return Err(Error::Integrity(format!(
            "{ENTITIES_FILE} lists {} entities, the collection counts {}",
            entities.len(),
            desc.entity_count
        )));
    }
    control.set_progress(0.4);
    check()?;

    desc.status = IngestStatus::Vectorizing;
    desc.write(dir)?;
    let matrix = if exists(dir, &[VECTORS_FILE, MATRIX_FILE]) {
        vectors::load_matrix(dir)?
    } else {
        let store = build_vectors(&entities, &paths, &scope, endpoint, &scope.prefixes)?;
        vectors::persist(&store, &staging)?;
        commit(dir, &staging, &[VECTORS_FILE, MATRIX_FILE])?;
        to_matrix(&store)
    };
    control.set_progress(0.6);
    check()?;

    desc.status = IngestStatus::Projecting;
    desc.write(dir)?;
    if !exists(dir, &[COORDINATES_FILE, ZONES_FILE, PROJECTION_FILE]) {
        let map = project_with(&matrix, &ProjectionConfig::all_paths(paths.len()), &ZoneConfig::default(), control)?;
        persist_map(&map, &staging)?;
        commit(dir, &staging, &[COORDINATES_FILE, ZONES_FILE, PROJECTION_FILE])?;
    }
    let _ = fs::remove_dir_all(&staging);

    desc.status = IngestStatus::Ready;
    desc.write(dir)?;
    control.set_progress(1.0);
    Ok(())
}

/// Atomically replaces the map files of a collection directory.
pub fn commit_map(dir: &Path, map: &ProjectedMap) -> Result<()> {
    let staging = dir.join(STAGING_DIR);
    fs::create_dir_all(&staging)?;
    persist_map(map, &staging)?;
    commit(dir, &staging, &[COORDINATES_FILE, ZONES_FILE, PROJECTION_FILE])
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntityLabel {
    pub id: usize,
    pub uri: String,
    pub label: String,
}

/// Subset view returned for a resolved selection.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Inspection {
    pub pseudocode: String,
    pub entity_ids: Vec<usize>,
    pub labels: Vec<EntityLabel>,
    pub summaries: Vec<PathSummary>,
    pub flags: Vec<ComparisonFlag>,
}

/// A ready collection held in memory.
pub struct Collection {
    pub dir: Option<PathBuf>,
    pub descriptor: CollectionDescriptor,
    pub prefixes: PrefixMap,
    pub store: EntityVectorStore,
    pub matrix: CompletenessMatrix,
    pub map: Option<ProjectedMap>,
    summary_cfg: SummaryConfig,
    granularity: Vec<Option<Granularity>>,
    full: Vec<PathSummary>,
}

impl Collection {
    /// Loads a collection directory. The map is optional.
    pub fn open(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let descriptor = CollectionDescriptor::read(dir)?;
        let store = vectors::load(dir)?;
        let matrix = vectors::load_matrix(dir)?;
        let map =
            if exists(dir, &[COORDINATES_FILE, ZONES_FILE, PROJECTION_FILE]) { Some(load_map(dir)?) } else { None };
        let mut c = Collection::from_parts(descriptor, store, matrix, map, SummaryConfig::default())?;
        c.dir = Some(dir.to_path_buf());
        Ok(c)
    }

    pub fn from_parts(
        descriptor: CollectionDescriptor,
        store: EntityVectorStore,
        matrix: CompletenessMatrix,
        map: Option<ProjectedMap>,
        summary_cfg: SummaryConfig,
    ) -> Result<Self> {
        if matrix.n_rows() != store.entity_count() || matrix.n_paths() != store.path_count() {
            return Err(Error::Integrity("matrix dimensions disagree with the vectors".into()));
        }
        if let Some(m) = &map {
            if m.coordinates.len() != store.entity_count() {
                return Err(Error::Integrity("map has one point per entity".into()));
            }
        }
        let (granularity, full) = {
            let s = Summarizer::new(&store, &summary_cfg)?;
            let all: Vec<usize> = (0..store.entity_count()).collect();
            (s.granularities().to_vec(), s.summarize_all(&all)?)
        };
        Ok(Collection {
            dir: None,
            descriptor,
            prefixes: PrefixMap::default(),
            store,
            matrix,
            map,
            summary_cfg,
            granularity,
            full,
        })
    }

    pub fn id(&self) -> &str {
        &self.descriptor.collection_id
    }

    pub fn summarizer(&self) -> Summarizer<'_> {
        Summarizer::with_granularities(&self.store, &self.summary_cfg, self.granularity.clone())
            .expect("granularities were computed for this store")
    }

    pub fn full_summaries(&self) -> &[PathSummary] {
        &self.full
    }

    pub fn vocabulary(&self) -> Vocabulary<'_> {
        Vocabulary { paths: &self.store.paths, prefixes: &self.prefixes }
    }

    pub fn set_map(&mut self, map: ProjectedMap) -> Result<()> {
        if map.coordinates.len() != self.store.entity_count() {
            return Err(Error::Integrity("map has one point per entity".into()));
        }
        self.map = Some(map);
        Ok(())
    }

    /// Validates bucket keys against the full summaries, then resolves.
    pub fn resolve(&self, q: &SelectionQuery) -> Result<Selection> {
        validate_buckets(q, &self.full)?;
        let summarizer = self.summarizer();
        let ctx = SelectionContext { summarizer: &summarizer, matrix: &self.matrix, map: self.map.as_ref() };
        resolve(q, &ctx)
    }

    pub fn labels(&self, ids: &[usize], preferred_language: Option<&str>) -> Result<Vec<EntityLabel>> {
        Ok(resolve_labels(ids, preferred_language, &self.store)?
            .into_iter()
            .zip(ids)
            .map(|((uri, label), &id)| EntityLabel { id, uri, label })
            .collect())
    }

    /// Summaries and comparison flags of `ids` against the full set.
    pub fn subset_view(&self, ids: &[usize]) -> Result<(Vec<PathSummary>, Vec<ComparisonFlag>)> {
        let summaries = self.summarizer().summarize_all(ids)?;
        let flags =
            self.full.iter().zip(&summaries).map(|(f, s)| compare(f, s, &self.summary_cfg)).collect::<Result<_>>()?;
        Ok((summaries, flags))
    }

    pub fn inspect(&self, q: &SelectionQuery, preferred_language: Option<&str>) -> Result<Inspection> {
        let selection = self.resolve(q)?;
        self.inspect_selection(&selection, preferred_language)
    }

    pub fn inspect_selection(&self, sel: &Selection, preferred_language: Option<&str>) -> Result<Inspection> {
        let (summaries, flags) = self.subset_view(&sel.entity_ids)?;
        Ok(Inspection {
            pseudocode: to_pseudocode(&sel.query_used, &self.vocabulary()).unwrap_or_default(),
            labels: self.labels(&sel.entity_ids, preferred_language)?,
            entity_ids: sel.entity_ids.clone(),
            summaries,
            flags,
        })
    }

    /// A selection from a query, explicit ids, or both. With both, the ids must be
    /// part of the query's result and the rest of that result counts as removed.
    pub fn selection_for(&self, query: Option<&SelectionQuery>, ids: Option<&[usize]>) -> Result<Selection> {
        match (query, ids) {
            (Some(q), None) => self.resolve(q),
            (Some(q), Some(ids)) => {
                let resolved = self.resolve(q)?;
                let keep: BTreeSet<usize> = ids.iter().copied().collect();
                if let Some(bad) = keep.iter().find(|i| resolved.entity_ids.binary_search(i).is_err()) {
                    return Err(Error::Unresolved(format!("entity {bad} is not selected by the query")));
                }
                let removed: Vec<usize> = resolved.entity_ids.iter().copied().filter(|i| !keep.contains(i)).collect();
                Ok(crate::selection::remove_entities(&resolved, &removed))
            }
            (None, Some(ids)) => {
                if let Some(&bad) = ids.iter().find(|&&i| i >= self.store.entity_count()) {
                    return Err(Error::UnknownEntity(bad));
                }
                let entity_ids: BTreeSet<usize> = ids.iter().copied().collect();
                Ok(Selection {
                    query_used: SelectionQuery::new(Vec::new(), Scope::WholeSet),
                    entity_ids: entity_ids.into_iter().collect(),
                    manually_removed: BTreeSet::new(),
                })
            }
            (None, None) => Err(Error::EmptyQuery),
        }
    }

    pub fn export(&self, sel: &Selection, preferred_language: Option<&str>, at: DateTime<Utc>) -> Result<ExportBundle> {
        let labels: Vec<(String, String)> =
            self.labels(&sel.entity_ids, preferred_language)?.into_iter().map(|l| (l.uri, l.label)).collect();
        let subset = self.summarizer().summarize_all(&sel.entity_ids)?;
        export(self.id(), sel, &labels, &self.full, &subset, &self.vocabulary(), at)
    }

    pub fn default_color_path(&self) -> Option<usize> {
        default_color_path(&self.full, |i| self.store.paths[i].completeness)
    }

    /// Per entity, the full-set buckets its values fall in on `path_index`: the
    /// bucket key, or OTHER. Empty for entities lacking the path.
    pub fn color_buckets(&self, path_index: usize) -> Result<Vec<Vec<String>>> {
        let summary = self.full.get(path_index).ok_or(Error::UnknownPath(path_index))?;
        let summarizer = self.summarizer();
        Ok((0..self.store.entity_count())
            .map(|e| {
                let mut keys: Vec<String> = Vec::new();
                if let Some(cell) = self.store.cell(e, path_index) {
                    for v in &cell.values {
                        let k = summarizer.value_key(path_index, v);
                        let k = if summary.values.count_of(&k) > 0 { k } else { OTHER_KEY.to_string() };
                        if !keys.contains(&k) {
                            keys.push(k);
                        }
                    }
                }
                keys
            })
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slugs() {
        assert_eq!(slug("http://www.wikidata.org/entity/Q1004"), "q1004");
        assert_eq!(slug("http://example.org/Comic_Book"), "comic-book");
        assert_eq!(slug("http://example.org/"), "example-org");
        assert_eq!(slug("urn:"), "urn");
    }

    #[test]
    fn spec_defaults_from_json() {
        let s: IngestSpec = serde_json::from_str(r#"{"class_uri":"http://e/C","source":"f.nt"}"#).unwrap();
        assert_eq!(s.max_depth, 3);
        assert_eq!(s.membership_predicate, RDF_TYPE);
        assert!(s.validate().is_ok());
        let bad = IngestSpec { max_depth: 0, ..s };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn status_json() {
        let s = IngestStatus::Failed { reason: "x".into() };
        assert_eq!(serde_json::to_string(&s).unwrap(), r#"{"state":"failed","reason":"x"}"#);
    }
}
