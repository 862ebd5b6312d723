//! Access to a SPARQL data source through a small vocabulary of structured queries.
//!
//! Every question the engine asks of a collection fits one [`QueryKind`]. A query is
//! either rendered to SPARQL 1.1 text and sent to a remote endpoint ([`HttpEndpoint`]),
//! or evaluated directly by an in-memory triple store ([`FixtureStore`]). Both routes
//! truncate results at the endpoint quota so quota handling is testable offline.

mod fixture;
mod http;
mod sparql;

use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::term::{Term, RDF_TYPE};

pub use fixture::FixtureStore;
pub use http::HttpEndpoint;
pub use sparql::render_sparql;

pub const DEFAULT_QUOTA: usize = 10_000;
pub const DEFAULT_MAX_DEPTH: usize = 8;
pub const DEFAULT_MAX_IN_FLIGHT: usize = 4;
pub const ENDPOINT_ENV: &str = "MISSINGPATH_ENDPOINT";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QueryKind {
    /// Distinct predicates leaving the end of `path` (the collection entities when empty).
    DistinctPredicatesAtDepth,
    CountEntitiesWithPath,
    CountAllEntities,
    /// Terminal values of `path` with the number of distinct entities reaching each,
    /// ordered by count descending.
    ValueHistogramAtPath,
    EntitiesWithValueAtPath,
    EntitiesWithoutPath,
    /// `(entity, value, DATATYPE(value), LANG(value))` for every entity reaching `path`.
    TerminalValuesForAllEntities,
    /// Every instance of the class, used when the collection fits under the quota.
    ListEntities,
}

impl QueryKind {
    pub fn columns(self) -> &'static [&'static str] {
        match self {
            QueryKind::DistinctPredicatesAtDepth => &["p"],
            QueryKind::CountEntitiesWithPath | QueryKind::CountAllEntities => &["count"],
            QueryKind::ValueHistogramAtPath => &["value", "count"],
            QueryKind::EntitiesWithValueAtPath | QueryKind::EntitiesWithoutPath | QueryKind::ListEntities => &["e"],
            QueryKind::TerminalValuesForAllEntities => &["e", "value", "datatype", "lang"],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StructuredQuery {
    pub kind: QueryKind,
    pub class_uri: String,
    /// Predicate linking an entity to `class_uri`; `rdf:type` unless the source uses
    /// its own (e.g. `wdt:P31`).
    pub membership_predicate: String,
    pub path: Vec<String>,
    pub value: Option<Term>,
    pub limit: Option<usize>,
    /// Restricts `TerminalValuesForAllEntities` to these entity IRIs.
    pub entities: Option<Vec<String>>,
}

impl StructuredQuery {
    pub fn new(kind: QueryKind, class_uri: impl Into<String>) -> Self {
        StructuredQuery {
            kind,
            class_uri: class_uri.into(),
            membership_predicate: RDF_TYPE.to_string(),
            path: Vec::new(),
            value: None,
            limit: None,
            entities: None,
        }
    }

    pub fn with_path<I, S>(mut self, path: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.path = path.into_iter().map(Into::into).collect();
        self
    }

    pub fn with_value(mut self, value: Term) -> Self {
        self.value = Some(value);
        self
    }

    pub fn with_limit(mut self, limit: usize) -> Self {
        self.limit = Some(limit);
        self
    }

    pub fn with_membership(mut self, predicate: impl Into<String>) -> Self {
        self.membership_predicate = predicate.into();
        self
    }

    pub fn with_entities(mut self, entities: Vec<String>) -> Self {
        self.entities = Some(entities);
        self
    }

    pub fn validate(&self, max_depth: usize) -> Result<(), GatewayError> {
        check_iri(&self.class_uri)?;
        check_iri(&self.membership_predicate)?;
        for p in &self.path {
            check_iri(p)?;
        }
        if self.path.len() > max_depth {
            return Err(GatewayError::Invalid(format!(
                "path length {} exceeds max depth {max_depth}",
                self.path.len()
            )));
        }
        if let Some(Term::Iri { value }) = &self.value {
            check_iri(value)?;
        }
        if let Some(entities) = &self.entities {
            for e in entities {
                check_iri(e)?;
            }
        }
        if self.limit == Some(0) {
            return Err(GatewayError::Invalid("limit must be positive".into()));
        }
        match self.kind {
            QueryKind::EntitiesWithValueAtPath if self.path.is_empty() || self.value.is_none() => {
                Err(GatewayError::Invalid("EntitiesWithValueAtPath requires a non-empty path and a value".into()))
            }
            QueryKind::CountEntitiesWithPath
            | QueryKind::ValueHistogramAtPath
            | QueryKind::EntitiesWithoutPath
            | QueryKind::TerminalValuesForAllEntities
                if self.path.is_empty() =>
            {
                Err(GatewayError::Invalid(format!("{:?} requires a non-empty path", self.kind)))
            }
            _ => Ok(()),
        }
    }
}

fn check_iri(iri: &str) -> Result<(), GatewayError> {
    oxrdf::NamedNode::new(iri).map(|_| ()).map_err(|e| GatewayError::Invalid(format!("malformed IRI <{iri}>: {e}")))
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResultTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Option<Term>>>,
}

impl ResultTable {
    pub fn new(columns: &[&str]) -> Self {
        ResultTable { columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn truncate(&mut self, quota: usize) {
        self.rows.truncate(quota);
    }

    /// Single COUNT cell of an aggregate query; an empty table counts as zero.
    pub fn single_count(&self) -> Result<u64, GatewayError> {
        match self.rows.first() {
            None => Ok(0),
            Some(row) => row
                .first()
                .and_then(|c| c.as_ref())
                .and_then(Term::as_count)
                .ok_or_else(|| GatewayError::Decode("expected an integer count".into())),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EndpointConfig {
    /// Endpoint URL or fixture file path.
    pub base_url: String,
    pub quota: usize,
    pub request_timeout: Duration,
    pub max_depth: usize,
    pub max_in_flight: usize,
}

impl EndpointConfig {
    pub fn new(base_url: impl Into<String>) -> Self {
        EndpointConfig {
            base_url: base_url.into(),
            quota: DEFAULT_QUOTA,
            request_timeout: Duration::from_secs(60),
            max_depth: DEFAULT_MAX_DEPTH,
            max_in_flight: DEFAULT_MAX_IN_FLIGHT,
        }
    }

    /// Applies the `MISSINGPATH_ENDPOINT` override when set.
    pub fn with_env_override(mut self) -> Self {
        if let Ok(url) = std::env::var(ENDPOINT_ENV) {
            if !url.trim().is_empty() {
                self.base_url = url;
            }
        }
        self
    }

    pub fn with_quota(mut self, quota: usize) -> Self {
        self.quota = quota.max(1);
        self
    }
}

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("invalid query: {0}")]
    Invalid(String),
    #[error("transport error: {0}")]
    Transport(String),
    #[error("endpoint returned HTTP {status}: {body}")]
    Endpoint { status: u16, body: String },
    #[error("malformed results document: {0}")]
    Decode(String),
    #[error("fixture parse error at line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl GatewayError {
    pub fn is_retryable(&self) -> bool {
        matches!(self, GatewayError::Transport(_))
    }
}

/// A source able to answer [`StructuredQuery`]s. Implementations are stateless per
/// request and shared across threads.
pub trait Endpoint: Send + Sync {
    fn execute(&self, query: &StructuredQuery) -> Result<ResultTable, GatewayError>;

    fn quota(&self) -> usize;
}

impl<E: Endpoint + ?Sized> Endpoint for &E {
    fn execute(&self, query: &StructuredQuery) -> Result<ResultTable, GatewayError> {
        (**self).execute(query)
    }

    fn quota(&self) -> usize {
        (**self).quota()
    }
}

impl<E: Endpoint + ?Sized> Endpoint for std::sync::Arc<E> {
    fn execute(&self, query: &StructuredQuery) -> Result<ResultTable, GatewayError> {
        (**self).execute(query)
    }

    fn quota(&self) -> usize {
        (**self).quota()
    }
}

impl<E: Endpoint + ?Sized> Endpoint for Box<E> {
    fn execute(&self, query: &StructuredQuery) -> Result<ResultTable, GatewayError> {
        (**self).execute(query)
    }

    fn quota(&self) -> usize {
        (**self).quota()
    }
}

/// Opens a fixture file when `base_url` names an existing local file, otherwise an
/// HTTP endpoint.
pub fn open(cfg: &EndpointConfig) -> Result<Box<dyn Endpoint>, GatewayError> {
    let looks_remote = cfg.base_url.starts_with("http://") || cfg.base_url.starts_with("https://");
    if !looks_remote {
        let store = FixtureStore::load(&cfg.base_url)?.with_config(cfg);
        return Ok(Box::new(store));
    }
    Ok(Box::new(HttpEndpoint::new(cfg.clone())?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation_rules() {
        let q = StructuredQuery::new(QueryKind::EntitiesWithValueAtPath, "http://ex.org/Book")
            .with_path(["http://ex.org/genre"]);
        assert!(matches!(q.validate(4), Err(GatewayError::Invalid(_))));
        let q = q.with_value(Term::iri("http://ex.org/g1"));
        assert!(q.validate(4).is_ok());
        assert!(q.validate(0).is_err());

        let bad = StructuredQuery::new(QueryKind::CountAllEntities, "not an iri");
        assert!(matches!(bad.validate(4), Err(GatewayError::Invalid(_))));
        let bad = StructuredQuery::new(QueryKind::CountAllEntities, "http://ex.org/a b");
        assert!(bad.validate(4).is_err());
    }

    #[test]
    fn only_transport_errors_retry() {
        assert!(GatewayError::Transport("reset".into()).is_retryable());
        assert!(!GatewayError::Endpoint { status: 500, body: String::new() }.is_retryable());
        assert!(!GatewayError::Decode("x".into()).is_retryable());
    }
}
