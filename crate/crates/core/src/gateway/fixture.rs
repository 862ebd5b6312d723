use std::collections::{BTreeSet, HashMap};
use std::path::Path;
use std::sync::Mutex;

use indexmap::{IndexMap, IndexSet};
use oxttl::NTriplesParser;

use super::{
    Endpoint, EndpointConfig, GatewayError, QueryKind, ResultTable, StructuredQuery, DEFAULT_MAX_DEPTH, DEFAULT_QUOTA,
};
use crate::term::{Term, RDF_LANG_STRING, XSD_STRING};

type Outgoing = IndexMap<String, IndexSet<Term>>;

/// In-memory triple store answering [`StructuredQuery`]s directly.
///
/// Triples have set semantics; objects of a subject/predicate pair keep file order.
/// Results are truncated at the configured quota exactly as a remote endpoint would.
#[derive(Debug)]
pub struct FixtureStore {
    out: HashMap<Term, Outgoing>,
    by_predicate_object: HashMap<(String, Term), BTreeSet<Term>>,
    triple_count: usize,
    quota: usize,
    max_depth: usize,
    log: Mutex<Vec<QueryKind>>,
}

impl Default for FixtureStore {
    fn default() -> Self {
        FixtureStore {
            out: HashMap::new(),
            by_predicate_object: HashMap::new(),
            triple_count: 0,
            quota: DEFAULT_QUOTA,
            max_depth: DEFAULT_MAX_DEPTH,
            log: Mutex::new(Vec::new()),
        }
    }
}

impl Clone for FixtureStore {
    fn clone(&self) -> Self {
        FixtureStore {
            out: self.out.clone(),
            by_predicate_object: self.by_predicate_object.clone(),
            triple_count: self.triple_count,
            quota: self.quota,
            max_depth: self.max_depth,
            log: Mutex::new(Vec::new()),
        }
    }
}

impl FixtureStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Loads an N-Triples file.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, GatewayError> {
        let bytes = std::fs::read(path)?;
        Self::parse(&bytes)
    }

    pub fn parse(data: &[u8]) -> Result<Self, GatewayError> {
        let mut store = FixtureStore::new();
        for triple in NTriplesParser::new().for_slice(data) {
            let triple = triple.map_err(|e| GatewayError::Parse {
                line: e.location().start.line + 1,
                message: e.message().to_string(),
            })?;
            let subject = match triple.subject {
                oxrdf::NamedOrBlankNode::NamedNode(n) => Term::iri(n.into_string()),
                oxrdf::NamedOrBlankNode::BlankNode(b) => Term::blank(b.into_string()),
            };
            let object = match triple.object {
                oxrdf::Term::NamedNode(n) => Term::iri(n.into_string()),
                oxrdf::Term::BlankNode(b) => Term::blank(b.into_string()),
                oxrdf::Term::Literal(l) => match l.language() {
                    Some(lang) => Term::lang(l.value(), lang),
                    None => Term::typed(l.value(), l.datatype().as_str()),
                },
                #[allow(unreachable_patterns)]
                _ => return Err(GatewayError::Parse { line: 0, message: "quoted triples are not supported".into() }),
            };
            store.insert(subject, triple.predicate.into_string(), object);
        }
        Ok(store)
    }

    pub fn with_config(mut self, cfg: &EndpointConfig) -> Self {
        self.quota = cfg.quota.max(1);
        self.max_depth = cfg.max_depth;
        self
    }

    pub fn with_quota(mut self, quota: usize) -> Self {
        self.quota = quota.max(1);
        self
    }

    /// Inserts a triple; returns false when it was already present.
    pub fn insert(&mut self, subject: Term, predicate: impl Into<String>, object: Term) -> bool {
        let predicate = predicate.into();
        let added =
            self.out.entry(subject.clone()).or_default().entry(predicate.clone()).or_default().insert(object.clone());
        if added {
            self.triple_count += 1;
            self.by_predicate_object.entry((predicate, object)).or_default().insert(subject);
        }
        added
    }

    pub fn len(&self) -> usize {
        self.triple_count
    }

    pub fn is_empty(&self) -> bool {
        self.triple_count == 0
    }

    /// All triples, subjects sorted, objects in insertion order.
    pub fn triples(&self) -> Vec<(Term, String, Term)> {
        let mut subjects: Vec<&Term> = self.out.keys().collect();
        subjects.sort();
        let mut triples = Vec::with_capacity(self.triple_count);
        for s in subjects {
            for (p, objects) in &self.out[s] {
                for o in objects {
                    triples.push((s.clone(), p.clone(), o.clone()));
                }
            }
        }
        triples
    }

    pub fn to_ntriples(&self) -> String {
        let mut text = String::new();
        for (s, p, o) in self.triples() {
            text.push_str(&format!("{s} <{p}> {o} .\n"));
        }
        text
    }

    /// Query kinds executed so far, in order.
    pub fn executed(&self) -> Vec<QueryKind> {
        self.log.lock().expect("query log poisoned").clone()
    }

    pub fn instances(&self, membership: &str, class_uri: &str) -> Vec<Term> {
        self.by_predicate_object
            .get(&(membership.to_string(), Term::iri(class_uri)))
            .map(|s| s.iter().cloned().collect())
            .unwrap_or_default()
    }

    /// Nodes at the end of `path` starting from `start`, in traversal order.
    pub fn reach(&self, start: &Term, path: &[String]) -> IndexSet<Term> {
        let mut frontier: IndexSet<Term> = IndexSet::new();
        frontier.insert(start.clone());
        for p in path {
            let mut next = IndexSet::new();
            for node in &frontier {
                if let Some(objects) = self.out.get(node).and_then(|o| o.get(p)) {
                    next.extend(objects.iter().cloned());
                }
            }
            if next.is_empty() {
                return next;
            }
            frontier = next;
        }
        frontier
    }

    fn scoped_instances(&self, q: &StructuredQuery) -> Vec<Term> {
        let mut instances = self.instances(&q.membership_predicate, &q.class_uri);
        if let Some(only) = &q.entities {
            let only: std::collections::HashSet<&str> = only.iter().map(String::as_str).collect();
            instances.retain(|t| t.as_iri().is_some_and(|iri| only.contains(iri)));
        }
        instances
    }

    fn evaluate(&self, q: &StructuredQuery) -> ResultTable {
        let mut table = ResultTable::new(q.kind.columns());
        let instances = self.scoped_instances(q);
        match q.kind {
            QueryKind::DistinctPredicatesAtDepth => {
                let mut predicates = BTreeSet::new();
                for e in &instances {
                    for node in self.reach(e, &q.path) {
                        if let Some(out) = self.out.get(&node) {
                            predicates.extend(out.keys().cloned());
                        }
                    }
                }
                table.rows = predicates.into_iter().map(|p| vec![Some(Term::iri(p))]).collect();
            }
            QueryKind::CountEntitiesWithPath => {
                let n = instances.iter().filter(|e| !self.reach(e, &q.path).is_empty()).count();
                table.rows.push(vec![Some(Term::integer(n as u64))]);
            }
            QueryKind::CountAllEntities => {
                table.rows.push(vec![Some(Term::integer(instances.len() as u64))]);
            }
            QueryKind::ValueHistogramAtPath => {
                let mut counts: IndexMap<Term, u64> = IndexMap::new();
                for e in &instances {
                    for v in self.reach(e, &q.path) {
                        *counts.entry(v).or_default() += 1;
                    }
                }
                let mut rows: Vec<(Term, u64)> = counts.into_iter().collect();
                rows.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| sparql_order(&a.0, &b.0)));
                table.rows = rows.into_iter().map(|(v, c)| vec![Some(v), Some(Term::integer(c))]).collect();
            }
            QueryKind::EntitiesWithValueAtPath => {
                let value = q.value.as_ref().expect("validated");
                for e in instances {
                    let reached = self.reach(&e, &q.path);
                    let hit = match value {
                        Term::Blank { .. } => !reached.is_empty(),
                        v => reached.contains(v),
                    };
                    if hit {
                        table.rows.push(vec![Some(e)]);
                    }
                }
            }
            QueryKind::EntitiesWithoutPath => {
                for e in instances {
                    if self.reach(&e, &q.path).is_empty() {
                        table.rows.push(vec![Some(e)]);
                    }
                }
            }
            QueryKind::TerminalValuesForAllEntities => {
                for e in instances {
                    for v in self.reach(&e, &q.path) {
                        let (datatype, lang) = match &v {
                            Term::Literal(l) => {
                                let dt = match (&l.language, &l.datatype) {
                                    (Some(_), _) => RDF_LANG_STRING.to_string(),
                                    (None, Some(dt)) => dt.clone(),
                                    (None, None) => XSD_STRING.to_string(),
                                };
                                let lang = l.language.clone().unwrap_or_default();
                                (Some(Term::iri(dt)), Some(Term::plain(lang)))
                            }
                            _ => (None, None),
                        };
                        table.rows.push(vec![Some(e.clone()), Some(v), datatype, lang]);
                    }
                }
            }
            QueryKind::ListEntities => {
                table.rows = instances.into_iter().map(|e| vec![Some(e)]).collect();
            }
        }
        table
    }
}

/// SPARQL ORDER BY ranking: blank nodes, then IRIs, then literals.
fn sparql_order(a: &Term, b: &Term) -> std::cmp::Ordering {
    fn rank(t: &Term) -> u8 {
        match t {
            Term::Blank { .. } => 0,
            Term::Iri { .. } => 1,
            Term::Literal(_) => 2,
        }
    }
    rank(a).cmp(&rank(b)).then_with(|| a.display_text().cmp(&b.display_text()))
}

impl Endpoint for FixtureStore {
    fn execute(&self, query: &StructuredQuery) -> Result<ResultTable, GatewayError> {
        query.validate(self.max_depth)?;
        self.log.lock().expect("query log poisoned").push(query.kind);
        let mut table = self.evaluate(query);
        let cap = query.limit.map_or(self.quota, |l| l.min(self.quota));
        table.truncate(cap);
        Ok(table)
    }

    fn quota(&self) -> usize {
        self.quota
    }
}
