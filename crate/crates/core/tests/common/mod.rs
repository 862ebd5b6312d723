//! Shared helpers: a reference SPARQL server over an in-memory oxigraph store, and
//! brute-force traversals of a triple list.

#![allow(dead_code)]

use std::collections::{BTreeSet, HashMap, HashSet};
use std::net::SocketAddr;
use std::sync::Arc;

use axum::extract::{Form, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::Router;
use missingpath_core::gateway::FixtureStore;
use missingpath_core::term::Term;
use oxigraph::io::RdfFormat;
use oxigraph::sparql::results::{QueryResultsFormat, QueryResultsSerializer};
use oxigraph::sparql::{QueryResults, SparqlEvaluator};
use oxigraph::store::Store;

/// Serves `router` on an ephemeral port from a background thread.
pub fn spawn_router(router: Router) -> String {
    let (tx, rx) = std::sync::mpsc::channel::<SocketAddr>();
    std::thread::spawn(move || {
        let rt = tokio::runtime::Builder::new_multi_thread().worker_threads(2).enable_all().build().unwrap();
        rt.block_on(async move {
            let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
            tx.send(listener.local_addr().unwrap()).unwrap();
            axum::serve(listener, router).await.unwrap();
        });
    });
    format!("http://{}/sparql", rx.recv().unwrap())
}

fn evaluate(store: &Store, query: &str) -> Response {
    let results = match SparqlEvaluator::new().parse_query(query) {
        Ok(q) => q.on_store(store).execute(),
        Err(e) => return (StatusCode::BAD_REQUEST, e.to_string()).into_response(),
    };
    let Ok(QueryResults::Solutions(solutions)) = results else {
        return (StatusCode::INTERNAL_SERVER_ERROR, "evaluation failed").into_response();
    };
    let serializer = QueryResultsSerializer::from_format(QueryResultsFormat::Json);
    let mut w = serializer.serialize_solutions_to_writer(Vec::new(), solutions.variables().to_vec()).unwrap();
    for s in solutions {
        w.serialize(&s.unwrap()).unwrap();
    }
    let body = w.finish().unwrap();
    ([(header::CONTENT_TYPE, "application/sparql-results+json")], body).into_response()
}

/// A SPARQL 1.1 Protocol endpoint (GET and form POST) answering from oxigraph.
pub fn spawn_oxigraph(ntriples: &str) -> String {
    let store = Store::new().unwrap();
    store.load_from_slice(RdfFormat::NTriples, ntriples.as_bytes()).unwrap();
    let store = Arc::new(store);
    let router = Router::new()
        .route(
            "/sparql",
            get(|State(s): State<Arc<Store>>, Query(p): Query<HashMap<String, String>>| async move {
                evaluate(&s, p.get("query").map(String::as_str).unwrap_or(""))
            })
            .post(|State(s): State<Arc<Store>>, Form(p): Form<HashMap<String, String>>| async move {
                evaluate(&s, p.get("query").map(String::as_str).unwrap_or(""))
            }),
        )
        .with_state(store);
    spawn_router(router)
}

/// Triples indexed by subject, for traversals that do not go through the gateway.
pub struct Graph {
    pub out: HashMap<Term, Vec<(String, Term)>>,
}

impl Graph {
    pub fn new(store: &FixtureStore) -> Self {
        let mut out: HashMap<Term, Vec<(String, Term)>> = HashMap::new();
        for (s, p, o) in store.triples() {
            out.entry(s).or_default().push((p, o));
        }
        Graph { out }
    }

    pub fn instances(&self, membership: &str, class: &str) -> BTreeSet<String> {
        self.out
            .iter()
            .filter(|(_, edges)| edges.iter().any(|(p, o)| p == membership && o.as_iri() == Some(class)))
            .filter_map(|(s, _)| s.as_iri().map(str::to_string))
            .collect()
    }

    /// Terms reached from `start` by following `path`.
    pub fn walk(&self, start: &Term, path: &[String]) -> HashSet<Term> {
        let mut frontier: HashSet<Term> = HashSet::from([start.clone()]);
        for pred in path {
            let mut next = HashSet::new();
            for t in &frontier {
                for (p, o) in self.out.get(t).into_iter().flatten() {
                    if p == pred {
                        next.insert(o.clone());
                    }
                }
            }
            frontier = next;
        }
        frontier
    }

    /// Every predicate chain of length 1..=depth starting at one of `roots`, with the
    /// number of roots it is instantiated from.
    pub fn chains(&self, roots: &[Term], depth: usize) -> HashMap<Vec<String>, u64> {
        let mut counts: HashMap<Vec<String>, u64> = HashMap::new();
        for root in roots {
            let mut seen: HashSet<Vec<String>> = HashSet::new();
            let mut stack: Vec<(Term, Vec<String>)> = vec![(root.clone(), Vec::new())];
            while let Some((node, chain)) = stack.pop() {
                if chain.len() == depth {
                    continue;
                }
                for (p, o) in self.out.get(&node).into_iter().flatten() {
                    let mut c = chain.clone();
                    c.push(p.clone());
                    seen.insert(c.clone());
                    if !o.is_literal() {
                        stack.push((o.clone(), c));
                    }
                }
            }
            for c in seen {
                *counts.entry(c).or_default() += 1;
            }
        }
        counts
    }
}

/// Runs the full pipeline on `store` in a temporary directory.
pub fn ingest_fixture(
    store: &FixtureStore,
    class: &str,
    membership: &str,
    depth: usize,
) -> (missingpath_core::collection::Collection, tempfile::TempDir) {
    use missingpath_core::collection::{ingest, Collection, IngestSpec};
    let dir = tempfile::tempdir().unwrap();
    let mut spec = IngestSpec::new(class, "fixture", depth);
    spec.membership_predicate = membership.to_string();
    ingest(dir.path(), "fixture", &spec, store, &missingpath_core::projection::JobControl::new()).unwrap();
    (Collection::open(dir.path()).unwrap(), dir)
}

/// Even-odd point-in-polygon by ray casting.
pub fn inside(polygon: &[[f64; 2]], p: [f64; 2]) -> bool {
    let mut inside = false;
    let n = polygon.len();
    for i in 0..n {
        let [xi, yi] = polygon[i];
        let [xj, yj] = polygon[(i + n - 1) % n];
        if (yi > p[1]) != (yj > p[1]) && p[0] < (xj - xi) * (p[1] - yi) / (yj - yi) + xi {
            inside = !inside;
        }
    }
    inside
}
