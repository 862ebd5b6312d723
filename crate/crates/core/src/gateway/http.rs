use std::collections::HashMap;
use std::sync::{Condvar, Mutex};
use std::time::Duration;

use serde::Deserialize;

use super::{render_sparql, Endpoint, EndpointConfig, GatewayError, ResultTable, StructuredQuery};
use crate::term::Term;

const RESULTS_JSON: &str = "application/sparql-results+json";
const MAX_ATTEMPTS: u32 = 3;
/// Queries longer than this go out as a form POST instead of a GET.
const MAX_GET_QUERY_LEN: usize = 1800;

/// SPARQL 1.1 Protocol client.
///
/// Transport failures are retried up to three attempts with exponential backoff;
/// HTTP errors and undecodable documents are not. At most `max_in_flight` requests
/// are outstanding at once.
pub struct HttpEndpoint {
    cfg: EndpointConfig,
    client: reqwest::blocking::Client,
    retry_base: Duration,
    permits: Mutex<usize>,
    released: Condvar,
}

impl HttpEndpoint {
    pub fn new(cfg: EndpointConfig) -> Result<Self, GatewayError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(cfg.request_timeout)
            .user_agent(concat!("missingpath/", env!("CARGO_PKG_VERSION")))
            .build()
            .map_err(|e| GatewayError::Transport(e.to_string()))?;
        let permits = cfg.max_in_flight.max(1);
        Ok(HttpEndpoint {
            cfg,
            client,
            retry_base: Duration::from_millis(250),
            permits: Mutex::new(permits),
            released: Condvar::new(),
        })
    }

    pub fn with_retry_base(mut self, base: Duration) -> Self {
        self.retry_base = base;
        self
    }

    pub fn config(&self) -> &EndpointConfig {
        &self.cfg
    }

    fn acquire(&self) -> Permit<'_> {
        let mut available = self.permits.lock().expect("permit lock poisoned");
        while *available == 0 {
            available = self.released.wait(available).expect("permit lock poisoned");
        }
        *available -= 1;
        Permit(self)
    }

    fn send_once(&self, sparql: &str) -> Result<String, GatewayError> {
        let request = if sparql.len() <= MAX_GET_QUERY_LEN {
            self.client.get(&self.cfg.base_url).query(&[("query", sparql)])
        } else {
            self.client.post(&self.cfg.base_url).form(&[("query", sparql)])
        };
        let response = request
            .header(reqwest::header::ACCEPT, RESULTS_JSON)
            .send()
            .map_err(|e| GatewayError::Transport(e.to_string()))?;
        let status = response.status();
        let body = response.text().map_err(|e| GatewayError::Transport(e.to_string()))?;
        if !status.is_success() {
            let mut body = body;
            body.truncate(512);
            return Err(GatewayError::Endpoint { status: status.as_u16(), body });
        }
        Ok(body)
    }
}

struct Permit<'a>(&'a HttpEndpoint);

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        let mut available = self.0.permits.lock().expect("permit lock poisoned");
        *available += 1;
        self.0.released.notify_one();
    }
}

impl Endpoint for HttpEndpoint {
    fn execute(&self, query: &StructuredQuery) -> Result<ResultTable, GatewayError> {
        query.validate(self.cfg.max_depth)?;
        let sparql = render_sparql(query)?;
        let _permit = self.acquire();
        let mut attempt = 0;
        let body = loop {
            attempt += 1;
            match self.send_once(&sparql) {
                Ok(body) => break body,
                Err(e) if e.is_retryable() && attempt < MAX_ATTEMPTS => {
                    tracing::warn!(attempt, error = %e, "retrying SPARQL request");
                    std::thread::sleep(self.retry_base * 2u32.pow(attempt - 1));
                }
                Err(e) => return Err(e),
            }
        };
        let mut table = decode_results(&body, query.kind.columns())?;
        table.truncate(self.cfg.quota);
        Ok(table)
    }

    fn quota(&self) -> usize {
        self.cfg.quota
    }
}

#[derive(Deserialize)]
struct ResultsDocument {
    head: Head,
    results: Option<Bindings>,
}

#[derive(Deserialize)]
struct Head {
    #[serde(default)]
    vars: Vec<String>,
}

#[derive(Deserialize)]
struct Bindings {
    bindings: Vec<HashMap<String, Binding>>,
}

#[derive(Deserialize)]
struct Binding {
    #[serde(rename = "type")]
    kind: String,
    value: String,
    datatype: Option<String>,
    #[serde(rename = "xml:lang")]
    lang: Option<String>,
}

impl Binding {
    fn into_term(self) -> Result<Term, GatewayError> {
        match self.kind.as_str() {
            "uri" => Ok(Term::iri(self.value)),
            "bnode" => Ok(Term::blank(self.value)),
            "literal" | "typed-literal" => Ok(match (self.lang, self.datatype) {
                (Some(lang), _) => Term::lang(self.value, lang),
                (None, Some(dt)) => Term::typed(self.value, dt),
                (None, None) => Term::plain(self.value),
            }),
            other => Err(GatewayError::Decode(format!("unknown term type {other:?}"))),
        }
    }
}

/// Decodes an `application/sparql-results+json` document into the given columns.
pub(crate) fn decode_results(body: &str, columns: &[&str]) -> Result<ResultTable, GatewayError> {
    let doc: ResultsDocument = serde_json::from_str(body).map_err(|e| GatewayError::Decode(e.to_string()))?;
    for c in columns {
        if !doc.head.vars.iter().any(|v| v == c) {
            return Err(GatewayError::Decode(format!("missing variable ?{c} in results head")));
        }
    }
    let results = doc.results.ok_or_else(|| GatewayError::Decode("no results member".into()))?;
    let mut table = ResultTable::new(columns);
    for mut binding in results.bindings {
        let row = columns
            .iter()
            .map(|c| binding.remove(*c).map(Binding::into_term).transpose())
            .collect::<Result<Vec<_>, _>>()?;
        table.rows.push(row);
    }
    Ok(table)
}
