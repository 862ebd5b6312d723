//! RDF terms as they flow through the gateway, plus prefix compaction for display.

use std::fmt;

use serde::{Deserialize, Serialize};

pub const RDF_TYPE: &str = "http://www.w3.org/1999/02/22-rdf-syntax-ns#type";
pub const RDF_LANG_STRING: &str = "http://www.w3.org/1999/02/22-rdf-syntax-ns#langString";
pub const RDFS_LABEL: &str = "http://www.w3.org/2000/01/rdf-schema#label";
pub const XSD: &str = "http://www.w3.org/2001/XMLSchema#";
pub const XSD_STRING: &str = "http://www.w3.org/2001/XMLSchema#string";
pub const XSD_INTEGER: &str = "http://www.w3.org/2001/XMLSchema#integer";

/// An RDF literal. `datatype` is `None` for simple and language-tagged literals.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Literal {
    pub value: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub datatype: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub language: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Term {
    Iri { value: String },
    Blank { value: String },
    Literal(Literal),
}

impl Term {
    pub fn iri(value: impl Into<String>) -> Self {
        Term::Iri { value: value.into() }
    }

    pub fn blank(value: impl Into<String>) -> Self {
        Term::Blank { value: value.into() }
    }

    pub fn plain(value: impl Into<String>) -> Self {
        Term::Literal(Literal { value: value.into(), datatype: None, language: None })
    }

    pub fn lang(value: impl Into<String>, language: impl Into<String>) -> Self {
        Term::Literal(Literal {
            value: value.into(),
            datatype: None,
            language: Some(language.into().to_ascii_lowercase()),
        })
    }

    /// Typed literal. `xsd:string` and `rdf:langString` collapse to a simple literal,
    /// mirroring RDF 1.1 where they carry no extra information.
    pub fn typed(value: impl Into<String>, datatype: impl Into<String>) -> Self {
        let datatype = datatype.into();
        let datatype = if datatype == XSD_STRING || datatype == RDF_LANG_STRING { None } else { Some(datatype) };
        Term::Literal(Literal { value: value.into(), datatype, language: None })
    }

    pub fn integer(n: u64) -> Self {
        Term::typed(n.to_string(), XSD_INTEGER)
    }

    pub fn as_iri(&self) -> Option<&str> {
        match self {
            Term::Iri { value } => Some(value),
            _ => None,
        }
    }

    pub fn is_literal(&self) -> bool {
        matches!(self, Term::Literal(_))
    }

    /// Display text: IRIs keep their full form, literals their lexical form,
    /// blank nodes the `_:` notation.
    pub fn display_text(&self) -> String {
        match self {
            Term::Iri { value } => value.clone(),
            Term::Blank { value } => format!("_:{value}"),
            Term::Literal(l) => l.value.clone(),
        }
    }

    /// Lexical value parsed as an unsigned integer (for COUNT results).
    pub fn as_count(&self) -> Option<u64> {
        match self {
            Term::Literal(l) => l.value.trim().parse().ok(),
            _ => None,
        }
    }
}

impl fmt::Display for Term {
    /// N-Triples / SPARQL surface syntax.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Iri { value } => write!(f, "<{value}>"),
            Term::Blank { value } => write!(f, "_:{value}"),
            Term::Literal(l) => {
                f.write_str("\"")?;
                for c in l.value.chars() {
                    match c {
                        '"' => f.write_str("\\\"")?,
                        '\\' => f.write_str("\\\\")?,
                        '\n' => f.write_str("\\n")?,
                        '\r' => f.write_str("\\r")?,
                        '\t' => f.write_str("\\t")?,
                        c => write!(f, "{c}")?,
                    }
                }
                f.write_str("\"")?;
                if let Some(lang) = &l.language {
                    write!(f, "@{lang}")
                } else if let Some(dt) = &l.datatype {
                    write!(f, "^^<{dt}>")
                } else {
                    Ok(())
                }
            }
        }
    }
}

/// Ordered prefix table used to render IRIs as `prefix:local`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrefixMap {
    entries: Vec<(String, String)>,
}

impl Default for PrefixMap {
    fn default() -> Self {
        let mut map = PrefixMap { entries: Vec::new() };
        for (prefix, ns) in [
            ("rdf", "http://www.w3.org/1999/02/22-rdf-syntax-ns#"),
            ("rdfs", "http://www.w3.org/2000/01/rdf-schema#"),
            ("xsd", XSD),
            ("owl", "http://www.w3.org/2002/07/owl#"),
            ("skos", "http://www.w3.org/2004/02/skos/core#"),
            ("schema", "http://schema.org/"),
            ("foaf", "http://xmlns.com/foaf/0.1/"),
            ("dct", "http://purl.org/dc/terms/"),
            ("wd", "http://www.wikidata.org/entity/"),
            ("wdt", "http://www.wikidata.org/prop/direct/"),
            ("wikibase", "http://wikiba.se/ontology#"),
            ("ex", "http://example.org/"),
        ] {
            map.insert(prefix, ns);
        }
        map
    }
}

impl PrefixMap {
    pub fn empty() -> Self {
        PrefixMap { entries: Vec::new() }
    }

    /// Adds or replaces a prefix binding.
    pub fn insert(&mut self, prefix: impl Into<String>, namespace: impl Into<String>) {
        let prefix = prefix.into();
        let namespace = namespace.into();
        self.entries.retain(|(p, _)| *p != prefix);
        self.entries.push((prefix, namespace));
    }

    /// Longest-namespace match wins; IRIs with no match are returned unchanged.
    pub fn compact(&self, iri: &str) -> String {
        self.entries
            .iter()
            .filter(|(_, ns)| iri.starts_with(ns.as_str()) && iri.len() > ns.len())
            .max_by_key(|(_, ns)| ns.len())
            .map(|(p, ns)| format!("{p}:{}", &iri[ns.len()..]))
            .unwrap_or_else(|| iri.to_string())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.entries.iter().map(|(p, n)| (p.as_str(), n.as_str()))
    }
}

/// Last segment of an IRI after `#` or `/`.
pub fn iri_tail(iri: &str) -> &str {
    let trimmed = iri.trim_end_matches(['/', '#']);
    match trimmed.rfind(['/', '#']) {
        Some(pos) => &trimmed[pos + 1..],
        None => trimmed,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn literal_surface_syntax() {
        assert_eq!(Term::lang("a \"b\"", "FR").to_string(), "\"a \\\"b\\\"\"@fr");
        assert_eq!(
            Term::typed("1998", "http://www.w3.org/2001/XMLSchema#gYear").to_string(),
            "\"1998\"^^<http://www.w3.org/2001/XMLSchema#gYear>"
        );
        assert_eq!(Term::typed("x", XSD_STRING), Term::plain("x"));
    }

    #[test]
    fn compaction_prefers_longest_namespace() {
        let mut map = PrefixMap::default();
        map.insert("wdx", "http://www.wikidata.org/");
        assert_eq!(map.compact("http://www.wikidata.org/prop/direct/P50"), "wdt:P50");
        assert_eq!(map.compact("http://www.wikidata.org/other"), "wdx:other");
        assert_eq!(map.compact("urn:x"), "urn:x");
    }

    #[test]
    fn tails() {
        assert_eq!(iri_tail("http://example.org/book/b1"), "b1");
        assert_eq!(iri_tail("http://example.org/ns#Thing"), "Thing");
        assert_eq!(iri_tail("urn:isbn"), "urn:isbn");
    }
}
