use std::fmt::Write;

use super::{GatewayError, QueryKind, StructuredQuery};
use crate::term::Term;

/// Renders a structured query as SPARQL 1.1 SELECT text.
///
/// Output is a pure function of the query, so identical queries give byte-identical
/// text. The entity variable is always `?e`; chains bind `?o1 .. ?o{n-1}` and end in
/// the variable named by the query kind.
pub fn render_sparql(q: &StructuredQuery) -> Result<String, GatewayError> {
    q.validate(usize::MAX)?;
    let mut out = String::new();
    let membership = format!("?e <{}> <{}> .", q.membership_predicate, q.class_uri);
    let values = q.entities.as_ref().map(|entities| {
        let mut v = String::from("VALUES ?e {");
        for e in entities {
            let _ = write!(v, " <{e}>");
        }
        v.push_str(" }");
        v
    });
    let open = |out: &mut String| {
        out.push_str("WHERE {\n");
        if let Some(v) = &values {
            let _ = writeln!(out, "  {v}");
        }
        let _ = writeln!(out, "  {membership}");
    };

    match q.kind {
        QueryKind::DistinctPredicatesAtDepth => {
            out.push_str("SELECT DISTINCT ?p\n");
            open(&mut out);
            let end = write_chain(&mut out, &q.path, "?end");
            let _ = writeln!(out, "  {end} ?p ?next .");
            out.push_str("}\nORDER BY ?p");
        }
        QueryKind::CountEntitiesWithPath => {
            out.push_str("SELECT (COUNT(DISTINCT ?e) AS ?count)\n");
            open(&mut out);
            write_chain(&mut out, &q.path, "?value");
            out.push('}');
        }
        QueryKind::CountAllEntities => {
            out.push_str("SELECT (COUNT(DISTINCT ?e) AS ?count)\n");
            open(&mut out);
            out.push('}');
        }
        QueryKind::ValueHistogramAtPath => {
            out.push_str("SELECT ?value (COUNT(DISTINCT ?e) AS ?count)\n");
            open(&mut out);
            write_chain(&mut out, &q.path, "?value");
            out.push_str("}\nGROUP BY ?value\nORDER BY DESC(?count) ?value");
        }
        QueryKind::EntitiesWithValueAtPath => {
            out.push_str("SELECT DISTINCT ?e\n");
            open(&mut out);
            let value = q.value.as_ref().expect("validated");
            write_chain(&mut out, &q.path, &term_pattern(value));
            out.push_str("}\nORDER BY ?e");
        }
        QueryKind::EntitiesWithoutPath => {
            out.push_str("SELECT DISTINCT ?e\n");
            open(&mut out);
            out.push_str("  FILTER NOT EXISTS {\n");
            let mut inner = String::new();
            write_chain(&mut inner, &q.path, "?value");
            for line in inner.lines() {
                let _ = writeln!(out, "  {line}");
            }
            out.push_str("  }\n}\nORDER BY ?e");
        }
        QueryKind::TerminalValuesForAllEntities => {
            out.push_str("SELECT DISTINCT ?e ?value (DATATYPE(?value) AS ?datatype) (LANG(?value) AS ?lang)\n");
            open(&mut out);
            write_chain(&mut out, &q.path, "?value");
            out.push_str("}\nORDER BY ?e");
        }
        QueryKind::ListEntities => {
            out.push_str("SELECT DISTINCT ?e\n");
            open(&mut out);
            out.push_str("}\nORDER BY ?e");
        }
    }
    if let Some(limit) = q.limit {
        let _ = write!(out, "\nLIMIT {limit}");
    }
    out.push('\n');
    Ok(out)
}

/// Writes `?e <p1> ?o1 . ?o1 <p2> ... <pn> last .` and returns the chain's end node.
fn write_chain(out: &mut String, path: &[String], last: &str) -> String {
    let mut subject = "?e".to_string();
    for (i, p) in path.iter().enumerate() {
        let object = if i + 1 == path.len() { last.to_string() } else { format!("?o{}", i + 1) };
        let _ = writeln!(out, "  {subject} <{p}> {object} .");
        subject = object;
    }
    subject
}

fn term_pattern(term: &Term) -> String {
    match term {
        // Blank nodes are not addressable across requests; a variable keeps the
        // query well-formed even though it then matches any node.
        Term::Blank { .. } => "?anyNode".to_string(),
        other => other.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BOOK: &str = "http://example.org/Book";

    #[test]
    fn distinct_predicates_at_root() {
        let q = StructuredQuery::new(QueryKind::DistinctPredicatesAtDepth, BOOK);
        let text = render_sparql(&q).unwrap();
        assert!(text.contains("?e <http://www.w3.org/1999/02/22-rdf-syntax-ns#type> <http://example.org/Book> ."));
        assert!(text.starts_with("SELECT DISTINCT ?p"));
        assert!(text.contains("?e ?p ?next ."));
    }

    #[test]
    fn two_step_chain() {
        let q = StructuredQuery::new(QueryKind::CountEntitiesWithPath, BOOK)
            .with_path(["http://example.org/author", "http://example.org/name"]);
        let text = render_sparql(&q).unwrap();
        assert!(text.contains("?e <http://example.org/author> ?o1 ."));
        assert!(text.contains("?o1 <http://example.org/name> ?value ."));
        assert!(text.contains("COUNT(DISTINCT ?e)"));
    }

    #[test]
    fn negation_uses_filter_not_exists() {
        let q = StructuredQuery::new(QueryKind::EntitiesWithoutPath, BOOK).with_path(["http://example.org/title"]);
        let text = render_sparql(&q).unwrap();
        assert!(text.contains("FILTER NOT EXISTS {"));
        assert!(text.contains("?e <http://example.org/title> ?value ."));
    }

    #[test]
    fn histogram_and_terminal_projection() {
        let q = StructuredQuery::new(QueryKind::ValueHistogramAtPath, BOOK)
            .with_path(["http://example.org/genre"])
            .with_limit(31);
        let text = render_sparql(&q).unwrap();
        assert!(text.contains("GROUP BY ?value\nORDER BY DESC(?count)"));
        assert!(text.trim_end().ends_with("LIMIT 31"));

        let q = StructuredQuery::new(QueryKind::TerminalValuesForAllEntities, BOOK)
            .with_path(["http://example.org/title"])
            .with_entities(vec!["http://example.org/b1".into()]);
        let text = render_sparql(&q).unwrap();
        assert!(text.contains("(DATATYPE(?value) AS ?datatype) (LANG(?value) AS ?lang)"));
        assert!(text.contains("VALUES ?e { <http://example.org/b1> }"));
    }

    #[test]
    fn value_terms_render_in_place() {
        let q = StructuredQuery::new(QueryKind::EntitiesWithValueAtPath, BOOK)
            .with_path(["http://example.org/lang"])
            .with_value(Term::lang("fr", "fr"));
        assert!(render_sparql(&q).unwrap().contains("?e <http://example.org/lang> \"fr\"@fr ."));
    }

    #[test]
    fn malformed_uri_is_rejected() {
        let q = StructuredQuery::new(QueryKind::CountAllEntities, "http://example.org/Bo ok");
        assert!(matches!(render_sparql(&q), Err(GatewayError::Invalid(_))));
    }

    #[test]
    fn rendering_is_deterministic() {
        let q = StructuredQuery::new(QueryKind::TerminalValuesForAllEntities, BOOK)
            .with_path(["http://example.org/author", "http://example.org/name"]);
        assert_eq!(render_sparql(&q).unwrap(), render_sparql(&q.clone()).unwrap());
    }
}
