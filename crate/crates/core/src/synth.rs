//! Generated collections for demos, tests and benchmarks.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::gateway::FixtureStore;
use crate::term::{Term, RDFS_LABEL, RDF_TYPE, XSD};
use crate::vectors::CompletenessMatrix;

pub const EX: &str = "http://example.org/";
pub const WD: &str = "http://www.wikidata.org/entity/";
pub const WDT: &str = "http://www.wikidata.org/prop/direct/";
pub const SCHEMA_DESCRIPTION: &str = "http://schema.org/description";
pub const SCHEMA_DATE_MODIFIED: &str = "http://schema.org/dateModified";
pub const SKOS_ALT_LABEL: &str = "http://www.w3.org/2004/02/skos/core#altLabel";
pub const WIKIBASE_TIMESTAMP: &str = "http://wikiba.se/ontology#timestamp";

fn ex(local: &str) -> String {
    format!("{EX}{local}")
}

fn wd(id: &str) -> Term {
    Term::iri(format!("{WD}{id}"))
}

pub fn wdt(p: &str) -> String {
    format!("{WDT}{p}")
}

fn xsd(local: &str) -> String {
    format!("{XSD}{local}")
}

/// Four books: all titled, three with an author, two of those authors named.
/// Genres are `g1` for b1..b3 and `g2` for b4.
pub fn four_books() -> FixtureStore {
    let mut s = FixtureStore::new();
    let book = Term::iri(ex("Book"));
    for i in 1..=4 {
        let b = Term::iri(ex(&format!("b{i}")));
        s.insert(b.clone(), RDF_TYPE, book.clone());
        s.insert(b.clone(), ex("title"), Term::lang(format!("Book {i}"), "en"));
        s.insert(b.clone(), ex("genre"), Term::iri(ex(if i < 4 { "g1" } else { "g2" })));
        if i < 4 {
            s.insert(b, ex("author"), Term::iri(ex(&format!("a{i}"))));
        }
    }
    s.insert(Term::iri(ex("a1")), ex("name"), Term::plain("Ann"));
    s.insert(Term::iri(ex("a2")), ex("name"), Term::plain("Bob"));
    s
}

pub const ITEM_CLASS: &str = "http://example.org/Item";

/// Entities of [`ITEM_CLASS`] described by a mix of single- and multi-valued
/// literals, typed literals, blank nodes and chains through persons and
/// organisations (with cycles through `ex:knows`).
///
/// `ex:category` takes at most 49 distinct values with at most 45 entities each, and
/// at most 40 items lack it, so collections of up to about 2000 items can be
/// partitioned under a quota of 50.
pub fn random_collection(seed: u64, n: usize) -> FixtureStore {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s = FixtureStore::new();
    let class = Term::iri(ITEM_CLASS);
    let uncovered = (n / 50).min(40);
    let categories = (n.saturating_sub(uncovered)).div_ceil(45).clamp(1, 49);
    let persons = (n / 10).max(5);
    let statuses = ["draft", "published", "archived"];

    for i in 0..n {
        let e = Term::iri(ex(&format!("item/{i}")));
        s.insert(e.clone(), RDF_TYPE, class.clone());
        if i >= uncovered {
            s.insert(e.clone(), ex("category"), Term::iri(ex(&format!("cat/{}", i % categories))));
        }
        if rng.random_bool(0.95) {
            s.insert(e.clone(), ex("status"), Term::plain(*statuses.choose(&mut rng).unwrap()));
        }
        if rng.random_bool(0.9) {
            s.insert(e.clone(), ex("title"), Term::lang(format!("Item {i}"), "en"));
            if rng.random_bool(0.3) {
                s.insert(e.clone(), ex("title"), Term::lang(format!("Objet {i}"), "fr"));
            }
        }
        if rng.random_bool(0.7) {
            let date = format!(
                "{}-{:02}-{:02}",
                rng.random_range(1990..2021),
                rng.random_range(1..13),
                rng.random_range(1..29)
            );
            s.insert(e.clone(), ex("published"), Term::typed(date, xsd("date")));
        }
        if rng.random_bool(0.8) {
            s.insert(e.clone(), ex("author"), Term::iri(ex(&format!("person/{}", rng.random_range(0..persons)))));
            if rng.random_bool(0.2) {
                s.insert(e.clone(), ex("author"), Term::iri(ex(&format!("person/{}", rng.random_range(0..persons)))));
            }
        }
        for _ in 0..rng.random_range(0..4) {
            s.insert(e.clone(), ex("tag"), Term::plain(format!("t{}", rng.random_range(0..15))));
        }
        if rng.random_bool(0.1) {
            let note = Term::blank(format!("note{i}"));
            s.insert(e.clone(), ex("note"), note.clone());
            s.insert(note, ex("text"), Term::plain(format!("note on {i}")));
        }
        if rng.random_bool(0.5) {
            s.insert(e.clone(), ex("pages"), Term::integer(rng.random_range(10..500)));
        }
    }
    let orgs = (persons / 4).max(2);
    for p in 0..persons {
        let person = Term::iri(ex(&format!("person/{p}")));
        s.insert(person.clone(), RDF_TYPE, Term::iri(ex("Person")));
        if rng.random_bool(0.7) {
            s.insert(person.clone(), ex("name"), Term::plain(format!("Person {p}")));
        }
        if rng.random_bool(0.4) {
            s.insert(person.clone(), ex("affiliation"), Term::iri(ex(&format!("org/{}", rng.random_range(0..orgs)))));
        }
        if rng.random_bool(0.2) {
            s.insert(person.clone(), ex("knows"), Term::iri(ex(&format!("person/{}", rng.random_range(0..persons)))));
        }
    }
    for o in 0..orgs {
        if rng.random_bool(0.8) {
            s.insert(Term::iri(ex(&format!("org/{o}"))), ex("label"), Term::lang(format!("Org {o}"), "en"));
        }
    }
    s
}

/// Entity groups of [`comics_scenario`].
#[derive(Clone, Debug)]
pub struct ScenarioGroups {
    /// Spirou albums missing most bibliographic data; French labels, one Dutch description.
    pub spirou_zone: Vec<String>,
    /// Albums with an alternative label but no description, modification date or
    /// timestamp, spread over 25 series.
    pub series_zone: Vec<String>,
    /// Well-described Spirou albums.
    pub spirou_complete: Vec<String>,
    /// Other albums without author.
    pub authorless: Vec<String>,
    /// Albums with an author.
    pub authored: Vec<String>,
}

pub const COMICS_CLASS: &str = "http://www.wikidata.org/entity/Q1004";
pub const SPIROU_SERIES: &str = "http://www.wikidata.org/entity/Q1130014";
pub const SPIROU_DESCRIPTION: &str = "stripverhaal van Robbedoes en Kwabernoot";
pub const SCENARIO_ENTITIES: usize = 457;
pub const SCENARIO_SPIROU_ZONE: usize = 20;
pub const SCENARIO_SPIROU_TOTAL: usize = 35;
pub const SCENARIO_SERIES_ZONE: usize = 127;
pub const SCENARIO_AUTHORLESS: usize = 193;
pub const SCENARIO_AUTHORLESS_WITH_GCD: usize = 5;
pub const SCENARIO_AUTHORLESS_WITH_PUBLISHER: usize = 13;

/// Comic albums of class `wd:Q1004` typed with `wdt:P31`, built so that a
/// Spirou cluster of 20 albums, a 127-album cluster over 25 series, and the
/// author-based narrowing (193 without author, 5 of which carry a Grand Comics
/// Database series id) are known by construction.
pub fn comics_scenario() -> (FixtureStore, ScenarioGroups) {
    let mut rng = ChaCha8Rng::seed_from_u64(1004);
    let mut s = FixtureStore::new();
    let p31 = wdt("P31");
    let comics = Term::iri(COMICS_CLASS);
    let spirou = Term::iri(SPIROU_SERIES);
    let mut next = 0usize;
    let mut album = |s: &mut FixtureStore| {
        next += 1;
        let e = format!("{WD}Q{}", 700_000 + next);
        s.insert(Term::iri(e.clone()), p31.clone(), comics.clone());
        e
    };
    let dt = |d: String| Term::typed(d, xsd("dateTime"));
    let year_date = |rng: &mut ChaCha8Rng| {
        format!(
            "{}-{:02}-{:02}T{:02}:00:00Z",
            rng.random_range(2018..2021),
            rng.random_range(1..13),
            rng.random_range(1..29),
            rng.random_range(0..24)
        )
    };

    s.insert(spirou.clone(), RDFS_LABEL, Term::lang("Spirou et Fantasio", "fr"));
    let mut series: Vec<Term> = Vec::new();
    for (k, name) in ["Sammy", "Bobo", "Natacha"].iter().enumerate() {
        let t = wd(&format!("Q{}", 900_001 + k));
        s.insert(t.clone(), RDFS_LABEL, Term::lang(*name, "fr"));
        series.push(t);
    }
    for k in 0..22 {
        let t = wd(&format!("Q{}", 900_100 + k));
        s.insert(t.clone(), RDFS_LABEL, Term::lang(format!("Series {k}"), "en"));
        series.push(t);
    }
    let others: Vec<Term> = (0..40).map(|k| wd(&format!("Q{}", 900_200 + k))).collect();
    let authors: Vec<Term> = (0..60).map(|k| wd(&format!("Q{}", 910_000 + k))).collect();
    for (k, a) in authors.iter().enumerate() {
        s.insert(a.clone(), RDFS_LABEL, Term::lang(format!("Author {k}"), "en"));
    }
    let publishers: Vec<Term> = (0..8).map(|k| wd(&format!("Q{}", 920_000 + k))).collect();
    for (k, p) in publishers.iter().enumerate() {
        s.insert(p.clone(), RDFS_LABEL, Term::lang(format!("Publisher {k}"), "en"));
    }
    let languages = [wd("Q150"), wd("Q1860"), wd("Q7411")];
    let countries = [wd("Q31"), wd("Q142"), wd("Q55")];
    let genres = [wd("Q1114461"), wd("Q3072049"), wd("Q186424")];
    let rare_classes: Vec<Term> = (0..20).map(|k| wd(&format!("Q{}", 930_000 + k))).collect();

    let mut groups = ScenarioGroups {
        spirou_zone: Vec::new(),
        series_zone: Vec::new(),
        spirou_complete: Vec::new(),
        authorless: Vec::new(),
        authored: Vec::new(),
    };

    for k in 0..SCENARIO_SPIROU_ZONE {
        let e = album(&mut s);
        let t = Term::iri(e.clone());
        s.insert(t.clone(), RDFS_LABEL, Term::lang(format!("Spirou et Fantasio, tome {}", k + 1), "fr"));
        s.insert(t.clone(), SCHEMA_DESCRIPTION, Term::lang(SPIROU_DESCRIPTION, "nl"));
        s.insert(t.clone(), SCHEMA_DATE_MODIFIED, dt(format!("2020-11-05T{:02}:{:02}:00Z", 8 + k / 4, (k * 7) % 60)));
        s.insert(t.clone(), wdt("P179"), spirou.clone());
        s.insert(t, WIKIBASE_TIMESTAMP, dt("2020-11-05T00:00:00Z".into()));
        groups.spirou_zone.push(e);
    }

    // Series counts: 25, 21, 14, then 22 series sharing 67 albums.
    let mut series_of: Vec<usize> = Vec::new();
    series_of.extend(std::iter::repeat_n(0, 25));
    series_of.extend(std::iter::repeat_n(1, 21));
    series_of.extend(std::iter::repeat_n(2, 14));
    for k in 0..22 {
        series_of.extend(std::iter::repeat_n(3 + k, if k == 0 { 4 } else { 3 }));
    }
    assert_eq!(series_of.len(), SCENARIO_SERIES_ZONE);
    for (k, &si) in series_of.iter().enumerate() {
        let e = album(&mut s);
        let t = Term::iri(e.clone());
        s.insert(t.clone(), RDFS_LABEL, Term::lang(format!("Album {k}"), "fr"));
        s.insert(t.clone(), wdt("P179"), series[si].clone());
        s.insert(t, SKOS_ALT_LABEL, Term::lang(format!("Album n°{k}"), "fr"));
        groups.series_zone.push(e);
    }

    let full_description = |s: &mut FixtureStore, t: &Term, rng: &mut ChaCha8Rng| {
        s.insert(t.clone(), wdt("P407"), languages.choose(rng).unwrap().clone());
        s.insert(t.clone(), wdt("P495"), countries.choose(rng).unwrap().clone());
        s.insert(t.clone(), wdt("P123"), publishers.choose(rng).unwrap().clone());
        s.insert(
            t.clone(),
            wdt("P577"),
            Term::typed(format!("{}-01-01T00:00:00Z", rng.random_range(1950..2020)), xsd("dateTime")),
        );
        s.insert(t.clone(), wdt("P136"), genres.choose(rng).unwrap().clone());
    };

    for k in 0..(SCENARIO_SPIROU_TOTAL - SCENARIO_SPIROU_ZONE) {
        let e = album(&mut s);
        let t = Term::iri(e.clone());
        s.insert(t.clone(), RDFS_LABEL, Term::lang(format!("Spirou et Fantasio, tome {}", 21 + k), "fr"));
        s.insert(t.clone(), RDFS_LABEL, Term::lang(format!("Spirou and Fantasio, volume {}", 21 + k), "en"));
        s.insert(t.clone(), SCHEMA_DESCRIPTION, Term::lang("comic album", "en"));
        s.insert(t.clone(), SCHEMA_DATE_MODIFIED, dt(year_date(&mut rng)));
        s.insert(t.clone(), wdt("P179"), spirou.clone());
        s.insert(t.clone(), wdt("P50"), authors[k % 3].clone());
        s.insert(t.clone(), WIKIBASE_TIMESTAMP, dt(year_date(&mut rng)));
        full_description(&mut s, &t, &mut rng);
        groups.spirou_complete.push(e);
    }

    let n_authorless = SCENARIO_AUTHORLESS - SCENARIO_SPIROU_ZONE - SCENARIO_SERIES_ZONE;
    for k in 0..n_authorless {
        let e = album(&mut s);
        let t = Term::iri(e.clone());
        s.insert(t.clone(), RDFS_LABEL, Term::lang(format!("Comic {k}"), "en"));
        if rng.random_bool(0.9) {
            s.insert(t.clone(), SCHEMA_DATE_MODIFIED, dt(year_date(&mut rng)));
        }
        if k < SCENARIO_AUTHORLESS_WITH_GCD {
            s.insert(t.clone(), wdt("P3589"), Term::plain(format!("{}", 40_000 + k)));
        }
        if (SCENARIO_AUTHORLESS_WITH_GCD..SCENARIO_AUTHORLESS_WITH_GCD + SCENARIO_AUTHORLESS_WITH_PUBLISHER)
            .contains(&k)
        {
            s.insert(t.clone(), wdt("P123"), publishers.choose(&mut rng).unwrap().clone());
        }
        for (p, prob) in [("P407", 0.5), ("P495", 0.5), ("P577", 0.4), ("P136", 0.3)] {
            if rng.random_bool(prob) {
                let v = match p {
                    "P407" => languages.choose(&mut rng).unwrap().clone(),
                    "P495" => countries.choose(&mut rng).unwrap().clone(),
                    "P136" => genres.choose(&mut rng).unwrap().clone(),
                    _ => Term::typed(format!("{}-01-01T00:00:00Z", rng.random_range(1950..2020)), xsd("dateTime")),
                };
                s.insert(t.clone(), wdt(p), v);
            }
        }
        if rng.random_bool(0.5) {
            s.insert(t.clone(), SCHEMA_DESCRIPTION, Term::lang("comic book", "en"));
        }
        if rng.random_bool(0.3) {
            s.insert(t.clone(), wdt("P179"), others.choose(&mut rng).unwrap().clone());
        }
        groups.authorless.push(e);
    }

    let n_authored = SCENARIO_ENTITIES - SCENARIO_AUTHORLESS - groups.spirou_complete.len();
    for k in 0..n_authored {
        let e = album(&mut s);
        let t = Term::iri(e.clone());
        s.insert(t.clone(), RDFS_LABEL, Term::lang(format!("Album {k}"), "en"));
        if rng.random_bool(0.2) {
            s.insert(t.clone(), RDFS_LABEL, Term::lang(format!("Album {k} (fr)"), "fr"));
        }
        s.insert(t.clone(), wdt("P50"), authors.choose(&mut rng).unwrap().clone());
        if rng.random_bool(0.9) {
            s.insert(t.clone(), SCHEMA_DATE_MODIFIED, dt(year_date(&mut rng)));
        }
        if rng.random_bool(0.7) {
            full_description(&mut s, &t, &mut rng);
        } else {
            for (p, prob) in [("P407", 0.6), ("P495", 0.5), ("P123", 0.5)] {
                if rng.random_bool(prob) {
                    let v = match p {
                        "P407" => languages.choose(&mut rng).unwrap().clone(),
                        "P495" => countries.choose(&mut rng).unwrap().clone(),
                        _ => publishers.choose(&mut rng).unwrap().clone(),
                    };
                    s.insert(t.clone(), wdt(p), v);
                }
            }
        }
        if rng.random_bool(0.6) {
            s.insert(t.clone(), SCHEMA_DESCRIPTION, Term::lang("comic album", "en"));
        }
        if rng.random_bool(0.4) {
            s.insert(t.clone(), wdt("P179"), others.choose(&mut rng).unwrap().clone());
        }
        if rng.random_bool(0.3) {
            s.insert(t.clone(), wdt("P3589"), Term::plain(format!("{}", 50_000 + k)));
        }
        if rng.random_bool(0.5) {
            s.insert(t.clone(), WIKIBASE_TIMESTAMP, dt(year_date(&mut rng)));
        }
        if rng.random_bool(0.15) {
            s.insert(t.clone(), SKOS_ALT_LABEL, Term::lang(format!("Alt {k}"), "en"));
        }
        groups.authored.push(e);
    }

    // Secondary classes, each too rare to get its own bucket.
    let secondary: Vec<&String> = groups.authored.iter().chain(&groups.authorless).step_by(4).take(60).collect();
    for (k, e) in secondary.into_iter().enumerate() {
        s.insert(Term::iri(e.clone()), p31.clone(), rare_classes[k % rare_classes.len()].clone());
    }
    (s, groups)
}

/// A completeness matrix of `profiles` distinct missing-path profiles with
/// `copies` identical rows each, rows grouped by profile.
pub fn profile_matrix(seed: u64, profiles: usize, copies: usize, n_paths: usize) -> CompletenessMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows: Vec<Vec<bool>> = Vec::new();
    while rows.len() < profiles {
        let row: Vec<bool> = (0..n_paths).map(|_| rng.random_bool(0.5)).collect();
        if !rows.contains(&row) {
            rows.push(row);
        }
    }
    let mut m = CompletenessMatrix::zeros(profiles * copies, n_paths);
    for (p, row) in rows.iter().enumerate() {
        for c in 0..copies {
            for (j, &bit) in row.iter().enumerate() {
                m.set(p * copies + c, j, bit);
            }
        }
    }
    m
}

/// A matrix shaped like a large real collection: rows drawn around `families`
/// base profiles, each bit flipped with probability `noise`, with paths ordered
/// from most to least complete.
pub fn collection_like_matrix(
    seed: u64,
    rows: usize,
    n_paths: usize,
    families: usize,
    noise: f64,
) -> CompletenessMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base: Vec<Vec<bool>> = (0..families)
        .map(|_| (0..n_paths).map(|j| rng.random_bool(0.2 + 0.75 * j as f64 / n_paths as f64)).collect())
        .collect();
    let mut m = CompletenessMatrix::zeros(rows, n_paths);
    for r in 0..rows {
        let b = &base[rng.random_range(0..families)];
        for (j, &bit) in b.iter().enumerate() {
            m.set(r, j, bit ^ rng.random_bool(noise));
        }
    }
    m
}
