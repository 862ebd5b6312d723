//! End-to-end walk through the comics collection: zones, inspection, narrowing
//! and export.

use std::collections::BTreeSet;

use missingpath_core::collection::{ingest, Collection, IngestSpec};
use missingpath_core::export::{parse_conditions, parse_selection};
use missingpath_core::projection::JobControl;
use missingpath_core::selection::{to_pseudocode, Condition, Scope, SelectionQuery};
use missingpath_core::summaries::{Facet, OTHER_KEY};
use missingpath_core::synth::*;

fn scenario() -> (Collection, ScenarioGroups, tempfile::TempDir) {
    let (store, groups) = comics_scenario();
    let dir = tempfile::tempdir().unwrap();
    let mut spec = IngestSpec::new(COMICS_CLASS, "fixture:comics", 2);
    spec.membership_predicate = wdt("P31");
    spec.include_membership_path = true;
    ingest(dir.path(), "comics", &spec, &store, &JobControl::new()).unwrap();
    (Collection::open(dir.path()).unwrap(), groups, dir)
}

fn path(c: &Collection, predicates: &[&str]) -> usize {
    c.store
        .paths
        .iter()
        .position(|p| p.predicates.iter().map(String::as_str).eq(predicates.iter().copied()))
        .unwrap_or_else(|| panic!("no path {predicates:?}"))
}

fn ids_of(c: &Collection, uris: &[String]) -> BTreeSet<usize> {
    uris.iter().map(|u| c.store.entities.id(u).unwrap()).collect()
}

#[test]
fn collection_shape() {
    let (c, _, _dir) = scenario();
    assert_eq!(c.store.entity_count(), SCENARIO_ENTITIES);
    let full: Vec<&str> = c.store.paths.iter().filter(|p| p.completeness == 1.0).map(|p| p.label.as_str()).collect();
    assert_eq!(full, ["rdfs:label", "wdt:P31"]);
    assert_eq!(c.default_color_path(), Some(path(&c, &[&wdt("P31")])));
    let p31 = &c.full_summaries()[path(&c, &[&wdt("P31")])];
    let keys: Vec<&str> = p31.values.buckets.iter().map(|b| b.key.as_str()).collect();
    assert_eq!(keys, [COMICS_CLASS]);
    assert!(p31.values.other_count > 0);
}

#[test]
fn spirou_zone_is_found_and_characterised() {
    let (c, groups, _dir) = scenario();
    let map = c.map.as_ref().unwrap();
    let g1 = ids_of(&c, &groups.spirou_zone);
    let zone = map
        .zones
        .iter()
        .find(|z| z.member_entity_ids.iter().copied().collect::<BTreeSet<_>>() == g1)
        .expect("a zone holding exactly the Spirou albums");
    let missing: BTreeSet<usize> = zone.missing_path_indices.iter().copied().collect();
    for p in ["P50", "P407", "P495", "P123", "P577", "P136", "P3589"] {
        assert!(missing.contains(&path(&c, &[&wdt(p)])), "{p} missing in zone");
    }
    assert!(missing.contains(&path(&c, &[SKOS_ALT_LABEL])));

    let q = SelectionQuery::new(vec![Condition::having(Condition::zone(zone.zone_id))], Scope::WholeSet);
    let inspection = c.inspect(&q, Some("fr")).unwrap();
    assert_eq!(inspection.entity_ids.len(), SCENARIO_SPIROU_ZONE);
    assert!(inspection.labels.iter().all(|l| l.label.starts_with("Spirou et Fantasio")));

    let labels = &inspection.summaries[path(&c, &[missingpath_core::term::RDFS_LABEL])];
    assert_eq!(labels.values.buckets.len(), 20);
    assert_eq!(labels.values.other_count, 0);
    let langs: Vec<&str> = labels.languages.buckets.iter().map(|b| b.key.as_str()).collect();
    assert_eq!(langs, ["fr"]);

    let description = &inspection.summaries[path(&c, &[SCHEMA_DESCRIPTION])];
    assert_eq!(description.completeness_in_set, 1.0);
    assert_eq!(description.values.buckets.len(), 1);
    assert_eq!(description.values.buckets[0].key, SPIROU_DESCRIPTION);
    let langs: Vec<&str> = description.languages.buckets.iter().map(|b| b.key.as_str()).collect();
    assert_eq!(langs, ["nl"]);

    let series = &inspection.summaries[path(&c, &[&wdt("P179")])];
    assert_eq!(series.values.buckets.len(), 1);
    assert_eq!(series.values.buckets[0].key, SPIROU_SERIES);

    let modified = &inspection.summaries[path(&c, &[SCHEMA_DATE_MODIFIED])];
    assert!(modified.granularity.is_some());
    assert_eq!(modified.values.buckets.len(), 1);
    assert_eq!(modified.values.other_count, 0);

    let flag = &inspection.flags[path(&c, &[SCHEMA_DESCRIPTION])];
    let facets: Vec<Facet> = flag.tests.iter().map(|t| t.facet).collect();
    assert_eq!(facets, [Facet::Values, Facet::Languages]);
    let flag = &inspection.flags[path(&c, &[&wdt("P50")])];
    assert!(flag.missing_in_subset);
}

#[test]
fn series_value_selects_every_spirou_album() {
    let (c, groups, _dir) = scenario();
    let p179 = path(&c, &[&wdt("P179")]);
    let zone_ids: Vec<usize> = ids_of(&c, &groups.spirou_zone).into_iter().collect();
    let in_zone =
        SelectionQuery::new(vec![Condition::having(Condition::value(p179, SPIROU_SERIES))], Scope::CurrentSelection)
            .with_current(zone_ids);
    assert_eq!(c.resolve(&in_zone).unwrap().len(), SCENARIO_SPIROU_ZONE);
    let vocab = c.vocabulary();
    assert_eq!(
        to_pseudocode(&in_zone, &vocab).unwrap(),
        "SELECT entities HAVING the value wd:Q1130014 at the end of the path wdt:P179 among the current selection"
    );

    let mut whole = in_zone.clone();
    whole.scope = Scope::WholeSet;
    let all = c.resolve(&whole).unwrap();
    assert_eq!(all.len(), SCENARIO_SPIROU_TOTAL);
    let mut expected = ids_of(&c, &groups.spirou_zone);
    expected.extend(ids_of(&c, &groups.spirou_complete));
    assert_eq!(all.entity_ids.iter().copied().collect::<BTreeSet<_>>(), expected);
    assert_eq!(
        to_pseudocode(&whole, &vocab).unwrap(),
        "SELECT entities HAVING the value wd:Q1130014 at the end of the path wdt:P179 among the whole set"
    );

    let no_author =
        SelectionQuery::new(vec![Condition::not_having(Condition::path(path(&c, &[&wdt("P50")])))], Scope::WholeSet);
    assert_eq!(
        to_pseudocode(&no_author, &vocab).unwrap(),
        "SELECT entities NOT HAVING the path wdt:P50 among the whole set"
    );
}

#[test]
fn series_zone_spreads_over_series() {
    let (c, groups, _dir) = scenario();
    let map = c.map.as_ref().unwrap();
    let g2 = ids_of(&c, &groups.series_zone);
    let zone = map
        .zones
        .iter()
        .find(|z| z.member_entity_ids.iter().copied().collect::<BTreeSet<_>>() == g2)
        .expect("a zone holding exactly the series albums");
    let ids: Vec<usize> = zone.member_entity_ids.clone();
    let (summaries, _) = c.subset_view(&ids).unwrap();
    let series = &summaries[path(&c, &[&wdt("P179")])];
    let mut counts: Vec<u64> = series.values.buckets.iter().map(|b| b.count).collect();
    counts.sort_unstable_by(|a, b| b.cmp(a));
    assert_eq!(counts, [25, 21, 14]);
    assert_eq!(series.values.other_count, 67);
    assert_eq!(series.values.other_keys.len(), 22);
    assert_eq!(summaries[path(&c, &[SKOS_ALT_LABEL])].completeness_in_set, 1.0);
}

#[test]
fn narrowing_to_authorless_albums_with_gcd_ids() {
    let (c, groups, _dir) = scenario();
    let p50 = path(&c, &[&wdt("P50")]);
    let gcd = path(&c, &[&wdt("P3589")]);

    let first =
        c.resolve(&SelectionQuery::new(vec![Condition::not_having(Condition::path(p50))], Scope::WholeSet)).unwrap();
    assert_eq!(first.len(), SCENARIO_AUTHORLESS);

    let narrowed = c
        .resolve(
            &SelectionQuery::new(vec![Condition::having(Condition::path(gcd))], Scope::CurrentSelection)
                .with_current(first.entity_ids.clone()),
        )
        .unwrap();
    assert_eq!(narrowed.len(), SCENARIO_AUTHORLESS_WITH_GCD);
    let expected = ids_of(&c, &groups.authorless[..SCENARIO_AUTHORLESS_WITH_GCD]);
    assert_eq!(narrowed.entity_ids.iter().copied().collect::<BTreeSet<_>>(), expected);

    let combined = c
        .resolve(&SelectionQuery::new(
            vec![Condition::not_having(Condition::path(p50)), Condition::having(Condition::path(gcd))],
            Scope::WholeSet,
        ))
        .unwrap();
    assert_eq!(combined.entity_ids, narrowed.entity_ids);

    let publishers = c
        .resolve(&SelectionQuery::new(
            vec![
                Condition::not_having(Condition::path(p50)),
                Condition::having(Condition::path(path(&c, &[&wdt("P123")]))),
            ],
            Scope::WholeSet,
        ))
        .unwrap();
    assert_eq!(publishers.len(), SCENARIO_AUTHORLESS_WITH_PUBLISHER);

    let bundle = c.export(&combined, Some("en"), chrono::Utc::now()).unwrap();
    let conditions = parse_conditions(&bundle.condition_csv).unwrap();
    assert_eq!(conditions.len(), 2);
    assert_eq!(conditions[0].pseudocode, "NOT HAVING the path wdt:P50");
    assert_eq!(conditions[1].pseudocode, "HAVING the path wdt:P3589");
    assert_eq!(parse_selection(&bundle.selection_csv).unwrap().len(), SCENARIO_AUTHORLESS_WITH_GCD);
}

#[test]
fn other_bucket_selection() {
    let (c, _, _dir) = scenario();
    let p31 = path(&c, &[&wdt("P31")]);
    let summary = &c.full_summaries()[p31];
    let q =
        SelectionQuery::new(vec![Condition::having(Condition::other(p31, Facet::Values, summary))], Scope::WholeSet);
    let sel = c.resolve(&q).unwrap();
    assert_eq!(sel.len(), 60);
    let buckets = c.color_buckets(p31).unwrap();
    for id in &sel.entity_ids {
        assert!(buckets[*id].iter().any(|k| k == OTHER_KEY));
    }
}
