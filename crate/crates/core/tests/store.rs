use std::collections::BTreeMap;
use std::fs;

use proptest::prelude::*;
use refs_core::model::make_author;
use refs_core::{parse_doi, BibRecord, GlobalId, Pages, RefEntry, RefStore, SourceCrossRef, SourceType, StoreError};

fn arb_record() -> impl Strategy<Value = BibRecord> {
    (
        prop::collection::vec(("[A-Z]{0,2}", "[A-Z][a-z]{1,8}"), 0..4),
        "[A-Za-z0-9 &<>\"']{1,30}",
        prop::option::of("[A-Za-z. ]{1,20}"),
        prop::option::of("[0-9]{1,3}"),
        prop::option::of(("[0-9]{1,4}", prop::option::of("[0-9]{1,4}"))),
        prop::option::of(1800i32..2100),
        prop::option::of("[a-z0-9.]{1,12}"),
        prop::sample::select(vec![SourceType::Article, SourceType::Book, SourceType::Thesis, SourceType::Other]),
    )
        .prop_map(|(authors, title, journal, volume, pages, year, doi, source_type)| BibRecord {
            source_type,
            authors: authors
                .into_iter()
                .map(|(g, s)| make_author(&g.chars().map(|c| format!("{c} ")).collect::<String>(), &s).unwrap())
                .collect(),
            title: title.trim().to_string() + "x",
            journal,
            volume,
            pages: pages.map(|(first, last)| Pages::new(first, last)),
            year,
            doi: doi.map(|d| parse_doi(&format!("10.5555/{d}")).unwrap()),
            ..Default::default()
        })
}

fn arb_entry() -> impl Strategy<Value = (Vec<BibRecord>, Option<String>)> {
    (prop::collection::vec(arb_record(), 1..4), prop::option::of("[ -~]{0,40}"))
}

fn gid(n: u64) -> GlobalId {
    GlobalId::new(n).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn reopen_preserves_everything(entries in prop::collection::vec(arb_entry(), 1..8)) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("refs.db");
        let (expected, crossrefs) = {
            let store = RefStore::open(&path).unwrap();
            let mut expected = Vec::new();
            for (records, note) in entries {
                match store.add_entry(records, note) {
                    Ok(id) => expected.push(store.get_entry(id).unwrap()),
                    Err(StoreError::DuplicateEntry { .. }) => {}
                    Err(e) => panic!("{e}"),
                }
            }
            for (i, entry) in expected.iter().enumerate() {
                store.attach_crossref(&SourceCrossRef {
                    dataset_scope: format!("scope{}", i % 2),
                    parameter: "nu".into(),
                    local_id: i as u64,
                    global_id: entry.global_id.unwrap(),
                }).unwrap();
            }
            (expected, store.list_crossrefs().unwrap())
        };
        let store = RefStore::open(&path).unwrap();
        prop_assert_eq!(store.list_entries(None).unwrap(), expected);
        prop_assert_eq!(store.list_crossrefs().unwrap(), crossrefs);
    }

    #[test]
    fn ids_are_monotonic(ops in prop::collection::vec((any::<bool>(), any::<prop::sample::Index>()), 1..40)) {
        let store = RefStore::open_in_memory().unwrap();
        let mut live: Vec<GlobalId> = Vec::new();
        let mut last = 0u64;
        for (n, (add, pick)) in ops.into_iter().enumerate() {
            if add || live.is_empty() {
                let record = BibRecord { title: format!("t{n}"), ..Default::default() };
                let id = store.add_entry(vec![record], None).unwrap();
                prop_assert!(id.get() > last);
                last = id.get();
                live.push(id);
            } else {
                let id = live.remove(pick.index(live.len()));
                store.delete_entry(id).unwrap();
            }
        }
        let listed: Vec<GlobalId> = store.list_entries(None).unwrap().iter().map(|e| e.global_id.unwrap()).collect();
        prop_assert_eq!(listed, live);
    }

    #[test]
    fn scope_filter_matches_brute_force(links in prop::collection::vec((0u64..6, 0usize..3, 0u64..4), 0..20)) {
        let store = RefStore::open_in_memory().unwrap();
        for n in 0..6 {
            store.add_entry(vec![BibRecord { title: format!("t{n}"), ..Default::default() }], None).unwrap();
        }
        let scopes = ["H2O", "CO2", "O3"];
        let mut rows: BTreeMap<(String, u64), u64> = BTreeMap::new();
        for (target, scope, local) in links {
            let key = (scopes[scope].to_string(), local);
            let id = *rows.entry(key.clone()).or_insert(target + 1);
            store.attach_crossref(&SourceCrossRef {
                dataset_scope: key.0,
                parameter: "gamma".into(),
                local_id: local,
                global_id: gid(id),
            }).unwrap();
        }
        for scope in scopes {
            let mut expected: Vec<u64> = rows.iter().filter(|((s, _), _)| s == scope).map(|(_, id)| *id).collect();
            expected.sort_unstable();
            expected.dedup();
            let got: Vec<u64> = store.list_entries(Some(scope)).unwrap().iter().map(|e| e.global_id.unwrap().get()).collect();
            prop_assert_eq!(got, expected);
        }
    }
}

#[test]
fn empty_store_lists_nothing() {
    let store = RefStore::open_in_memory().unwrap();
    assert!(store.list_entries(None).unwrap().is_empty());
}

#[test]
fn bundle_is_deterministic_and_labelled() {
    let dir = tempfile::tempdir().unwrap();
    let store = RefStore::open(dir.path().join("refs.db")).unwrap();
    let record = |d: &str, t: &str| BibRecord {
        authors: vec![make_author("I. E.", "Gordon").unwrap()],
        title: t.into(),
        year: Some(2017),
        doi: Some(parse_doi(d).unwrap()),
        ..Default::default()
    };
    let nested = RefEntry::new(gid(663), vec![record("10.5555/a", "A"), record("10.5555/b", "B")], Some("Intensities".into())).unwrap();
    let single = RefEntry::new(gid(665), vec![record("10.5555/c", "C")], None).unwrap();
    store.import_entry(&single).unwrap();
    store.import_entry(&nested).unwrap();

    let (html, bib) = store.export_bundle(&[gid(665), gid(663)], dir.path().join("one")).unwrap();
    let (html2, bib2) = store.export_bundle(&[gid(663), gid(665)], dir.path().join("two")).unwrap();
    let html_text = fs::read_to_string(&html).unwrap();
    assert_eq!(html_text, fs::read_to_string(html2).unwrap());
    assert_eq!(fs::read(&bib).unwrap(), fs::read(bib2).unwrap());

    let a = html_text.find(">663a</span>").unwrap();
    let b = html_text.find(">663b</span>").unwrap();
    let c = html_text.find(">665</span>").unwrap();
    assert!(a < b && b < c);
    assert!(!html_text.contains('\r'));
    let bib_text = fs::read_to_string(bib).unwrap();
    assert_eq!(bib_text.matches("@article{").count(), 3);
}
