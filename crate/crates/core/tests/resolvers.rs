use std::path::PathBuf;
use std::time::Duration;

use refs_core::resolvers::ads::ads_fields_to_record;
use refs_core::resolvers::{
    bibtex_to_record, fetch_ads_export, fetch_bibtex, resolve_bibcode, AdsConfig, AdsExportFormat, FixtureTransport,
    HttpRequest, RecordingTransport, ResolveError, Transport,
};
use refs_core::{parse_bibcode, parse_doi, Pages};

fn fixtures() -> FixtureTransport {
    FixtureTransport::from_dir(PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/http")).unwrap()
}

fn cfg() -> AdsConfig {
    AdsConfig {
        backoff_base: Duration::ZERO,
        ..AdsConfig::default()
    }
}

#[test]
fn doi_to_bibcode() {
    let t = fixtures();
    let lookup = resolve_bibcode(&parse_doi("https://doi.org/10.1016/J.JQSRT.2017.06.038").unwrap(), &cfg(), &t).unwrap();
    assert_eq!(lookup.bibcode.unwrap().to_string(), "2017JQSRT.203....3G");
}

#[test]
fn ads_bibtex_export_matches_bibcode() {
    let t = fixtures();
    let bibcode = parse_bibcode("2010JQSRT.111.2139R").unwrap();
    let out = fetch_ads_export(std::slice::from_ref(&bibcode), AdsExportFormat::Bibtex, &cfg(), &t).unwrap();
    assert_eq!(out.len(), 1);
    assert!(out[0].1.starts_with("@ARTICLE{2010JQSRT.111.2139R,"));
    let record = bibtex_to_record(&out[0].1).unwrap();
    assert_eq!(record.bibcode, Some(bibcode));
    assert_eq!(record.pages, Some(Pages::new("2139", Some("2150".into()))));
    assert_eq!(record.number.as_deref(), Some("15"));
    assert_eq!(record.authors[0].formatted(), "L. S. Rothman");
}

#[test]
fn ads_fields_and_custom_html() {
    let t = fixtures();
    let bibcode = parse_bibcode("2022JQSRT.27707949G").unwrap();
    let fields = fetch_ads_export(std::slice::from_ref(&bibcode), AdsExportFormat::JsonFields, &cfg(), &t).unwrap();
    let record = ads_fields_to_record(&fields[0].1).unwrap();
    assert_eq!(record.pages, Some(Pages::new("107949", None)));
    assert_eq!(record.year, Some(2022));
    let html = fetch_ads_export(&[bibcode], AdsExportFormat::CustomHtml, &cfg(), &t).unwrap();
    assert!(html[0].1.contains("107949"));
    assert!(html[0].1.contains("https://ui.adsabs.harvard.edu/abs/2022JQSRT.27707949G/abstract"));
}

#[test]
fn missing_bibcode_in_export() {
    let t = fixtures();
    let unknown = parse_bibcode("1999ApJ...500..100Q").unwrap();
    let err = fetch_ads_export(&[unknown], AdsExportFormat::JsonFields, &cfg(), &t).unwrap_err();
    assert!(matches!(err, ResolveError::Transport(_)), "{err:?}");
}

#[test]
fn crossref_bibtex_parses() {
    let t = fixtures();
    let body = fetch_bibtex(&parse_doi("10.1016/j.jqsrt.2004.10.008").unwrap(), &t).unwrap();
    let record = bibtex_to_record(&body).unwrap();
    assert_eq!(record.pages, Some(Pages::new("139", Some("204".into()))));
    assert_eq!(record.year, Some(2005));
    assert_eq!(record.publisher.as_deref(), Some("Elsevier BV"));
    assert_eq!(record.authors[3].formatted(), "D. C. Benner");
}

#[test]
fn unmatched_request_is_an_error_not_a_socket() {
    let t = fixtures();
    let err = t.execute(&HttpRequest::get("https://example.org/")).unwrap_err();
    assert!(err.to_string().contains("example.org"), "{err}");
    assert_eq!(refs_core::resolvers::live_transports_created(), 0);
}

#[test]
fn recording_roundtrips_through_playback() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("recorded.json");
    let source = fixtures();
    let recorder = RecordingTransport::new(&source);
    let d = parse_doi("10.5555/refs.fallback.0001").unwrap();
    let cfg = AdsConfig {
        token: "never-saved".into(),
        ..cfg()
    };
    resolve_bibcode(&d, &cfg, &recorder).unwrap();
    let original = fetch_bibtex(&d, &recorder).unwrap();
    recorder.save(&path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(!text.contains("never-saved"));

    let replay = FixtureTransport::from_dir(dir.path()).unwrap();
    assert_eq!(fetch_bibtex(&d, &replay).unwrap(), original);
    assert_eq!(resolve_bibcode(&d, &cfg, &replay).unwrap().bibcode, None);
}
