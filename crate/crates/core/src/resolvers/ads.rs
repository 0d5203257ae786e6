//! ADS search and export.

use serde::Deserialize;
use serde_json::Value;
use url::Url;

use super::bibtex::parse_entries;
use super::transport::{HttpRequest, HttpResponse, Transport};
use super::{body_text, send, AdsConfig, ResolveError};
use crate::identifiers::{parse_bibcode, parse_doi, Bibcode, Doi};
use crate::model::{checked_year, make_author, AuthorName, BibRecord, Pages, RefEntry, SourceType};
use crate::render::render_html;

/// Structured fields requested for record construction.
pub const ADS_FIELDS: &str = "bibcode,author,title,pub,volume,issue,page,page_range,year,doi,doctype";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AdsExportFormat {
    /// ADS's own BibTeX export.
    Bibtex,
    /// One JSON document of structured fields per bibcode.
    JsonFields,
    /// Rendered locally from the structured fields.
    CustomHtml,
}

/// Result of a DOI → bibcode lookup.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BibcodeLookup {
    /// First bibcode in ADS relevance order; `None` when ADS has no match.
    pub bibcode: Option<Bibcode>,
    pub warnings: Vec<String>,
}

#[derive(Deserialize)]
struct SearchResponse {
    response: SearchBody,
}

#[derive(Deserialize)]
struct SearchBody {
    #[serde(default)]
    docs: Vec<Value>,
}

#[derive(Deserialize)]
struct ExportResponse {
    export: String,
}

fn search_url(cfg: &AdsConfig, query: &str, fields: &str, rows: Option<usize>) -> Result<String, ResolveError> {
    let base = format!("{}/search/query", cfg.base_url.trim_end_matches('/'));
    let mut url = Url::parse(&base).map_err(|_| ResolveError::InvalidInput("ADS base URL is not a valid URL"))?;
    {
        let mut pairs = url.query_pairs_mut();
        pairs.append_pair("q", query);
        pairs.append_pair("fl", fields);
        if let Some(rows) = rows {
            pairs.append_pair("rows", &rows.to_string());
        }
    }
    Ok(url.to_string())
}

fn ads_call(request: HttpRequest, cfg: &AdsConfig, transport: &dyn Transport) -> Result<HttpResponse, ResolveError> {
    if transport.is_live() && cfg.token.trim().is_empty() {
        return Err(ResolveError::AuthConfig);
    }
    let request = request
        .header("Authorization", format!("Bearer {}", cfg.token.trim()))
        .header("Accept", "application/json");
    let response = send(transport, &request, &cfg.retry_policy())?;
    match response.status {
        200..=299 => Ok(response),
        401 | 403 => Err(ResolveError::Auth { status: response.status }),
        status => Err(ResolveError::Status {
            url: request.url.clone(),
            status,
        }),
    }
}

fn search_docs(response: &HttpResponse) -> Result<Vec<Value>, ResolveError> {
    let parsed: SearchResponse =
        serde_json::from_str(body_text(response)?).map_err(|e| ResolveError::Decode(format!("ADS search: {e}")))?;
    Ok(parsed.response.docs)
}

/// Looks up the bibcode ADS holds for `doi`.
pub fn resolve_bibcode(doi: &Doi, cfg: &AdsConfig, transport: &dyn Transport) -> Result<BibcodeLookup, ResolveError> {
    let url = search_url(cfg, &format!("doi:\"{doi}\""), "bibcode", None)?;
    let response = ads_call(HttpRequest::get(url), cfg, transport)?;
    let docs = search_docs(&response)?;
    let mut bibcodes = Vec::with_capacity(docs.len());
    for doc in &docs {
        let raw = doc
            .get("bibcode")
            .and_then(Value::as_str)
            .ok_or_else(|| ResolveError::Decode("ADS search doc without bibcode".into()))?;
        let bibcode = parse_bibcode(raw).map_err(|e| ResolveError::Decode(e.to_string()))?;
        bibcodes.push(bibcode);
    }
    let mut warnings = Vec::new();
    if bibcodes.len() > 1 {
        let all: Vec<String> = bibcodes.iter().map(Bibcode::to_string).collect();
        let message = format!("DOI {doi} matches {} bibcodes ({}); using the first", all.len(), all.join(", "));
        log::warn!("{message}");
        warnings.push(message);
    }
    Ok(BibcodeLookup {
        bibcode: bibcodes.into_iter().next(),
        warnings,
    })
}

fn bibcode_query(bibcodes: &[Bibcode]) -> String {
    let quoted: Vec<String> = bibcodes.iter().map(|b| format!("\"{b}\"")).collect();
    if quoted.len() == 1 {
        format!("bibcode:{}", quoted[0])
    } else {
        format!("bibcode:({})", quoted.join(" OR "))
    }
}

fn fetch_fields(bibcodes: &[Bibcode], cfg: &AdsConfig, transport: &dyn Transport) -> Result<Vec<(Bibcode, Value)>, ResolveError> {
    let url = search_url(cfg, &bibcode_query(bibcodes), ADS_FIELDS, Some(bibcodes.len()))?;
    let response = ads_call(HttpRequest::get(url), cfg, transport)?;
    let docs = search_docs(&response)?;
    bibcodes
        .iter()
        .map(|bibcode| {
            let code = bibcode.to_string();
            docs.iter()
                .find(|d| d.get("bibcode").and_then(Value::as_str).map(str::trim) == Some(code.as_str()))
                .map(|d| (bibcode.clone(), d.clone()))
                .ok_or(ResolveError::MissingEntry(code))
        })
        .collect()
}

fn fetch_bibtex_export(bibcodes: &[Bibcode], cfg: &AdsConfig, transport: &dyn Transport) -> Result<Vec<(Bibcode, String)>, ResolveError> {
    let url = format!("{}/export/bibtex", cfg.base_url.trim_end_matches('/'));
    let codes: Vec<String> = bibcodes.iter().map(Bibcode::to_string).collect();
    let body = serde_json::json!({ "bibcode": codes }).to_string().into_bytes();
    let request = HttpRequest::post(url, body).header("Content-Type", "application/json");
    let response = ads_call(request, cfg, transport)?;
    let parsed: ExportResponse =
        serde_json::from_str(body_text(&response)?).map_err(|e| ResolveError::Decode(format!("ADS export: {e}")))?;
    let entries = parse_entries(&parsed.export)?;
    codes
        .iter()
        .zip(bibcodes)
        .map(|(code, bibcode)| {
            entries
                .iter()
                .find(|e| e.key.trim() == code)
                .map(|e| (bibcode.clone(), parsed.export[e.span.clone()].to_string()))
                .ok_or_else(|| ResolveError::MissingEntry(code.clone()))
        })
        .collect()
}

/// Fetches one export string per bibcode, in input order.
pub fn fetch_ads_export(
    bibcodes: &[Bibcode],
    format: AdsExportFormat,
    cfg: &AdsConfig,
    transport: &dyn Transport,
) -> Result<Vec<(Bibcode, String)>, ResolveError> {
    if bibcodes.is_empty() {
        return Err(ResolveError::InvalidInput("at least one bibcode is required"));
    }
    match format {
        AdsExportFormat::Bibtex => fetch_bibtex_export(bibcodes, cfg, transport),
        AdsExportFormat::JsonFields => Ok(fetch_fields(bibcodes, cfg, transport)?
            .into_iter()
            .map(|(b, doc)| (b, doc.to_string()))
            .collect()),
        AdsExportFormat::CustomHtml => fetch_fields(bibcodes, cfg, transport)?
            .into_iter()
            .map(|(b, doc)| {
                let record = fields_to_record(&doc)?;
                let entry = RefEntry::draft(vec![record], None).map_err(|e| ResolveError::Decode(e.to_string()))?;
                let html = render_html(&entry).map_err(|e| ResolveError::Decode(e.to_string()))?;
                Ok((b, html.body))
            })
            .collect(),
    }
}

fn first_string(doc: &Value, name: &str) -> Option<String> {
    match doc.get(name)? {
        Value::String(s) => Some(s.clone()),
        Value::Array(items) => items.iter().find_map(Value::as_str).map(str::to_string),
        Value::Number(n) => Some(n.to_string()),
        _ => None,
    }
    .map(|s| s.trim().to_string())
    .filter(|s| !s.is_empty())
}

/// "Gordon, I. E." → surname "Gordon", given "I. E.".
fn ads_author(raw: &str) -> Option<AuthorName> {
    let (surname, given) = raw.split_once(',').unwrap_or((raw, ""));
    make_author(given, surname).ok()
}

fn source_type_for(doctype: Option<&str>) -> SourceType {
    match doctype {
        None | Some("article") | Some("eprint") => SourceType::Article,
        Some("book") | Some("inbook") => SourceType::Book,
        Some("inproceedings") | Some("proceedings") => SourceType::Proceedings,
        Some("phdthesis") | Some("mastersthesis") => SourceType::Thesis,
        Some("techreport") | Some("intechreport") => SourceType::Report,
        Some("pricomm") => SourceType::PrivateCommunication,
        Some(_) => SourceType::Other,
    }
}

/// Builds a record from one ADS structured-fields document.
pub fn fields_to_record(doc: &Value) -> Result<BibRecord, ResolveError> {
    let bibcode = first_string(doc, "bibcode")
        .ok_or_else(|| ResolveError::Decode("ADS document without bibcode".into()))
        .and_then(|b| parse_bibcode(&b).map_err(|e| ResolveError::Decode(e.to_string())))?;
    let html_text = |s: String| html_escape::decode_html_entities(&s).into_owned();
    let authors: Vec<AuthorName> = doc
        .get("author")
        .and_then(Value::as_array)
        .map(|list| list.iter().filter_map(Value::as_str).filter_map(|a| ads_author(&html_text(a.to_string()))).collect())
        .unwrap_or_default();
    let title = first_string(doc, "title").map(html_text).unwrap_or_default();
    if authors.is_empty() && title.is_empty() {
        return Err(ResolveError::UnusableMetadata(bibcode.to_string()));
    }
    let pages = first_string(doc, "page_range")
        .or_else(|| first_string(doc, "page"))
        .and_then(|p| Pages::parse_range(&p));
    let doi: Option<Doi> = first_string(doc, "doi").and_then(|d| parse_doi(&d).ok());
    Ok(BibRecord {
        source_type: source_type_for(first_string(doc, "doctype").as_deref()),
        authors,
        title,
        journal: first_string(doc, "pub").map(html_text),
        volume: first_string(doc, "volume"),
        number: first_string(doc, "issue"),
        pages,
        year: first_string(doc, "year").and_then(|y| y.parse::<i64>().ok()).and_then(checked_year),
        publisher: None,
        doi,
        bibcode: Some(bibcode),
    })
}

/// Parses a `JsonFields` export string into a record.
pub fn ads_fields_to_record(raw: &str) -> Result<BibRecord, ResolveError> {
    let doc: Value = serde_json::from_str(raw).map_err(|e| ResolveError::Decode(format!("ADS fields: {e}")))?;
    fields_to_record(&doc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::resolvers::fixture::{FixtureTransport, RequestKey};
    use crate::resolvers::transport::{HttpResponse, Method, TransportError};
    use serde_json::json;

    fn cfg() -> AdsConfig {
        AdsConfig {
            token: "t".into(),
            backoff_base: std::time::Duration::ZERO,
            ..AdsConfig::default()
        }
    }

    fn doi_search(doi: &str) -> String {
        format!("https://api.adsabs.harvard.edu/v1/search/query?q=doi:\"{doi}\"&fl=bibcode")
    }

    fn with(url: &str, status: u16, body: Value) -> FixtureTransport {
        let mut t = FixtureTransport::new();
        t.insert(
            RequestKey::new(Method::Get, url, Some("application/json"), None),
            HttpResponse::new(status, body.to_string()),
        );
        t
    }

    #[test]
    fn first_bibcode_wins_with_warning() {
        let doi = parse_doi("10.1000/multi").unwrap();
        let t = with(
            &doi_search("10.1000/multi"),
            200,
            json!({"response": {"numFound": 2, "docs": [{"bibcode": "2019Icar..300....1Z"}, {"bibcode": "2019Icar..300....1Y"}]}}),
        );
        let lookup = resolve_bibcode(&doi, &cfg(), &t).unwrap();
        assert_eq!(lookup.bibcode.unwrap().to_string(), "2019Icar..300....1Z");
        assert_eq!(lookup.warnings.len(), 1);
    }

    #[test]
    fn empty_result_is_not_an_error() {
        let doi = parse_doi("10.1000/none").unwrap();
        let t = with(&doi_search("10.1000/none"), 200, json!({"response": {"numFound": 0, "docs": []}}));
        let lookup = resolve_bibcode(&doi, &cfg(), &t).unwrap();
        assert_eq!(lookup.bibcode, None);
        assert!(lookup.warnings.is_empty());
    }

    #[test]
    fn unauthorized() {
        let doi = parse_doi("10.1000/x").unwrap();
        let t = with(&doi_search("10.1000/x"), 401, json!({"error": "Unauthorized"}));
        assert_eq!(resolve_bibcode(&doi, &cfg(), &t), Err(ResolveError::Auth { status: 401 }));
        assert_eq!(t.request_count(), 1);
    }

    #[test]
    fn server_errors_exhaust_retries() {
        let doi = parse_doi("10.1000/x").unwrap();
        let t = with(&doi_search("10.1000/x"), 503, json!({}));
        let err = resolve_bibcode(&doi, &cfg(), &t).unwrap_err();
        assert!(matches!(err, ResolveError::Upstream { attempts: 4, .. }), "{err:?}");
        assert_eq!(t.request_count(), 4);
    }

    #[test]
    fn malformed_body() {
        let doi = parse_doi("10.1000/x").unwrap();
        let mut t = FixtureTransport::new();
        t.insert(
            RequestKey::new(Method::Get, &doi_search("10.1000/x"), Some("application/json"), None),
            HttpResponse::new(200, "<html>"),
        );
        assert!(matches!(resolve_bibcode(&doi, &cfg(), &t), Err(ResolveError::Decode(_))));
    }

    struct Live;
    impl Transport for Live {
        fn execute(&self, _: &HttpRequest) -> Result<HttpResponse, TransportError> {
            panic!("must not be called");
        }
        fn is_live(&self) -> bool {
            true
        }
    }

    #[test]
    fn live_call_without_token_fails_before_request() {
        let doi = parse_doi("10.1000/x").unwrap();
        let cfg = AdsConfig::default();
        assert_eq!(resolve_bibcode(&doi, &cfg, &Live), Err(ResolveError::AuthConfig));
    }

    #[test]
    fn empty_bibcode_list_rejected() {
        let t = FixtureTransport::new();
        assert!(matches!(
            fetch_ads_export(&[], AdsExportFormat::Bibtex, &cfg(), &t),
            Err(ResolveError::InvalidInput(_))
        ));
        assert_eq!(t.request_count(), 0);
    }

    #[test]
    fn fields_document_mapping() {
        let doc = json!({
            "bibcode": "2017JQSRT.203....3G",
            "author": ["Gordon, I. E.", "Rothman, L. S.", "HITRAN Consortium"],
            "title": ["The HITRAN2016 molecular spectroscopic database"],
            "pub": "Journal of Quantitative Spectroscopy and Radiative Transfer",
            "volume": "203",
            "page": ["3"],
            "page_range": "3-69",
            "year": "2017",
            "doi": ["10.1016/j.jqsrt.2017.06.038"],
            "doctype": "article"
        });
        let r = fields_to_record(&doc).unwrap();
        assert_eq!(r.authors[0].formatted(), "I. E. Gordon");
        assert_eq!(r.authors[2].formatted(), "HITRAN Consortium");
        assert_eq!(r.pages, Some(Pages::new("3", Some("69".into()))));
        assert_eq!(r.year, Some(2017));
        assert_eq!(r.bibcode.as_ref().unwrap().to_string(), "2017JQSRT.203....3G");
        assert_eq!(r.doi.unwrap().as_str(), "10.1016/j.jqsrt.2017.06.038");
    }

    #[test]
    fn query_for_several_bibcodes() {
        let a = parse_bibcode("2017JQSRT.203....3G").unwrap();
        let b = parse_bibcode("2013JQSRT.130....4R").unwrap();
        assert_eq!(bibcode_query(std::slice::from_ref(&a)), "bibcode:\"2017JQSRT.203....3G\"");
        assert_eq!(
            bibcode_query(&[a, b]),
            "bibcode:(\"2017JQSRT.203....3G\" OR \"2013JQSRT.130....4R\")"
        );
    }
}
