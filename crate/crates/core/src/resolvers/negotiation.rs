//! Metadata straight from the DOI resolver via content negotiation.

use std::sync::LazyLock;

use regex::Regex;
use serde_json::Value;

use super::transport::{HttpRequest, HttpResponse, RetryPolicy, Transport};
use super::{body_text, send, ResolveError};
use crate::identifiers::{parse_doi, Doi};
use crate::model::{checked_year, make_author, AuthorName, BibRecord, Pages, SourceType};

pub const CSL_JSON: &str = "application/vnd.citationstyles.csl+json";
pub const BIBTEX: &str = "application/x-bibtex";

static TAG: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"</?[A-Za-z][A-Za-z0-9:_-]*[^<>]*>").expect("static regex"));

/// A CSL-JSON document whose `DOI` member matches the requested DOI.
#[derive(Debug, Clone, PartialEq)]
pub struct CslRecord {
    pub raw: Value,
}

impl CslRecord {
    /// Wraps a parsed document, checking it carries `doi`.
    pub fn new(raw: Value, doi: &Doi) -> Result<Self, ResolveError> {
        let member = raw
            .get("DOI")
            .and_then(Value::as_str)
            .ok_or_else(|| ResolveError::Decode("CSL-JSON has no DOI member".into()))?;
        if !member.trim().eq_ignore_ascii_case(doi.as_str()) {
            return Err(ResolveError::Decode(format!("CSL-JSON is for DOI {member}, expected {doi}")));
        }
        Ok(CslRecord { raw })
    }
}

/// `https://doi.org/<doi>` with URL-significant characters escaped.
pub fn resolver_url(doi: &Doi) -> String {
    let mut path = String::with_capacity(doi.as_str().len());
    for c in doi.as_str().chars() {
        match c {
            '%' => path.push_str("%25"),
            '#' => path.push_str("%23"),
            '?' => path.push_str("%3F"),
            c => path.push(c),
        }
    }
    url::Url::parse(&format!("https://doi.org/{path}"))
        .map(|u| u.to_string())
        .unwrap_or_else(|_| doi.url())
}

fn negotiate(doi: &Doi, accept: &str, transport: &dyn Transport, policy: &RetryPolicy) -> Result<HttpResponse, ResolveError> {
    let request = HttpRequest::get(resolver_url(doi)).header("Accept", accept);
    let response = send(transport, &request, policy)?;
    match response.status {
        200..=299 => Ok(response),
        404 => Err(ResolveError::UnknownDoi(doi.clone())),
        406 => Err(ResolveError::NoMetadataFormat(doi.clone())),
        status => Err(ResolveError::Status {
            url: request.url,
            status,
        }),
    }
}

pub fn fetch_csl_json(doi: &Doi, transport: &dyn Transport) -> Result<CslRecord, ResolveError> {
    fetch_csl_json_with(doi, transport, &RetryPolicy::default())
}

pub fn fetch_csl_json_with(doi: &Doi, transport: &dyn Transport, policy: &RetryPolicy) -> Result<CslRecord, ResolveError> {
    let response = negotiate(doi, CSL_JSON, transport, policy)?;
    let raw: Value = serde_json::from_str(body_text(&response)?).map_err(|e| ResolveError::Decode(format!("CSL-JSON: {e}")))?;
    CslRecord::new(raw, doi)
}

/// BibTeX for `doi`, body returned verbatim.
pub fn fetch_bibtex(doi: &Doi, transport: &dyn Transport) -> Result<String, ResolveError> {
    fetch_bibtex_with(doi, transport, &RetryPolicy::default())
}

pub fn fetch_bibtex_with(doi: &Doi, transport: &dyn Transport, policy: &RetryPolicy) -> Result<String, ResolveError> {
    let response = negotiate(doi, BIBTEX, transport, policy)?;
    let text = body_text(&response)?;
    if text.trim().is_empty() {
        return Err(ResolveError::Decode(format!("empty BibTeX body for {doi}")));
    }
    Ok(text.to_string())
}

/// Strips inline markup (JATS `<i>`, `<sub>`…) and decodes HTML entities.
pub fn clean_title(raw: &str) -> String {
    let stripped = TAG.replace_all(raw, "");
    let decoded = html_escape::decode_html_entities(&stripped);
    decoded.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn text_member(raw: &Value, name: &str) -> Option<String> {
    match raw.get(name)? {
        Value::String(s) => Some(s.clone()),
        Value::Array(items) => items.iter().find_map(Value::as_str).map(str::to_string),
        Value::Number(n) => Some(n.to_string()),
        _ => None,
    }
    .map(|s| s.trim().to_string())
    .filter(|s| !s.is_empty())
}

fn csl_author(value: &Value) -> Option<AuthorName> {
    let decode = |s: &str| html_escape::decode_html_entities(s).into_owned();
    if let Some(family) = value.get("family").and_then(Value::as_str) {
        let given = value.get("given").and_then(Value::as_str).unwrap_or_default();
        return make_author(&decode(given), &decode(family)).ok();
    }
    let literal = value
        .get("literal")
        .or_else(|| value.get("name"))
        .and_then(Value::as_str)?;
    make_author("", &decode(literal)).ok()
}

fn csl_year(raw: &Value) -> Option<i32> {
    ["issued", "published-print", "published-online", "created"]
        .iter()
        .find_map(|member| {
            raw.get(member)?
                .get("date-parts")?
                .get(0)?
                .get(0)
                .and_then(|y| y.as_i64().or_else(|| y.as_str().and_then(|s| s.parse().ok())))
        })
        .and_then(checked_year)
}

fn source_type_for(csl_type: Option<&str>) -> SourceType {
    match csl_type {
        None | Some("journal-article") | Some("article-journal") | Some("article") => SourceType::Article,
        Some("book") | Some("monograph") | Some("edited-book") | Some("book-chapter") | Some("chapter") => SourceType::Book,
        Some("proceedings-article") | Some("paper-conference") | Some("proceedings") => SourceType::Proceedings,
        Some("dissertation") | Some("thesis") => SourceType::Thesis,
        Some("report") | Some("report-component") => SourceType::Report,
        Some("personal_communication") | Some("personal-communication") => SourceType::PrivateCommunication,
        Some("posted-content") | Some("manuscript") => SourceType::Unpublished,
        Some(_) => SourceType::Other,
    }
}

/// Maps CSL-JSON onto the canonical record. Entities in the title are
/// decoded here so the model holds clean Unicode.
pub fn csl_to_record(csl: &CslRecord) -> Result<BibRecord, ResolveError> {
    let raw = &csl.raw;
    let doi = text_member(raw, "DOI").and_then(|d| parse_doi(&d).ok());
    let authors: Vec<AuthorName> = raw
        .get("author")
        .and_then(Value::as_array)
        .map(|list| list.iter().filter_map(csl_author).collect())
        .unwrap_or_default();
    let title = text_member(raw, "title").map(|t| clean_title(&t)).unwrap_or_default();
    if authors.is_empty() && title.is_empty() {
        let name = doi.as_ref().map(Doi::to_string).unwrap_or_else(|| "record".into());
        return Err(ResolveError::UnusableMetadata(name));
    }
    Ok(BibRecord {
        source_type: source_type_for(raw.get("type").and_then(Value::as_str)),
        authors,
        title,
        journal: text_member(raw, "container-title").map(|j| clean_title(&j)),
        volume: text_member(raw, "volume"),
        number: text_member(raw, "issue"),
        pages: text_member(raw, "page").and_then(|p| Pages::parse_range(&p)),
        year: csl_year(raw),
        publisher: text_member(raw, "publisher").map(|p| clean_title(&p)),
        doi,
        bibcode: None,
    })
}
