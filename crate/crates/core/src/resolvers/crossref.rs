//! Free-text lookup through the CrossRef works search.

use serde_json::Value;
use url::Url;

use super::negotiation::fetch_bibtex_with;
use super::transport::{HttpRequest, RetryPolicy, Transport};
use super::{body_text, send, ResolveError};
use crate::identifiers::{parse_doi, Doi};

pub const CROSSREF_WORKS: &str = "https://api.crossref.org/works";

/// BibTeX found by keyword search. The top search hit is not guaranteed to
/// be the intended work, so results are always flagged unverified.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnverifiedBibtex {
    pub doi: Doi,
    pub bibtex: String,
    pub unverified: bool,
}

pub fn works_search_url(freeform: &str) -> String {
    let mut url = Url::parse(CROSSREF_WORKS).expect("static url");
    url.query_pairs_mut()
        .append_pair("query.bibliographic", freeform)
        .append_pair("rows", "1");
    url.to_string()
}

/// Takes the top CrossRef hit for `freeform` and fetches its BibTeX.
pub fn fetch_bibtex_by_query(freeform: &str, transport: &dyn Transport) -> Result<UnverifiedBibtex, ResolveError> {
    fetch_bibtex_by_query_with(freeform, transport, &RetryPolicy::default())
}

pub fn fetch_bibtex_by_query_with(
    freeform: &str,
    transport: &dyn Transport,
    policy: &RetryPolicy,
) -> Result<UnverifiedBibtex, ResolveError> {
    let query = freeform.trim();
    if query.is_empty() {
        return Err(ResolveError::InvalidInput("search text must not be empty"));
    }
    let request = HttpRequest::get(works_search_url(query)).header("Accept", "application/json");
    let response = send(transport, &request, policy)?;
    if !(200..300).contains(&response.status) {
        return Err(ResolveError::Status {
            url: request.url,
            status: response.status,
        });
    }
    let body: Value =
        serde_json::from_str(body_text(&response)?).map_err(|e| ResolveError::Decode(format!("CrossRef search: {e}")))?;
    let top = body
        .pointer("/message/items")
        .and_then(Value::as_array)
        .and_then(|items| items.first())
        .ok_or_else(|| ResolveError::NoMatch(query.to_string()))?;
    let doi = top
        .get("DOI")
        .and_then(Value::as_str)
        .ok_or_else(|| ResolveError::Decode("CrossRef item without DOI".into()))
        .and_then(|d| parse_doi(d).map_err(|e| ResolveError::Decode(e.to_string())))?;
    log::warn!("{query:?} resolved by keyword search to {doi}; the match is unverified");
    let bibtex = fetch_bibtex_with(&doi, transport, policy)?;
    Ok(UnverifiedBibtex {
        doi,
        bibtex,
        unverified: true,
    })
}
