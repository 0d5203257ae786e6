#![allow(clippy::result_large_err)]

//! DOI in, rendered and stored reference out.
//!
//! ADS is tried first. When it has no bibcode for the DOI, or the ADS route
//! fails, metadata comes from DOI content negotiation instead.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use crate::identifiers::{Bibcode, Doi};
use crate::model::{BibRecord, GlobalId, ModelError, RefEntry};
use crate::render::{render, render_bibtex, Format, RenderError, RenderedCitation};
use crate::resolvers::ads::{ads_fields_to_record, fetch_ads_export, resolve_bibcode, AdsExportFormat};
use crate::resolvers::bibtex::bibtex_to_record;
use crate::resolvers::crossref::fetch_bibtex_by_query_with;
use crate::resolvers::negotiation::{csl_to_record, fetch_bibtex_with, fetch_csl_json_with};
use crate::resolvers::{AdsConfig, ResolveError, Transport};
use crate::store::{RefStore, StoreError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PathTaken {
    Ads,
    Fallback,
}

impl PathTaken {
    pub fn as_str(self) -> &'static str {
        match self {
            PathTaken::Ads => "ads",
            PathTaken::Fallback => "fallback",
        }
    }
}

impl fmt::Display for PathTaken {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResolutionReport {
    pub doi: Doi,
    pub path_taken: PathTaken,
    pub bibcode: Option<Bibcode>,
    pub record: BibRecord,
    pub renders: BTreeMap<Format, RenderedCitation>,
    pub warnings: Vec<String>,
    /// Set when the work was found by keyword search rather than by DOI.
    pub unverified: bool,
}

impl ResolutionReport {
    pub fn render(&self, format: Format) -> &RenderedCitation {
        &self.renders[&format]
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("could not resolve {doi}: {}", describe_failure(.ads, .fallback))]
    ResolutionFailed {
        doi: Doi,
        /// `None` when ADS simply had no bibcode for the DOI.
        ads: Option<ResolveError>,
        fallback: ResolveError,
    },
    #[error("keyword search failed: {0}")]
    Query(ResolveError),
    #[error(transparent)]
    Render(#[from] RenderError),
    #[error(transparent)]
    Invalid(#[from] ModelError),
    #[error(transparent)]
    Store(#[from] StoreError),
}

fn describe_failure(ads: &Option<ResolveError>, fallback: &ResolveError) -> String {
    match ads {
        Some(ads) => format!("ADS route: {ads}; content negotiation: {fallback}"),
        None => format!("not in ADS; content negotiation: {fallback}"),
    }
}

fn warn(warnings: &mut Vec<String>, message: String) {
    log::warn!("{message}");
    warnings.push(message);
}

fn all_renders(entry: &RefEntry, bibtex: Option<String>) -> Result<BTreeMap<Format, RenderedCitation>, RenderError> {
    let mut renders = BTreeMap::new();
    for format in Format::ALL {
        let rendered = match (format, &bibtex) {
            (Format::Bibtex, Some(body)) => RenderedCitation {
                format,
                body: body.clone(),
                global_label: render_bibtex(entry).global_label,
            },
            _ => render(entry, format)?,
        };
        renders.insert(format, rendered);
    }
    Ok(renders)
}

fn via_ads(doi: &Doi, cfg: &AdsConfig, transport: &dyn Transport, warnings: &mut Vec<String>) -> Result<Option<(Bibcode, BibRecord)>, ResolveError> {
    let lookup = resolve_bibcode(doi, cfg, transport)?;
    warnings.extend(lookup.warnings);
    let Some(bibcode) = lookup.bibcode else {
        return Ok(None);
    };
    let exported = fetch_ads_export(std::slice::from_ref(&bibcode), AdsExportFormat::JsonFields, cfg, transport)?;
    let (_, raw) = exported
        .into_iter()
        .next()
        .ok_or_else(|| ResolveError::MissingEntry(bibcode.to_string()))?;
    let mut record = ads_fields_to_record(&raw)?;
    if record.doi.is_none() {
        record.doi = Some(doi.clone());
    }
    Ok(Some((bibcode, record)))
}

/// Resolves one DOI to a record and its four renders.
pub fn resolve_reference(
    doi: &Doi,
    note: Option<&str>,
    cfg: &AdsConfig,
    transport: &dyn Transport,
) -> Result<ResolutionReport, PipelineError> {
    let mut warnings = Vec::new();
    let ads_error = match via_ads(doi, cfg, transport, &mut warnings) {
        Ok(Some((bibcode, record))) => {
            let entry = RefEntry::draft(vec![record.clone()], note.map(str::to_string))?;
            return Ok(ResolutionReport {
                doi: doi.clone(),
                path_taken: PathTaken::Ads,
                bibcode: Some(bibcode),
                record,
                renders: all_renders(&entry, None)?,
                warnings,
                unverified: false,
            });
        }
        Ok(None) => None,
        Err(e) => {
            warn(&mut warnings, format!("ADS route failed for {doi}, using content negotiation: {e}"));
            Some(e)
        }
    };

    let policy = cfg.retry_policy();
    let record = match fetch_csl_json_with(doi, transport, &policy).and_then(|csl| csl_to_record(&csl)) {
        Ok(record) => record,
        Err(fallback) => {
            return Err(PipelineError::ResolutionFailed {
                doi: doi.clone(),
                ads: ads_error,
                fallback,
            })
        }
    };
    let bibtex = match fetch_bibtex_with(doi, transport, &policy) {
        Ok(body) => Some(body),
        Err(e) => {
            warn(&mut warnings, format!("BibTeX fetch failed for {doi}, generated locally: {e}"));
            None
        }
    };
    let entry = RefEntry::draft(vec![record.clone()], note.map(str::to_string))?;
    Ok(ResolutionReport {
        doi: doi.clone(),
        path_taken: PathTaken::Fallback,
        bibcode: None,
        record,
        renders: all_renders(&entry, bibtex)?,
        warnings,
        unverified: false,
    })
}

/// Resolves free text through a CrossRef search. The result is always
/// flagged unverified.
pub fn resolve_query(
    text: &str,
    note: Option<&str>,
    cfg: &AdsConfig,
    transport: &dyn Transport,
) -> Result<ResolutionReport, PipelineError> {
    let found = fetch_bibtex_by_query_with(text, transport, &cfg.retry_policy()).map_err(PipelineError::Query)?;
    let mut record = bibtex_to_record(&found.bibtex).map_err(|e| PipelineError::Query(e.into()))?;
    record.doi = Some(found.doi.clone());
    let mut warnings = Vec::new();
    warn(
        &mut warnings,
        format!("{text:?} matched {} by keyword search; verify it is the intended work", found.doi),
    );
    let entry = RefEntry::draft(vec![record.clone()], note.map(str::to_string))?;
    Ok(ResolutionReport {
        doi: found.doi,
        path_taken: PathTaken::Fallback,
        bibcode: None,
        record,
        renders: all_renders(&entry, Some(found.bibtex))?,
        warnings,
        unverified: found.unverified,
    })
}

/// Result of [`resolve_and_store`].
#[derive(Debug, Clone, PartialEq)]
pub struct StoreOutcome {
    pub global_id: GlobalId,
    /// `None` when the DOI was already stored and nothing was fetched.
    pub report: Option<ResolutionReport>,
    pub warnings: Vec<String>,
}

impl StoreOutcome {
    pub fn path_label(&self) -> &'static str {
        self.report.as_ref().map_or("existing", |r| r.path_taken.as_str())
    }

    pub fn unverified(&self) -> bool {
        self.report.as_ref().is_some_and(|r| r.unverified)
    }
}

fn existing(id: GlobalId, doi: &Doi, mut warnings: Vec<String>, report: Option<ResolutionReport>) -> StoreOutcome {
    warn(&mut warnings, format!("{doi} is already stored as {id}"));
    StoreOutcome {
        global_id: id,
        report,
        warnings,
    }
}

fn store_report(report: ResolutionReport, note: Option<&str>, store: &RefStore) -> Result<StoreOutcome, PipelineError> {
    let warnings = report.warnings.clone();
    match store.add_entry(vec![report.record.clone()], note.map(str::to_string)) {
        Ok(global_id) => Ok(StoreOutcome {
            global_id,
            report: Some(report),
            warnings,
        }),
        Err(StoreError::DuplicateEntry { existing: id }) => {
            let doi = report.doi.clone();
            Ok(existing(id, &doi, warnings, Some(report)))
        }
        Err(e) => Err(e.into()),
    }
}

/// Resolves `doi` and stores it. A DOI that is already stored returns its
/// existing ID with a warning and makes no requests.
pub fn resolve_and_store(
    doi: &Doi,
    note: Option<&str>,
    store: &RefStore,
    cfg: &AdsConfig,
    transport: &dyn Transport,
) -> Result<StoreOutcome, PipelineError> {
    if let Some(id) = store.find_by_doi(doi)? {
        return Ok(existing(id, doi, Vec::new(), None));
    }
    let report = resolve_reference(doi, note, cfg, transport)?;
    store_report(report, note, store)
}

/// Keyword-search counterpart of [`resolve_and_store`].
pub fn resolve_query_and_store(
    text: &str,
    note: Option<&str>,
    store: &RefStore,
    cfg: &AdsConfig,
    transport: &dyn Transport,
) -> Result<StoreOutcome, PipelineError> {
    let report = resolve_query(text, note, cfg, transport)?;
    if let Some(id) = store.find_by_doi(&report.doi)? {
        let doi = report.doi.clone();
        let warnings = report.warnings.clone();
        return Ok(existing(id, &doi, warnings, Some(report)));
    }
    store_report(report, note, store)
}
