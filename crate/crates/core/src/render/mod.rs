//! House output formats for stored references: HTML, plain text, BibTeX
//! and JSON.
//!
//! HTML and text share one layout, built once as a list of pieces and then
//! serialized either with markup or without it. Per nested record the
//! order is: label, note (first record only), authors, quoted title,
//! italic journal, bold volume, pages, year in parentheses, then the DOI
//! and ADS links.

mod escape;

use std::fmt;
use std::str::FromStr;

use serde::Serialize;
use serde_json::Value;
use thiserror::Error;

pub use escape::{escape_bibtex, escape_html};

use crate::model::{BibRecord, RefEntry, SourceType};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RenderError {
    #[error("record {label:?} has no renderable fields")]
    Unrenderable { label: String },
    #[error("json: {0}")]
    Json(String),
    #[error("unknown output format {0:?}")]
    UnknownFormat(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Html,
    Json,
    Bibtex,
    Text,
}

impl Format {
    pub const ALL: [Format; 4] = [Format::Html, Format::Json, Format::Bibtex, Format::Text];

    pub fn as_str(self) -> &'static str {
        match self {
            Format::Html => "html",
            Format::Json => "json",
            Format::Bibtex => "bibtex",
            Format::Text => "text",
        }
    }
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Format {
    type Err = RenderError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Format::ALL
            .into_iter()
            .find(|f| f.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| RenderError::UnknownFormat(s.to_string()))
    }
}

/// One entry rendered in one format.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RenderedCitation {
    pub format: Format,
    pub body: String,
    /// Global ID as text, empty for drafts.
    pub global_label: String,
}

impl RenderedCitation {
    fn new(format: Format, entry: &RefEntry, body: String) -> Self {
        RenderedCitation {
            format,
            body,
            global_label: entry.global_id.map(|id| id.to_string()).unwrap_or_default(),
        }
    }
}

pub fn render(entry: &RefEntry, format: Format) -> Result<RenderedCitation, RenderError> {
    match format {
        Format::Html => render_html(entry),
        Format::Json => render_json(entry),
        Format::Bibtex => Ok(render_bibtex(entry)),
        Format::Text => render_text(entry),
    }
}

enum Piece {
    Text(String),
    Italic(String),
    Bold(String),
    Label(String),
    Link { url: String, label: &'static str },
}

fn is_renderable(record: &BibRecord) -> bool {
    !record.authors.is_empty()
        || !record.title.trim().is_empty()
        || record.journal.is_some()
        || record.volume.is_some()
        || record.pages.is_some()
        || record.year.is_some()
}

fn non_blank(value: &Option<String>) -> Option<&str> {
    value.as_deref().map(str::trim).filter(|s| !s.is_empty())
}

fn record_pieces(record: &BibRecord, label: &str, note: Option<&str>) -> Vec<Piece> {
    let mut pieces = Vec::new();
    if !label.is_empty() {
        pieces.push(Piece::Label(label.to_string()));
        pieces.push(Piece::Text(" ".into()));
    }
    if let Some(note) = note.map(str::trim).filter(|n| !n.is_empty()) {
        pieces.push(Piece::Text(format!("{note} ")));
    }

    let mut segments: Vec<Vec<Piece>> = Vec::new();
    if !record.authors.is_empty() {
        let names: Vec<String> = record.authors.iter().map(|a| a.formatted()).collect();
        segments.push(vec![Piece::Text(names.join(", "))]);
    }
    let title = record.title.trim();
    if !title.is_empty() {
        segments.push(vec![Piece::Text(format!("\"{title}\""))]);
    }
    let mut venue = Vec::new();
    if let Some(journal) = non_blank(&record.journal) {
        venue.push(Piece::Italic(journal.to_string()));
    }
    if let Some(volume) = non_blank(&record.volume) {
        if !venue.is_empty() {
            venue.push(Piece::Text(" ".into()));
        }
        venue.push(Piece::Bold(volume.to_string()));
    }
    if !venue.is_empty() {
        segments.push(venue);
    }
    if let Some(pages) = record.pages.as_ref().filter(|p| !p.first.is_empty()) {
        segments.push(vec![Piece::Text(pages.formatted())]);
    }

    let has_segments = !segments.is_empty();
    for (i, segment) in segments.into_iter().enumerate() {
        if i > 0 {
            pieces.push(Piece::Text(", ".into()));
        }
        pieces.extend(segment);
    }
    let year = record
        .year
        .map(|y| y.to_string())
        .unwrap_or_else(|| "n.d.".to_string());
    let lead = if has_segments { " " } else { "" };
    pieces.push(Piece::Text(format!("{lead}({year}).")));

    if let Some(url) = record.doi_url() {
        pieces.push(Piece::Text(" ".into()));
        pieces.push(Piece::Link { url, label: "[link]" });
    }
    if let Some(url) = record.ads_url() {
        pieces.push(Piece::Text(" ".into()));
        pieces.push(Piece::Link { url, label: "[ADS]" });
    }
    pieces
}

fn entry_lines(entry: &RefEntry) -> Result<Vec<(String, Vec<Piece>)>, RenderError> {
    let labels = entry.labels();
    entry
        .records
        .iter()
        .zip(labels)
        .enumerate()
        .map(|(i, (record, label))| {
            if !is_renderable(record) {
                return Err(RenderError::Unrenderable { label });
            }
            let note = if i == 0 { entry.note.as_deref() } else { None };
            let pieces = record_pieces(record, &label, note);
            Ok((label, pieces))
        })
        .collect()
}

/// HTML rendering: one `<p class="ref">` line per nested record.
pub fn render_html(entry: &RefEntry) -> Result<RenderedCitation, RenderError> {
    let mut lines = Vec::new();
    for (label, pieces) in entry_lines(entry)? {
        let mut line = if label.is_empty() {
            String::from("<p class=\"ref\">")
        } else {
            format!("<p class=\"ref\" id=\"ref-{}\">", escape_html(&label))
        };
        for piece in pieces {
            match piece {
                Piece::Text(t) => line.push_str(&escape_html(&t)),
                Piece::Italic(t) => {
                    line.push_str("<i>");
                    line.push_str(&escape_html(&t));
                    line.push_str("</i>");
                }
                Piece::Bold(t) => {
                    line.push_str("<b>");
                    line.push_str(&escape_html(&t));
                    line.push_str("</b>");
                }
                Piece::Label(t) => {
                    line.push_str("<span class=\"ref-id\">");
                    line.push_str(&escape_html(&t));
                    line.push_str("</span>");
                }
                Piece::Link { url, label } => {
                    line.push_str(&format!("<a href=\"{}\">{}</a>", escape_html(&url), label));
                }
            }
        }
        line.push_str("</p>");
        lines.push(line);
    }
    Ok(RenderedCitation::new(Format::Html, entry, lines.join("\n")))
}

/// Same layout as [`render_html`] without markup; links become bare URLs.
pub fn render_text(entry: &RefEntry) -> Result<RenderedCitation, RenderError> {
    let mut lines = Vec::new();
    for (_, pieces) in entry_lines(entry)? {
        let mut line = String::new();
        for piece in pieces {
            match piece {
                Piece::Text(t) | Piece::Italic(t) | Piece::Bold(t) | Piece::Label(t) => line.push_str(&t),
                Piece::Link { url, .. } => line.push_str(&url),
            }
        }
        lines.push(line);
    }
    Ok(RenderedCitation::new(Format::Text, entry, lines.join("\n")))
}

fn bibtex_type(source_type: SourceType) -> (&'static str, &'static str) {
    // (entry type, field that holds the venue)
    match source_type {
        SourceType::Article => ("article", "journal"),
        SourceType::Book => ("book", "journal"),
        SourceType::Proceedings => ("inproceedings", "booktitle"),
        SourceType::Thesis => ("phdthesis", "school"),
        SourceType::Report => ("techreport", "institution"),
        SourceType::PrivateCommunication | SourceType::Other => ("misc", "journal"),
        SourceType::Unpublished => ("unpublished", "journal"),
    }
}

/// `howpublished` marker distinguishing private communications from other
/// `@misc` entries.
pub const PRIVATE_COMMUNICATION: &str = "private communication";

fn citation_key(record: &BibRecord) -> String {
    if let Some(bibcode) = &record.bibcode {
        return bibcode.to_string();
    }
    let surname: String = record
        .authors
        .first()
        .map(|a| a.surname.chars().filter(char::is_ascii_alphanumeric).collect())
        .unwrap_or_default();
    let surname = if surname.is_empty() { "anon".to_string() } else { surname };
    let year = record.year.map(|y| y.to_string()).unwrap_or_else(|| "nd".into());
    format!("{surname}{year}")
}

fn bibtex_author(author: &crate::model::AuthorName) -> String {
    if author.given_names.is_empty() {
        format!("{{{}}}", escape_bibtex(&author.surname))
    } else {
        format!("{}, {}", escape_bibtex(&author.surname), escape_bibtex(&author.given()))
    }
}

fn bibtex_block(record: &BibRecord, note: Option<&str>) -> String {
    let (entry_type, venue_field) = bibtex_type(record.source_type);
    let mut fields: Vec<(&str, String)> = Vec::new();
    if !record.title.is_empty() {
        fields.push(("title", escape_bibtex(&record.title)));
    }
    if !record.authors.is_empty() {
        let names: Vec<String> = record.authors.iter().map(bibtex_author).collect();
        fields.push(("author", names.join(" and ")));
    }
    if let Some(journal) = &record.journal {
        fields.push((venue_field, escape_bibtex(journal)));
    }
    if let Some(volume) = &record.volume {
        fields.push(("volume", escape_bibtex(volume)));
    }
    if let Some(number) = &record.number {
        fields.push(("number", escape_bibtex(number)));
    }
    if let Some(pages) = &record.pages {
        let value = match &pages.last {
            Some(last) => format!("{}--{}", pages.first, last),
            None => pages.first.clone(),
        };
        fields.push(("pages", escape_bibtex(&value)));
    }
    if let Some(year) = record.year {
        fields.push(("year", year.to_string()));
    }
    if let Some(publisher) = &record.publisher {
        fields.push(("publisher", escape_bibtex(publisher)));
    }
    if let Some(doi) = &record.doi {
        fields.push(("doi", escape_bibtex(doi.as_str())));
    }
    if record.source_type == SourceType::PrivateCommunication {
        fields.push(("howpublished", PRIVATE_COMMUNICATION.to_string()));
    }
    if let Some(note) = note.filter(|n| !n.trim().is_empty()) {
        fields.push(("note", escape_bibtex(note)));
    }

    let mut out = format!("@{entry_type}{{{},\n", citation_key(record));
    let body: Vec<String> = fields
        .into_iter()
        .map(|(name, value)| format!("  {name} = {{{value}}}"))
        .collect();
    out.push_str(&body.join(",\n"));
    out.push_str("\n}\n");
    out
}

/// One BibTeX block per nested record, separated by blank lines. The entry
/// note rides along on the first block.
pub fn render_bibtex(entry: &RefEntry) -> RenderedCitation {
    let blocks: Vec<String> = entry
        .records
        .iter()
        .enumerate()
        .map(|(i, record)| bibtex_block(record, if i == 0 { entry.note.as_deref() } else { None }))
        .collect();
    RenderedCitation::new(Format::Bibtex, entry, blocks.join("\n"))
}

#[derive(Serialize)]
struct RecordOut<'a> {
    #[serde(flatten)]
    record: &'a BibRecord,
    #[serde(skip_serializing_if = "Option::is_none")]
    doi_url: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    ads_url: Option<String>,
}

#[derive(Serialize)]
struct EntryOut<'a> {
    #[serde(skip_serializing_if = "Option::is_none")]
    global_id: Option<u64>,
    labels: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    note: Option<&'a str>,
    records: Vec<RecordOut<'a>>,
}

fn sort_keys(value: Value) -> Value {
    match value {
        Value::Object(map) => {
            let mut pairs: Vec<(String, Value)> = map.into_iter().collect();
            pairs.sort_by(|a, b| a.0.cmp(&b.0));
            Value::Object(pairs.into_iter().map(|(k, v)| (k, sort_keys(v))).collect())
        }
        Value::Array(items) => Value::Array(items.into_iter().map(sort_keys).collect()),
        other => other,
    }
}

/// Pretty-printed JSON with sorted keys. Derived members (`labels`,
/// `doi_url`, `ads_url`) are included for readers and ignored by
/// [`parse_json`].
pub fn render_json(entry: &RefEntry) -> Result<RenderedCitation, RenderError> {
    let out = EntryOut {
        global_id: entry.global_id.map(|id| id.get()),
        labels: entry.labels(),
        note: entry.note.as_deref(),
        records: entry
            .records
            .iter()
            .map(|record| RecordOut {
                record,
                doi_url: record.doi_url(),
                ads_url: record.ads_url(),
            })
            .collect(),
    };
    let value = serde_json::to_value(&out).map_err(|e| RenderError::Json(e.to_string()))?;
    let body = serde_json::to_string_pretty(&sort_keys(value)).map_err(|e| RenderError::Json(e.to_string()))?;
    Ok(RenderedCitation::new(Format::Json, entry, body))
}

/// Reads a [`render_json`] body back into an entry.
pub fn parse_json(body: &str) -> Result<RefEntry, RenderError> {
    let entry: RefEntry = serde_json::from_str(body).map_err(|e| RenderError::Json(e.to_string()))?;
    if entry.records.is_empty() {
        return Err(RenderError::Json("entry has no records".into()));
    }
    Ok(entry)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::identifiers::{parse_bibcode, parse_doi};
    use crate::model::{make_author, GlobalId, Pages};

    fn sample() -> BibRecord {
        BibRecord {
            authors: vec![make_author("A. B.", "Cee").unwrap()],
            title: "T".into(),
            journal: Some("J".into()),
            volume: Some("9".into()),
            pages: Some(Pages::new("1", Some("2".into()))),
            year: Some(2001),
            doi: Some(parse_doi("10.1000/x").unwrap()),
            bibcode: Some(parse_bibcode("2001J.......9....1C").unwrap()),
            ..Default::default()
        }
    }

    fn entry(id: u64, records: Vec<BibRecord>, note: Option<&str>) -> RefEntry {
        RefEntry::new(GlobalId::new(id).unwrap(), records, note.map(String::from)).unwrap()
    }

    #[test]
    fn html_single_record() {
        let html = render_html(&entry(7, vec![sample()], None)).unwrap();
        assert_eq!(
            html.body,
            "<p class=\"ref\" id=\"ref-7\"><span class=\"ref-id\">7</span> A. B. Cee, &quot;T&quot;, \
             <i>J</i> <b>9</b>, 1-2 (2001). <a href=\"https://doi.org/10.1000/x\">[link]</a> \
             <a href=\"https://ui.adsabs.harvard.edu/abs/2001J.......9....1C/abstract\">[ADS]</a></p>"
        );
        assert_eq!(html.global_label, "7");
    }

    #[test]
    fn text_single_record() {
        let text = render_text(&entry(7, vec![sample()], Some("Line positions only."))).unwrap();
        assert_eq!(
            text.body,
            "7 Line positions only. A. B. Cee, \"T\", J 9, 1-2 (2001). https://doi.org/10.1000/x \
             https://ui.adsabs.harvard.edu/abs/2001J.......9....1C/abstract"
        );
    }

    #[test]
    fn nested_records_get_letter_labels() {
        let html = render_html(&entry(663, vec![sample(), sample()], None)).unwrap();
        let lines: Vec<&str> = html.body.lines().collect();
        assert_eq!(lines.len(), 2);
        assert!(lines[0].contains("<span class=\"ref-id\">663a</span>"));
        assert!(lines[1].contains("<span class=\"ref-id\">663b</span>"));
    }

    #[test]
    fn note_only_on_first_line() {
        let text = render_text(&entry(663, vec![sample(), sample()], Some("N"))).unwrap();
        let lines: Vec<&str> = text.body.lines().collect();
        assert!(lines[0].starts_with("663a N A. B. Cee"));
        assert!(lines[1].starts_with("663b A. B. Cee"));
    }

    #[test]
    fn escaping_composes_once() {
        let mut r = sample();
        r.title = "a < b &amp;".into();
        let html = render_html(&entry(1, vec![r], None)).unwrap();
        assert!(html.body.contains("a &lt; b &amp;amp;"));
    }

    #[test]
    fn missing_fields() {
        let r = BibRecord {
            title: "Only a title".into(),
            doi: Some(parse_doi("10.1000/y").unwrap()),
            ..Default::default()
        };
        let text = render_text(&entry(2, vec![r], None)).unwrap();
        assert_eq!(text.body, "2 \"Only a title\" (n.d.). https://doi.org/10.1000/y");
        assert!(!text.body.contains("  "));

        let mut r = sample();
        r.journal = None;
        r.pages = Some(Pages::new("5", None));
        let text = render_text(&entry(3, vec![r], None)).unwrap();
        assert!(text.body.contains("\"T\", 9, 5 (2001)."));
        assert!(!text.body.contains("  "));
    }

    #[test]
    fn unrenderable_record() {
        let r = BibRecord {
            doi: Some(parse_doi("10.1000/z").unwrap()),
            ..Default::default()
        };
        let err = render_html(&entry(4, vec![r], None)).unwrap_err();
        assert_eq!(err, RenderError::Unrenderable { label: "4".into() });
    }

    #[test]
    fn bibtex_block_layout() {
        let mut r = sample();
        r.number = Some("2".into());
        r.publisher = Some("Elsevier".into());
        r.title = "50% & rising".into();
        let bib = render_bibtex(&entry(1, vec![r], None));
        assert_eq!(
            bib.body,
            "@article{2001J.......9....1C,\n  title = {50\\% \\& rising},\n  author = {Cee, A. B.},\n  \
             journal = {J},\n  volume = {9},\n  number = {2},\n  pages = {1--2},\n  year = {2001},\n  \
             publisher = {Elsevier},\n  doi = {10.1000/x}\n}\n"
        );
    }

    #[test]
    fn bibtex_key_without_bibcode() {
        let mut r = sample();
        r.bibcode = None;
        r.authors = vec![make_author("J.", "O'Brien").unwrap()];
        let bib = render_bibtex(&entry(1, vec![r], None));
        assert!(bib.body.starts_with("@article{OBrien2001,\n"));
    }

    #[test]
    fn json_sorted_and_roundtrips() {
        let e = entry(12, vec![sample()], Some("a note"));
        let json = render_json(&e).unwrap();
        assert!(json.body.contains("\"note\": \"a note\""));
        assert!(json.body.contains("\"doi_url\": \"https://doi.org/10.1000/x\""));
        assert!(!json.body.lines().any(|l| l.ends_with(' ')));
        let keys: Vec<&str> = json
            .body
            .lines()
            .filter(|l| l.starts_with("  \"") )
            .map(|l| l.trim().split('"').nth(1).unwrap())
            .collect();
        let mut sorted = keys.clone();
        sorted.sort();
        assert_eq!(keys, sorted);
        let back = parse_json(&json.body).unwrap();
        assert_eq!(back, e);
        assert_eq!(render_json(&back).unwrap().body, json.body);
    }

    #[test]
    fn format_names() {
        assert_eq!("BibTeX".parse::<Format>().unwrap(), Format::Bibtex);
        assert!("xml".parse::<Format>().is_err());
    }
}
