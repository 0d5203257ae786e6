//! Source-independent bibliographic data model.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::identifiers::{Bibcode, Doi};

/// Accepted publication years.
pub const YEAR_RANGE: std::ops::RangeInclusive<i32> = 1500..=2999;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("invalid author: surname is empty")]
    InvalidAuthor,
    #[error("first page must not be empty")]
    EmptyFirstPage,
    #[error("sub-label count must be at least 1")]
    InvalidCount,
    #[error("year {0} is outside {min}..={max}", min = YEAR_RANGE.start(), max = YEAR_RANGE.end())]
    YearOutOfRange(i32),
    #[error("global id must be positive")]
    InvalidGlobalId,
    #[error("an entry needs at least one record")]
    EmptyEntry,
}

/// One author, stored as given-name tokens plus surname.
///
/// A surname with no given names is how collaborations and consortia are
/// represented; those render as the bare surname.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AuthorName {
    pub given_names: Vec<String>,
    pub surname: String,
}

impl AuthorName {
    /// Single uppercase initial per given-name token, each followed by ".".
    pub fn initials(&self) -> Vec<String> {
        self.given_names
            .iter()
            .filter_map(|token| token.chars().find(|c| c.is_alphabetic()))
            .map(|c| format!("{}.", c.to_uppercase()))
            .collect()
    }

    /// "F. I. Surname".
    pub fn formatted(&self) -> String {
        let mut parts = self.initials();
        parts.push(self.surname.clone());
        parts.join(" ")
    }

    /// Given names as one string, e.g. "Iouli E."; single-letter tokens
    /// get their abbreviation period back.
    pub fn given(&self) -> String {
        self.given_names
            .iter()
            .map(|t| {
                if t.chars().count() == 1 {
                    format!("{t}.")
                } else {
                    t.clone()
                }
            })
            .collect::<Vec<_>>()
            .join(" ")
    }
}

fn is_name_separator(c: char) -> bool {
    c.is_whitespace() || c == '-' || c == '.'
}

/// Builds an author from raw given-name and surname strings.
///
/// Given names split on whitespace, hyphens and periods, so "I.E.",
/// "I. E." and "Iouli E." all yield two tokens.
pub fn make_author(raw_given: &str, raw_surname: &str) -> Result<AuthorName, ModelError> {
    let surname = raw_surname.split_whitespace().collect::<Vec<_>>().join(" ");
    if surname.is_empty() {
        return Err(ModelError::InvalidAuthor);
    }
    let given_names = raw_given
        .split(is_name_separator)
        .filter(|t| t.chars().any(char::is_alphabetic))
        .map(str::to_string)
        .collect();
    Ok(AuthorName {
        given_names,
        surname,
    })
}

/// First page plus optional last page.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Pages {
    pub first: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub last: Option<String>,
}

impl Pages {
    pub fn new(first: impl Into<String>, last: Option<String>) -> Self {
        Pages {
            first: first.into(),
            last: last.filter(|l| !l.is_empty()),
        }
    }

    /// Splits "3-69", "3--69" or "3–69" (en dash); anything else is a
    /// single first page. Returns `None` for blank input.
    pub fn parse_range(raw: &str) -> Option<Pages> {
        let raw = raw.trim();
        if raw.is_empty() {
            return None;
        }
        for sep in ["--", "\u{2013}", "\u{2014}", "-"] {
            if let Some((first, last)) = raw.split_once(sep) {
                let first = first.trim();
                let last = last.trim();
                if !first.is_empty() {
                    return Some(Pages::new(first, Some(last.to_string())));
                }
            }
        }
        Some(Pages::new(raw, None))
    }

    pub fn formatted(&self) -> String {
        format_pages(&self.first, self.last.as_deref()).unwrap_or_default()
    }
}

/// "first-last", or just "first".
pub fn format_pages(first: &str, last: Option<&str>) -> Result<String, ModelError> {
    if first.is_empty() {
        return Err(ModelError::EmptyFirstPage);
    }
    Ok(match last {
        Some(last) if !last.is_empty() => format!("{first}-{last}"),
        _ => first.to_string(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SourceType {
    #[default]
    Article,
    Book,
    Proceedings,
    Thesis,
    Report,
    PrivateCommunication,
    Unpublished,
    Other,
}

impl SourceType {
    pub fn as_str(self) -> &'static str {
        match self {
            SourceType::Article => "article",
            SourceType::Book => "book",
            SourceType::Proceedings => "proceedings",
            SourceType::Thesis => "thesis",
            SourceType::Report => "report",
            SourceType::PrivateCommunication => "private-communication",
            SourceType::Unpublished => "unpublished",
            SourceType::Other => "other",
        }
    }

    pub fn from_name(name: &str) -> Option<SourceType> {
        Some(match name {
            "article" => SourceType::Article,
            "book" => SourceType::Book,
            "proceedings" => SourceType::Proceedings,
            "thesis" => SourceType::Thesis,
            "report" => SourceType::Report,
            "private-communication" => SourceType::PrivateCommunication,
            "unpublished" => SourceType::Unpublished,
            "other" => SourceType::Other,
            _ => return None,
        })
    }
}

/// Canonical metadata for one cited work.
///
/// Text fields hold decoded Unicode; markup escaping happens in the
/// renderers. Link URLs are derived from the identifiers.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct BibRecord {
    #[serde(default)]
    pub source_type: SourceType,
    #[serde(default)]
    pub authors: Vec<AuthorName>,
    #[serde(default)]
    pub title: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub journal: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub volume: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub number: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pages: Option<Pages>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub year: Option<i32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub publisher: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub doi: Option<Doi>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bibcode: Option<Bibcode>,
}

impl BibRecord {
    pub fn doi_url(&self) -> Option<String> {
        self.doi.as_ref().map(Doi::url)
    }

    pub fn ads_url(&self) -> Option<String> {
        self.bibcode.as_ref().map(Bibcode::ads_url)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if let Some(year) = self.year {
            if !YEAR_RANGE.contains(&year) {
                return Err(ModelError::YearOutOfRange(year));
            }
        }
        if self.authors.iter().any(|a| a.surname.trim().is_empty()) {
            return Err(ModelError::InvalidAuthor);
        }
        if let Some(pages) = &self.pages {
            if pages.first.is_empty() {
                return Err(ModelError::EmptyFirstPage);
            }
        }
        Ok(())
    }
}

/// Keeps a year only when it falls inside [`YEAR_RANGE`].
pub fn checked_year(year: i64) -> Option<i32> {
    i32::try_from(year).ok().filter(|y| YEAR_RANGE.contains(y))
}

/// Permanent registry identifier, always ≥ 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u64", into = "u64")]
pub struct GlobalId(u64);

impl GlobalId {
    pub fn new(id: u64) -> Result<GlobalId, ModelError> {
        if id == 0 {
            Err(ModelError::InvalidGlobalId)
        } else {
            Ok(GlobalId(id))
        }
    }

    pub fn get(self) -> u64 {
        self.0
    }
}

impl TryFrom<u64> for GlobalId {
    type Error = ModelError;

    fn try_from(value: u64) -> Result<Self, Self::Error> {
        GlobalId::new(value)
    }
}

impl From<GlobalId> for u64 {
    fn from(id: GlobalId) -> u64 {
        id.0
    }
}

impl fmt::Display for GlobalId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// A stored reference: one or more nested records under one global ID.
///
/// `global_id` is `None` for drafts that have not been persisted yet.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RefEntry {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub global_id: Option<GlobalId>,
    pub records: Vec<BibRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl RefEntry {
    pub fn new(global_id: GlobalId, records: Vec<BibRecord>, note: Option<String>) -> Result<Self, ModelError> {
        let mut entry = RefEntry::draft(records, note)?;
        entry.global_id = Some(global_id);
        Ok(entry)
    }

    pub fn draft(records: Vec<BibRecord>, note: Option<String>) -> Result<Self, ModelError> {
        if records.is_empty() {
            return Err(ModelError::EmptyEntry);
        }
        for record in &records {
            record.validate()?;
        }
        Ok(RefEntry {
            global_id: None,
            records,
            note,
        })
    }

    pub fn sub_labels(&self) -> Vec<String> {
        sub_labels(self.records.len().max(1)).expect("count is at least one")
    }

    /// Display labels such as "663" or "663a", "663b". Drafts carry only
    /// the sub-labels.
    pub fn labels(&self) -> Vec<String> {
        let prefix = self.global_id.map(|id| id.to_string()).unwrap_or_default();
        self.sub_labels()
            .into_iter()
            .map(|sub| format!("{prefix}{sub}"))
            .collect()
    }

    /// Sorted, de-duplicated canonical DOIs of all nested records.
    pub fn doi_set(&self) -> Vec<Doi> {
        let mut dois: Vec<Doi> = self.records.iter().filter_map(|r| r.doi.clone()).collect();
        dois.sort();
        dois.dedup();
        dois
    }
}

/// Letter labels for nested records: `[""]` for one record, otherwise
/// "a".."z", "aa", "ab", ... (bijective base 26).
pub fn sub_labels(n: usize) -> Result<Vec<String>, ModelError> {
    match n {
        0 => Err(ModelError::InvalidCount),
        1 => Ok(vec![String::new()]),
        _ => Ok((1..=n).map(alpha_label).collect()),
    }
}

fn alpha_label(mut index: usize) -> String {
    let mut letters = Vec::new();
    while index > 0 {
        index -= 1;
        letters.push(b'a' + (index % 26) as u8);
        index /= 26;
    }
    letters.reverse();
    String::from_utf8(letters).expect("ascii")
}

/// Maps a dataset-local reference number onto a global ID.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SourceCrossRef {
    pub dataset_scope: String,
    pub parameter: String,
    pub local_id: u64,
    pub global_id: GlobalId,
}
