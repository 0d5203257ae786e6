//! DOI and ADS bibcode identifiers.
//!
//! Both types only exist in validated form: a [`Doi`] is always canonical
//! (lowercase, no resolver prefix) and a [`Bibcode`] always formats back to
//! exactly 19 characters.

use std::fmt;
use std::str::FromStr;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Fixed width of a formatted bibcode.
pub const BIBCODE_LEN: usize = 19;

const JOURNAL_WIDTH: usize = 5;
const VOLUME_WIDTH: usize = 4;
const PAGE_WIDTH: usize = 4;

const DOI_PREFIXES: &[&str] = &[
    "https://doi.org/",
    "http://doi.org/",
    "https://dx.doi.org/",
    "http://dx.doi.org/",
    "doi.org/",
    "doi:",
];

static DOI_PATTERN: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^10\.[0-9]{4,9}/\S+$").expect("static regex"));

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum IdentifierError {
    #[error("invalid DOI: {0:?}")]
    InvalidDoi(String),
    #[error("bibcode must be {BIBCODE_LEN} characters, got {len}: {raw:?}")]
    BibcodeLength { raw: String, len: usize },
    #[error("malformed bibcode {raw:?}: {reason}")]
    BibcodeFormat { raw: String, reason: String },
}

/// A canonical Digital Object Identifier, e.g. `10.1016/j.jqsrt.2017.06.038`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Doi(String);

impl Doi {
    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// Resolver link, `https://doi.org/<doi>`.
    pub fn url(&self) -> String {
        format!("https://doi.org/{}", self.0)
    }
}

/// Strips resolver prefixes, lowercases and validates a DOI.
pub fn parse_doi(raw: &str) -> Result<Doi, IdentifierError> {
    let trimmed = raw.trim();
    let mut rest = trimmed;
    for prefix in DOI_PREFIXES {
        if rest.len() >= prefix.len()
            && rest.is_char_boundary(prefix.len())
            && rest[..prefix.len()].eq_ignore_ascii_case(prefix)
        {
            rest = &rest[prefix.len()..];
            break;
        }
    }
    let canonical = rest.to_lowercase();
    if !DOI_PATTERN.is_match(&canonical) {
        return Err(IdentifierError::InvalidDoi(raw.to_string()));
    }
    Ok(Doi(canonical))
}

impl FromStr for Doi {
    type Err = IdentifierError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_doi(s)
    }
}

impl fmt::Display for Doi {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl Serialize for Doi {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.0)
    }
}

impl<'de> Deserialize<'de> for Doi {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(deserializer)?;
        parse_doi(&raw).map_err(serde::de::Error::custom)
    }
}

/// An ADS bibcode split into its fixed columns (`YYYYJJJJJVVVVMPPPPA`).
///
/// Fields hold the column contents with period padding removed. A page
/// longer than four characters spills into the qualifier column, in which
/// case `qualifier` is `None` and `page` has five characters.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Bibcode {
    pub year: u16,
    pub journal: String,
    pub volume: String,
    pub qualifier: Option<char>,
    pub page: String,
    pub author_initial: char,
}

impl Bibcode {
    /// Formats the bibcode; fails when a field does not fit its column.
    pub fn format(&self) -> Result<String, IdentifierError> {
        format_bibcode(self)
    }

    /// Abstract page on the ADS web interface.
    pub fn ads_url(&self) -> String {
        format!("https://ui.adsabs.harvard.edu/abs/{self}/abstract")
    }
}

fn bibcode_format_error(raw: &str, reason: impl Into<String>) -> IdentifierError {
    IdentifierError::BibcodeFormat {
        raw: raw.to_string(),
        reason: reason.into(),
    }
}

/// Splits a 19-character bibcode on its fixed columns.
pub fn parse_bibcode(raw: &str) -> Result<Bibcode, IdentifierError> {
    let code = raw.trim();
    let len = code.chars().count();
    if len != BIBCODE_LEN {
        return Err(IdentifierError::BibcodeLength {
            raw: raw.to_string(),
            len,
        });
    }
    if !code.bytes().all(|b| b.is_ascii_graphic()) {
        return Err(bibcode_format_error(raw, "only printable ASCII is allowed"));
    }

    let year_col = &code[0..4];
    if !year_col.bytes().all(|b| b.is_ascii_digit()) {
        return Err(bibcode_format_error(raw, "year must be four digits"));
    }
    let year: u16 = year_col.parse().expect("four ascii digits");

    let journal = code[4..9].trim_end_matches('.').to_string();
    let volume = code[9..13].trim_start_matches('.').to_string();

    let qualifier_col = code.as_bytes()[13] as char;
    let page_col = &code[14..18];
    let (qualifier, page) = match qualifier_col {
        '.' => (None, page_col.trim_start_matches('.').to_string()),
        c if c.is_ascii_digit() => (None, format!("{c}{page_col}")),
        c if c.is_ascii_alphabetic() => (Some(c), page_col.trim_start_matches('.').to_string()),
        c => {
            return Err(bibcode_format_error(
                raw,
                format!("qualifier column holds {c:?}"),
            ))
        }
    };

    let author_initial = code.as_bytes()[18] as char;
    if !(author_initial.is_ascii_alphabetic() || author_initial == '.') {
        return Err(bibcode_format_error(
            raw,
            format!("author initial column holds {author_initial:?}"),
        ));
    }

    Ok(Bibcode {
        year,
        journal,
        volume,
        qualifier,
        page,
        author_initial,
    })
}

/// Emits the 19-character form: journal left-aligned, volume and page
/// right-aligned, every empty position a period.
pub fn format_bibcode(b: &Bibcode) -> Result<String, IdentifierError> {
    let name = || format!("{b:?}");
    if b.year > 9999 {
        return Err(bibcode_format_error(&name(), "year exceeds four digits"));
    }
    for (field, value, width) in [
        ("journal", &b.journal, JOURNAL_WIDTH),
        ("volume", &b.volume, VOLUME_WIDTH),
    ] {
        if value.len() > width || !value.bytes().all(|c| c.is_ascii_graphic()) {
            return Err(bibcode_format_error(
                &name(),
                format!("{field} {value:?} does not fit {width} columns"),
            ));
        }
    }
    if !b.page.bytes().all(|c| c.is_ascii_graphic()) {
        return Err(bibcode_format_error(&name(), "page must be printable ASCII"));
    }
    if !(b.author_initial.is_ascii_alphabetic() || b.author_initial == '.') {
        return Err(bibcode_format_error(&name(), "author initial must be a letter or '.'"));
    }

    let (qualifier_col, page_cols) = match (b.qualifier, b.page.len()) {
        (Some(q), n) if n <= PAGE_WIDTH => {
            if !q.is_ascii_alphabetic() {
                return Err(bibcode_format_error(&name(), "qualifier must be a letter"));
            }
            (q, b.page.clone())
        }
        (None, n) if n <= PAGE_WIDTH => ('.', b.page.clone()),
        (None, 5) if b.page.as_bytes()[0].is_ascii_digit() => {
            (b.page.as_bytes()[0] as char, b.page[1..].to_string())
        }
        _ => {
            return Err(bibcode_format_error(
                &name(),
                format!("page {:?} does not fit the page columns", b.page),
            ))
        }
    };

    let mut out = String::with_capacity(BIBCODE_LEN);
    out.push_str(&format!("{:04}", b.year));
    out.push_str(&format!("{:.<width$}", b.journal, width = JOURNAL_WIDTH));
    out.push_str(&format!("{:.>width$}", b.volume, width = VOLUME_WIDTH));
    out.push(qualifier_col);
    out.push_str(&format!("{:.>width$}", page_cols, width = PAGE_WIDTH));
    out.push(b.author_initial);
    debug_assert_eq!(out.len(), BIBCODE_LEN);
    Ok(out)
}

impl FromStr for Bibcode {
    type Err = IdentifierError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_bibcode(s)
    }
}

impl fmt::Display for Bibcode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match format_bibcode(self) {
            Ok(s) => f.write_str(&s),
            Err(_) => Err(fmt::Error),
        }
    }
}

impl Serialize for Bibcode {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let s = format_bibcode(self).map_err(serde::ser::Error::custom)?;
        serializer.serialize_str(&s)
    }
}

impl<'de> Deserialize<'de> for Bibcode {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(deserializer)?;
        parse_bibcode(&raw).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn doi_prefix_strip_and_lowercase() {
        let doi = parse_doi("https://doi.org/10.1016/J.JQSRT.2017.06.038").unwrap();
        assert_eq!(doi.as_str(), "10.1016/j.jqsrt.2017.06.038");
        assert_eq!(parse_doi("10.1000/x").unwrap().as_str(), "10.1000/x");
        assert_eq!(parse_doi("DOI:10.1000/X").unwrap().as_str(), "10.1000/x");
        assert_eq!(parse_doi(" doi.org/10.12345/abc ").unwrap().as_str(), "10.12345/abc");
    }

    #[test]
    fn doi_rejections() {
        for bad in ["not-a-doi", "", "10.1/x", "10.1000/", "10.1000/a b", "https://example.org/10.1000/x"] {
            match parse_doi(bad) {
                Err(IdentifierError::InvalidDoi(s)) => assert_eq!(s, bad),
                other => panic!("{bad:?} gave {other:?}"),
            }
        }
    }

    #[test]
    fn doi_url() {
        let doi = parse_doi("10.1000/x").unwrap();
        assert_eq!(doi.url(), "https://doi.org/10.1000/x");
    }

    #[test]
    fn hitran2016_bibcode_fields() {
        let b = parse_bibcode("2017JQSRT.203....3G").unwrap();
        assert_eq!(b.year, 2017);
        assert_eq!(b.journal, "JQSRT");
        assert_eq!(b.volume, "203");
        assert_eq!(b.qualifier, None);
        assert_eq!(b.page, "3");
        assert_eq!(b.author_initial, 'G');
        assert_eq!(format_bibcode(&b).unwrap(), "2017JQSRT.203....3G");
    }

    #[test]
    fn trailing_space_tolerated() {
        let b = parse_bibcode("2017JQSRT.203....3G ").unwrap();
        assert_eq!(b.to_string(), "2017JQSRT.203....3G");
    }

    #[test]
    fn full_width_fields() {
        let b = parse_bibcode("1111AAAAA1111A1111A").unwrap();
        assert_eq!(b.journal, "AAAAA");
        assert_eq!(b.volume, "1111");
        assert_eq!(b.qualifier, Some('A'));
        assert_eq!(b.page, "1111");
        assert_eq!(b.format().unwrap(), "1111AAAAA1111A1111A");
    }

    #[test]
    fn page_overflow_into_qualifier_column() {
        let b = parse_bibcode("2022JQSRT.27707949G").unwrap();
        assert_eq!(b.volume, "277");
        assert_eq!(b.qualifier, None);
        assert_eq!(b.page, "07949");
        assert_eq!(b.format().unwrap(), "2022JQSRT.27707949G");
    }

    #[test]
    fn letter_qualifier() {
        let b = parse_bibcode("1998ApJ...500L.123S").unwrap();
        assert_eq!(b.journal, "ApJ");
        assert_eq!(b.qualifier, Some('L'));
        assert_eq!(b.page, "123");
    }

    #[test]
    fn wrong_length_rejected() {
        assert!(matches!(
            parse_bibcode("2017JQSRT.203....3"),
            Err(IdentifierError::BibcodeLength { len: 18, .. })
        ));
    }

    #[test]
    fn non_digit_year_rejected() {
        assert!(matches!(
            parse_bibcode("20X7JQSRT.203....3G"),
            Err(IdentifierError::BibcodeFormat { .. })
        ));
    }

    fn column_slices(s: &str) -> [&str; 6] {
        [&s[0..4], &s[4..9], &s[9..13], &s[13..14], &s[14..18], &s[18..19]]
    }

    #[test]
    fn padding_rules_by_column() {
        let b = Bibcode {
            year: 2000,
            journal: "A".into(),
            volume: "1".into(),
            qualifier: None,
            page: "1".into(),
            author_initial: 'X',
        };
        let s = format_bibcode(&b).unwrap();
        assert_eq!(column_slices(&s), ["2000", "A....", "...1", ".", "...1", "X"]);
        assert_eq!(s, "2000A.......1....1X");
    }

    #[test]
    fn over_width_rejected() {
        let b = Bibcode {
            year: 2000,
            journal: "A".into(),
            volume: "12345".into(),
            qualifier: None,
            page: "1".into(),
            author_initial: 'X',
        };
        assert!(matches!(format_bibcode(&b), Err(IdentifierError::BibcodeFormat { .. })));
        let b = Bibcode { volume: "1".into(), page: "12345".into(), qualifier: Some('L'), ..b };
        assert!(format_bibcode(&b).is_err());
    }

    #[test]
    fn serde_uses_string_forms() {
        let b = parse_bibcode("2017JQSRT.203....3G").unwrap();
        let json = serde_json::to_string(&b).unwrap();
        assert_eq!(json, "\"2017JQSRT.203....3G\"");
        let back: Bibcode = serde_json::from_str(&json).unwrap();
        assert_eq!(back, b);
        let doi: Doi = serde_json::from_str("\"10.1000/ABC\"").unwrap();
        assert_eq!(doi.as_str(), "10.1000/abc");
    }

    fn bibcode_strategy() -> impl Strategy<Value = String> {
        (
            "[0-9]{4}",
            "[A-Za-z0-9&.]{5}",
            "[A-Za-z0-9&.]{4}",
            "[A-Za-z0-9.]",
            "[A-Za-z0-9&.]{4}",
            "[A-Za-z.]",
        )
            .prop_map(|(y, j, v, q, p, a)| format!("{y}{j}{v}{q}{p}{a}"))
    }

    proptest! {
        #[test]
        fn bibcode_roundtrip(s in bibcode_strategy()) {
            let b = parse_bibcode(&s).unwrap();
            prop_assert_eq!(format_bibcode(&b).unwrap(), s);
        }

        #[test]
        fn doi_parse_idempotent(suffix in "[a-zA-Z0-9./_;()-]{1,20}", reg in "[0-9]{4,9}") {
            let first = parse_doi(&format!("https://doi.org/10.{reg}/{suffix}")).unwrap();
            let again = parse_doi(first.as_str()).unwrap();
            prop_assert_eq!(first, again);
        }
    }
}
