//! Brace-aware BibTeX tokenizer and the mapping from a parsed entry onto
//! [`BibRecord`].

use std::ops::Range;

use thiserror::Error;

use crate::identifiers::{parse_bibcode, parse_doi};
use crate::model::{checked_year, make_author, AuthorName, BibRecord, Pages, SourceType};
use crate::render::PRIVATE_COMMUNICATION;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BibtexError {
    #[error("bibtex parse error at byte {offset}: {message}")]
    Parse { offset: usize, message: String },
    #[error("expected exactly one bibtex entry, found {0}")]
    Cardinality(usize),
}

fn parse_error(offset: usize, message: impl Into<String>) -> BibtexError {
    BibtexError::Parse {
        offset,
        message: message.into(),
    }
}

/// One `@type{key, field = value, ...}` block. Field names are lowercased;
/// values keep their inner markup (braces, escapes) untouched.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawEntry {
    pub entry_type: String,
    pub key: String,
    pub fields: Vec<(String, String)>,
    /// Byte range of the whole block in the input.
    pub span: Range<usize>,
}

impl RawEntry {
    pub fn field(&self, name: &str) -> Option<&str> {
        self.fields
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| v.as_str())
    }
}

struct Cursor<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn peek(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += c.len_utf8();
        Some(c)
    }

    fn skip_ws(&mut self) {
        while self.peek().is_some_and(char::is_whitespace) {
            self.bump();
        }
    }

    fn expect(&mut self, want: char) -> Result<(), BibtexError> {
        match self.peek() {
            Some(c) if c == want => {
                self.bump();
                Ok(())
            }
            Some(c) => Err(parse_error(self.pos, format!("expected {want:?}, found {c:?}"))),
            None => Err(parse_error(self.pos, format!("expected {want:?}, found end of input"))),
        }
    }

    fn ident(&mut self) -> String {
        let start = self.pos;
        while self
            .peek()
            .is_some_and(|c| !c.is_whitespace() && !matches!(c, '=' | ',' | '{' | '}' | '(' | ')' | '"' | '#'))
        {
            self.bump();
        }
        self.src[start..self.pos].to_string()
    }

    /// Consumes a `{...}` group, returning the inner text.
    fn braced(&mut self) -> Result<&'a str, BibtexError> {
        let open = self.pos;
        self.expect('{')?;
        let start = self.pos;
        let mut depth = 1usize;
        while let Some(c) = self.bump() {
            match c {
                '\\' => {
                    self.bump();
                }
                '{' => depth += 1,
                '}' => {
                    depth -= 1;
                    if depth == 0 {
                        return Ok(&self.src[start..self.pos - 1]);
                    }
                }
                _ => {}
            }
        }
        Err(parse_error(open, "unbalanced braces"))
    }

    /// Consumes a `"..."` value; quotes nested inside braces do not end it.
    fn quoted(&mut self) -> Result<&'a str, BibtexError> {
        let open = self.pos;
        self.expect('"')?;
        let start = self.pos;
        let mut depth = 0usize;
        while let Some(c) = self.bump() {
            match c {
                '\\' => {
                    self.bump();
                }
                '{' => depth += 1,
                '}' => {
                    if depth == 0 {
                        return Err(parse_error(self.pos - 1, "unbalanced braces in quoted value"));
                    }
                    depth -= 1;
                }
                '"' if depth == 0 => return Ok(&self.src[start..self.pos - 1]),
                _ => {}
            }
        }
        Err(parse_error(open, "unterminated quoted value"))
    }

    fn value(&mut self) -> Result<String, BibtexError> {
        let mut out = String::new();
        loop {
            self.skip_ws();
            match self.peek() {
                Some('{') => out.push_str(self.braced()?),
                Some('"') => out.push_str(self.quoted()?),
                Some(_) => {
                    let at = self.pos;
                    let word = self.ident();
                    if word.is_empty() {
                        return Err(parse_error(at, "expected a field value"));
                    }
                    out.push_str(&word);
                }
                None => return Err(parse_error(self.pos, "expected a field value")),
            }
            self.skip_ws();
            if self.peek() == Some('#') {
                self.bump();
            } else {
                return Ok(out);
            }
        }
    }
}

/// Parses every entry in `src`. `@comment`, `@preamble` and `@string`
/// blocks are skipped.
pub fn parse_entries(src: &str) -> Result<Vec<RawEntry>, BibtexError> {
    let mut cur = Cursor { src, pos: 0 };
    let mut entries = Vec::new();
    loop {
        match src[cur.pos..].find('@') {
            Some(offset) => cur.pos += offset,
            None => return Ok(entries),
        }
        let start = cur.pos;
        cur.bump();
        let entry_type = cur.ident().to_ascii_lowercase();
        cur.skip_ws();
        let close = match cur.peek() {
            Some('{') => '}',
            Some('(') => ')',
            _ => return Err(parse_error(cur.pos, "expected '{' or '(' after entry type")),
        };
        if matches!(entry_type.as_str(), "comment" | "preamble" | "string") {
            if close == '}' {
                cur.braced()?;
            } else {
                match src[cur.pos..].find(')') {
                    Some(end) => cur.pos += end + 1,
                    None => return Err(parse_error(start, "unterminated block")),
                }
            }
            continue;
        }
        cur.bump();
        cur.skip_ws();
        let key = cur.ident();
        cur.skip_ws();
        let mut fields = Vec::new();
        match cur.peek() {
            Some(',') => {
                cur.bump();
            }
            Some(c) if c == close => {}
            Some(c) => return Err(parse_error(cur.pos, format!("expected ',' after key, found {c:?}"))),
            None => return Err(parse_error(start, "unbalanced braces: entry is not closed")),
        }
        loop {
            cur.skip_ws();
            match cur.peek() {
                Some(c) if c == close => {
                    cur.bump();
                    break;
                }
                None => return Err(parse_error(start, "unbalanced braces: entry is not closed")),
                _ => {}
            }
            let name_at = cur.pos;
            let name = cur.ident().to_ascii_lowercase();
            if name.is_empty() {
                return Err(parse_error(name_at, "expected a field name"));
            }
            cur.skip_ws();
            cur.expect('=')?;
            let value = cur.value()?;
            fields.push((name, value));
            cur.skip_ws();
            match cur.peek() {
                Some(',') => {
                    cur.bump();
                }
                Some(c) if c == close => {}
                None => return Err(parse_error(start, "unbalanced braces: entry is not closed")),
                Some(c) => return Err(parse_error(cur.pos, format!("expected ',' between fields, found {c:?}"))),
            }
        }
        entries.push(RawEntry {
            entry_type,
            key,
            fields,
            span: start..cur.pos,
        });
    }
}

const ESCAPABLE: &[char] = &['{', '}', '%', '&', '$', '#', '_', '\\', '"', '\''];

/// Reduces a raw BibTeX value to plain text: undoes escapes, drops grouping
/// braces, turns `~` into a space and collapses whitespace.
pub fn latex_to_text(raw: &str) -> String {
    let mut out = String::with_capacity(raw.len());
    let mut chars = raw.char_indices().peekable();
    while let Some((i, c)) = chars.next() {
        match c {
            '\\' => {
                let rest = &raw[i + 1..];
                if let Some(after) = rest.strip_prefix("textbackslash") {
                    out.push('\\');
                    let skip = "textbackslash".len() + if after.starts_with("{}") { 2 } else { 0 };
                    for _ in 0..skip {
                        chars.next();
                    }
                } else {
                    match chars.peek() {
                        Some(&(_, next)) if ESCAPABLE.contains(&next) => {
                            out.push(next);
                            chars.next();
                        }
                        _ => out.push('\\'),
                    }
                }
            }
            '{' | '}' => {}
            '~' => out.push(' '),
            c => out.push(c),
        }
    }
    out.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Splits on the word "and" outside braces.
fn split_names(raw: &str) -> Vec<String> {
    let mut names = Vec::new();
    let mut current = String::new();
    let mut depth = 0usize;
    let mut word = String::new();
    let flush_word = |word: &mut String, current: &mut String, names: &mut Vec<String>, depth: usize| {
        if depth == 0 && word.eq_ignore_ascii_case("and") {
            names.push(std::mem::take(current));
        } else if !word.is_empty() {
            if !current.is_empty() {
                current.push(' ');
            }
            current.push_str(word);
        }
        word.clear();
    };
    for c in raw.chars() {
        match c {
            '{' => {
                depth += 1;
                word.push(c);
            }
            '}' => {
                depth = depth.saturating_sub(1);
                word.push(c);
            }
            c if c.is_whitespace() && depth == 0 => flush_word(&mut word, &mut current, &mut names, depth),
            c => word.push(c),
        }
    }
    flush_word(&mut word, &mut current, &mut names, depth);
    names.push(current);
    names.into_iter().filter(|n| !n.trim().is_empty()).collect()
}

/// Splits on top-level commas.
fn split_commas(raw: &str) -> Vec<&str> {
    let mut parts = Vec::new();
    let mut depth = 0usize;
    let mut start = 0;
    for (i, c) in raw.char_indices() {
        match c {
            '{' => depth += 1,
            '}' => depth = depth.saturating_sub(1),
            ',' if depth == 0 => {
                parts.push(&raw[start..i]);
                start = i + 1;
            }
            _ => {}
        }
    }
    parts.push(&raw[start..]);
    parts
}

/// Splits on top-level whitespace, keeping brace groups whole.
fn split_tokens(raw: &str) -> Vec<&str> {
    let mut parts = Vec::new();
    let mut depth = 0usize;
    let mut start: Option<usize> = None;
    for (i, c) in raw.char_indices() {
        match c {
            '{' => {
                depth += 1;
                start.get_or_insert(i);
            }
            '}' => depth = depth.saturating_sub(1),
            c if c.is_whitespace() && depth == 0 => {
                if let Some(s) = start.take() {
                    parts.push(&raw[s..i]);
                }
            }
            _ => {
                start.get_or_insert(i);
            }
        }
    }
    if let Some(s) = start {
        parts.push(&raw[s..]);
    }
    parts
}

fn parse_author(raw: &str) -> Option<AuthorName> {
    let raw = raw.trim();
    if raw.eq_ignore_ascii_case("others") {
        return None;
    }
    let parts = split_commas(raw);
    let (given, surname) = match parts.as_slice() {
        [last, first] => (latex_to_text(first), latex_to_text(last)),
        [last, _jr, first, ..] => (latex_to_text(first), latex_to_text(last)),
        _ => {
            let tokens = split_tokens(raw);
            match tokens.split_last() {
                Some((last, rest)) => {
                    let given: Vec<String> = rest.iter().map(|t| latex_to_text(t)).collect();
                    (given.join(" "), latex_to_text(last))
                }
                None => return None,
            }
        }
    };
    make_author(&given, &surname).ok()
}

fn source_type_for(entry: &RawEntry) -> SourceType {
    match entry.entry_type.as_str() {
        "article" => SourceType::Article,
        "book" | "inbook" | "booklet" => SourceType::Book,
        "inproceedings" | "conference" | "proceedings" | "incollection" => SourceType::Proceedings,
        "phdthesis" | "mastersthesis" | "thesis" => SourceType::Thesis,
        "techreport" | "report" => SourceType::Report,
        "unpublished" => SourceType::Unpublished,
        "misc" => match entry.field("howpublished").map(latex_to_text) {
            Some(h) if h.eq_ignore_ascii_case(PRIVATE_COMMUNICATION) => SourceType::PrivateCommunication,
            _ => SourceType::Other,
        },
        _ => SourceType::Other,
    }
}

fn text_field(entry: &RawEntry, names: &[&str]) -> Option<String> {
    names
        .iter()
        .find_map(|n| entry.field(n))
        .map(latex_to_text)
        .filter(|v| !v.is_empty())
}

fn year_of(raw: &str) -> Option<i32> {
    let digits: String = raw
        .chars()
        .skip_while(|c| !c.is_ascii_digit())
        .take_while(char::is_ascii_digit)
        .collect();
    digits.parse::<i64>().ok().and_then(checked_year)
}

/// Maps a parsed entry onto the canonical record.
pub fn entry_to_record(entry: &RawEntry) -> BibRecord {
    let authors = entry
        .field("author")
        .map(|raw| split_names(raw).iter().filter_map(|n| parse_author(n)).collect())
        .unwrap_or_default();
    let bibcode = parse_bibcode(&entry.key).ok().or_else(|| {
        entry
            .field("adsurl")
            .and_then(|url| url.split("/abs/").nth(1))
            .and_then(|rest| parse_bibcode(rest.split('/').next().unwrap_or_default()).ok())
    });
    BibRecord {
        source_type: source_type_for(entry),
        authors,
        title: text_field(entry, &["title"]).unwrap_or_default(),
        journal: text_field(entry, &["journal", "booktitle", "school", "institution"]),
        volume: text_field(entry, &["volume"]),
        number: text_field(entry, &["number", "issue"]),
        pages: text_field(entry, &["pages"]).and_then(|p| Pages::parse_range(&p)),
        year: entry.field("year").and_then(year_of),
        publisher: text_field(entry, &["publisher"]),
        doi: text_field(entry, &["doi"]).and_then(|d| parse_doi(&d).ok()),
        bibcode,
    }
}

/// Parses a document holding exactly one entry into a record.
pub fn bibtex_to_record(raw: &str) -> Result<BibRecord, BibtexError> {
    let entries = parse_entries(raw)?;
    match entries.as_slice() {
        [entry] => Ok(entry_to_record(entry)),
        _ => Err(BibtexError::Cardinality(entries.len())),
    }
}
