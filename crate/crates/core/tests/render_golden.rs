//! Rendering corpus checked against golden files.
//!
//! Set `REFS_BLESS=1` to rewrite the golden files after an intended change.

use std::fs;
use std::path::PathBuf;

use refs_core::render::{render_html, render_text};
use refs_core::RefEntry;

fn root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests")
}

fn corpus() -> Vec<RefEntry> {
    let text = fs::read_to_string(root().join("data/corpus.json")).unwrap();
    let raw: Vec<RefEntry> = serde_json::from_str(&text).unwrap();
    raw.into_iter()
        .map(|e| RefEntry::new(e.global_id.unwrap(), e.records, e.note).unwrap())
        .collect()
}

fn escape_html(s: &str) -> String {
    let mut out = String::new();
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&#x27;"),
            c => out.push(c),
        }
    }
    out
}

/// Expected fragments of a one-record HTML line, in display order.
fn expected_fragments(entry: &RefEntry) -> Vec<String> {
    let r = &entry.records[0];
    let mut out = Vec::new();
    if let Some(note) = &entry.note {
        out.push(escape_html(note));
    }
    for author in &r.authors {
        out.push(escape_html(&author.formatted()));
    }
    if !r.title.is_empty() {
        out.push(format!("&quot;{}&quot;", escape_html(&r.title)));
    }
    if let Some(j) = &r.journal {
        out.push(format!("<i>{}</i>", escape_html(j)));
    }
    if let Some(v) = &r.volume {
        out.push(format!("<b>{}</b>", escape_html(v)));
    }
    if let Some(p) = &r.pages {
        out.push(match &p.last {
            Some(last) => format!("{}-{}", p.first, last),
            None => p.first.clone(),
        });
    }
    out.push(match r.year {
        Some(y) => format!("({y})."),
        None => "(n.d.).".to_string(),
    });
    if let Some(doi) = &r.doi {
        out.push(format!("<a href=\"https://doi.org/{}\">[link]</a>", escape_html(doi.as_str())));
    }
    if let Some(b) = &r.bibcode {
        out.push(format!("<a href=\"https://ui.adsabs.harvard.edu/abs/{b}/abstract\">[ADS]</a>"));
    }
    out
}

#[test]
fn corpus_has_twenty_records() {
    assert_eq!(corpus().len(), 20);
}

#[test]
fn fields_appear_in_order() {
    for entry in corpus() {
        let body = render_html(&entry).unwrap().body;
        let mut cursor = body.find("</span>").expect("label span") + "</span>".len();
        for fragment in expected_fragments(&entry) {
            let at = body[cursor..]
                .find(&fragment)
                .unwrap_or_else(|| panic!("{fragment:?} not found in order in {body}"));
            cursor += at + fragment.len();
        }
        assert_eq!(&body[cursor..], "</p>", "{body}");
    }
}

#[test]
fn html_matches_golden_files() {
    let bless = std::env::var_os("REFS_BLESS").is_some();
    for entry in corpus() {
        let id = entry.global_id.unwrap();
        let body = render_html(&entry).unwrap().body + "\n";
        let path = root().join(format!("golden/{id}.html"));
        if bless {
            fs::write(&path, &body).unwrap();
        }
        let golden = fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        assert_eq!(body, golden, "{}", path.display());
    }
}

#[test]
fn text_matches_golden_files() {
    let bless = std::env::var_os("REFS_BLESS").is_some();
    for entry in corpus() {
        let id = entry.global_id.unwrap();
        let body = render_text(&entry).unwrap().body + "\n";
        let path = root().join(format!("golden/{id}.txt"));
        if bless {
            fs::write(&path, &body).unwrap();
        }
        assert_eq!(body, fs::read_to_string(&path).unwrap(), "{}", path.display());
    }
}
