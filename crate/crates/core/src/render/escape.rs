/// Replaces `& < " ' >` with `&amp; &lt; &quot; &#x27; &gt;`.
///
/// Every other character passes through unchanged. The ampersand is
/// handled in the same single pass as the rest, so entities produced here
/// are never re-encoded.
pub fn escape_html(raw: &str) -> String {
    let mut out = String::with_capacity(raw.len());
    for c in raw.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&#x27;"),
            '>' => out.push_str("&gt;"),
            c => out.push(c),
        }
    }
    out
}

/// Characters with a special meaning inside a BibTeX value.
const BIBTEX_SPECIALS: &[char] = &['{', '}', '%', '&', '$', '#', '_'];

/// Escapes `\ { } % & $ # _` for use inside a brace-delimited BibTeX value.
pub fn escape_bibtex(raw: &str) -> String {
    let mut out = String::with_capacity(raw.len());
    for c in raw.chars() {
        if c == '\\' {
            out.push_str("\\textbackslash{}");
        } else if BIBTEX_SPECIALS.contains(&c) {
            out.push('\\');
            out.push(c);
        } else {
            out.push(c);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn entity_table() {
        assert_eq!(escape_html("&"), "&amp;");
        assert_eq!(escape_html("<"), "&lt;");
        assert_eq!(escape_html("\""), "&quot;");
        assert_eq!(escape_html("'"), "&#x27;");
        assert_eq!(escape_html(">"), "&gt;");
        assert_eq!(escape_html("a<b>'c'\"d\""), "a&lt;b&gt;&#x27;c&#x27;&quot;d&quot;");
        assert_eq!(escape_html(""), "");
        assert_eq!(escape_html("&amp;"), "&amp;amp;");
        assert_eq!(escape_html("μm / Å"), "μm / Å");
    }

    #[test]
    fn bibtex_escapes() {
        assert_eq!(escape_bibtex("50% & rising"), "50\\% \\& rising");
        assert_eq!(escape_bibtex("a_b#c$d{e}"), "a\\_b\\#c\\$d\\{e\\}");
        assert_eq!(escape_bibtex("x\\y"), "x\\textbackslash{}y");
    }

    proptest! {
        #[test]
        fn no_raw_specials_survive(s in ".*") {
            let escaped = escape_html(&s);
            for c in ['<', '>', '"', '\''] {
                prop_assert!(!escaped.contains(c));
            }
            // every remaining '&' starts one of the five entities
            for (i, _) in escaped.match_indices('&') {
                let rest = &escaped[i..];
                prop_assert!(["&amp;", "&lt;", "&quot;", "&#x27;", "&gt;"].iter().any(|e| rest.starts_with(e)));
            }
        }

        #[test]
        fn injective_on_ascii(a in "[\\x00-\\x7f]{0,12}", b in "[\\x00-\\x7f]{0,12}") {
            prop_assume!(a != b);
            prop_assert_ne!(escape_html(&a), escape_html(&b));
        }
    }
}
