//! A small Lean 4 source scanner.
//!
//! It knows just enough of the surface syntax to tell comments, string
//! literals, character literals and identifiers apart. Everything else is
//! passed through as opaque bytes.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LexError {
    #[error("unterminated block comment opened at byte {offset}")]
    UnterminatedBlockComment { offset: usize },
}

/// Lexical class of a span of source text.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpanKind {
    LineComment,
    BlockComment,
    StringLiteral,
    CharLiteral,
    Identifier,
    Other,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Span {
    pub kind: SpanKind,
    pub start: usize,
    pub end: usize,
}

pub(crate) fn is_ident_start(c: char) -> bool {
    c == '_' || (c.is_alphabetic() && !is_reserved_letter(c))
}

pub(crate) fn is_ident_continue(c: char) -> bool {
    c == '_' || c == '\'' || (c.is_alphanumeric() && !is_reserved_letter(c))
}

// Greek letters Lean reserves for binders and type formers.
fn is_reserved_letter(c: char) -> bool {
    matches!(c, 'λ' | 'Π' | 'Σ')
}

/// Splits `src` into a sequence of spans covering every byte exactly once.
///
/// Adjacent non-identifier, non-literal bytes are merged into `Other` spans.
pub fn scan(src: &str) -> Result<Vec<Span>, LexError> {
    let bytes = src.as_bytes();
    let mut spans: Vec<Span> = Vec::new();
    let mut pos = 0;
    let push = |spans: &mut Vec<Span>, kind: SpanKind, start: usize, end: usize| {
        if start == end {
            return;
        }
        if kind == SpanKind::Other {
            if let Some(last) = spans.last_mut() {
                if last.kind == SpanKind::Other && last.end == start {
                    last.end = end;
                    return;
                }
            }
        }
        spans.push(Span { kind, start, end });
    };

    while pos < bytes.len() {
        let rest = &src[pos..];
        let c = rest.chars().next().expect("non-empty remainder");

        if rest.starts_with("--") {
            let end = rest.find('\n').map_or(bytes.len(), |i| pos + i);
            push(&mut spans, SpanKind::LineComment, pos, end);
            pos = end;
        } else if rest.starts_with("/-") {
            let end = block_comment_end(src, pos)?;
            push(&mut spans, SpanKind::BlockComment, pos, end);
            pos = end;
        } else if c == '"' {
            let end = string_end(src, pos + 1);
            push(&mut spans, SpanKind::StringLiteral, pos, end);
            pos = end;
        } else if c == 'r' && raw_string_hashes(rest).is_some() {
            let hashes = raw_string_hashes(rest).unwrap();
            let body = pos + 1 + hashes + 1;
            let close = format!("\"{}", "#".repeat(hashes));
            let end = src[body..].find(&close).map_or(bytes.len(), |i| body + i + close.len());
            push(&mut spans, SpanKind::StringLiteral, pos, end);
            pos = end;
        } else if c == '\'' && !prev_is_ident(src, pos) {
            match char_literal_end(src, pos) {
                Some(end) => {
                    push(&mut spans, SpanKind::CharLiteral, pos, end);
                    pos = end;
                }
                None => {
                    push(&mut spans, SpanKind::Other, pos, pos + 1);
                    pos += 1;
                }
            }
        } else if is_ident_start(c) {
            let end = identifier_end(src, pos);
            push(&mut spans, SpanKind::Identifier, pos, end);
            pos = end;
        } else {
            let end = pos + c.len_utf8();
            push(&mut spans, SpanKind::Other, pos, end);
            pos = end;
        }
    }
    Ok(spans)
}

fn prev_is_ident(src: &str, pos: usize) -> bool {
    src[..pos].chars().next_back().is_some_and(is_ident_continue)
}

// Returns the number of `#` in a raw-string opener `r#*"`, if `rest` starts with one.
fn raw_string_hashes(rest: &str) -> Option<usize> {
    let after = &rest[1..];
    let hashes = after.bytes().take_while(|&b| b == b'#').count();
    (after.as_bytes().get(hashes) == Some(&b'"')).then_some(hashes)
}

fn block_comment_end(src: &str, open: usize) -> Result<usize, LexError> {
    let bytes = src.as_bytes();
    let mut depth = 0usize;
    let mut i = open;
    while i + 1 < bytes.len() {
        match (bytes[i], bytes[i + 1]) {
            (b'/', b'-') => {
                depth += 1;
                i += 2;
            }
            (b'-', b'/') => {
                depth -= 1;
                i += 2;
                if depth == 0 {
                    return Ok(i);
                }
            }
            _ => i += 1,
        }
    }
    Err(LexError::UnterminatedBlockComment { offset: open })
}

// `start` points just past the opening quote. An unterminated literal runs to end of input.
fn string_end(src: &str, start: usize) -> usize {
    let bytes = src.as_bytes();
    let mut i = start;
    while i < bytes.len() {
        match bytes[i] {
            b'\\' => i += 2,
            b'"' => return i + 1,
            _ => i += 1,
        }
    }
    bytes.len()
}

fn char_literal_end(src: &str, open: usize) -> Option<usize> {
    let rest = &src[open + 1..];
    let mut chars = rest.char_indices();
    let (_, first) = chars.next()?;
    let body_len = if first == '\\' {
        let (_, esc) = chars.next()?;
        let mut len = 1 + esc.len_utf8();
        if esc == 'x' || esc == 'u' {
            // \xHH or \u{...}: consume up to the closing quote
            let tail = &rest[len..];
            len += tail.find('\'')?;
        }
        len
    } else if first == '\'' || first == '\n' {
        return None;
    } else {
        first.len_utf8()
    };
    (rest.as_bytes().get(body_len) == Some(&b'\'')).then_some(open + 1 + body_len + 1)
}

/// Dotted identifier: segments start with an identifier-start character.
fn identifier_end(src: &str, start: usize) -> usize {
    let mut end = start;
    loop {
        let seg = &src[end..];
        let mut it = seg.char_indices();
        // first char is guaranteed ident-start by the caller or the dot check below
        let mut seg_end = end + it.next().map_or(0, |(_, c)| c.len_utf8());
        for (i, c) in it {
            if is_ident_continue(c) {
                seg_end = end + i + c.len_utf8();
            } else {
                break;
            }
        }
        end = seg_end;
        let mut after = src[end..].chars();
        match (after.next(), after.next()) {
            (Some('.'), Some(c)) if is_ident_start(c) => end += 1,
            _ => return end,
        }
    }
}

/// Removes line and (nested) block comments, keeping every other byte,
/// including string-literal contents, verbatim.
pub fn strip_comments(src: &str) -> Result<String, LexError> {
    let spans = scan(src)?;
    let mut out = String::with_capacity(src.len());
    let mut dropped_block = false;
    for span in spans {
        match span.kind {
            SpanKind::LineComment => {}
            SpanKind::BlockComment => dropped_block = true,
            _ => {
                let text = &src[span.start..span.end];
                if dropped_block && joins_into_new_token(&out, text) {
                    out.push(' ');
                }
                dropped_block = false;
                out.push_str(text);
            }
        }
    }
    Ok(out)
}

// Removing `/-…-/` from `a-/-x-/-b` would otherwise produce `a--b`.
fn joins_into_new_token(before: &str, after: &str) -> bool {
    let (Some(l), Some(r)) = (before.chars().next_back(), after.chars().next()) else {
        return false;
    };
    matches!((l, r), ('-', '-') | ('/', '-') | ('r', '"') | ('r', '#'))
        || (is_ident_continue(l) && is_ident_continue(r))
        || (l == '.' && is_ident_start(r))
}

/// Identifier tokens of comment-free code, in source order.
pub fn identifiers(src: &str) -> Result<Vec<&str>, LexError> {
    Ok(scan(src)?
        .into_iter()
        .filter(|s| s.kind == SpanKind::Identifier)
        .map(|s| &src[s.start..s.end])
        .collect())
}

/// Identifier tokens extended by any directly following `!` / `?`
/// characters, so that `simp?` and `by_contra!` come out whole.
pub fn tactic_words(src: &str) -> Result<Vec<&str>, LexError> {
    let bytes = src.as_bytes();
    Ok(scan(src)?
        .into_iter()
        .filter(|s| s.kind == SpanKind::Identifier)
        .map(|s| {
            let mut end = s.end;
            while end < bytes.len() && matches!(bytes[end], b'!' | b'?') {
                end += 1;
            }
            &src[s.start..end]
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_comment_keeps_newline() {
        assert_eq!(strip_comments("exact rfl -- done").unwrap(), "exact rfl ");
        assert_eq!(strip_comments("a -- x\nb").unwrap(), "a \nb");
    }

    #[test]
    fn nested_block_comment() {
        let src = "/- a /- nested -/ b -/theorem t : True := trivial";
        assert_eq!(strip_comments(src).unwrap(), "theorem t : True := trivial");
    }

    #[test]
    fn doc_comments_are_block_comments() {
        let src = "/-- doc -/\n/-! module doc -/\ntheorem t := rfl";
        assert_eq!(strip_comments(src).unwrap(), "\n\ntheorem t := rfl");
    }

    #[test]
    fn strings_are_preserved() {
        let src = "example := \"--not a comment\"";
        assert_eq!(strip_comments(src).unwrap(), src);
        let src = "example := \"esc \\\" /- still string\" -- gone";
        assert_eq!(strip_comments(src).unwrap(), "example := \"esc \\\" /- still string\" ");
        let src = "example := r#\"raw \" -- kept\"# ";
        assert_eq!(strip_comments(src).unwrap(), src);
    }

    #[test]
    fn char_literal_quote_does_not_open_string() {
        let src = "def q := '\"' -- c";
        assert_eq!(strip_comments(src).unwrap(), "def q := '\"' ");
    }

    #[test]
    fn primes_stay_in_identifiers() {
        assert_eq!(identifiers("h' h'' x₁ Nat.add_comm'").unwrap(), vec!["h'", "h''", "x₁", "Nat.add_comm'"]);
    }

    #[test]
    fn unterminated_block_reports_offset() {
        let err = strip_comments("ok /- open /- inner -/").unwrap_err();
        assert_eq!(err, LexError::UnterminatedBlockComment { offset: 3 });
    }

    #[test]
    fn removal_never_creates_a_comment() {
        let once = strip_comments("a-/-x-/-b").unwrap();
        assert_eq!(once, "a- -b");
        assert_eq!(strip_comments(&once).unwrap(), once);
        assert_eq!(strip_comments("foo/-x-/bar").unwrap(), "foo bar");
    }

    #[test]
    fn dotted_projection_is_split() {
        assert_eq!(identifiers("h.1 h.left").unwrap(), vec!["h", "h.left"]);
    }

    #[test]
    fn tactic_words_keep_bang_and_query() {
        assert_eq!(tactic_words("by_contra! h; simp? at h").unwrap(), vec!["by_contra!", "h", "simp?", "at", "h"]);
    }
}
