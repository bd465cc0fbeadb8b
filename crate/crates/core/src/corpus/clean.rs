//! Markup removal and whitespace normalization for scraped lyric pages.

use super::rules::CleaningRuleSet;
use super::Document;

/// Tags whose occurrence marks a line break in rendered HTML.
const BREAKING_TAGS: &[&str] = &[
    "br",
    "p",
    "div",
    "li",
    "ul",
    "ol",
    "tr",
    "table",
    "h1",
    "h2",
    "h3",
    "h4",
    "h5",
    "h6",
    "dd",
    "dt",
    "blockquote",
    "pre",
    "hr",
];

/// Elements whose whole content is dropped, not just the tags.
const OPAQUE_ELEMENTS: &[&str] = &["script", "style", "noscript", "template"];

pub fn clean_document(doc: &Document, rules: &CleaningRuleSet) -> Document {
    let mut out = doc.clone();
    out.clean_text = Some(clean_text(&doc.raw_text, rules));
    out
}

/// Runs the cleaning pass until the output stops changing, which makes the
/// result a fixed point (`clean_text(clean_text(x)) == clean_text(x)`).
///
/// Every pass either leaves the text untouched or shortens it, so the loop
/// terminates.
pub fn clean_text(raw: &str, rules: &CleaningRuleSet) -> String {
    let mut current = clean_pass(raw, rules);
    loop {
        let next = clean_pass(&current, rules);
        if next == current {
            return current;
        }
        current = next;
    }
}

fn clean_pass(raw: &str, rules: &CleaningRuleSet) -> String {
    let text = normalize_line_endings(raw);
    let text = decode_entities(&strip_tags(&text));

    let mut lines: Vec<String> = Vec::new();
    for line in text.split('\n') {
        let trimmed = line.trim();
        if rules.drops(trimmed) {
            continue;
        }
        let stripped = rules.remove_symbols(trimmed);
        let stripped = stripped.trim();
        if !stripped.is_empty() && rules.drops(stripped) {
            continue;
        }
        lines.push(stripped.to_string());
    }
    let joined = lines.join("\n");
    compress_newlines(joined.trim_matches('\n'), rules.max_consecutive_newlines())
}

/// Collapses every run of more than `max` consecutive `\n` into exactly `max`.
/// A `max` of zero is treated as one.
pub fn compress_newlines(text: &str, max: usize) -> String {
    let max = max.max(1);
    let mut out = String::with_capacity(text.len());
    let mut run = 0usize;
    for ch in text.chars() {
        if ch == '\n' {
            run += 1;
            if run <= max {
                out.push(ch);
            }
        } else {
            run = 0;
            out.push(ch);
        }
    }
    out
}

pub(crate) fn normalize_line_endings(text: &str) -> String {
    if !text.contains('\r') {
        return text.to_string();
    }
    text.replace("\r\n", "\n").replace('\r', "\n")
}

/// Tolerant tag stripper. A `<` only opens a tag when followed by a letter,
/// `/`, `!` or `?` and closed by `>` before any other `<`; anything else is
/// kept as text.
pub fn strip_tags(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut rest = text;
    while let Some(lt) = rest.find('<') {
        out.push_str(&rest[..lt]);
        let after = &rest[lt..];

        if let Some(body) = after.strip_prefix("<!--") {
            rest = match body.find("-->") {
                Some(end) => &body[end + 3..],
                None => "",
            };
            continue;
        }

        match parse_tag(after) {
            Some((len, name, closing)) => {
                let lname = name.to_ascii_lowercase();
                rest = &after[len..];
                if !closing && OPAQUE_ELEMENTS.contains(&lname.as_str()) {
                    rest = skip_until_close(rest, &lname);
                } else if BREAKING_TAGS.contains(&lname.as_str()) {
                    out.push('\n');
                }
            }
            None => {
                out.push('<');
                rest = &after[1..];
            }
        }
    }
    out.push_str(rest);
    out
}

/// Returns (byte length, tag name, is-closing) for a tag at the start of `s`.
fn parse_tag(s: &str) -> Option<(usize, &str, bool)> {
    let inner_start = 1;
    let next = s[inner_start..].chars().next()?;
    if !(next.is_ascii_alphabetic() || matches!(next, '/' | '!' | '?')) {
        return None;
    }
    let close = s.find('>')?;
    if s[1..close].contains('<') {
        return None;
    }
    let inner = &s[1..close];
    let closing = inner.starts_with('/');
    let name_part = inner.trim_start_matches(['/', '!', '?']);
    let name_end = name_part
        .find(|c: char| !(c.is_ascii_alphanumeric() || c == '-' || c == ':'))
        .unwrap_or(name_part.len());
    Some((close + 1, &name_part[..name_end], closing))
}

fn skip_until_close<'a>(s: &'a str, name: &str) -> &'a str {
    let lower = s.to_ascii_lowercase();
    let needle = format!("</{name}");
    match lower.find(&needle) {
        Some(pos) => match s[pos..].find('>') {
            Some(gt) => &s[pos + gt + 1..],
            None => "",
        },
        None => "",
    }
}

fn named_entity(name: &str) -> Option<&'static str> {
    Some(match name {
        "amp" => "&",
        "lt" => "<",
        "gt" => ">",
        "quot" => "\"",
        "apos" => "'",
        "nbsp" => " ",
        "ensp" | "emsp" | "thinsp" => " ",
        "ldquo" => "\u{201C}",
        "rdquo" => "\u{201D}",
        "lsquo" => "\u{2018}",
        "rsquo" => "\u{2019}",
        "hellip" => "\u{2026}",
        "mdash" => "\u{2014}",
        "ndash" => "\u{2013}",
        "middot" => "\u{00B7}",
        "copy" => "\u{00A9}",
        "reg" => "\u{00AE}",
        "trade" => "\u{2122}",
        _ => return None,
    })
}

/// Decodes named and numeric character references. Unknown or malformed
/// references are left as they are.
pub fn decode_entities(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut rest = text;
    while let Some(amp) = rest.find('&') {
        out.push_str(&rest[..amp]);
        let after = &rest[amp + 1..];
        let semi = after
            .char_indices()
            .take(12)
            .find(|&(_, c)| c == ';')
            .map(|(i, _)| i);
        let decoded = semi.and_then(|semi| {
            let body = &after[..semi];
            let value = if let Some(num) = body.strip_prefix('#') {
                let code = match num.strip_prefix(['x', 'X']) {
                    Some(hex) => u32::from_str_radix(hex, 16).ok(),
                    None => num.parse::<u32>().ok(),
                }?;
                let ch = char::from_u32(code)
                    .filter(|&c| c != '\0')
                    .unwrap_or('\u{FFFD}');
                ch.to_string()
            } else {
                named_entity(body)?.to_string()
            };
            Some((value, semi))
        });
        match decoded {
            Some((value, semi)) => {
                out.push_str(&value);
                rest = &after[semi + 1..];
            }
            None => {
                out.push('&');
                rest = after;
            }
        }
    }
    out.push_str(rest);
    out
}
