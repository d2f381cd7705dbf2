//! Text helpers shared by scoring, scripted policies, and the forge.

use std::sync::LazyLock;

use regex::Regex;

static PUNCT: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\p{P}").unwrap());
static YEAR: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\b\d{4}\b").unwrap());

/// Canonical form used for exact-match and containment checks: lowercase,
/// punctuation removed (not replaced), standalone articles dropped,
/// whitespace collapsed to single spaces.
pub fn normalize_answer(text: &str) -> String {
    let lowered = text.to_lowercase();
    let stripped = PUNCT.replace_all(&lowered, "");
    let mut out = String::with_capacity(stripped.len());
    for token in stripped.split_whitespace() {
        if matches!(token, "a" | "an" | "the") {
            continue;
        }
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(token);
    }
    out
}

/// True when `needle` occurs inside `haystack` after both are normalized.
/// An empty normalized needle never matches.
pub fn contains_normalized(haystack: &str, needle: &str) -> bool {
    let n = normalize_answer(needle);
    if n.is_empty() {
        return false;
    }
    normalize_answer(haystack).contains(&n)
}

/// Runs of two or more capitalized words, in order of appearance. A word
/// counts as capitalized when it starts uppercase and continues lowercase;
/// trailing sentence punctuation ends the run it belongs to.
pub fn capitalized_spans(text: &str) -> Vec<String> {
    let mut spans = Vec::new();
    let mut run: Vec<&str> = Vec::new();
    for word in text.split_whitespace() {
        let core = word.trim_end_matches(['.', ',', ';', ':', '!', '?', ')', '"']);
        let core = core.trim_start_matches(['(', '"']);
        if is_capitalized(core) {
            run.push(core);
            if core.len() != word.trim_start_matches(['(', '"']).len() {
                flush_run(&mut run, &mut spans);
            }
        } else {
            flush_run(&mut run, &mut spans);
        }
    }
    flush_run(&mut run, &mut spans);
    spans
}

fn flush_run(run: &mut Vec<&str>, spans: &mut Vec<String>) {
    if run.len() >= 2 {
        spans.push(run.join(" "));
    }
    run.clear();
}

fn is_capitalized(word: &str) -> bool {
    let mut chars = word.chars();
    match chars.next() {
        Some(first) if first.is_uppercase() => chars.all(|c| c.is_lowercase()),
        _ => false,
    }
}

/// All distinct four-digit tokens, in order of first appearance.
pub fn find_years(text: &str) -> Vec<String> {
    let mut seen = Vec::new();
    for m in YEAR.find_iter(text) {
        if !seen.iter().any(|s| s == m.as_str()) {
            seen.push(m.as_str().to_string());
        }
    }
    seen
}
