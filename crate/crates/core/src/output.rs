//! Raw ACL2 output to structured, importance-sorted messages.

use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::span::Span;

pub const FAILED_BANNER: &str = "******** FAILED ********";
const HEADLINE_MAX: usize = 120;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
    Success,
    Info,
}

impl Severity {
    pub fn label(self) -> &'static str {
        match self {
            Severity::Error => "error",
            Severity::Warning => "warning",
            Severity::Success => "success",
            Severity::Info => "info",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MessageKind {
    Error,
    Warning,
    Summary,
    FailureMarker,
    Other,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StructuredMessage {
    pub severity: Severity,
    pub kind: MessageKind,
    pub headline: String,
    pub detail: String,
    pub raw_range: Span,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Overall {
    Success,
    Failure,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Summary {
    pub items: Vec<StructuredMessage>,
    pub overall: Overall,
    pub raw: String,
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum RewriteError {
    #[error("line {line}: expected pattern and template separated by a tab")]
    FieldCount { line: usize },
    #[error("line {line}: {message}")]
    BadPattern { line: usize, message: String },
}

/// Ordered regex rewrites applied to headlines.
#[derive(Debug, Clone)]
pub struct RewriteTable {
    rows: Vec<(Regex, String)>,
}

impl RewriteTable {
    pub fn standard() -> &'static RewriteTable {
        static TABLE: OnceLock<RewriteTable> = OnceLock::new();
        TABLE.get_or_init(|| {
            RewriteTable::parse(include_str!("../data/rewrites.tsv")).expect("bundled rewrite table is valid")
        })
    }

    pub fn parse(text: &str) -> Result<Self, RewriteError> {
        let mut rows = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line_no = i + 1;
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let (pattern, template) = line.split_once('\t').ok_or(RewriteError::FieldCount { line: line_no })?;
            let regex =
                Regex::new(pattern).map_err(|e| RewriteError::BadPattern { line: line_no, message: e.to_string() })?;
            rows.push((regex, template.to_string()));
        }
        Ok(RewriteTable { rows })
    }

    pub fn apply(&self, sentence: &str) -> Option<String> {
        self.rows
            .iter()
            .find(|(re, _)| re.is_match(sentence))
            .map(|(re, template)| re.replace(sentence, template.as_str()).into_owned())
    }
}

fn prompt_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^[A-Z0-9-]+ [a-z]*!?>+").unwrap())
}

fn is_error_line(line: &str) -> bool {
    line.starts_with("ACL2 Error") || line.starts_with("HARD ACL2 ERROR")
}

/// True if the output carries a failure banner or an error line.
pub fn has_failure_marker(raw: &str) -> bool {
    raw.lines().any(|l| l.trim() == FAILED_BANNER || is_error_line(l))
}

/// Splits output into paragraphs. Blank lines, prompts and the failure banner
/// delimit paragraphs; a new error or warning line also starts one.
fn paragraphs(raw: &str) -> Vec<Span> {
    let mut out = Vec::new();
    let mut current: Option<Span> = None;
    let mut offset = 0;
    for piece in raw.split_inclusive('\n') {
        let line_start = offset;
        offset += piece.len();
        let mut line = piece.trim_end_matches(['\n', '\r']);
        let mut start = line_start;
        if let Some(m) = prompt_re().find(line) {
            out.extend(current.take());
            start += m.end();
            line = &line[m.end()..];
        }
        let end = start + line.len();
        if line.trim().is_empty() {
            out.extend(current.take());
        } else if line.trim() == FAILED_BANNER {
            out.extend(current.take());
            out.push(Span::new(start, end));
        } else if is_error_line(line) || line.starts_with("ACL2 Warning") {
            out.extend(current.take());
            current = Some(Span::new(start, end));
        } else {
            current = Some(match current {
                Some(span) => Span::new(span.start, end),
                None => Span::new(start, end),
            });
        }
    }
    out.extend(current);
    out
}

fn collapse(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Drops an `ACL2 Error in <context>:` style prefix.
fn strip_context(text: &str) -> &str {
    let Some(rest) = ["HARD ACL2 ERROR", "ACL2 Error", "ACL2 Warning"].iter().find_map(|p| text.strip_prefix(p)) else {
        return text;
    };
    let mut rest = rest.trim_start();
    if rest.starts_with('[') {
        if let Some(close) = rest.find(']') {
            rest = rest[close + 1..].trim_start();
        }
    }
    if let Some(after_in) = rest.strip_prefix("in ") {
        let mut depth = 0i32;
        for (i, ch) in after_in.char_indices() {
            match ch {
                '(' => depth += 1,
                ')' => depth -= 1,
                ':' if depth <= 0 => return after_in[i + 1..].trim_start(),
                _ => {}
            }
        }
        return after_in;
    }
    rest.strip_prefix(':').map_or(rest, str::trim_start)
}

fn first_sentence(text: &str) -> &str {
    let bytes = text.as_bytes();
    for (i, ch) in text.char_indices() {
        if matches!(ch, '.' | '!' | '?') && bytes.get(i + 1).is_none_or(|b| b.is_ascii_whitespace()) {
            return &text[..=i];
        }
    }
    text
}

fn truncate(text: &str) -> String {
    if text.chars().count() <= HEADLINE_MAX {
        return text.to_string();
    }
    let mut s: String = text.chars().take(HEADLINE_MAX - 3).collect();
    s.push_str("...");
    s
}

fn headline_for(body: &str, rewrites: &RewriteTable) -> String {
    let sentence = first_sentence(body).to_string();
    truncate(&rewrites.apply(&sentence).unwrap_or(sentence))
}

/// Parses one submission's output with the bundled rewrite table.
pub fn parse_output(raw: &str) -> Vec<StructuredMessage> {
    parse_output_with(raw, RewriteTable::standard())
}

pub fn parse_output_with(raw: &str, rewrites: &RewriteTable) -> Vec<StructuredMessage> {
    let failed = has_failure_marker(raw);
    paragraphs(raw)
        .into_iter()
        .map(|range| {
            let detail = range.slice(raw).to_string();
            let flat = collapse(&detail);
            let (severity, kind, headline) = if flat == FAILED_BANNER {
                (Severity::Error, MessageKind::FailureMarker, "The form failed.".to_string())
            } else if is_error_line(&flat) {
                (Severity::Error, MessageKind::Error, headline_for(strip_context(&flat), rewrites))
            } else if flat.starts_with("ACL2 Warning") {
                (Severity::Warning, MessageKind::Warning, headline_for(strip_context(&flat), rewrites))
            } else if flat.starts_with("Summary") && detail.lines().any(|l| l.starts_with("Form:")) {
                let form = detail.lines().find_map(|l| l.strip_prefix("Form:")).map(collapse).unwrap_or_default();
                let severity = if failed { Severity::Info } else { Severity::Success };
                (severity, MessageKind::Summary, truncate(&format!("Completed {form}")))
            } else {
                (Severity::Info, MessageKind::Other, headline_for(&flat, rewrites))
            };
            StructuredMessage { severity, kind, headline, detail, raw_range: range }
        })
        .collect()
}

/// Stable severity sort; overall failure iff a failure marker is present.
pub fn summarize(messages: Vec<StructuredMessage>, raw: &str) -> Summary {
    let mut items = messages;
    items.sort_by_key(|m| m.severity);
    Summary {
        items,
        overall: if has_failure_marker(raw) { Overall::Failure } else { Overall::Success },
        raw: raw.to_string(),
    }
}

pub fn summarize_raw(raw: &str) -> Summary {
    summarize(parse_output(raw), raw)
}
