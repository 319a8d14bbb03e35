//! REPL semantics: expressions are evaluated by the backend, events are moved
//! into the definitions area at the proof line without being submitted.

use serde::{Deserialize, Serialize};

use crate::backend::{BackendHandle, Outcome};
use crate::lex::BuiltinTable;
use crate::output::{self, Summary};
use crate::session::{Session, SessionError};
use crate::sexp::{self, FormKind, TopLevelForm};
use crate::span::Span;

pub const PROMPT: &str = "pp> ";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ReplError {
    #[error("incomplete form")]
    IncompleteForm,
    #[error("{0}")]
    Session(String, &'static str),
}

impl ReplError {
    pub fn code(&self) -> &'static str {
        match self {
            ReplError::IncompleteForm => "incomplete-form",
            ReplError::Session(_, code) => code,
        }
    }
}

impl From<SessionError> for ReplError {
    fn from(e: SessionError) -> Self {
        ReplError::Session(e.to_string(), e.code())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ReplResult {
    /// The event now lives in the definitions area at `span`.
    Moved { span: Span },
    Evaluated {
        summary: Summary,
        outcome: Option<Outcome>,
        /// Set when the backend could not run the form at all.
        error: Option<String>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplEntry {
    pub input: String,
    pub result: ReplResult,
}

pub fn classify_input(form: &TopLevelForm) -> Result<FormKind, ReplError> {
    if form.complete {
        Ok(form.kind)
    } else {
        Err(ReplError::IncompleteForm)
    }
}

/// Routes one form from the REPL.
pub fn route(
    form: &TopLevelForm,
    text: &str,
    session: &mut Session,
    backend: &mut BackendHandle,
) -> Result<ReplResult, ReplError> {
    match classify_input(form)? {
        FormKind::Event => Ok(ReplResult::Moved { span: session.insert_at_proof_line(text)? }),
        FormKind::Expression => Ok(match backend.submit(text) {
            Ok(sub) => ReplResult::Evaluated {
                summary: output::summarize_raw(&sub.result),
                outcome: Some(sub.outcome),
                error: None,
            },
            Err(e) => {
                ReplResult::Evaluated { summary: output::summarize_raw(""), outcome: None, error: Some(e.to_string()) }
            }
        }),
    }
}

/// Append-only REPL history.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Repl {
    history: Vec<ReplEntry>,
}

impl Repl {
    pub fn new() -> Repl {
        Repl::default()
    }

    pub fn history(&self) -> &[ReplEntry] {
        &self.history
    }

    /// Appends an entry produced by calling `route` directly.
    pub fn record(&mut self, entry: ReplEntry) {
        self.history.push(entry);
    }

    /// Routes every form in `input`, left to right. A classification error
    /// stops the rest of the input and is returned after the routed results.
    pub fn submit(
        &mut self,
        input: &str,
        session: &mut Session,
        backend: &mut BackendHandle,
    ) -> (Vec<ReplEntry>, Option<ReplError>) {
        let mut done = Vec::new();
        for form in sexp::parse_source(input) {
            let text = form.text(input).to_string();
            match route(&form, &text, session, backend) {
                Ok(result) => {
                    let entry = ReplEntry { input: text, result };
                    self.history.push(entry.clone());
                    done.push(entry);
                }
                Err(e) => return (done, Some(e)),
            }
        }
        (done, None)
    }

    pub fn render(&self) -> String {
        render_history(&self.history)
    }
}

/// Text rendering of a history: the input after the prompt, then either the
/// moved notice or the summary headlines followed by the printed value.
pub fn render_history(entries: &[ReplEntry]) -> String {
    let mut out = String::new();
    for entry in entries {
        out.push_str(PROMPT);
        out.push_str(&entry.input);
        out.push('\n');
        out.push_str(&render_result(&entry.result));
    }
    out
}

pub fn render_result(result: &ReplResult) -> String {
    match result {
        ReplResult::Moved { .. } => "moved to the definitions area\n".into(),
        ReplResult::Evaluated { error: Some(e), .. } => format!("error: {e}\n"),
        ReplResult::Evaluated { summary, .. } => {
            let mut out = String::new();
            for item in &summary.items {
                if item.severity <= output::Severity::Warning {
                    out.push_str(&format!("{}: {}\n", item.severity.label(), item.headline));
                }
            }
            if !summary.items.iter().any(|m| m.severity == output::Severity::Error) {
                let value = value_text(&summary.raw);
                if !value.is_empty() {
                    out.push_str(value);
                    out.push('\n');
                }
            }
            out
        }
    }
}

/// Raw output without the trailing prompt.
pub fn value_text(raw: &str) -> &str {
    let trimmed = raw.trim_end();
    match trimmed.rfind('\n') {
        Some(i) if trimmed[i + 1..].starts_with("ACL2") && trimmed.ends_with('>') => trimmed[..i].trim_end(),
        None if trimmed.starts_with("ACL2") && trimmed.ends_with('>') => "",
        _ => trimmed,
    }
}

/// True if any form in `input` is an event, by the standard table.
pub fn contains_event(input: &str) -> bool {
    let table = BuiltinTable::standard();
    sexp::parse_source(input).iter().any(|f| sexp::kind_of_head(&f.head, table) == FormKind::Event)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn classification() {
        let forms = sexp::parse_source("(defun g (x) x) (+ 1 2) (defthm th (equal x x)) (car");
        let kinds: Vec<_> = forms.iter().map(|f| classify_input(f).ok()).collect();
        assert_eq!(kinds, vec![Some(FormKind::Event), Some(FormKind::Expression), Some(FormKind::Event), None]);
    }

    #[test]
    fn events_move_expressions_evaluate() {
        let mut b = BackendHandle::fake();
        let mut s = Session::new("");
        let mut r = Repl::new();
        let (entries, err) = r.submit("(defun g (x) x)", &mut s, &mut b);
        assert!(err.is_none());
        assert!(matches!(entries[0].result, ReplResult::Moved { .. }));
        assert!(b.probe().unwrap().submissions().is_empty());
        assert_eq!(s.source(), "(defun g (x) x)\n");

        let (entries, _) = r.submit("(+ 1 2)", &mut s, &mut b);
        let ReplResult::Evaluated { summary, .. } = &entries[0].result else { panic!() };
        assert!(summary.raw.contains('3'));
        assert_eq!(render_result(&entries[0].result), "3\n");

        let (entries, _) = r.submit("(undefined-fn 1)", &mut s, &mut b);
        let ReplResult::Evaluated { summary, .. } = &entries[0].result else { panic!() };
        assert_eq!(summary.items[0].severity, output::Severity::Error);
        assert_eq!(r.history().len(), 3);
        assert_eq!(r.render(), render_history(r.history()));
    }

    #[test]
    fn incomplete_input_stops() {
        let mut b = BackendHandle::fake();
        let mut s = Session::new("");
        let (entries, err) = Repl::new().submit("(+ 1 1) (car", &mut s, &mut b);
        assert_eq!(entries.len(), 1);
        assert_eq!(err, Some(ReplError::IncompleteForm));
    }
}
