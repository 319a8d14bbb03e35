//! One controller per open document. Every request is handled to completion
//! before the next is read, so all session mutation is serialized here.

use std::collections::{BTreeMap, HashSet};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use proofpad_core::backend::{BackendConfig, BackendError, BackendHandle};
use proofpad_core::docmodel::{Access, DocError, Document, Origin};
use proofpad_core::lex::BuiltinTable;
use proofpad_core::repl::{self, Repl, ReplEntry, ReplResult};
use proofpad_core::session::{Plan, Session, SessionConfig, SessionError};
use proofpad_core::sexp::{self, FormKind};
use proofpad_core::{doublecheck, indent, lint, output, Span};
use serde_json::{json, Value};

use crate::protocol::{decode, ErrorBody, Event, Request, ServerMessage, Snapshot, SummaryView};

pub const DEFAULT_TRIALS: usize = 100;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BackendChoice {
    Fake,
    Process(BackendConfig),
}

impl BackendChoice {
    pub fn start(&self) -> Result<BackendHandle, BackendError> {
        match self {
            BackendChoice::Fake => Ok(BackendHandle::fake()),
            BackendChoice::Process(config) => BackendHandle::start(config.clone()),
        }
    }
}

/// Paths currently held by a controller, shared across connections.
#[derive(Debug, Clone, Default)]
pub struct Registry(Arc<Mutex<HashSet<PathBuf>>>);

impl Registry {
    fn claim(&self, path: &Path) -> bool {
        self.0.lock().expect("registry lock").insert(path.to_path_buf())
    }

    fn release(&self, path: &Path) {
        self.0.lock().expect("registry lock").remove(path);
    }
}

struct Open {
    path: Option<PathBuf>,
    doc: Document,
    session: Session,
    backend: BackendHandle,
    repl: Repl,
}

pub struct Controller {
    choice: BackendChoice,
    config: SessionConfig,
    registry: Registry,
    open: Option<Open>,
    raws: BTreeMap<u64, String>,
    next_summary: u64,
}

type Sink<'a> = &'a mut dyn FnMut(ServerMessage);

fn doc_err(e: DocError) -> ErrorBody {
    ErrorBody::new(e.code(), e.to_string())
}

fn session_err(e: SessionError) -> ErrorBody {
    ErrorBody::new(e.code(), e.to_string())
}

fn backend_err(e: BackendError) -> ErrorBody {
    ErrorBody::new(e.code(), e.to_string())
}

fn emit(sink: Sink<'_>, event: Event) {
    sink(ServerMessage::Event { event });
}

/// Smallest span of `old` that, replaced by the returned slice of `new`,
/// turns `old` into `new`.
fn diff_span<'a>(old: &str, new: &'a str) -> (Span, &'a str) {
    let mut prefix = old.bytes().zip(new.bytes()).take_while(|(a, b)| a == b).count();
    while !old.is_char_boundary(prefix) || !new.is_char_boundary(prefix) {
        prefix -= 1;
    }
    let max_suffix = old.len().min(new.len()) - prefix;
    let mut suffix = old.bytes().rev().zip(new.bytes().rev()).take(max_suffix).take_while(|(a, b)| a == b).count();
    while !old.is_char_boundary(old.len() - suffix) || !new.is_char_boundary(new.len() - suffix) {
        suffix -= 1;
    }
    (Span::new(prefix, old.len() - suffix), &new[prefix..new.len() - suffix])
}

impl Controller {
    pub fn new(choice: BackendChoice, config: SessionConfig, registry: Registry) -> Controller {
        Controller { choice, config, registry, open: None, raws: BTreeMap::new(), next_summary: 1 }
    }

    pub fn snapshot(&self) -> Snapshot {
        match &self.open {
            Some(o) => Snapshot::of(o.path.as_ref().map(|p| p.display().to_string()), &o.doc, &o.session),
            None => Snapshot::empty(),
        }
    }

    pub fn session(&self) -> Option<&Session> {
        self.open.as_ref().map(|o| &o.session)
    }

    pub fn backend(&self) -> Option<&BackendHandle> {
        self.open.as_ref().map(|o| &o.backend)
    }

    /// Handles one frame; the reply is always the last message sent.
    pub fn handle(&mut self, frame: &str, sink: Sink<'_>) {
        let (id, request) = decode(frame);
        let reply = match request {
            Ok(req) => match self.dispatch(req, sink) {
                Ok(result) => ServerMessage::ok(id, result),
                Err(e) => ServerMessage::err(id, e),
            },
            Err(e) => ServerMessage::err(id, e),
        };
        sink(reply);
    }

    pub fn dispatch(&mut self, req: Request, sink: Sink<'_>) -> Result<Value, ErrorBody> {
        if let Request::Open { path, text, proofpad } = req {
            return self.open_document(path, text, proofpad, sink);
        }
        if let Request::GetRawOutput { summary_id } = req {
            return self
                .raws
                .get(&summary_id)
                .map(|raw| json!({ "summary_id": summary_id, "raw": raw }))
                .ok_or_else(|| ErrorBody::new("unknown-summary", format!("no summary with id {summary_id}")));
        }
        if self.open.is_none() {
            return Err(ErrorBody::new("no-document", "open a document first"));
        }
        match req {
            Request::Edit { start, end, text } => {
                self.edit(Span::new(start, end), &text)?;
                self.document_changed(sink);
                Ok(json!({}))
            }
            Request::AdmitThrough { index } => {
                let o = self.open.as_ref().expect("document is open");
                let line = o.session.proof_line();
                if index >= o.session.forms().len() || index < line {
                    return Err(ErrorBody::new(
                        "invalid-plan",
                        format!("form {index} cannot be admitted from proof line {line}"),
                    ));
                }
                self.run_plan(Plan::AdmitThrough((line..=index).collect()), sink)
            }
            Request::UndoThrough { index } => {
                let line = self.open.as_ref().expect("document is open").session.proof_line();
                if index >= line {
                    return Err(ErrorBody::new("invalid-plan", format!("form {index} is not admitted")));
                }
                self.run_plan(Plan::UndoThrough((index..line).rev().collect()), sink)
            }
            Request::HoverPreview { index } => {
                let plan =
                    self.open.as_ref().expect("document is open").session.hover_preview(index).map_err(session_err)?;
                Ok(serde_json::to_value(plan).expect("plans serialize"))
            }
            Request::ReplSubmit { input } => self.repl_submit(&input, sink),
            Request::RunProperty { index, trials, seed } => {
                let o = self.open.as_mut().expect("document is open");
                let form =
                    o.session.forms().get(index).ok_or_else(|| {
                        ErrorBody::new("invalid-target", format!("form index {index} is out of range"))
                    })?;
                let spec = doublecheck::parse_property(&form.form, o.session.source())
                    .map_err(|e| ErrorBody::new(e.code(), e.to_string()))?;
                let trials = trials.or(spec.repeat).unwrap_or(DEFAULT_TRIALS).max(1);
                let report = doublecheck::run_property(&spec, trials, seed.unwrap_or(0), &mut o.backend);
                self.recover_backend(sink);
                Ok(serde_json::to_value(report).expect("reports serialize"))
            }
            Request::Lint {} => {
                let diagnostics = lint::lint_source(&self.open.as_ref().expect("document is open").doc.text);
                emit(sink, Event::Diagnostics { diagnostics: diagnostics.clone() });
                Ok(json!({ "diagnostics": diagnostics }))
            }
            Request::Indent { start, end, apply } => self.indent(start, end, apply, sink),
            Request::Open { .. } | Request::GetRawOutput { .. } => unreachable!("handled above"),
        }
    }

    fn open_document(
        &mut self,
        path: Option<String>,
        text: Option<String>,
        proofpad: bool,
        sink: Sink<'_>,
    ) -> Result<Value, ErrorBody> {
        let (path, doc) = match (path, text) {
            (Some(p), None) => {
                let path = std::fs::canonicalize(&p).map_err(|e| ErrorBody::new("io-error", format!("{p}: {e}")))?;
                let doc = Document::load(&path).map_err(doc_err)?;
                (Some(path), doc)
            }
            (None, Some(text)) => {
                let origin = if proofpad { Origin::Proofpad } else { Origin::Plain };
                (None, Document::parse(&text, origin).map_err(doc_err)?)
            }
            _ => return Err(ErrorBody::new("malformed-request", "open takes exactly one of path or text")),
        };
        let already_ours = self.open.as_ref().and_then(|o| o.path.as_ref()) == path.as_ref() && path.is_some();
        if let Some(p) = &path {
            if !already_ours && !self.registry.claim(p) {
                sink(ServerMessage::Rejected { reason: format!("{} is open in another client", p.display()) });
                return Err(ErrorBody::new("document-busy", format!("{} is open in another client", p.display())));
            }
        }
        let backend = match self.choice.start() {
            Ok(b) => b,
            Err(e) => {
                if let Some(p) = path.as_ref().filter(|_| !already_ours) {
                    self.registry.release(p);
                }
                return Err(backend_err(e));
            }
        };
        if let Some(old) = self.open.take() {
            if let Some(p) = old.path.filter(|p| Some(p) != path.as_ref()) {
                self.registry.release(&p);
            }
        }
        let session = Session::with_config(&doc.text, self.config);
        self.open = Some(Open { path, doc, session, backend, repl: Repl::new() });
        self.raws.clear();
        let o = self.open.as_mut().expect("just opened");
        let transitions = o.session.open(&mut o.backend, |_| {}).map_err(session_err)?;
        for t in transitions {
            emit(sink, Event::StatusChanged { index: t.index, from: t.from, to: t.to });
        }
        self.lint_event(sink);
        Ok(serde_json::to_value(self.snapshot()).expect("snapshots serialize"))
    }

    fn edit(&mut self, span: Span, text: &str) -> Result<(), ErrorBody> {
        let o = self.open.as_mut().expect("document is open");
        o.doc.check_edit(span).map_err(doc_err)?;
        o.session.on_edit(span, text).map_err(session_err)?;
        o.doc = o.doc.apply_edit(span, text).map_err(doc_err)?;
        Ok(())
    }

    fn document_changed(&mut self, sink: Sink<'_>) {
        emit(sink, Event::DocumentChanged { snapshot: self.snapshot() });
        self.lint_event(sink);
    }

    fn lint_event(&self, sink: Sink<'_>) {
        if let Some(o) = &self.open {
            emit(sink, Event::Diagnostics { diagnostics: lint::lint_source(&o.doc.text) });
        }
    }

    fn store_raw(&mut self, raw: &str) -> u64 {
        let id = self.next_summary;
        self.next_summary += 1;
        self.raws.insert(id, raw.to_string());
        id
    }

    fn run_plan(&mut self, plan: Plan, sink: Sink<'_>) -> Result<Value, ErrorBody> {
        let o = self.open.as_mut().expect("document is open");
        let result = o.session.execute(&plan, &mut o.backend, |t| {
            sink(ServerMessage::Event { event: Event::StatusChanged { index: t.index, from: t.from, to: t.to } })
        });
        if let Plan::AdmitThrough(indices) = &plan {
            let subs: Vec<(usize, String)> = indices
                .iter()
                .filter_map(|&i| o.session.forms()[i].submission.as_ref().map(|s| (i, s.result.clone())))
                .collect();
            for (i, raw) in subs {
                let summary = output::summarize_raw(&raw);
                let summary_id = self.store_raw(&raw);
                emit(sink, Event::Summary { summary_id, index: Some(i), summary: SummaryView::from(&summary) });
            }
        }
        self.recover_backend(sink);
        result.map_err(session_err)?;
        let o = self.open.as_ref().expect("document is open");
        Ok(json!({ "statuses": o.session.statuses(), "proof_line": o.session.proof_line() }))
    }

    /// Replaces a poisoned backend and replays the admitted prefix.
    fn recover_backend(&mut self, sink: Sink<'_>) {
        let Some(o) = self.open.as_mut() else { return };
        if !o.backend.is_poisoned() {
            return;
        }
        let Ok(fresh) = self.choice.start() else { return };
        o.backend = fresh;
        let _ = o.session.replay(&mut o.backend, |t| {
            sink(ServerMessage::Event { event: Event::StatusChanged { index: t.index, from: t.from, to: t.to } })
        });
    }

    fn repl_submit(&mut self, input: &str, sink: Sink<'_>) -> Result<Value, ErrorBody> {
        let mut routed = 0;
        for form in sexp::parse_source(input) {
            let text = form.text(input);
            let kind = repl::classify_input(&form).map_err(|e| ErrorBody::new(e.code(), e.to_string()))?;
            let o = self.open.as_mut().expect("document is open");
            let insertion = (kind == FormKind::Event).then(|| o.session.proof_line_insertion(text));
            if let Some((offset, _)) = &insertion {
                o.doc.check_edit(Span::new(*offset, *offset)).map_err(doc_err)?;
            }
            let result = repl::route(&form, text, &mut o.session, &mut o.backend)
                .map_err(|e| ErrorBody::new(e.code(), e.to_string()))?;
            if let Some((offset, inserted)) = insertion {
                o.doc = o.doc.apply_edit(Span::new(offset, offset), &inserted).map_err(doc_err)?;
            }
            let entry = ReplEntry { input: text.to_string(), result };
            o.repl.record(entry.clone());
            let summary_id = match &entry.result {
                ReplResult::Evaluated { summary, .. } => Some(self.store_raw(&summary.raw)),
                ReplResult::Moved { .. } => None,
            };
            let moved = matches!(entry.result, ReplResult::Moved { .. });
            emit(sink, Event::ReplResult { entry, summary_id });
            if moved {
                self.document_changed(sink);
            }
            self.recover_backend(sink);
            routed += 1;
        }
        Ok(json!({ "routed": routed }))
    }

    fn indent(
        &mut self,
        start: Option<usize>,
        end: Option<usize>,
        apply: bool,
        sink: Sink<'_>,
    ) -> Result<Value, ErrorBody> {
        let table = BuiltinTable::standard();
        let o = self.open.as_ref().expect("document is open");
        let len = o.doc.text.len();
        let region = Span::new(start.unwrap_or(0).min(len), end.unwrap_or(len).min(len).max(1));
        if !apply {
            return Ok(json!({ "text": indent::reindent(&o.doc.text, region, table) }));
        }
        let floor = o.session.admitted_end();
        let targets: Vec<Span> = o
            .doc
            .regions
            .iter()
            .filter(|r| r.access == Access::ReadWrite)
            .map(|r| Span::new(r.span.start.max(region.start).max(floor), r.span.end.min(region.end)))
            .filter(|s| s.start < s.end)
            .collect();
        let mut changed = false;
        for target in targets.into_iter().rev() {
            let current = self.open.as_ref().expect("document is open").doc.text.clone();
            let new = indent::reindent(&current, target, table);
            let (span, replacement) = diff_span(&current, &new);
            if span.is_empty() && replacement.is_empty() {
                continue;
            }
            self.edit(span, replacement)?;
            changed = true;
        }
        if changed {
            self.document_changed(sink);
        }
        Ok(json!({ "text": self.open.as_ref().expect("document is open").doc.text }))
    }
}

impl Drop for Controller {
    fn drop(&mut self) {
        if let Some(p) = self.open.as_ref().and_then(|o| o.path.as_ref()) {
            self.registry.release(p);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_diff() {
        assert_eq!(diff_span("(a\nb)", "(a\n b)"), (Span::new(3, 3), " "));
        assert_eq!(diff_span("abc", "abc"), (Span::new(3, 3), ""));
        assert_eq!(diff_span("  x", "x"), (Span::new(0, 2), ""));
    }
}
