//! Proof-bar engine: per-form statuses, admit/undo planning and execution,
//! and protection of admitted text.
//!
//! The proof line is always derived: it is the index of the first form whose
//! status is not `Admitted`.

use serde::{Deserialize, Serialize};

use crate::backend::{BackendError, BackendHandle, Outcome, Submission};
use crate::doublecheck;
use crate::sexp::{self, TopLevelForm};
use crate::span::Span;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProofStatus {
    Unadmitted,
    Queued,
    InProgress,
    Admitted,
    Failed,
}

impl ProofStatus {
    pub const ALL: [ProofStatus; 5] = [
        ProofStatus::Unadmitted,
        ProofStatus::Queued,
        ProofStatus::InProgress,
        ProofStatus::Admitted,
        ProofStatus::Failed,
    ];

    /// One-letter abbreviation: U, Q, P, A or F.
    pub fn letter(self) -> char {
        match self {
            ProofStatus::Unadmitted => 'U',
            ProofStatus::Queued => 'Q',
            ProofStatus::InProgress => 'P',
            ProofStatus::Admitted => 'A',
            ProofStatus::Failed => 'F',
        }
    }

    pub fn from_letter(c: char) -> Option<ProofStatus> {
        ProofStatus::ALL.into_iter().find(|s| s.letter() == c.to_ascii_uppercase())
    }
}

/// Renders statuses as comma-separated letters, e.g. `A,F,U`.
pub fn status_line(statuses: &[ProofStatus]) -> String {
    statuses.iter().map(|s| s.letter().to_string()).collect::<Vec<_>>().join(",")
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FormState {
    pub form: TopLevelForm,
    pub status: ProofStatus,
    /// World-changing events this form's admission created.
    pub events: usize,
    pub submission: Option<Submission>,
    pub error: Option<String>,
}

impl FormState {
    fn new(form: TopLevelForm) -> FormState {
        FormState { form, status: ProofStatus::Unadmitted, events: 0, submission: None, error: None }
    }

    fn reset(&mut self) {
        self.events = 0;
        self.submission = None;
        self.error = None;
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "indices", rename_all = "kebab-case")]
pub enum Plan {
    /// Ascending indices from the proof line through the target.
    AdmitThrough(Vec<usize>),
    /// Descending indices from the last admitted form down to the target.
    UndoThrough(Vec<usize>),
}

impl Plan {
    pub fn indices(&self) -> &[usize] {
        match self {
            Plan::AdmitThrough(v) | Plan::UndoThrough(v) => v,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transition {
    pub index: usize,
    pub from: ProofStatus,
    pub to: ProofStatus,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionConfig {
    /// Admit every form when a document is opened.
    pub auto_admit: bool,
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum SessionError {
    #[error("edit at {0:?} touches admitted text")]
    ReadOnlyViolation(Span),
    #[error("edit at {0:?} touches a form that is queued or in progress")]
    FormBusy(Span),
    #[error("form index {0} is out of range")]
    InvalidTarget(usize),
    #[error("invalid plan: {0}")]
    InvalidPlan(String),
    #[error(transparent)]
    Backend(#[from] BackendError),
}

impl SessionError {
    pub fn code(&self) -> &'static str {
        match self {
            SessionError::ReadOnlyViolation(_) => "read-only-violation",
            SessionError::FormBusy(_) => "form-busy",
            SessionError::InvalidTarget(_) => "invalid-target",
            SessionError::InvalidPlan(_) => "invalid-plan",
            SessionError::Backend(e) => e.code(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Session {
    source: String,
    forms: Vec<FormState>,
    config: SessionConfig,
}

impl Session {
    pub fn new(source: &str) -> Session {
        Session::with_config(source, SessionConfig::default())
    }

    pub fn with_config(source: &str, config: SessionConfig) -> Session {
        let forms = sexp::parse_source(source).into_iter().map(FormState::new).collect();
        Session { source: source.to_string(), forms, config }
    }

    pub fn config(&self) -> SessionConfig {
        self.config
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn forms(&self) -> &[FormState] {
        &self.forms
    }

    pub fn statuses(&self) -> Vec<ProofStatus> {
        self.forms.iter().map(|f| f.status).collect()
    }

    pub fn proof_line(&self) -> usize {
        self.forms.iter().position(|f| f.status != ProofStatus::Admitted).unwrap_or(self.forms.len())
    }

    /// Byte offset just past the last admitted form, or 0.
    pub fn admitted_end(&self) -> usize {
        match self.proof_line() {
            0 => 0,
            n => self.forms[n - 1].form.span.end,
        }
    }

    /// Sum of the undo ledger.
    pub fn admitted_events(&self) -> usize {
        self.forms.iter().filter(|f| f.status == ProofStatus::Admitted).map(|f| f.events).sum()
    }

    /// Admits every form if the configuration asks for it.
    pub fn open(
        &mut self,
        backend: &mut BackendHandle,
        observer: impl FnMut(&Transition),
    ) -> Result<Vec<Transition>, SessionError> {
        if !self.config.auto_admit || self.forms.is_empty() {
            return Ok(Vec::new());
        }
        let plan = self.plan_click(self.forms.len() - 1)?;
        self.execute(&plan, backend, observer)
    }

    /// The action a click on `target` would take. Pure.
    pub fn plan_click(&self, target: usize) -> Result<Plan, SessionError> {
        plan_for(&self.statuses(), target)
    }

    /// Identical to `plan_click`.
    pub fn hover_preview(&self, target: usize) -> Result<Plan, SessionError> {
        plan_for(&self.statuses(), target)
    }

    /// Runs either kind of plan.
    pub fn execute(
        &mut self,
        plan: &Plan,
        backend: &mut BackendHandle,
        observer: impl FnMut(&Transition),
    ) -> Result<Vec<Transition>, SessionError> {
        match plan {
            Plan::AdmitThrough(_) => self.execute_admit(plan, backend, observer),
            Plan::UndoThrough(_) => self.execute_undo(plan, backend, observer),
        }
    }

    /// Submits each planned form in order. Stops at the first failure and
    /// returns the remaining queued forms to `Unadmitted`.
    pub fn execute_admit(
        &mut self,
        plan: &Plan,
        backend: &mut BackendHandle,
        mut observer: impl FnMut(&Transition),
    ) -> Result<Vec<Transition>, SessionError> {
        let Plan::AdmitThrough(indices) = plan else {
            return Err(SessionError::InvalidPlan("expected an admit plan".into()));
        };
        let start = self.proof_line();
        if indices.iter().enumerate().any(|(k, &i)| i != start + k) || start + indices.len() > self.forms.len() {
            return Err(SessionError::InvalidPlan(format!("admission must proceed in order from form {start}")));
        }
        let mut log = Vec::new();
        let mut step = |forms: &mut [FormState], index: usize, to: ProofStatus| {
            let t = Transition { index, from: forms[index].status, to };
            forms[index].status = to;
            observer(&t);
            log.push(t);
        };
        for &i in indices {
            step(&mut self.forms, i, ProofStatus::Queued);
        }
        for (k, &i) in indices.iter().enumerate() {
            step(&mut self.forms, i, ProofStatus::InProgress);
            self.forms[i].reset();
            let admitted = self.admit_one(i, backend);
            step(&mut self.forms, i, if admitted { ProofStatus::Admitted } else { ProofStatus::Failed });
            if !admitted {
                for &j in &indices[k + 1..] {
                    step(&mut self.forms, j, ProofStatus::Unadmitted);
                }
                break;
            }
        }
        Ok(log)
    }

    fn admit_one(&mut self, i: usize, backend: &mut BackendHandle) -> bool {
        let form = &self.forms[i].form;
        if !form.complete {
            self.forms[i].error = Some("the form is incomplete".into());
            return false;
        }
        let mut text = form.text(&self.source).to_string();
        if form.head.eq_ignore_ascii_case("defproperty") {
            match doublecheck::parse_property(form, &self.source) {
                Ok(spec) => text = doublecheck::to_theorem(&spec),
                Err(e) => {
                    self.forms[i].error = Some(e.to_string());
                    return false;
                }
            }
        }
        let before = backend.world_events();
        match backend.submit(&text) {
            Ok(sub) => {
                let ok = sub.outcome == Outcome::Success;
                let state = &mut self.forms[i];
                if ok {
                    state.events = backend.world_events().saturating_sub(before);
                } else {
                    state.error = Some(match sub.outcome {
                        Outcome::Timeout => "the backend timed out".into(),
                        Outcome::Crashed => "the backend exited".into(),
                        _ => "ACL2 rejected the form".into(),
                    });
                }
                state.submission = Some(sub);
                ok
            }
            Err(e) => {
                self.forms[i].error = Some(e.to_string());
                false
            }
        }
    }

    /// Rolls the backend back by the ledger's event counts for the planned
    /// forms, then marks them `Unadmitted`.
    pub fn execute_undo(
        &mut self,
        plan: &Plan,
        backend: &mut BackendHandle,
        mut observer: impl FnMut(&Transition),
    ) -> Result<Vec<Transition>, SessionError> {
        let Plan::UndoThrough(indices) = plan else {
            return Err(SessionError::InvalidPlan("expected an undo plan".into()));
        };
        let line = self.proof_line();
        if indices.iter().enumerate().any(|(k, &i)| k >= line || i != line - 1 - k) {
            return Err(SessionError::InvalidPlan("undo must start at the last admitted form".into()));
        }
        let events: usize = indices.iter().map(|&i| self.forms[i].events).sum();
        if events > 0 {
            let sub = backend.undo_through(events)?;
            if sub.outcome != Outcome::Success {
                return Err(SessionError::Backend(BackendError::Poisoned));
            }
        }
        let mut log = Vec::new();
        for &i in indices {
            let t = Transition { index: i, from: self.forms[i].status, to: ProofStatus::Unadmitted };
            self.forms[i].status = ProofStatus::Unadmitted;
            self.forms[i].reset();
            observer(&t);
            log.push(t);
        }
        Ok(log)
    }

    /// Replaces `span` with `replacement`. Edits that reach into admitted
    /// text or a busy form are rejected and leave the session unchanged.
    /// Forms whose text and position survive keep their status; the rest
    /// become `Unadmitted`.
    pub fn on_edit(&mut self, span: Span, replacement: &str) -> Result<(), SessionError> {
        if span.end > self.source.len()
            || span.start > span.end
            || !self.source.is_char_boundary(span.start)
            || !self.source.is_char_boundary(span.end)
        {
            return Err(SessionError::InvalidPlan(format!("edit span {span:?} is outside the document")));
        }
        if span.start < self.admitted_end() {
            return Err(SessionError::ReadOnlyViolation(span));
        }
        let busy = |f: &&FormState| matches!(f.status, ProofStatus::Queued | ProofStatus::InProgress);
        if self.forms.iter().filter(busy).any(|f| f.form.span.touches(span)) {
            return Err(SessionError::FormBusy(span));
        }
        let mut source = self.source.clone();
        source.replace_range(span.start..span.end, replacement);
        let delta = replacement.len() as isize - span.len() as isize;
        let inserted_end = span.start + replacement.len();
        let mut old = self.forms.iter().peekable();
        let mut forms = Vec::new();
        for form in sexp::parse_source(&source) {
            let original = if form.span.end <= span.start && !form.span.touches(span) {
                Some(form.span)
            } else if form.span.start >= inserted_end {
                Some(form.span.shifted(-delta))
            } else {
                None
            };
            let mut state = FormState::new(form);
            if let Some(orig) = original {
                while old.peek().is_some_and(|o| o.form.span.start < orig.start) {
                    old.next();
                }
                if let Some(o) = old.peek().filter(|o| o.form.span == orig) {
                    if o.form.text(&self.source) == state.form.text(&source) {
                        state = FormState { form: state.form, ..(*o).clone() };
                    }
                }
            }
            forms.push(state);
        }
        let kept_admitted = forms.iter().take_while(|f| f.status == ProofStatus::Admitted).count();
        if kept_admitted != self.proof_line() {
            return Err(SessionError::ReadOnlyViolation(span));
        }
        self.source = source;
        self.forms = forms;
        Ok(())
    }

    /// Where `insert_at_proof_line` would put `text`, and the exact bytes it
    /// would insert.
    pub fn proof_line_insertion(&self, text: &str) -> (usize, String) {
        let offset = self.admitted_end();
        let text = text.trim();
        let inserted = if offset == 0 { format!("{text}\n") } else { format!("\n{text}") };
        (offset, inserted)
    }

    /// Inserts `text` as a new form just after the admitted prefix and
    /// returns its span.
    pub fn insert_at_proof_line(&mut self, text: &str) -> Result<Span, SessionError> {
        let (offset, inserted) = self.proof_line_insertion(text);
        self.on_edit(Span::new(offset, offset), &inserted)?;
        let trimmed = text.trim();
        let start = if offset == 0 { offset } else { offset + 1 };
        Ok(Span::new(start, start + trimmed.len()))
    }

    /// Re-admits the admitted prefix against a fresh backend, e.g. after a
    /// timeout or crash poisoned the old one.
    pub fn replay(
        &mut self,
        backend: &mut BackendHandle,
        observer: impl FnMut(&Transition),
    ) -> Result<Vec<Transition>, SessionError> {
        let n = self.proof_line();
        for f in &mut self.forms[..n] {
            f.status = ProofStatus::Unadmitted;
            f.reset();
        }
        if n == 0 {
            return Ok(Vec::new());
        }
        self.execute_admit(&Plan::AdmitThrough((0..n).collect()), backend, observer)
    }
}

/// Click planning on a bare status list.
pub fn plan_for(statuses: &[ProofStatus], target: usize) -> Result<Plan, SessionError> {
    if target >= statuses.len() {
        return Err(SessionError::InvalidTarget(target));
    }
    let line = statuses.iter().position(|s| *s != ProofStatus::Admitted).unwrap_or(statuses.len());
    Ok(if target < line {
        Plan::UndoThrough((target..line).rev().collect())
    } else {
        Plan::AdmitThrough((line..=target).collect())
    })
}
