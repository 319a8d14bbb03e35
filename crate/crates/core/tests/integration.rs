use std::path::PathBuf;
use std::time::Duration;

use proofpad_core::backend::{BackendError, BackendHandle, FakeOptions, Outcome};
use proofpad_core::docmodel::{Access, Document};
use proofpad_core::output::{self, MessageKind, Overall, Severity};
use proofpad_core::session::{status_line, Session, SessionConfig};
use proofpad_core::Span;

fn fixture(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(rel)
}

#[test]
fn include_book_summary_golden() {
    let raw = std::fs::read_to_string(fixture("transcripts/include_book.txt")).unwrap();
    let summary = output::summarize_raw(&raw);
    let path = raw.split('"').find(|s| s.ends_with("/book.lisp")).unwrap();
    let book_headline = format!("The book could not be found at {path}");
    let got: Vec<(Severity, MessageKind, &str)> =
        summary.items.iter().map(|m| (m.severity, m.kind, m.headline.as_str())).collect();
    assert_eq!(
        got,
        vec![
            (Severity::Error, MessageKind::Error, book_headline.as_str()),
            (Severity::Error, MessageKind::Error, "See :DOC failure."),
            (Severity::Error, MessageKind::FailureMarker, "The form failed."),
            (
                Severity::Warning,
                MessageKind::Warning,
                "Unable to load compiled file for book <book path> because that book is not certified."
            ),
            (Severity::Info, MessageKind::Summary, "Completed ( INCLUDE-BOOK \"book\" ...)"),
        ]
    );
    assert_eq!(summary.overall, Overall::Failure);
    assert_eq!(summary.raw, raw);
    assert!(raw[summary.items[0].raw_range.start..summary.items[0].raw_range.end].contains("There is no file named"));
}

#[test]
fn every_corpus_file_is_admitted_by_the_fake() {
    let mut files: Vec<_> = std::fs::read_dir(fixture("corpus")).unwrap().map(|e| e.unwrap().path()).collect();
    files.sort();
    for path in files {
        let doc = Document::load(&path).unwrap();
        let mut backend = BackendHandle::fake();
        let mut session = Session::with_config(&doc.text, SessionConfig { auto_admit: true });
        session.open(&mut backend, |_| {}).unwrap();
        assert_eq!(
            session.proof_line(),
            session.forms().len(),
            "{}: {}",
            path.display(),
            status_line(&session.statuses())
        );
    }
}

#[test]
fn hung_backend_times_out_and_poisons() {
    let mut backend =
        BackendHandle::fake_with(FakeOptions { form_timeout: Duration::from_millis(150), ..FakeOptions::default() });
    backend.probe().unwrap().set_hang(true);
    let sub = backend.submit("(+ 1 2)").unwrap();
    assert_eq!(sub.outcome, Outcome::Timeout);
    assert!(backend.is_poisoned());
    assert_eq!(backend.submit("(+ 1 2)").unwrap_err(), BackendError::Poisoned);
}

#[test]
fn crashed_backend_reports_crash() {
    let mut backend = BackendHandle::fake();
    backend.probe().unwrap().crash();
    let outcome = backend.submit("(+ 1 2)").map(|s| s.outcome);
    assert!(matches!(outcome, Ok(Outcome::Crashed) | Err(_)), "{outcome:?}");
    assert!(backend.is_poisoned());
}

#[test]
fn failed_admission_surfaces_in_the_session() {
    let mut backend = BackendHandle::fake();
    let mut session = Session::new("(defun ok (x) x)\n(include-book \"nope\")\n(defun later (x) x)\n");
    let plan = session.plan_click(2).unwrap();
    session.execute(&plan, &mut backend, |_| {}).unwrap();
    assert_eq!(status_line(&session.statuses()), "A,F,U");
    let failed = session.forms()[1].submission.as_ref().unwrap();
    assert_eq!(output::summarize_raw(&failed.result).overall, Overall::Failure);
}

#[test]
fn proofpad_fixture_regions() {
    let doc = Document::load(&fixture("proofpad/sum_exercise.proofpad")).unwrap();
    assert!(doc.regions.iter().any(|r| r.access == Access::ReadOnly));
    let ro = doc.read_only_spans().next().unwrap();
    let err = doc.check_edit(Span::new(ro.start + 1, ro.start + 2)).unwrap_err();
    assert_eq!(err.code(), "read-only-violation");
    let rw = doc.regions.iter().find(|r| r.access == Access::ReadWrite && !r.span.is_empty()).unwrap();
    let edited = doc.apply_edit(Span::new(rw.span.start, rw.span.start), ";; hi\n").unwrap();
    assert_eq!(edited.text.len(), doc.text.len() + 6);
    assert_eq!(edited.read_only_spans().count(), doc.read_only_spans().count());
}
