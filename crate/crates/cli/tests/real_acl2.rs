//! Reruns a subset of the checks against a real ACL2 when one is installed.
//! Set `PROOFPAD_ACL2` or put `acl2` on `PATH`; otherwise every test returns
//! early.

use std::path::PathBuf;

use proofpad_core::backend::{BackendConfig, BackendHandle, Outcome};
use proofpad_core::session::{status_line, Session};
use proofpad_core::{lint, sexp};

fn fixture(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures").join(rel)
}

fn real_acl2() -> Option<BackendHandle> {
    let exe = std::env::var_os("PROOFPAD_ACL2").map(PathBuf::from).or_else(|| {
        let path = std::env::var_os("PATH")?;
        std::env::split_paths(&path).map(|d| d.join("acl2")).find(|p| p.is_file())
    });
    let Some(executable) = exe else {
        eprintln!("no ACL2 found; skipping");
        return None;
    };
    Some(BackendHandle::start(BackendConfig { executable, ..BackendConfig::default() }).expect("ACL2 starts"))
}

#[test]
fn lint_errors_are_rejected_by_acl2() {
    let Some(mut acl2) = real_acl2() else { return };
    let mut files: Vec<_> = std::fs::read_dir(fixture("lint_bad"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "lisp"))
        .collect();
    files.sort();
    for path in files {
        let source = std::fs::read_to_string(&path).unwrap();
        let flagged = lint::lint_source(&source);
        for form in sexp::parse_source(&source) {
            if flagged.iter().any(|d| d.severity == lint::Severity::Error && form.span.contains(d.span.start)) {
                let sub = acl2.submit(form.text(&source)).unwrap();
                assert_eq!(sub.outcome, Outcome::Failure, "{}: {}", path.display(), form.text(&source));
            }
        }
    }
}

#[test]
fn corpus_admits_in_acl2() {
    let Some(mut acl2) = real_acl2() else { return };
    let source = std::fs::read_to_string(fixture("corpus/01_factorial.lisp")).unwrap();
    let mut session = Session::new(&source);
    let plan = session.plan_click(session.forms().len() - 1).unwrap();
    session.execute(&plan, &mut acl2, |_| {}).unwrap();
    assert_eq!(session.proof_line(), session.forms().len(), "{}", status_line(&session.statuses()));
    let undo = session.plan_click(0).unwrap();
    session.execute(&undo, &mut acl2, |_| {}).unwrap();
    assert_eq!(session.proof_line(), 0);
}
