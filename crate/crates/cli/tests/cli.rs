use std::io::Write;
use std::path::PathBuf;
use std::process::{Command, Output, Stdio};

use proofpad_core::backend::{BackendConfig, BackendHandle, Outcome};
use proofpad_core::session::{status_line, Session};

const EXE: &str = env!("CARGO_BIN_EXE_proofpad");

fn fixture(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures").join(rel)
}

fn run(args: &[&str]) -> Output {
    Command::new(EXE).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn write_temp(dir: &tempfile::TempDir, name: &str, text: &str) -> String {
    let path = dir.path().join(name);
    std::fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn lint_clean_file_is_silent() {
    let out = run(&["lint", fixture("corpus/01_factorial.lisp").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
}

#[test]
fn lint_reports_location_and_code() {
    let out = run(&["lint", fixture("lint_bad/arity_cons.lisp").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let text = stdout(&out);
    assert!(text.contains("error[arity-mismatch]"), "{text}");
    assert!(text.contains("arity_cons.lisp:"), "{text}");

    let json = run(&["lint", "--format", "json", fixture("lint_bad/arity_cons.lisp").to_str().unwrap()]);
    let diags: serde_json::Value = serde_json::from_slice(&json.stdout).unwrap();
    assert_eq!(diags[0]["code"], "arity-mismatch");
}

#[test]
fn admit_prints_statuses() {
    let dir = tempfile::tempdir().unwrap();
    let file = write_temp(&dir, "a.lisp", "(defun f (x) x)\n(defthm bad nil)\n(defun g (x) (f x))\n");
    let out = run(&["admit", "--fake-backend", &file]);
    assert_eq!(stdout(&out).trim(), "A,F,U");
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("form 1"));

    let good = write_temp(&dir, "b.lisp", "(defun f (x) x)\n(defthm f-id (equal (f x) x))\n");
    let out = run(&["admit", "--fake-backend", &good]);
    assert_eq!(stdout(&out).trim(), "A,A");
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn check_is_deterministic_and_reports_counterexamples() {
    let dir = tempfile::tempdir().unwrap();
    let file = write_temp(
        &dir,
        "props.lisp",
        "(defproperty append-commutes
  (xs :value (random-list-of (random-natural))
   ys :value (random-list-of (random-natural)))
  (equal (append xs ys) (append ys xs)))
",
    );
    let a = run(&["check", "--fake-backend", "--seed", "11", &file]);
    let b = run(&["check", "--fake-backend", "--seed", "11", &file]);
    assert_eq!(a.status.code(), Some(1));
    assert_eq!(a.stdout, b.stdout);
    let text = stdout(&a);
    assert!(text.starts_with("append-commutes: falsified"), "{text}");
    assert!(text.contains("\n  xs = "), "{text}");
}

#[test]
fn indent_prints_reindented_text() {
    let dir = tempfile::tempdir().unwrap();
    let file = write_temp(&dir, "i.lisp", "(defun f (x)\n(if x\n1\n2))\n");
    let out = run(&["indent", &file]);
    assert_eq!(stdout(&out), "(defun f (x)\n  (if x\n      1\n      2))\n");
    let out = run(&["indent", "--write", &file]);
    assert!(out.status.success());
    assert_eq!(std::fs::read_to_string(&file).unwrap(), "(defun f (x)\n  (if x\n      1\n      2))\n");
}

#[test]
fn repl_routes_events_and_evaluates_expressions() {
    let mut child = Command::new(EXE)
        .args(["repl", "--fake-backend"])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(b"(+ 1 2)\n(defun f (x)\n  (* x 2))\n:defs\n").unwrap();
    let out = child.wait_with_output().unwrap();
    let text = stdout(&out);
    assert!(text.contains("3\n"), "{text}");
    assert!(text.contains("moved to the definitions area"), "{text}");
    assert!(text.contains("(defun f (x)\n  (* x 2))"), "{text}");
}

#[test]
fn usage_errors_exit_with_two() {
    assert_eq!(run(&["lint"]).status.code(), Some(2));
    assert_eq!(run(&["no-such-command"]).status.code(), Some(2));
}

#[test]
fn missing_backend_is_reported() {
    let out = Command::new(EXE)
        .args(["admit", fixture("corpus/01_factorial.lisp").to_str().unwrap()])
        .env("PATH", "")
        .env_remove("PROOFPAD_ACL2")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("no ACL2 executable found"));
}

#[test]
fn process_transport_drives_a_subprocess() {
    let config =
        BackendConfig { executable: PathBuf::from(EXE), args: vec!["fake-acl2".into()], ..BackendConfig::default() };
    let mut backend = BackendHandle::start(config).unwrap();
    let sub = backend.submit("(append '(1 2)\n        '(3))").unwrap();
    assert_eq!(sub.outcome, Outcome::Success);
    assert!(sub.result.starts_with("(1 2 3)"), "{:?}", sub.result);

    let mut session = Session::new("(defun f (x) (+ x 1))\n(defthm f-pos (equal (f 1) 2))\n(defthm no nil)\n");
    let plan = session.plan_click(2).unwrap();
    session.execute(&plan, &mut backend, |_| {}).unwrap();
    assert_eq!(status_line(&session.statuses()), "A,A,F");
    let plan = session.plan_click(0).unwrap();
    session.execute(&plan, &mut backend, |_| {}).unwrap();
    assert_eq!(status_line(&session.statuses()), "U,U,F");
    let again = backend.submit("(f 1)").unwrap();
    assert_eq!(again.outcome, Outcome::Failure);
}
