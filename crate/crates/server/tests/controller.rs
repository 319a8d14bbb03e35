use proofpad_core::backend::BackendHandle;
use proofpad_core::session::{ProofStatus, Session, SessionConfig};
use proofpad_server::protocol::{Event, FormView, ServerMessage, Snapshot};
use proofpad_server::{BackendChoice, Controller, Registry};
use serde_json::{json, Value};

const DEFS: &str = "(defun f1 (x) x)\n(defun f2 (x) (f1 x))\n(defun f3 (x) (f2 x))\n";

fn controller() -> Controller {
    Controller::new(BackendChoice::Fake, SessionConfig::default(), Registry::default())
}

fn send(c: &mut Controller, req: Value) -> Vec<ServerMessage> {
    let mut out = Vec::new();
    c.handle(&req.to_string(), &mut |m| out.push(m));
    out
}

fn reply(msgs: &[ServerMessage]) -> (Option<u64>, bool, Value) {
    match msgs.last() {
        Some(ServerMessage::Reply { id, ok, result, error }) => {
            (*id, *ok, result.clone().unwrap_or_else(|| serde_json::to_value(error).unwrap()))
        }
        other => panic!("last message is not a reply: {other:?}"),
    }
}

fn events(msgs: &[ServerMessage]) -> Vec<Event> {
    msgs.iter()
        .filter_map(|m| match m {
            ServerMessage::Event { event } => Some(event.clone()),
            _ => None,
        })
        .collect()
}

#[test]
fn admit_events_mirror_session_transitions() {
    let mut c = controller();
    let (id, ok, _) = reply(&send(&mut c, json!({"id": 1, "kind": "open", "text": DEFS})));
    assert_eq!((id, ok), (Some(1), true));
    let msgs = send(&mut c, json!({"id": 2, "kind": "admit-through", "index": 2}));
    let (id, ok, result) = reply(&msgs);
    assert_eq!((id, ok), (Some(2), true));
    assert_eq!(result["statuses"], json!(["admitted", "admitted", "admitted"]));

    let streamed: Vec<_> = events(&msgs)
        .into_iter()
        .filter_map(|e| match e {
            Event::StatusChanged { index, from, to } => Some((index, from, to)),
            _ => None,
        })
        .collect();
    let mut session = Session::new(DEFS);
    let mut backend = BackendHandle::fake();
    let plan = session.plan_click(2).unwrap();
    let expected: Vec<_> =
        session.execute(&plan, &mut backend, |_| {}).unwrap().into_iter().map(|t| (t.index, t.from, t.to)).collect();
    assert_eq!(streamed, expected);
}

#[test]
fn read_only_and_malformed_requests_leave_state_alone() {
    let mut c = controller();
    let text = ";; proofpad:v1\n(defun mine (x) x)\n;; proofpad:readonly:begin\n(defun given (x) x)\n;; proofpad:readonly:end\n";
    send(&mut c, json!({"id": 1, "kind": "open", "text": text, "proofpad": true}));
    let before = c.snapshot();
    let ro = before.document.regions[1].span;
    let (id, ok, err) =
        reply(&send(&mut c, json!({"id": 2, "kind": "edit", "start": ro.start + 2, "end": ro.start + 3, "text": "x"})));
    assert_eq!((id, ok, err["code"].as_str()), (Some(2), false, Some("read-only-violation")));
    let (id, ok, err) = reply(&send(&mut c, json!({"id": 3, "kind": "edit", "start": "oops"})));
    assert_eq!((id, ok, err["code"].as_str()), (Some(3), false, Some("malformed-request")));
    let (_, _, err) = reply(&send(&mut c, json!({"id": 4, "kind": "teleport"})));
    assert_eq!(err["code"], "unknown-kind");
    assert_eq!(c.snapshot(), before);

    send(&mut c, json!({"id": 5, "kind": "admit-through", "index": 0}));
    let (_, ok, err) = reply(&send(&mut c, json!({"id": 6, "kind": "edit", "start": 1, "end": 2, "text": "x"})));
    assert!(!ok);
    assert_eq!(err["code"], "read-only-violation");
}

#[test]
fn raw_output_is_retrievable() {
    let mut c = controller();
    send(&mut c, json!({"id": 1, "kind": "open", "text": "(defthm bad nil)\n"}));
    let msgs = send(&mut c, json!({"id": 2, "kind": "admit-through", "index": 0}));
    let (summary_id, summary) = events(&msgs)
        .into_iter()
        .find_map(|e| match e {
            Event::Summary { summary_id, summary, .. } => Some((summary_id, summary)),
            _ => None,
        })
        .unwrap();
    let (_, ok, result) = reply(&send(&mut c, json!({"id": 3, "kind": "get-raw-output", "summary_id": summary_id})));
    assert!(ok);
    let raw = result["raw"].as_str().unwrap();
    let sub = c.session().unwrap().forms()[0].submission.clone().unwrap();
    assert_eq!(raw, sub.result);
    assert_eq!(summary.raw_len, raw.len());
}

#[test]
fn repl_moves_events_and_evaluates_expressions() {
    let mut c = controller();
    send(&mut c, json!({"id": 1, "kind": "open", "text": ""}));
    let msgs = send(&mut c, json!({"id": 2, "kind": "repl-submit", "input": "(defun g (x) x) (+ 1 2)"}));
    assert_eq!(reply(&msgs).2["routed"], 2);
    assert_eq!(c.snapshot().document.text, "(defun g (x) x)\n");
    let submissions: Vec<String> = c
        .backend()
        .unwrap()
        .probe()
        .unwrap()
        .submissions()
        .into_iter()
        .filter(|s| !s.contains(proofpad_core::backend::SENTINEL_PREFIX))
        .collect();
    assert_eq!(submissions.len(), 1, "{submissions:?}");
    assert!(submissions[0].starts_with("(+ 1 2)"));
    assert!(events(&msgs).iter().any(|e| matches!(e, Event::DocumentChanged { .. })));
}

#[test]
fn hover_lint_indent_and_properties() {
    let mut c = controller();
    let src =
        "(defun f (x)\nx)\n(defproperty p (xs :value (random-list-of (random-natural))) (true-listp xs))\n(cons 1)\n";
    send(&mut c, json!({"id": 1, "kind": "open", "text": src}));
    let (_, _, plan) = reply(&send(&mut c, json!({"id": 2, "kind": "hover-preview", "index": 1})));
    assert_eq!(plan, json!({"kind": "admit-through", "indices": [0, 1]}));
    let (_, _, lint) = reply(&send(&mut c, json!({"id": 3, "kind": "lint"})));
    assert_eq!(lint["diagnostics"][0]["code"], "arity-mismatch");
    let (_, _, report) =
        reply(&send(&mut c, json!({"id": 4, "kind": "run-property", "index": 1, "trials": 20, "seed": 3})));
    assert_eq!((report["status"].as_str(), report["passes"].as_u64()), (Some("passed"), Some(20)));
    let (_, ok, ind) = reply(&send(&mut c, json!({"id": 5, "kind": "indent", "apply": true})));
    assert!(ok);
    assert!(ind["text"].as_str().unwrap().starts_with("(defun f (x)\n  x)"));
    assert_eq!(c.snapshot().document.text, ind["text"].as_str().unwrap());
}

/// A harness client: applies the snapshot, then events, to its own model.
#[derive(Default)]
struct Mirror {
    snapshot: Option<Snapshot>,
}

impl Mirror {
    fn apply(&mut self, m: &ServerMessage) {
        match m {
            ServerMessage::Snapshot { snapshot } => self.snapshot = Some(snapshot.clone()),
            ServerMessage::Event { event: Event::DocumentChanged { snapshot } } => {
                self.snapshot = Some(snapshot.clone())
            }
            ServerMessage::Event { event: Event::StatusChanged { index, from, to } } => {
                let s = self.snapshot.as_mut().unwrap();
                let form: &mut FormView = &mut s.forms[*index];
                assert_eq!(form.status, *from);
                form.status = *to;
                s.proof_line = s.forms.iter().position(|f| f.status != ProofStatus::Admitted).unwrap_or(s.forms.len());
            }
            ServerMessage::Reply { result: Some(r), .. } if r.get("document").is_some() => {
                self.snapshot = Some(serde_json::from_value(r.clone()).unwrap());
            }
            _ => {}
        }
    }

    fn statuses(&self) -> Vec<ProofStatus> {
        self.snapshot.as_ref().unwrap().forms.iter().map(|f| f.status).collect()
    }
}

#[test]
fn snapshot_plus_events_reconstructs_state() {
    let mut c = controller();
    let mut mirror = Mirror::default();
    mirror.apply(&ServerMessage::Snapshot { snapshot: c.snapshot() });
    let script = [
        json!({"id": 1, "kind": "open", "text": "(defun a (x) x)\n(defthm bad nil)\n(defun c (x) x)\n"}),
        json!({"id": 2, "kind": "admit-through", "index": 2}),
        json!({"id": 3, "kind": "edit", "start": 28, "end": 31, "text": "t"}),
        json!({"id": 4, "kind": "admit-through", "index": 2}),
        json!({"id": 5, "kind": "repl-submit", "input": "(defun z (x) x)"}),
        json!({"id": 6, "kind": "undo-through", "index": 1}),
    ];
    for req in script {
        for m in send(&mut c, req) {
            mirror.apply(&m);
        }
        let truth = c.snapshot();
        assert_eq!(mirror.statuses(), truth.forms.iter().map(|f| f.status).collect::<Vec<_>>());
        assert_eq!(mirror.snapshot.as_ref().unwrap().document, truth.document);
        assert_eq!(mirror.snapshot.as_ref().unwrap().proof_line, truth.proof_line);
    }
}

#[test]
fn same_path_is_single_writer() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("defs.lisp");
    std::fs::write(&path, DEFS).unwrap();
    let registry = Registry::default();
    let mut first = Controller::new(BackendChoice::Fake, SessionConfig::default(), registry.clone());
    let mut second = Controller::new(BackendChoice::Fake, SessionConfig::default(), registry.clone());
    let p = path.display().to_string();
    assert!(reply(&send(&mut first, json!({"id": 1, "kind": "open", "path": p}))).1);
    let msgs = send(&mut second, json!({"id": 1, "kind": "open", "path": p}));
    assert!(msgs.iter().any(|m| matches!(m, ServerMessage::Rejected { .. })));
    assert_eq!(reply(&msgs).2["code"], "document-busy");
    drop(first);
    assert!(reply(&send(&mut second, json!({"id": 2, "kind": "open", "path": p}))).1);
}
