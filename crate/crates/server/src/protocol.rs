//! Wire types. Every message is one JSON object in a WebSocket text frame.

use proofpad_core::docmodel::Document;
use proofpad_core::lint::Diagnostic;
use proofpad_core::output::{Overall, StructuredMessage, Summary};
use proofpad_core::repl::ReplEntry;
use proofpad_core::session::{ProofStatus, Session};
use proofpad_core::sexp::FormKind;
use proofpad_core::Span;
use serde::{Deserialize, Serialize};
use serde_json::Value;

pub const REQUEST_KINDS: [&str; 10] = [
    "open",
    "edit",
    "admit-through",
    "undo-through",
    "hover-preview",
    "repl-submit",
    "run-property",
    "lint",
    "indent",
    "get-raw-output",
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Request {
    /// Opens `path` from disk, or `text` as an unsaved document.
    Open {
        #[serde(default)]
        path: Option<String>,
        #[serde(default)]
        text: Option<String>,
        #[serde(default)]
        proofpad: bool,
    },
    Edit {
        start: usize,
        end: usize,
        text: String,
    },
    AdmitThrough {
        index: usize,
    },
    UndoThrough {
        index: usize,
    },
    HoverPreview {
        index: usize,
    },
    ReplSubmit {
        input: String,
    },
    RunProperty {
        index: usize,
        #[serde(default)]
        trials: Option<usize>,
        #[serde(default)]
        seed: Option<u64>,
    },
    Lint {},
    Indent {
        #[serde(default)]
        start: Option<usize>,
        #[serde(default)]
        end: Option<usize>,
        #[serde(default)]
        apply: bool,
    },
    GetRawOutput {
        summary_id: u64,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
}

impl ErrorBody {
    pub fn new(code: &str, message: impl Into<String>) -> ErrorBody {
        ErrorBody { code: code.to_string(), message: message.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FormView {
    pub span: Span,
    pub head: String,
    pub kind: FormKind,
    pub status: ProofStatus,
    pub events: usize,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Snapshot {
    pub path: Option<String>,
    pub document: Document,
    pub forms: Vec<FormView>,
    pub proof_line: usize,
}

impl Snapshot {
    pub fn empty() -> Snapshot {
        Snapshot { path: None, document: Document::plain(""), forms: Vec::new(), proof_line: 0 }
    }

    pub fn of(path: Option<String>, document: &Document, session: &Session) -> Snapshot {
        let forms = session
            .forms()
            .iter()
            .map(|f| FormView {
                span: f.form.span,
                head: f.form.head.clone(),
                kind: f.form.kind,
                status: f.status,
                events: f.events,
                error: f.error.clone(),
            })
            .collect();
        Snapshot { path, document: document.clone(), forms, proof_line: session.proof_line() }
    }
}

/// A summary without its raw text; fetch that with `get-raw-output`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SummaryView {
    pub items: Vec<StructuredMessage>,
    pub overall: Overall,
    pub raw_len: usize,
}

impl From<&Summary> for SummaryView {
    fn from(s: &Summary) -> Self {
        SummaryView { items: s.items.clone(), overall: s.overall, raw_len: s.raw.len() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Event {
    StatusChanged { index: usize, from: ProofStatus, to: ProofStatus },
    Diagnostics { diagnostics: Vec<Diagnostic> },
    ReplResult { entry: ReplEntry, summary_id: Option<u64> },
    Summary { summary_id: u64, index: Option<usize>, summary: SummaryView },
    DocumentChanged { snapshot: Snapshot },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum ServerMessage {
    Snapshot {
        snapshot: Snapshot,
    },
    Reply {
        id: Option<u64>,
        ok: bool,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        result: Option<Value>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        error: Option<ErrorBody>,
    },
    Event {
        event: Event,
    },
    Rejected {
        reason: String,
    },
}

impl ServerMessage {
    pub fn ok(id: Option<u64>, result: Value) -> ServerMessage {
        ServerMessage::Reply { id, ok: true, result: Some(result), error: None }
    }

    pub fn err(id: Option<u64>, error: ErrorBody) -> ServerMessage {
        ServerMessage::Reply { id, ok: false, result: None, error: Some(error) }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("server messages always serialize")
    }
}

/// Splits a raw frame into its request id and request. The id is recovered
/// whenever the frame is a JSON object, so error replies can carry it.
pub fn decode(frame: &str) -> (Option<u64>, Result<Request, ErrorBody>) {
    let value: Value = match serde_json::from_str(frame) {
        Ok(v) => v,
        Err(e) => return (None, Err(ErrorBody::new("malformed-request", e.to_string()))),
    };
    let Value::Object(mut map) = value else {
        return (None, Err(ErrorBody::new("malformed-request", "a request must be a JSON object")));
    };
    let id = map.remove("id").and_then(|v| v.as_u64());
    let kind = map.get("kind").and_then(Value::as_str).map(str::to_string);
    match kind {
        None => (id, Err(ErrorBody::new("malformed-request", "missing request kind"))),
        Some(k) if !REQUEST_KINDS.contains(&k.as_str()) => {
            (id, Err(ErrorBody::new("unknown-kind", format!("unknown request kind {k}"))))
        }
        Some(_) => (
            id,
            serde_json::from_value(Value::Object(map)).map_err(|e| ErrorBody::new("malformed-request", e.to_string())),
        ),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decoding() {
        let (id, req) = decode(r#"{"id": 4, "kind": "admit-through", "index": 2}"#);
        assert_eq!((id, req.unwrap()), (Some(4), Request::AdmitThrough { index: 2 }));
        let (id, req) = decode(r#"{"id": 5, "kind": "fly"}"#);
        assert_eq!((id, req.unwrap_err().code.as_str()), (Some(5), "unknown-kind"));
        let (id, req) = decode(r#"{"id": 6, "kind": "edit", "start": "x"}"#);
        assert_eq!((id, req.unwrap_err().code.as_str()), (Some(6), "malformed-request"));
        assert_eq!(decode("not json").1.unwrap_err().code, "malformed-request");
        assert_eq!(decode(r#"{"kind": "lint"}"#).1.unwrap(), Request::Lint {});
    }

    #[test]
    fn message_shapes() {
        let m = ServerMessage::Event {
            event: Event::StatusChanged { index: 0, from: ProofStatus::Queued, to: ProofStatus::InProgress },
        };
        let v: Value = serde_json::from_str(&m.to_json()).unwrap();
        assert_eq!(v["type"], "event");
        assert_eq!(v["event"]["kind"], "status-changed");
        assert_eq!(v["event"]["to"], "in-progress");
        let back: ServerMessage = serde_json::from_value(v).unwrap();
        assert_eq!(back, m);
    }
}
