use std::io::{Read, Write};
use std::net::TcpStream;

use proofpad_server::{ServeConfig, Server, ServerMessage};
use serde_json::{json, Value};
use tungstenite::Message;

fn start(config: ServeConfig) -> u16 {
    let server = Server::bind(ServeConfig { port: 0, ..config }).unwrap();
    let port = server.local_addr().unwrap().port();
    server.spawn();
    port
}

type Client = tungstenite::WebSocket<tungstenite::stream::MaybeTlsStream<TcpStream>>;

fn connect(port: u16) -> Client {
    tungstenite::connect(format!("ws://127.0.0.1:{port}/")).unwrap().0
}

fn next(ws: &mut Client) -> ServerMessage {
    loop {
        if let Message::Text(t) = ws.read().unwrap() {
            return serde_json::from_str(&t).unwrap();
        }
    }
}

fn request(ws: &mut Client, req: Value) -> Vec<ServerMessage> {
    ws.send(Message::Text(req.to_string())).unwrap();
    let mut out = Vec::new();
    loop {
        let m = next(ws);
        let done = matches!(m, ServerMessage::Reply { .. });
        out.push(m);
        if done {
            return out;
        }
    }
}

#[test]
fn snapshot_on_connect_and_request_round_trip() {
    let port = start(ServeConfig::default());
    let mut ws = connect(port);
    assert!(matches!(next(&mut ws), ServerMessage::Snapshot { .. }));
    let msgs = request(&mut ws, json!({"id": 9, "kind": "open", "text": "(defun f (x) x)\n(+ 1 2)\n"}));
    let Some(ServerMessage::Reply { id, ok, result, .. }) = msgs.last() else { panic!() };
    assert_eq!((*id, *ok), (Some(9), true));
    assert_eq!(result.as_ref().unwrap()["forms"].as_array().unwrap().len(), 2);
    let msgs = request(&mut ws, json!({"id": 10, "kind": "admit-through", "index": 1}));
    let changes = msgs.iter().filter(|m| matches!(m, ServerMessage::Event { .. })).count();
    assert!(changes >= 6);
}

#[test]
fn second_client_on_same_file_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("a.lisp");
    std::fs::write(&path, "(defun f (x) x)\n").unwrap();
    let port = start(ServeConfig::default());
    let (mut a, mut b) = (connect(port), connect(port));
    next(&mut a);
    next(&mut b);
    let open = json!({"id": 1, "kind": "open", "path": path.display().to_string()});
    request(&mut a, open.clone());
    let msgs = request(&mut b, open);
    assert!(matches!(msgs[0], ServerMessage::Rejected { .. }));
}

#[test]
fn static_assets_and_port_in_use() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("index.html"), "<p>ui</p>").unwrap();
    std::fs::write(dir.path().join("app.js"), "console.log(1)").unwrap();
    let port = start(ServeConfig { static_dir: Some(dir.path().to_path_buf()), ..ServeConfig::default() });
    let get = |path: &str| {
        let mut s = TcpStream::connect(("127.0.0.1", port)).unwrap();
        write!(s, "GET {path} HTTP/1.1\r\nHost: localhost\r\n\r\n").unwrap();
        let mut out = String::new();
        s.read_to_string(&mut out).unwrap();
        out
    };
    let index = get("/");
    assert!(index.starts_with("HTTP/1.1 200") && index.ends_with("<p>ui</p>"));
    assert!(get("/app.js").contains("text/javascript"));
    assert!(get("/../secret").starts_with("HTTP/1.1 404"));

    let err = Server::bind(ServeConfig { port, ..ServeConfig::default() }).err().unwrap();
    assert_eq!(err.code(), "port-in-use");
}
