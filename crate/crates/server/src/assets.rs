//! Static files for the browser UI.

use std::path::{Component, Path, PathBuf};

/// Served at `/` when no asset directory is configured.
pub const FALLBACK_INDEX: &str = "<!doctype html>
<html>
<head><meta charset=\"utf-8\"><title>proofpad</title></head>
<body>
<p>The proofpad service is running. Connect a WebSocket client to this
address; the message format is described in docs/protocol.md.</p>
</body>
</html>
";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Asset {
    pub content_type: &'static str,
    pub body: Vec<u8>,
}

pub fn content_type(path: &Path) -> &'static str {
    match path.extension().and_then(|e| e.to_str()).unwrap_or("") {
        "html" | "htm" => "text/html; charset=utf-8",
        "js" | "mjs" => "text/javascript; charset=utf-8",
        "css" => "text/css; charset=utf-8",
        "json" | "map" => "application/json",
        "svg" => "image/svg+xml",
        "png" => "image/png",
        "ico" => "image/x-icon",
        "wasm" => "application/wasm",
        "txt" | "md" => "text/plain; charset=utf-8",
        _ => "application/octet-stream",
    }
}

/// Maps a request path onto `root`, refusing anything that would escape it.
pub fn resolve(root: &Path, request_path: &str) -> Option<PathBuf> {
    let path = request_path.split(['?', '#']).next().unwrap_or("");
    let rel = path.trim_start_matches('/');
    let rel = if rel.is_empty() || rel.ends_with('/') { format!("{rel}index.html") } else { rel.to_string() };
    let rel = Path::new(&rel);
    if rel.components().any(|c| !matches!(c, Component::Normal(_))) {
        return None;
    }
    Some(root.join(rel))
}

/// Loads the asset for `request_path`, falling back to the built-in index
/// page for `/` when there is no asset directory.
pub fn load(root: Option<&Path>, request_path: &str) -> Option<Asset> {
    match root {
        Some(root) => {
            let path = resolve(root, request_path)?;
            let body = std::fs::read(&path).ok()?;
            Some(Asset { content_type: content_type(&path), body })
        }
        None => {
            let p = request_path.split(['?', '#']).next().unwrap_or("");
            (p == "/" || p == "/index.html")
                .then(|| Asset { content_type: "text/html; charset=utf-8", body: FALLBACK_INDEX.as_bytes().to_vec() })
        }
    }
}
