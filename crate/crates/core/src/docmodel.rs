//! Plain source files and the `.proofpad` format.
//!
//! ```text
//! ;; proofpad:v1
//! (defun student-code ...)
//! ;; proofpad:readonly:begin
//! (check-expect (sum nil) 0)
//! ;; proofpad:readonly:end
//! ```
//!
//! The header line is not part of the document text. Marker lines are kept in
//! the text, inside the read-only region they delimit, so every byte still
//! reaches ACL2 as an ordinary comment.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::span::Span;

pub const HEADER: &str = ";; proofpad:v1";
pub const READONLY_BEGIN: &str = ";; proofpad:readonly:begin";
pub const READONLY_END: &str = ";; proofpad:readonly:end";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Access {
    ReadOnly,
    ReadWrite,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Region {
    pub span: Span,
    pub access: Access,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Origin {
    Plain,
    Proofpad,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub text: String,
    /// Disjoint, ordered and covering `text`.
    pub regions: Vec<Region>,
    pub origin: Origin,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DocError {
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("malformed .proofpad file, line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("edit at {0:?} touches a read-only region")]
    ReadOnlyViolation(Span),
    #[error("edit span {0:?} is outside the document")]
    InvalidSpan(Span),
}

impl DocError {
    pub fn code(&self) -> &'static str {
        match self {
            DocError::Io { .. } => "io-error",
            DocError::Malformed { .. } => "malformed-proofpad",
            DocError::ReadOnlyViolation(_) => "read-only-violation",
            DocError::InvalidSpan(_) => "invalid-span",
        }
    }
}

fn io_error(path: &Path, e: std::io::Error) -> DocError {
    DocError::Io { path: path.display().to_string(), message: e.to_string() }
}

fn is_marker(line: &str, marker: &str) -> bool {
    line.trim_end() == marker
}

impl Document {
    pub fn plain(text: &str) -> Document {
        Document {
            text: text.to_string(),
            regions: vec![Region { span: Span::new(0, text.len()), access: Access::ReadWrite }],
            origin: Origin::Plain,
        }
    }

    /// Parses file contents. `.proofpad` contents start with the header line.
    pub fn parse(contents: &str, origin: Origin) -> Result<Document, DocError> {
        if origin == Origin::Plain {
            return Ok(Document::plain(contents));
        }
        let (first, body) = match contents.split_once('\n') {
            Some((first, rest)) => (first, rest),
            None => (contents, ""),
        };
        if !is_marker(first, HEADER) {
            return Err(DocError::Malformed { line: 1, message: format!("expected the header `{HEADER}`") });
        }
        let mut regions = Vec::new();
        let mut push = |span: Span, access| {
            if !span.is_empty() {
                regions.push(Region { span, access });
            }
        };
        let mut offset = 0;
        let mut region_start = 0;
        let mut open: Option<usize> = None;
        for (n, line) in body.split_inclusive('\n').enumerate() {
            let line_no = n + 2;
            if is_marker(line, READONLY_BEGIN) {
                if let Some(at) = open {
                    return Err(DocError::Malformed {
                        line: line_no,
                        message: format!("read-only block opened at line {at} is still open"),
                    });
                }
                push(Span::new(region_start, offset), Access::ReadWrite);
                region_start = offset;
                open = Some(line_no);
            } else if is_marker(line, READONLY_END) {
                if open.take().is_none() {
                    return Err(DocError::Malformed { line: line_no, message: "end marker without a begin".into() });
                }
                push(Span::new(region_start, offset + line.len()), Access::ReadOnly);
                region_start = offset + line.len();
            }
            offset += line.len();
        }
        if let Some(at) = open {
            return Err(DocError::Malformed { line: at, message: "read-only block is never closed".into() });
        }
        push(Span::new(region_start, body.len()), Access::ReadWrite);
        if regions.is_empty() {
            regions.push(Region { span: Span::new(0, 0), access: Access::ReadWrite });
        }
        Ok(Document { text: body.to_string(), regions, origin })
    }

    /// Reads a file; the `.proofpad` extension selects the region format.
    pub fn load(path: &Path) -> Result<Document, DocError> {
        let contents = fs::read_to_string(path).map_err(|e| io_error(path, e))?;
        let origin = if path.extension().is_some_and(|e| e == "proofpad") { Origin::Proofpad } else { Origin::Plain };
        Document::parse(&contents, origin)
    }

    /// The exact bytes `save` writes.
    pub fn to_file_contents(&self) -> String {
        match self.origin {
            Origin::Plain => self.text.clone(),
            Origin::Proofpad => format!("{HEADER}\n{}", self.text),
        }
    }

    pub fn save(&self, path: &Path) -> Result<(), DocError> {
        fs::write(path, self.to_file_contents()).map_err(|e| io_error(path, e))
    }

    pub fn read_only_spans(&self) -> impl Iterator<Item = Span> + '_ {
        self.regions.iter().filter(|r| r.access == Access::ReadOnly).map(|r| r.span)
    }

    /// Checks that `span` lies entirely inside one read-write region.
    pub fn check_edit(&self, span: Span) -> Result<(), DocError> {
        if span.start > span.end
            || span.end > self.text.len()
            || !self.text.is_char_boundary(span.start)
            || !self.text.is_char_boundary(span.end)
        {
            return Err(DocError::InvalidSpan(span));
        }
        if self.regions.iter().any(|r| r.access == Access::ReadWrite && r.span.encloses(span)) {
            Ok(())
        } else {
            Err(DocError::ReadOnlyViolation(span))
        }
    }

    /// Replaces `span` with `replacement`; later regions shift by the delta.
    pub fn apply_edit(&self, span: Span, replacement: &str) -> Result<Document, DocError> {
        self.check_edit(span)?;
        let delta = replacement.len() as isize - span.len() as isize;
        let mut text = self.text.clone();
        text.replace_range(span.start..span.end, replacement);
        let mut grown = false;
        let regions = self
            .regions
            .iter()
            .map(|r| {
                if !grown && r.access == Access::ReadWrite && r.span.encloses(span) {
                    grown = true;
                    Region { span: Span::new(r.span.start, (r.span.end as isize + delta) as usize), access: r.access }
                } else if grown {
                    Region { span: r.span.shifted(delta), access: r.access }
                } else {
                    *r
                }
            })
            .collect();
        Ok(Document { text, regions, origin: self.origin })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SUM: &str = ";; proofpad:v1\n(defun sum (xs)\n  (if (endp xs) 0 (+ (car xs) (sum (cdr xs)))))\n;; proofpad:readonly:begin\n(check-expect (sum nil) 0)\n(check-expect (sum '(1 2 3)) 6)\n;; proofpad:readonly:end\n; your notes\n";

    fn accesses(d: &Document) -> Vec<Access> {
        d.regions.iter().map(|r| r.access).collect()
    }

    #[test]
    fn loads_regions() {
        let d = Document::parse(SUM, Origin::Proofpad).unwrap();
        assert_eq!(accesses(&d), vec![Access::ReadWrite, Access::ReadOnly, Access::ReadWrite]);
        let ro = d.read_only_spans().next().unwrap();
        assert!(ro.slice(&d.text).starts_with(READONLY_BEGIN));
        assert!(ro.slice(&d.text).ends_with("end\n"));
        assert_eq!(d.to_file_contents(), SUM);
        assert_eq!(accesses(&Document::plain("(+ 1 2)")), vec![Access::ReadWrite]);
    }

    #[test]
    fn malformed_markers() {
        for bad in [
            ";; proofpad:v1\n;; proofpad:readonly:begin\n(a)\n",
            ";; proofpad:v1\n;; proofpad:readonly:end\n",
            ";; proofpad:v1\n;; proofpad:readonly:begin\n;; proofpad:readonly:begin\n",
            "(defun f (x) x)\n",
        ] {
            assert_eq!(Document::parse(bad, Origin::Proofpad).unwrap_err().code(), "malformed-proofpad", "{bad}");
        }
    }

    #[test]
    fn edits() {
        let d = Document::parse(SUM, Origin::Proofpad).unwrap();
        let ro = d.read_only_spans().next().unwrap();
        assert_eq!(d.apply_edit(Span::new(ro.start + 3, ro.start + 4), "x").unwrap_err().code(), "read-only-violation");
        assert_eq!(d.apply_edit(Span::new(ro.start - 2, ro.start + 1), "").unwrap_err().code(), "read-only-violation");
        let e = d.apply_edit(Span::new(0, 0), "; hi\n").unwrap();
        assert_eq!(e.read_only_spans().next().unwrap().start, ro.start + 5);
        assert_eq!(Document::parse(&e.to_file_contents(), Origin::Proofpad).unwrap(), e);
        assert_eq!(d.apply_edit(Span::new(3, 3), "").unwrap(), d);
    }

    #[test]
    fn empty_round_trip() {
        let d = Document::parse("", Origin::Plain).unwrap();
        let p = Document { origin: Origin::Proofpad, ..d };
        assert_eq!(p.to_file_contents(), ";; proofpad:v1\n");
        assert_eq!(Document::parse(&p.to_file_contents(), Origin::Proofpad).unwrap(), p);
    }

    #[test]
    fn io_errors() {
        let dir = tempfile::tempdir().unwrap();
        let d = Document::plain("x");
        assert_eq!(d.save(&dir.path().join("missing/dir/f.lisp")).unwrap_err().code(), "io-error");
        assert_eq!(Document::load(&dir.path().join("nope.lisp")).unwrap_err().code(), "io-error");
        let path = dir.path().join("sum.proofpad");
        fs::write(&path, SUM).unwrap();
        let loaded = Document::load(&path).unwrap();
        loaded.save(&path).unwrap();
        assert_eq!(fs::read_to_string(&path).unwrap(), SUM);
    }
}
