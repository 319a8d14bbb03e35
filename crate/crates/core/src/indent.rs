//! Indentation for new lines and re-indentation of regions.
//!
//! Continuation lines of a form whose head has body style (`defun`, `let`,
//! ...) sit two columns right of the form's open paren. Any other form with a
//! symbol head aligns with its first argument when that argument is on the
//! head's line, and otherwise sits one column right of the open paren.
//! Tabs count to the next multiple of 8; output uses spaces only.

use crate::lex::{self, BuiltinTable, IndentStyle, Token, TokenClass};
use crate::span::Span;

const TAB_WIDTH: usize = 8;

fn advance(col: usize, ch: char) -> usize {
    if ch == '\t' {
        (col / TAB_WIDTH + 1) * TAB_WIDTH
    } else {
        col + 1
    }
}

#[derive(Debug)]
struct Frame {
    open_col: usize,
    head: Option<String>,
    head_line: usize,
    first_arg_col: Option<usize>,
    elements: usize,
}

/// Running paren-depth trace fed with token positions.
struct Tracker<'t> {
    table: &'t BuiltinTable,
    stack: Vec<Frame>,
    pending_prefix: bool,
}

impl<'t> Tracker<'t> {
    fn new(table: &'t BuiltinTable) -> Self {
        Tracker { table, stack: Vec::new(), pending_prefix: false }
    }

    fn element(&mut self, col: usize, line: usize, symbol: Option<&str>) {
        if let Some(top) = self.stack.last_mut() {
            if top.elements == 0 {
                top.head = symbol.map(str::to_string);
                top.head_line = line;
            } else if top.elements == 1 && line == top.head_line {
                top.first_arg_col = Some(col);
            }
            top.elements += 1;
        }
    }

    fn feed(&mut self, tok: &Token<'_>, col: usize, line: usize) {
        if tok.is_trivia() {
            return;
        }
        let fresh = !std::mem::replace(&mut self.pending_prefix, false);
        if tok.is_quote_prefix() {
            if fresh {
                self.element(col, line, None);
            }
            self.pending_prefix = true;
            return;
        }
        match tok.class {
            TokenClass::LParen => {
                if fresh {
                    self.element(col, line, None);
                }
                self.stack.push(Frame { open_col: col, head: None, head_line: line, first_arg_col: None, elements: 0 });
            }
            TokenClass::RParen => {
                self.stack.pop();
            }
            class => {
                if fresh {
                    let symbol = (class.is_symbolic() || class == TokenClass::Keyword).then_some(tok.text);
                    self.element(col, line, symbol);
                }
            }
        }
    }

    fn body_style(&self, head: &str) -> bool {
        match self.table.get(head) {
            Some(entry) => entry.indent == IndentStyle::Body,
            None => head.len() > 3 && head[..3].eq_ignore_ascii_case("def"),
        }
    }

    fn indent(&self) -> usize {
        let Some(top) = self.stack.last() else { return 0 };
        match &top.head {
            Some(head) if self.body_style(head) => top.open_col + 2,
            Some(_) => top.first_arg_col.unwrap_or(top.open_col + 1),
            None => top.open_col + 1,
        }
    }
}

/// Column for the line that starts right after `prefix`.
pub fn indent_for_newline(prefix: &str, table: &BuiltinTable) -> usize {
    let mut tracker = Tracker::new(table);
    let (mut line, mut col) = (0usize, 0usize);
    for tok in lex::tokenize_with(prefix, table) {
        tracker.feed(&tok, col, line);
        for ch in tok.text.chars() {
            if ch == '\n' {
                line += 1;
                col = 0;
            } else {
                col = advance(col, ch);
            }
        }
    }
    tracker.indent()
}

struct LineLayout {
    /// Byte offset where the (original) content after leading whitespace starts.
    content_start: usize,
    /// Output column of that content.
    out_col: usize,
}

/// Re-indents every line whose start falls inside `region`. Lines that begin
/// inside a multi-line string or block comment are left alone.
pub fn reindent(source: &str, region: Span, table: &BuiltinTable) -> String {
    let tokens = lex::tokenize_with(source, table);
    let mut line_starts = vec![0usize];
    line_starts.extend(source.match_indices('\n').map(|(i, _)| i + 1));
    if line_starts.last() == Some(&source.len()) && !source.is_empty() {
        line_starts.pop();
    }

    let mut tracker = Tracker::new(table);
    let mut layouts: Vec<LineLayout> = Vec::with_capacity(line_starts.len());
    let mut out = String::with_capacity(source.len());
    let mut next_tok = 0usize;
    let mut covering = 0usize; // index of a token that may cover the current line start

    for (li, &ls) in line_starts.iter().enumerate() {
        let le = line_starts.get(li + 1).copied().unwrap_or(source.len());
        let line = &source[ls..le];

        while next_tok < tokens.len() && tokens[next_tok].span.start < ls {
            let tok = &tokens[next_tok];
            if !tok.is_trivia() {
                let tline = line_starts.partition_point(|&s| s <= tok.span.start) - 1;
                let layout = &layouts[tline];
                let col = source[layout.content_start..tok.span.start].chars().fold(layout.out_col, advance);
                tracker.feed(tok, col, tline);
            } else {
                tracker.feed(tok, 0, 0);
            }
            next_tok += 1;
        }

        while covering < tokens.len() && tokens[covering].span.end <= ls {
            covering += 1;
        }
        let inside_token = covering < tokens.len()
            && tokens[covering].span.start < ls
            && tokens[covering].class != TokenClass::Whitespace;

        let in_region = region.start <= ls && ls < region.end;
        if !in_region || inside_token {
            layouts.push(LineLayout { content_start: ls, out_col: 0 });
            out.push_str(line);
            continue;
        }

        let ws_len = line.len() - line.trim_start_matches([' ', '\t']).len();
        let rest = &line[ws_len..];
        let blank = rest.trim_end_matches(['\n', '\r']).is_empty();
        let column = if blank { 0 } else { tracker.indent() };
        layouts.push(LineLayout { content_start: ls + ws_len, out_col: column });
        out.extend(std::iter::repeat_n(' ', column));
        out.push_str(rest);
    }
    out
}

pub fn reindent_all(source: &str, table: &BuiltinTable) -> String {
    reindent(source, Span::new(0, source.len().max(1)), table)
}
