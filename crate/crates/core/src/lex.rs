//! Tokenizer for ACL2 source.
//!
//! The lexer is a single forward pass over the input. Every byte of the input
//! ends up in exactly one token, so joining the lexemes reproduces the source.
//! Malformed input produces [`TokenClass::Error`] tokens instead of failing.
//!
//! Symbols are looked up (case-insensitively) in a [`BuiltinTable`] so that
//! events such as `defun` and ordinary functions such as `cons` get distinct
//! classes.

use std::collections::HashMap;
use std::fmt;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::span::Span;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TokenClass {
    LParen,
    RParen,
    Event,
    BuiltinFunction,
    BuiltinMacro,
    Keyword,
    Symbol,
    Number,
    Rational,
    Character,
    String,
    Comment,
    Whitespace,
    Error,
}

impl TokenClass {
    /// Classes that name a symbol (including the quote punctuation).
    pub fn is_symbolic(self) -> bool {
        matches!(self, TokenClass::Event | TokenClass::BuiltinFunction | TokenClass::BuiltinMacro | TokenClass::Symbol)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Token<'a> {
    pub class: TokenClass,
    pub span: Span,
    pub text: &'a str,
}

impl Token<'_> {
    /// Whitespace and comments.
    pub fn is_trivia(&self) -> bool {
        matches!(self.class, TokenClass::Whitespace | TokenClass::Comment)
    }

    /// `'`, `` ` ``, `,` and `,@` attach to the datum that follows them.
    pub fn is_quote_prefix(&self) -> bool {
        self.class == TokenClass::Symbol && matches!(self.text, "'" | "`" | "," | ",@")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BuiltinKind {
    Event,
    Function,
    Macro,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum IndentStyle {
    Body,
    Call,
}

/// Accepted argument counts. `max == None` means unbounded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Arity {
    pub min: usize,
    pub max: Option<usize>,
}

impl Arity {
    pub const fn exact(n: usize) -> Self {
        Arity { min: n, max: Some(n) }
    }

    pub fn accepts(&self, n: usize) -> bool {
        n >= self.min && self.max.is_none_or(|max| n <= max)
    }
}

impl fmt::Display for Arity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.max {
            Some(max) if max == self.min => write!(f, "{}", self.min),
            Some(max) => write!(f, "{} to {}", self.min, max),
            None => write!(f, "at least {}", self.min),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BuiltinEntry {
    pub kind: BuiltinKind,
    pub arity: Arity,
    pub indent: IndentStyle,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TableError {
    #[error("line {line}: expected 5 tab-separated fields")]
    FieldCount { line: usize },
    #[error("line {line}: unknown {field} `{value}`")]
    BadField { line: usize, field: &'static str, value: String },
    #[error("line {line}: duplicate entry `{name}`")]
    Duplicate { line: usize, name: String },
    #[error("line {line}: min arity exceeds max arity")]
    ArityOrder { line: usize },
}

/// Known ACL2 names with their kind, arity and indentation style.
#[derive(Debug, Clone, Default)]
pub struct BuiltinTable {
    entries: HashMap<String, BuiltinEntry>,
}

static STANDARD_TABLE_SOURCE: &str = include_str!("../data/builtins.tsv");

impl BuiltinTable {
    /// The table shipped with the crate.
    pub fn standard() -> &'static BuiltinTable {
        static TABLE: OnceLock<BuiltinTable> = OnceLock::new();
        TABLE.get_or_init(|| BuiltinTable::parse(STANDARD_TABLE_SOURCE).expect("bundled builtin table is well formed"))
    }

    /// Parses the tab-separated table format:
    /// `name kind min-arity max-arity indent-style`, with `*` for an unbounded
    /// maximum. Blank lines and lines starting with `#` are skipped.
    pub fn parse(src: &str) -> Result<Self, TableError> {
        let mut entries = HashMap::new();
        for (idx, raw) in src.lines().enumerate() {
            let line = idx + 1;
            if raw.trim().is_empty() || raw.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = raw.split('\t').collect();
            if fields.len() != 5 {
                return Err(TableError::FieldCount { line });
            }
            let bad = |field, value: &str| TableError::BadField { line, field, value: value.to_string() };
            let name = fields[0].to_ascii_lowercase();
            let kind = match fields[1] {
                "event" => BuiltinKind::Event,
                "function" => BuiltinKind::Function,
                "macro" => BuiltinKind::Macro,
                other => return Err(bad("kind", other)),
            };
            let min: usize = fields[2].parse().map_err(|_| bad("min-arity", fields[2]))?;
            let max = match fields[3] {
                "*" => None,
                n => Some(n.parse::<usize>().map_err(|_| bad("max-arity", n))?),
            };
            if max.is_some_and(|max| max < min) {
                return Err(TableError::ArityOrder { line });
            }
            let indent = match fields[4] {
                "body" => IndentStyle::Body,
                "call" => IndentStyle::Call,
                other => return Err(bad("indent-style", other)),
            };
            let entry = BuiltinEntry { kind, arity: Arity { min, max }, indent };
            if entries.insert(name.clone(), entry).is_some() {
                return Err(TableError::Duplicate { line, name });
            }
        }
        Ok(BuiltinTable { entries })
    }

    pub fn get(&self, name: &str) -> Option<&BuiltinEntry> {
        if name.bytes().any(|b| b.is_ascii_uppercase()) {
            self.entries.get(&name.to_ascii_lowercase())
        } else {
            self.entries.get(name)
        }
    }

    pub fn kind(&self, name: &str) -> Option<BuiltinKind> {
        self.get(name).map(|e| e.kind)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }
}

/// Maps a symbol name to its token class.
pub fn classify(name: &str, table: &BuiltinTable) -> TokenClass {
    match table.kind(name) {
        Some(BuiltinKind::Event) => TokenClass::Event,
        Some(BuiltinKind::Function) => TokenClass::BuiltinFunction,
        Some(BuiltinKind::Macro) => TokenClass::BuiltinMacro,
        None => TokenClass::Symbol,
    }
}

/// Tokenizes with the standard builtin table.
pub fn tokenize(source: &str) -> Vec<Token<'_>> {
    tokenize_with(source, BuiltinTable::standard())
}

pub fn tokenize_with<'a>(source: &'a str, table: &BuiltinTable) -> Vec<Token<'a>> {
    let mut lexer = Lexer { src: source, bytes: source.as_bytes(), pos: 0, table, out: Vec::new() };
    lexer.run();
    lexer.out
}

const CHARACTER_NAMES: &[&str] = &["space", "newline", "tab", "page", "rubout", "return", "linefeed", "backspace"];

fn is_whitespace(b: u8) -> bool {
    matches!(b, b' ' | b'\t' | b'\n' | b'\r' | 0x0c)
}

fn is_terminator(b: u8) -> bool {
    is_whitespace(b) || matches!(b, b'(' | b')' | b'"' | b';' | b'\'' | b'`' | b',')
}

struct Lexer<'a, 't> {
    src: &'a str,
    bytes: &'a [u8],
    pos: usize,
    table: &'t BuiltinTable,
    out: Vec<Token<'a>>,
}

impl<'a> Lexer<'a, '_> {
    fn run(&mut self) {
        while self.pos < self.bytes.len() {
            let start = self.pos;
            let class = self.step();
            debug_assert!(self.pos > start);
            self.push(class, start);
        }
    }

    fn push(&mut self, class: TokenClass, start: usize) {
        self.out.push(Token { class, span: Span::new(start, self.pos), text: &self.src[start..self.pos] });
    }

    fn peek(&self, ahead: usize) -> Option<u8> {
        self.bytes.get(self.pos + ahead).copied()
    }

    /// Advances past one full UTF-8 scalar.
    fn bump_char(&mut self) {
        let ch = self.src[self.pos..].chars().next().expect("not at end");
        self.pos += ch.len_utf8();
    }

    fn step(&mut self) -> TokenClass {
        let b = self.bytes[self.pos];
        match b {
            _ if is_whitespace(b) => {
                while self.peek(0).is_some_and(is_whitespace) {
                    self.pos += 1;
                }
                TokenClass::Whitespace
            }
            b'(' => {
                self.pos += 1;
                TokenClass::LParen
            }
            b')' => {
                self.pos += 1;
                TokenClass::RParen
            }
            b';' => {
                while self.peek(0).is_some_and(|b| b != b'\n') {
                    self.pos += 1;
                }
                TokenClass::Comment
            }
            b'"' => self.string(),
            b'\'' | b'`' => {
                self.pos += 1;
                TokenClass::Symbol
            }
            b',' => {
                self.pos += 1;
                if self.peek(0) == Some(b'@') {
                    self.pos += 1;
                }
                TokenClass::Symbol
            }
            b'#' => self.dispatch(),
            _ => {
                let start = self.pos;
                if !self.constituent_run() {
                    return TokenClass::Error;
                }
                self.atom(&self.src[start..self.pos])
            }
        }
    }

    fn string(&mut self) -> TokenClass {
        self.pos += 1;
        while let Some(b) = self.peek(0) {
            match b {
                b'\\' => {
                    self.pos += 1;
                    if self.pos < self.bytes.len() {
                        self.bump_char();
                    }
                }
                b'"' => {
                    self.pos += 1;
                    return TokenClass::String;
                }
                _ => self.bump_char(),
            }
        }
        TokenClass::Error
    }

    /// Consumes symbol constituents, honoring `|...|` escapes. Returns false if
    /// an escape is left open (the run then extends to end of input).
    fn constituent_run(&mut self) -> bool {
        while let Some(b) = self.peek(0) {
            if b == b'|' {
                self.pos += 1;
                loop {
                    match self.peek(0) {
                        None => return false,
                        Some(b'|') => {
                            self.pos += 1;
                            break;
                        }
                        Some(_) => self.bump_char(),
                    }
                }
            } else if is_terminator(b) {
                break;
            } else {
                self.bump_char();
            }
        }
        true
    }

    fn dispatch(&mut self) -> TokenClass {
        let start = self.pos;
        self.pos += 1;
        match self.peek(0) {
            Some(b'\\') => {
                self.pos += 1;
                if self.pos >= self.bytes.len() {
                    return TokenClass::Error;
                }
                let first = self.src[self.pos..].chars().next().expect("not at end");
                self.bump_char();
                if first.is_alphabetic() {
                    if !self.constituent_run() {
                        return TokenClass::Error;
                    }
                    let name = &self.src[start + 2..self.pos];
                    if name.chars().count() > 1 && !CHARACTER_NAMES.iter().any(|n| n.eq_ignore_ascii_case(name)) {
                        return TokenClass::Error;
                    }
                }
                TokenClass::Character
            }
            Some(b'|') => {
                self.pos += 1;
                let mut depth = 1usize;
                while depth > 0 {
                    match (self.peek(0), self.peek(1)) {
                        (None, _) => return TokenClass::Error,
                        (Some(b'|'), Some(b'#')) => {
                            depth -= 1;
                            self.pos += 2;
                        }
                        (Some(b'#'), Some(b'|')) => {
                            depth += 1;
                            self.pos += 2;
                        }
                        _ => self.bump_char(),
                    }
                }
                TokenClass::Comment
            }
            Some(r @ (b'b' | b'B' | b'o' | b'O' | b'x' | b'X')) => {
                self.pos += 1;
                let digits_start = self.pos;
                if !self.constituent_run() {
                    return TokenClass::Error;
                }
                let radix = match r.to_ascii_lowercase() {
                    b'b' => 2,
                    b'o' => 8,
                    _ => 16,
                };
                radix_number(&self.src[digits_start..self.pos], radix).unwrap_or(TokenClass::Error)
            }
            Some(b) if !is_whitespace(b) => {
                self.bump_char();
                self.constituent_run();
                TokenClass::Error
            }
            _ => TokenClass::Error,
        }
    }

    fn atom(&self, text: &str) -> TokenClass {
        if let Some(class) = decimal_number(text) {
            return class;
        }
        if text.starts_with(':') && text.len() > 1 {
            return TokenClass::Keyword;
        }
        classify(text, self.table)
    }
}

fn split_sign(text: &str) -> &str {
    text.strip_prefix(['+', '-']).unwrap_or(text)
}

fn all_digits(s: &str, radix: u32) -> bool {
    !s.is_empty() && s.chars().all(|c| c.is_digit(radix))
}

/// Integers (optionally with a trailing decimal point), ratios, and
/// float-looking text, which ACL2 rejects.
fn decimal_number(text: &str) -> Option<TokenClass> {
    let body = split_sign(text);
    if body.is_empty() || !body.starts_with(|c: char| c.is_ascii_digit() || c == '.') {
        return None;
    }
    if all_digits(body.strip_suffix('.').unwrap_or(body), 10) {
        return Some(TokenClass::Number);
    }
    if let Some((num, den)) = body.split_once('/') {
        if all_digits(num, 10) && all_digits(den, 10) {
            return Some(if den.bytes().all(|b| b == b'0') { TokenClass::Error } else { TokenClass::Rational });
        }
        return None;
    }
    let (mantissa, exponent) = match body.find(['e', 'E']) {
        Some(i) => (&body[..i], Some(&body[i + 1..])),
        None => (body, None),
    };
    let mantissa_ok = match mantissa.split_once('.') {
        Some((int, frac)) => {
            (int.is_empty() || all_digits(int, 10))
                && (frac.is_empty() || all_digits(frac, 10))
                && !(int.is_empty() && frac.is_empty())
        }
        None => all_digits(mantissa, 10) && exponent.is_some(),
    };
    let exponent_ok = exponent.is_none_or(|e| all_digits(split_sign(e), 10));
    (mantissa_ok && exponent_ok).then_some(TokenClass::Error)
}

fn radix_number(text: &str, radix: u32) -> Option<TokenClass> {
    let body = split_sign(text);
    match body.split_once('/') {
        None => all_digits(body, radix).then_some(TokenClass::Number),
        Some((num, den)) => (all_digits(num, radix) && all_digits(den, radix) && den.chars().any(|c| c != '0'))
            .then_some(TokenClass::Rational),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use TokenClass::*;

    fn classes(src: &str) -> Vec<(TokenClass, &str)> {
        tokenize(src).into_iter().map(|t| (t.class, t.text)).collect()
    }

    fn significant(src: &str) -> Vec<(TokenClass, &str)> {
        tokenize(src).into_iter().filter(|t| t.class != Whitespace).map(|t| (t.class, t.text)).collect()
    }

    #[test]
    fn defun_stream() {
        assert_eq!(
            classes("(defun f (x) x)"),
            vec![
                (LParen, "("),
                (Event, "defun"),
                (Whitespace, " "),
                (Symbol, "f"),
                (Whitespace, " "),
                (LParen, "("),
                (Symbol, "x"),
                (RParen, ")"),
                (Whitespace, " "),
                (Symbol, "x"),
                (RParen, ")"),
            ]
        );
    }

    #[test]
    fn comment_then_newline() {
        assert_eq!(classes("; a comment\n"), vec![(Comment, "; a comment"), (Whitespace, "\n")]);
    }

    #[test]
    fn literal_forms() {
        assert_eq!(
            significant("(cons 1/2 #\\a \"s\")"),
            vec![
                (LParen, "("),
                (BuiltinFunction, "cons"),
                (Rational, "1/2"),
                (Character, "#\\a"),
                (String, "\"s\""),
                (RParen, ")"),
            ]
        );
    }

    #[test]
    fn classify_examples() {
        let table = BuiltinTable::standard();
        assert_eq!(classify("defthm", table), Event);
        assert_eq!(classify("max", table), BuiltinFunction);
        assert_eq!(classify("my-fn", table), Symbol);
        assert_eq!(classify("DEFUN", table), Event);
        assert_eq!(classify("let", table), BuiltinMacro);
    }

    #[test]
    fn numbers() {
        assert_eq!(significant("42 -7 +3 10."), vec![(Number, "42"), (Number, "-7"), (Number, "+3"), (Number, "10.")]);
        assert_eq!(
            significant("#b101 #xFF #o17 #b1/10"),
            vec![(Number, "#b101"), (Number, "#xFF"), (Number, "#o17"), (Rational, "#b1/10")]
        );
        assert_eq!(
            significant("1/0 1.5 2e3 #b102"),
            vec![(Error, "1/0"), (Error, "1.5"), (Error, "2e3"), (Error, "#b102")]
        );
        // `1+` and `-` are symbols, not numbers
        assert_eq!(significant("1+ - 1-"), vec![(BuiltinMacro, "1+"), (BuiltinMacro, "-"), (BuiltinMacro, "1-")]);
    }

    #[test]
    fn characters() {
        assert_eq!(
            significant("#\\Space #\\newline #\\( #\\Bogus"),
            vec![(Character, "#\\Space"), (Character, "#\\newline"), (Character, "#\\("), (Error, "#\\Bogus")]
        );
    }

    #[test]
    fn quote_punctuation() {
        let toks = tokenize("'(a ,b ,@c `d)");
        let prefixes: Vec<&str> = toks.iter().filter(|t| t.is_quote_prefix()).map(|t| t.text).collect();
        assert_eq!(prefixes, vec!["'", ",", ",@", "`"]);
    }

    #[test]
    fn keywords_and_escapes() {
        assert_eq!(significant(":doc :u |foo bar|"), vec![(Keyword, ":doc"), (Keyword, ":u"), (Symbol, "|foo bar|")]);
    }

    #[test]
    fn unterminated_things_are_errors() {
        assert_eq!(classes("\"abc"), vec![(Error, "\"abc")]);
        assert_eq!(classes("#| open"), vec![(Error, "#| open")]);
        assert_eq!(classes("|abc"), vec![(Error, "|abc")]);
        assert_eq!(classes("#'f"), vec![(Error, "#'f")]);
    }

    #[test]
    fn block_comments_nest() {
        assert_eq!(classes("#| a #| b |# c |#x"), vec![(Comment, "#| a #| b |# c |#"), (Symbol, "x")]);
    }

    #[test]
    fn string_escapes() {
        assert_eq!(classes(r#""a\"b""#), vec![(String, r#""a\"b""#)]);
    }

    #[test]
    fn table_parse_errors() {
        assert_eq!(BuiltinTable::parse("foo\tevent\t1\n").unwrap_err(), TableError::FieldCount { line: 1 });
        assert!(matches!(BuiltinTable::parse("a\tevent\t2\t1\tbody\n"), Err(TableError::ArityOrder { line: 1 })));
        assert!(matches!(
            BuiltinTable::parse("a\tevent\t1\t1\tbody\nA\tmacro\t1\t*\tcall\n"),
            Err(TableError::Duplicate { line: 2, .. })
        ));
        assert!(matches!(
            BuiltinTable::parse("a\tthing\t1\t1\tbody\n"),
            Err(TableError::BadField { field: "kind", .. })
        ));
    }

    #[test]
    fn standard_table_shape() {
        let table = BuiltinTable::standard();
        assert!(table.len() > 150);
        let cons = table.get("cons").unwrap();
        assert_eq!(cons.arity, Arity::exact(2));
        assert_eq!(table.get("defun").unwrap().indent, IndentStyle::Body);
        assert_eq!(table.get("list").unwrap().arity.max, None);
    }
}
