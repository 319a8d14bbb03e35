//! ACL2 data values: rationals, symbols, strings, characters and conses.

use std::fmt;
use std::sync::Arc;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::One;

use crate::lex::TokenClass;
use crate::sexp::Node;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Value {
    Number(BigRational),
    /// Upper-cased symbol name; keywords keep their leading colon.
    Symbol(String),
    Str(String),
    Char(char),
    Cons(Arc<Value>, Arc<Value>),
}

impl Value {
    pub fn nil() -> Value {
        Value::Symbol("NIL".into())
    }

    pub fn t() -> Value {
        Value::Symbol("T".into())
    }

    pub fn bool(b: bool) -> Value {
        if b {
            Value::t()
        } else {
            Value::nil()
        }
    }

    pub fn int(n: i64) -> Value {
        Value::Number(BigRational::from_integer(BigInt::from(n)))
    }

    pub fn symbol(name: &str) -> Value {
        Value::Symbol(name.to_ascii_uppercase())
    }

    pub fn cons(a: Value, b: Value) -> Value {
        Value::Cons(Arc::new(a), Arc::new(b))
    }

    pub fn list(items: impl IntoIterator<Item = Value, IntoIter: DoubleEndedIterator>) -> Value {
        items.into_iter().rev().fold(Value::nil(), |tail, v| Value::cons(v, tail))
    }

    pub fn is_nil(&self) -> bool {
        matches!(self, Value::Symbol(s) if s == "NIL")
    }

    pub fn is_true(&self) -> bool {
        !self.is_nil()
    }

    pub fn as_integer(&self) -> Option<&BigInt> {
        match self {
            Value::Number(r) if r.is_integer() => Some(r.numer()),
            _ => None,
        }
    }

    /// Elements of a true list, or `None` for anything else.
    pub fn to_vec(&self) -> Option<Vec<Value>> {
        let mut out = Vec::new();
        let mut cur = self;
        loop {
            match cur {
                Value::Cons(a, b) => {
                    out.push((**a).clone());
                    cur = b;
                }
                v if v.is_nil() => return Some(out),
                _ => return None,
            }
        }
    }

    /// A quoted literal that reads back as this value.
    pub fn to_literal(&self) -> String {
        format!("'{self}")
    }

    /// Reads a datum from a parsed node, as `quote` would.
    pub fn from_node(node: &Node) -> Result<Value, String> {
        match node {
            Node::Atom { class, text, .. } => atom_value(*class, text),
            Node::Quoted { prefix, inner, .. } => {
                let inner = inner.as_deref().ok_or("quote without a datum")?;
                let name = match prefix.as_str() {
                    "'" => "QUOTE",
                    "`" => "QUASIQUOTE",
                    ",@" => "UNQUOTE-SPLICING",
                    _ => "UNQUOTE",
                };
                Ok(Value::list([Value::symbol(name), Value::from_node(inner)?]))
            }
            Node::List { children, closed, .. } => {
                if !closed {
                    return Err("unterminated list".into());
                }
                let (items, tail) = match children.len() {
                    n if n >= 3 && children[n - 2].as_symbol() == Some(".") => {
                        (&children[..n - 2], Value::from_node(&children[n - 1])?)
                    }
                    _ => (&children[..], Value::nil()),
                };
                items.iter().rev().try_fold(tail, |acc, c| Ok(Value::cons(Value::from_node(c)?, acc)))
            }
        }
    }
}

fn atom_value(class: TokenClass, text: &str) -> Result<Value, String> {
    match class {
        TokenClass::Number | TokenClass::Rational => {
            parse_number(text).map(Value::Number).ok_or_else(|| format!("bad number {text}"))
        }
        TokenClass::String => Ok(Value::Str(unescape(&text[1..text.len() - 1]))),
        TokenClass::Character => parse_char(text).map(Value::Char).ok_or_else(|| format!("bad character {text}")),
        TokenClass::Keyword => Ok(Value::Symbol(text.to_ascii_uppercase())),
        c if c.is_symbolic() => Ok(Value::Symbol(symbol_name(text))),
        _ => Err(format!("cannot read {text}")),
    }
}

/// Upper-cases outside `|...|` escapes and drops the bars.
pub fn symbol_name(text: &str) -> String {
    let mut out = String::new();
    let mut escaped = false;
    for ch in text.chars() {
        if ch == '|' {
            escaped = !escaped;
        } else if escaped {
            out.push(ch);
        } else {
            out.extend(ch.to_uppercase());
        }
    }
    out
}

pub fn parse_number(text: &str) -> Option<BigRational> {
    let (radix, body) = match text.get(..2).map(str::to_ascii_lowercase).as_deref() {
        Some("#b") => (2, &text[2..]),
        Some("#o") => (8, &text[2..]),
        Some("#x") => (16, &text[2..]),
        _ => (10, text),
    };
    let body = body.strip_prefix('+').unwrap_or(body);
    let parse = |s: &str| BigInt::parse_bytes(s.as_bytes(), radix);
    match body.split_once('/') {
        Some((n, d)) => {
            let (n, d) = (parse(n)?, parse(d)?);
            (d.sign() == num_bigint::Sign::Plus).then(|| BigRational::new(n, d))
        }
        None => Some(BigRational::from_integer(parse(body.strip_suffix('.').unwrap_or(body))?)),
    }
}

fn parse_char(text: &str) -> Option<char> {
    let name = text.strip_prefix("#\\")?;
    let mut chars = name.chars();
    let first = chars.next()?;
    if chars.next().is_none() {
        return Some(first);
    }
    Some(match name.to_ascii_lowercase().as_str() {
        "space" => ' ',
        "newline" | "linefeed" => '\n',
        "tab" => '\t',
        "page" => '\x0c',
        "rubout" => '\x7f',
        "return" => '\r',
        "backspace" => '\x08',
        _ => return None,
    })
}

fn unescape(body: &str) -> String {
    let mut out = String::with_capacity(body.len());
    let mut chars = body.chars();
    while let Some(c) = chars.next() {
        if c == '\\' {
            out.extend(chars.next());
        } else {
            out.push(c);
        }
    }
    out
}

fn needs_bars(name: &str) -> bool {
    name.is_empty()
        || name.chars().any(|c| c.is_lowercase() || c.is_whitespace() || "()'`,\";|#\\".contains(c))
        || parse_number(name).is_some()
}

fn write_number(f: &mut fmt::Formatter<'_>, r: &BigRational) -> fmt::Result {
    if r.denom().is_one() {
        write!(f, "{}", r.numer())
    } else {
        write!(f, "{}/{}", r.numer(), r.denom())
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Number(r) => write_number(f, r),
            Value::Symbol(s) if s.starts_with(':') && !needs_bars(&s[1..]) => f.write_str(s),
            Value::Symbol(s) if needs_bars(s) => write!(f, "|{s}|"),
            Value::Symbol(s) => f.write_str(s),
            Value::Str(s) => {
                f.write_str("\"")?;
                for c in s.chars() {
                    if c == '"' || c == '\\' {
                        f.write_str("\\")?;
                    }
                    write!(f, "{c}")?;
                }
                f.write_str("\"")
            }
            Value::Char(c) => match c {
                ' ' => f.write_str("#\\Space"),
                '\n' => f.write_str("#\\Newline"),
                '\t' => f.write_str("#\\Tab"),
                '\x0c' => f.write_str("#\\Page"),
                '\x7f' => f.write_str("#\\Rubout"),
                '\r' => f.write_str("#\\Return"),
                '\x08' => f.write_str("#\\Backspace"),
                c => write!(f, "#\\{c}"),
            },
            Value::Cons(a, b) => {
                if let (Value::Symbol(q), Some(rest)) = (&**a, b.to_vec()) {
                    if q == "QUOTE" && rest.len() == 1 {
                        return write!(f, "'{}", rest[0]);
                    }
                }
                write!(f, "({a}")?;
                let mut cur: &Value = b;
                loop {
                    match cur {
                        Value::Cons(x, y) => {
                            write!(f, " {x}")?;
                            cur = y;
                        }
                        v if v.is_nil() => break,
                        v => {
                            write!(f, " . {v}")?;
                            break;
                        }
                    }
                }
                f.write_str(")")
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sexp::parse_source;

    fn read(src: &str) -> Value {
        Value::from_node(&parse_source(src)[0].tree).unwrap()
    }

    #[test]
    fn reads_and_prints() {
        assert_eq!(read("(1 2 3)").to_string(), "(1 2 3)");
        assert_eq!(read("(a . b)").to_string(), "(A . B)");
        assert_eq!(read("-6/4").to_string(), "-3/2");
        assert_eq!(read("#x1F").to_string(), "31");
        assert_eq!(read("\"a\\\"b\"").to_string(), "\"a\\\"b\"");
        assert_eq!(read("#\\Space").to_string(), "#\\Space");
        assert_eq!(read(":key").to_string(), ":KEY");
        assert_eq!(read("|Mixed Case|").to_string(), "|Mixed Case|");
        assert_eq!(read("'x").to_string(), "'X");
        assert_eq!(read("()").to_string(), "NIL");
    }

    #[test]
    fn literals_round_trip() {
        for src in ["(1 (2 \"s\") #\\a . 3)", "-7/3", "|abc|", "(quote x)", ":k", "#\\Newline"] {
            let v = read(src);
            let lit = v.to_literal();
            let back = read(&lit);
            assert_eq!(back, Value::list([Value::symbol("quote"), v.clone()]), "{src}");
        }
    }

    #[test]
    fn true_lists() {
        assert_eq!(read("(1 2)").to_vec().unwrap().len(), 2);
        assert!(read("(1 . 2)").to_vec().is_none());
        assert_eq!(Value::nil().to_vec(), Some(vec![]));
    }

    #[test]
    fn numbers() {
        assert!(parse_number("1/0").is_none());
        assert_eq!(parse_number("#b101"), Some(BigRational::from_integer(5.into())));
        assert_eq!(parse_number("+4"), Some(BigRational::from_integer(4.into())));
    }
}
