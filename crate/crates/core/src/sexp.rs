//! Top-level form segmentation.

use serde::{Deserialize, Serialize};

use crate::lex::{self, BuiltinKind, BuiltinTable, Token, TokenClass};
use crate::span::Span;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FormKind {
    Event,
    Expression,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Node {
    Atom {
        span: Span,
        class: TokenClass,
        text: String,
    },
    List {
        span: Span,
        children: Vec<Node>,
        closed: bool,
    },
    /// A quote-family prefix and the datum it applies to, if any.
    Quoted {
        span: Span,
        prefix: String,
        inner: Option<Box<Node>>,
    },
}

impl Node {
    pub fn span(&self) -> Span {
        match self {
            Node::Atom { span, .. } | Node::List { span, .. } | Node::Quoted { span, .. } => *span,
        }
    }

    /// Symbol text, if this node is a symbol-like atom.
    pub fn as_symbol(&self) -> Option<&str> {
        match self {
            Node::Atom { class, text, .. } if class.is_symbolic() || *class == TokenClass::Keyword => Some(text),
            _ => None,
        }
    }

    pub fn as_list(&self) -> Option<&[Node]> {
        match self {
            Node::List { children, .. } => Some(children),
            _ => None,
        }
    }

    /// First element's symbol text for a list.
    pub fn head(&self) -> Option<&str> {
        self.as_list()?.first()?.as_symbol()
    }

    /// False if this node or anything inside it is missing a delimiter or datum.
    pub fn is_complete(&self) -> bool {
        match self {
            Node::Atom { class, .. } => *class != TokenClass::RParen,
            Node::List { children, closed, .. } => *closed && children.iter().all(Node::is_complete),
            Node::Quoted { inner, .. } => inner.as_deref().is_some_and(Node::is_complete),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TopLevelForm {
    pub span: Span,
    /// Head symbol as written; empty for atoms and non-symbol heads.
    pub head: String,
    pub kind: FormKind,
    pub complete: bool,
    pub tree: Node,
}

impl TopLevelForm {
    pub fn text<'a>(&self, source: &'a str) -> &'a str {
        self.span.slice(source)
    }

    /// Number of world-changing events admitting this form creates.
    pub fn event_count(&self, table: &BuiltinTable) -> usize {
        node_event_count(&self.tree, table)
    }
}

/// Event-or-expression decision for a head symbol. Unknown heads that start
/// with `def` are treated as events.
pub fn kind_of_head(head: &str, table: &BuiltinTable) -> FormKind {
    if head.is_empty() {
        return FormKind::Expression;
    }
    match table.kind(head) {
        Some(BuiltinKind::Event) => FormKind::Event,
        Some(_) => FormKind::Expression,
        None if head.len() >= 3 && head[..3].eq_ignore_ascii_case("def") => FormKind::Event,
        None => FormKind::Expression,
    }
}

/// `progn` contributes the events of its children; any other event is one.
pub fn node_event_count(node: &Node, table: &BuiltinTable) -> usize {
    let Some(head) = node.head() else { return 0 };
    if kind_of_head(head, table) != FormKind::Event {
        return 0;
    }
    if head.eq_ignore_ascii_case("progn") {
        node.as_list().map(|children| children[1..].iter().map(|c| node_event_count(c, table)).sum()).unwrap_or(0)
    } else {
        1
    }
}

/// Tokenizes and segments with the standard table.
pub fn parse_source(source: &str) -> Vec<TopLevelForm> {
    let table = BuiltinTable::standard();
    parse_top_level(&lex::tokenize_with(source, table), table)
}

/// Groups a lossless token stream into top-level forms.
pub fn parse_top_level(tokens: &[Token<'_>], table: &BuiltinTable) -> Vec<TopLevelForm> {
    let significant: Vec<&Token<'_>> = tokens.iter().filter(|t| !t.is_trivia()).collect();
    let source_end = tokens.last().map_or(0, |t| t.span.end);
    let mut parser = Parser { toks: &significant, pos: 0 };
    let mut forms = Vec::new();
    while parser.pos < significant.len() {
        let tree = if significant[parser.pos].class == TokenClass::RParen {
            let tok = significant[parser.pos];
            parser.pos += 1;
            atom(tok)
        } else {
            parser.datum()
        };
        let head = tree.head().unwrap_or("").to_string();
        let mut complete = tree.is_complete();
        if let Node::Atom { class: TokenClass::Error, span, text } = &tree {
            // an unterminated string or comment swallowed the rest of the input
            if span.end == source_end && (text.starts_with('"') || text.starts_with("#|") || text.starts_with('|')) {
                complete = false;
            }
        }
        forms.push(TopLevelForm { span: tree.span(), kind: kind_of_head(&head, table), head, complete, tree });
    }
    forms
}

/// Index of the form whose span contains `offset`.
pub fn form_at(forms: &[TopLevelForm], offset: usize) -> Option<usize> {
    let idx = forms.partition_point(|f| f.span.end <= offset);
    (idx < forms.len() && forms[idx].span.contains(offset)).then_some(idx)
}

fn atom(tok: &Token<'_>) -> Node {
    Node::Atom { span: tok.span, class: tok.class, text: tok.text.to_string() }
}

struct Parser<'t, 'a> {
    toks: &'t [&'t Token<'a>],
    pos: usize,
}

impl Parser<'_, '_> {
    /// Parses one datum. Must not be called at a `)` or at end of input.
    fn datum(&mut self) -> Node {
        let tok = self.toks[self.pos];
        self.pos += 1;
        if tok.is_quote_prefix() {
            let inner = match self.toks.get(self.pos) {
                Some(next) if next.class != TokenClass::RParen => Some(Box::new(self.datum())),
                _ => None,
            };
            let end = inner.as_ref().map_or(tok.span.end, |n| n.span().end);
            return Node::Quoted { span: Span::new(tok.span.start, end), prefix: tok.text.to_string(), inner };
        }
        if tok.class != TokenClass::LParen {
            return atom(tok);
        }
        let mut children = Vec::new();
        loop {
            match self.toks.get(self.pos) {
                None => {
                    let end = children.last().map_or(tok.span.end, |c: &Node| c.span().end);
                    return Node::List { span: Span::new(tok.span.start, end), children, closed: false };
                }
                Some(t) if t.class == TokenClass::RParen => {
                    self.pos += 1;
                    return Node::List { span: Span::new(tok.span.start, t.span.end), children, closed: true };
                }
                Some(_) => children.push(self.datum()),
            }
        }
    }
}
