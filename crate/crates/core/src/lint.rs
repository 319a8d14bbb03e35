//! Static checks over parsed forms.
//!
//! The checker is deliberately shallow: it knows the shapes of a handful of
//! built-in macros, the arities in the [`BuiltinTable`], and the functions the
//! file itself defines. Variables come only from `defun` formals, `let`/`let*`
//! and `mv-let` bindings, and `defproperty` bindings. Theorem bodies may
//! mention any variable.

use std::collections::{HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::lex::{Arity, BuiltinKind, BuiltinTable, TokenClass};
use crate::sexp::{self, Node, TopLevelForm};
use crate::span::Span;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

/// The fixed set of diagnostic codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Code {
    ArityMismatch,
    UndefinedVariable,
    UndefinedFunction,
    ForwardReference,
    MalformedMacro,
    UnbalancedParens,
    SyntaxError,
}

impl Code {
    pub const ALL: [Code; 7] = [
        Code::ArityMismatch,
        Code::UndefinedVariable,
        Code::UndefinedFunction,
        Code::ForwardReference,
        Code::MalformedMacro,
        Code::UnbalancedParens,
        Code::SyntaxError,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Code::ArityMismatch => "arity-mismatch",
            Code::UndefinedVariable => "undefined-variable",
            Code::UndefinedFunction => "undefined-function",
            Code::ForwardReference => "forward-reference",
            Code::MalformedMacro => "malformed-macro",
            Code::UnbalancedParens => "unbalanced-parens",
            Code::SyntaxError => "syntax-error",
        }
    }
}

impl fmt::Display for Code {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub span: Span,
    pub severity: Severity,
    pub code: Code,
    pub message: String,
}

impl Diagnostic {
    fn error(span: Span, code: Code, message: impl Into<String>) -> Self {
        Diagnostic { span, severity: Severity::Error, code, message: message.into() }
    }
}

/// Lints `source` with the standard table.
pub fn lint_source(source: &str) -> Vec<Diagnostic> {
    lint(&sexp::parse_source(source), crate::lex::BuiltinTable::standard())
}

pub fn lint(forms: &[TopLevelForm], table: &BuiltinTable) -> Vec<Diagnostic> {
    let mut linter = Linter::new(table, forms);
    for (idx, form) in forms.iter().enumerate() {
        linter.current = idx;
        linter.form(form);
    }
    let mut out = linter.out;
    out.sort_by_key(|d| (d.span.start, d.span.end, d.code));
    out
}

pub fn has_errors(diags: &[Diagnostic]) -> bool {
    diags.iter().any(|d| d.severity == Severity::Error)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum UserKind {
    Function,
    Macro,
}

#[derive(Debug, Clone, Copy)]
struct UserDef {
    kind: UserKind,
    arity: Arity,
}

struct Linter<'t> {
    table: &'t BuiltinTable,
    defined: HashMap<String, UserDef>,
    constants: HashSet<String>,
    /// Every name defined anywhere in the file, with the defining form index.
    later: HashMap<String, (usize, UserDef)>,
    current: usize,
    scope: Vec<String>,
    free_vars_ok: bool,
    out: Vec<Diagnostic>,
}

fn lower(s: &str) -> String {
    s.to_ascii_lowercase()
}

fn is_defun_like(head: &str) -> bool {
    matches!(head, "defun" | "defund")
}

/// Arity of a `defun` formals list or a `defmacro` lambda list.
fn lambda_list_arity(params: &[Node]) -> Arity {
    let mut min = 0;
    let mut optional = 0;
    let mut mode = 0; // 0 required, 1 optional, 2 rest/key
    for p in params {
        match p.as_symbol().map(lower).as_deref() {
            Some("&optional") => mode = 1,
            Some("&rest" | "&body" | "&key") => mode = 2,
            Some("&whole" | "&allow-other-keys") => {}
            _ => match mode {
                0 => min += 1,
                1 => optional += 1,
                _ => {}
            },
        }
    }
    Arity { min, max: (mode < 2).then_some(min + optional) }
}

fn lambda_list_vars(params: &[Node]) -> Vec<String> {
    params
        .iter()
        .filter_map(|p| match p {
            Node::List { children, .. } => children.first().and_then(Node::as_symbol),
            _ => p.as_symbol(),
        })
        .map(lower)
        .filter(|v| !v.starts_with('&'))
        .collect()
}

/// Collects `(name . def)` for everything a top-level form defines.
fn definitions(node: &Node, out: &mut Vec<(String, UserDef)>) {
    let Some(items) = node.as_list() else { return };
    let Some(head) = node.head().map(lower) else { return };
    let name = items.get(1).and_then(Node::as_symbol).map(lower);
    let params = items.get(2).and_then(Node::as_list);
    match head.as_str() {
        "defun" | "defund" | "defun-sk" | "defabbrev" => {
            if let (Some(name), Some(params)) = (name, params) {
                let arity = lambda_list_arity(params);
                out.push((name, UserDef { kind: UserKind::Function, arity }));
            }
        }
        "defmacro" => {
            if let (Some(name), Some(params)) = (name, params) {
                let arity = lambda_list_arity(params);
                out.push((name, UserDef { kind: UserKind::Macro, arity }));
            }
        }
        "mutual-recursion" | "progn" | "encapsulate" | "local" => {
            for child in &items[1..] {
                definitions(child, out);
            }
        }
        _ => {}
    }
}

impl<'t> Linter<'t> {
    fn new(table: &'t BuiltinTable, forms: &[TopLevelForm]) -> Self {
        let mut later = HashMap::new();
        for (idx, form) in forms.iter().enumerate() {
            let mut defs = Vec::new();
            definitions(&form.tree, &mut defs);
            for (name, def) in defs {
                later.entry(name).or_insert((idx, def));
            }
        }
        Linter {
            table,
            defined: HashMap::new(),
            constants: ["t", "nil", "state"].iter().map(|s| s.to_string()).collect(),
            later,
            current: 0,
            scope: Vec::new(),
            free_vars_ok: false,
            out: Vec::new(),
        }
    }

    fn push(&mut self, d: Diagnostic) {
        self.out.push(d);
    }

    fn malformed(&mut self, node: &Node, what: &str) {
        self.push(Diagnostic::error(node.span(), Code::MalformedMacro, what));
    }

    fn form(&mut self, form: &TopLevelForm) {
        if !form.complete {
            let message = match &form.tree {
                Node::Atom { class: TokenClass::RParen, .. } => "unmatched close parenthesis",
                Node::Atom { .. } => "unterminated literal",
                Node::Quoted { inner: None, .. } => "quote with nothing to quote",
                _ => "missing close parenthesis",
            };
            self.push(Diagnostic::error(form.span, Code::UnbalancedParens, message));
            return;
        }
        self.lexical_errors(&form.tree);
        self.scope.clear();
        self.free_vars_ok = false;
        self.top(&form.tree);
    }

    fn lexical_errors(&mut self, node: &Node) {
        match node {
            Node::Atom { class: TokenClass::Error, span, text } => {
                self.push(Diagnostic::error(*span, Code::SyntaxError, format!("cannot read `{}`", abbreviate(text))));
            }
            Node::List { children, .. } => children.iter().for_each(|c| self.lexical_errors(c)),
            Node::Quoted { inner: Some(inner), .. } => self.lexical_errors(inner),
            _ => {}
        }
    }

    /// A top-level (or event-nested) form.
    fn top(&mut self, node: &Node) {
        let Some(head) = node.head().map(lower) else {
            self.expr(node);
            return;
        };
        let items = node.as_list().expect("head implies list");
        match head.as_str() {
            "defun" | "defund" => self.defun(node, items),
            "defmacro" => self.defmacro(node, items),
            "defthm" | "defthmd" | "defaxiom" => self.defthm(node, items),
            "defconst" => self.defconst(node, items),
            "defproperty" => self.defproperty(node, items),
            "mutual-recursion" => {
                for child in &items[1..] {
                    if child.head().map(lower).is_some_and(|h| is_defun_like(&h)) {
                        self.register(child);
                    } else {
                        self.malformed(child, "mutual-recursion expects only defun forms");
                    }
                }
                for child in &items[1..] {
                    self.top(child);
                }
            }
            "progn" => items[1..].iter().for_each(|c| self.top(c)),
            "encapsulate" => {
                if items.len() < 2 || items[1].as_list().is_none() {
                    self.malformed(node, "encapsulate expects a signature list");
                    return;
                }
                items[2..].iter().for_each(|c| self.top(c));
            }
            "local" => {
                self.check_builtin_arity(node, &head, items.len() - 1);
                items[1..].iter().for_each(|c| self.top(c));
            }
            "defun-sk" | "defabbrev" | "defchoose" | "defstobj" | "deftheory" => {
                if items.get(1).and_then(Node::as_symbol).is_none() {
                    self.malformed(node, format!("{head} expects a name").as_str());
                    return;
                }
                self.check_builtin_arity(node, &head, items.len() - 1);
                self.register(node);
            }
            _ if self.table.kind(&head) == Some(BuiltinKind::Event) => {
                // theory expressions, book names, table rows: not expressions
                self.check_builtin_arity(node, &head, items.len() - 1);
            }
            _ => self.expr(node),
        }
    }

    fn register(&mut self, node: &Node) {
        let mut defs = Vec::new();
        definitions(node, &mut defs);
        for (name, def) in defs {
            self.defined.insert(name, def);
        }
    }

    fn defun(&mut self, node: &Node, items: &[Node]) {
        let head = lower(items[0].as_symbol().unwrap_or("defun"));
        let (Some(_name), Some(params)) =
            (items.get(1).and_then(Node::as_symbol), items.get(2).and_then(Node::as_list))
        else {
            self.malformed(node, &format!("{head} expects a name and a list of formals"));
            return;
        };
        if let Some(bad) = params.iter().find(|p| p.as_symbol().is_none()) {
            self.malformed(bad, "formal parameters must be symbols");
            return;
        }
        if items.len() < 4 {
            self.malformed(node, &format!("{head} is missing a body"));
            return;
        }
        let body = &items[items.len() - 1];
        for middle in &items[3..items.len() - 1] {
            let is_doc = matches!(middle, Node::Atom { class: TokenClass::String, .. });
            let is_decl = middle.head().is_some_and(|h| h.eq_ignore_ascii_case("declare"));
            if !is_doc && !is_decl {
                self.malformed(middle, &format!("{head} takes a single body form"));
                return;
            }
        }
        self.register(node);
        self.scope = lambda_list_vars(params);
        self.expr(body);
        self.scope.clear();
    }

    fn defmacro(&mut self, node: &Node, items: &[Node]) {
        if items.get(1).and_then(Node::as_symbol).is_none()
            || items.get(2).and_then(Node::as_list).is_none()
            || items.len() < 4
        {
            self.malformed(node, "defmacro expects a name, a lambda list and a body");
            return;
        }
        self.register(node);
    }

    fn defthm(&mut self, node: &Node, items: &[Node]) {
        let head = lower(items[0].as_symbol().unwrap_or("defthm"));
        if items.get(1).and_then(Node::as_symbol).is_none() || items.len() < 3 {
            self.malformed(node, &format!("{head} expects a name and a term"));
            return;
        }
        let rest = &items[3..];
        if !rest.len().is_multiple_of(2)
            || rest.iter().step_by(2).any(|k| !matches!(k, Node::Atom { class: TokenClass::Keyword, .. }))
        {
            self.malformed(node, &format!("{head} options must be keyword/value pairs"));
            return;
        }
        self.free_vars_ok = true;
        self.expr(&items[2]);
        self.free_vars_ok = false;
    }

    fn defconst(&mut self, node: &Node, items: &[Node]) {
        let name = items.get(1).and_then(Node::as_symbol);
        let starred = name.is_some_and(|n| n.len() > 2 && n.starts_with('*') && n.ends_with('*'));
        if !starred || !(3..=4).contains(&items.len()) {
            self.malformed(node, "defconst expects a *starred* name and a value");
            return;
        }
        self.expr(&items[2]);
        self.constants.insert(lower(name.unwrap()));
    }

    fn defproperty(&mut self, node: &Node, items: &[Node]) {
        if items.get(1).and_then(Node::as_symbol).is_none() {
            self.malformed(node, "defproperty expects a name");
            return;
        }
        let mut i = 2;
        while matches!(items.get(i), Some(Node::Atom { class: TokenClass::Keyword, .. })) {
            i += 2;
        }
        let (Some(bindings), Some(body)) = (items.get(i).and_then(Node::as_list), items.get(i + 1)) else {
            self.malformed(node, "defproperty expects a binding list and a body");
            return;
        };
        if items.len() != i + 2 {
            self.malformed(node, "defproperty takes a single body form");
            return;
        }
        self.scope.clear();
        let mut j = 0;
        while j < bindings.len() {
            let Some(var) = bindings[j]
                .as_symbol()
                .filter(|_| !matches!(bindings[j], Node::Atom { class: TokenClass::Keyword, .. }))
            else {
                self.malformed(&bindings[j], "expected a variable name");
                return;
            };
            let var = lower(var);
            j += 1;
            while let Some(Node::Atom { class: TokenClass::Keyword, .. }) = bindings.get(j) {
                match bindings.get(j + 1) {
                    Some(value) => self.expr(value),
                    None => {
                        self.malformed(&bindings[j], "keyword option without a value");
                        return;
                    }
                }
                j += 2;
            }
            self.scope.push(var);
        }
        self.expr(body);
        self.scope.clear();
    }

    fn check_builtin_arity(&mut self, node: &Node, head: &str, argc: usize) -> bool {
        if let Some(entry) = self.table.get(head) {
            if !entry.arity.accepts(argc) {
                self.push(Diagnostic::error(
                    node.span(),
                    Code::ArityMismatch,
                    format!("{head} expects {} argument{}, given {argc}", entry.arity, plural(entry.arity)),
                ));
                return false;
            }
        }
        true
    }

    fn variable(&mut self, span: Span, name: &str) {
        let key = lower(name);
        if self.free_vars_ok || self.scope.contains(&key) || self.constants.contains(&key) {
            return;
        }
        self.push(Diagnostic::error(span, Code::UndefinedVariable, format!("unbound variable {name}")));
    }

    fn expr(&mut self, node: &Node) {
        match node {
            Node::Atom { class, span, text } => {
                if class.is_symbolic() && !text.is_empty() {
                    self.variable(*span, text);
                }
            }
            Node::Quoted { .. } => {}
            Node::List { children, .. } => {
                let Some(first) = children.first() else { return };
                match first {
                    Node::List { children: lam, .. }
                        if lam.first().and_then(Node::as_symbol).is_some_and(|h| h.eq_ignore_ascii_case("lambda")) =>
                    {
                        self.lambda_call(node, lam, &children[1..]);
                    }
                    _ => match first.as_symbol() {
                        Some(head) if !matches!(first, Node::Atom { class: TokenClass::Keyword, .. }) => {
                            self.call(node, head, &children[1..]);
                        }
                        _ => self.push(Diagnostic::error(first.span(), Code::SyntaxError, "illegal function position")),
                    },
                }
            }
        }
    }

    fn lambda_call(&mut self, node: &Node, lam: &[Node], args: &[Node]) {
        let (Some(params), Some(body)) = (lam.get(1).and_then(Node::as_list), lam.last().filter(|_| lam.len() >= 3))
        else {
            self.malformed(node, "lambda expects formals and a body");
            return;
        };
        if params.len() != args.len() {
            self.push(Diagnostic::error(
                node.span(),
                Code::ArityMismatch,
                format!("lambda expects {} arguments, given {}", params.len(), args.len()),
            ));
        }
        args.iter().for_each(|a| self.expr(a));
        let saved = std::mem::replace(&mut self.scope, lambda_list_vars(params));
        self.expr(body);
        self.scope = saved;
    }

    fn call(&mut self, node: &Node, head: &str, args: &[Node]) {
        let key = lower(head);
        match key.as_str() {
            "quote" => {
                self.check_builtin_arity(node, &key, args.len());
                return;
            }
            "declare" | "b*" => return,
            "let" | "let*" => return self.let_form(node, &key, args),
            "mv-let" => return self.mv_let(node, args),
            "cond" => {
                for clause in args {
                    match clause.as_list() {
                        Some(parts) if !parts.is_empty() => parts.iter().for_each(|p| self.expr(p)),
                        _ => self.malformed(clause, "cond clauses must be non-empty lists"),
                    }
                }
                return;
            }
            "case" => {
                let Some((key_expr, clauses)) = args.split_first() else {
                    self.malformed(node, "case expects a key expression");
                    return;
                };
                self.expr(key_expr);
                for clause in clauses {
                    match clause.as_list() {
                        Some(parts) if !parts.is_empty() => parts[1..].iter().for_each(|p| self.expr(p)),
                        _ => self.malformed(clause, "case clauses must be non-empty lists"),
                    }
                }
                return;
            }
            "the" => {
                if self.check_builtin_arity(node, &key, args.len()) {
                    self.expr(&args[1]);
                }
                return;
            }
            "defun" | "defund" | "defthm" | "defthmd" | "defconst" | "defmacro" | "local" | "progn" | "encapsulate"
            | "mutual-recursion" | "defproperty" => {
                // events are only legal at the top level
                self.push(Diagnostic::error(
                    node.span(),
                    Code::MalformedMacro,
                    format!("{key} is an event and cannot appear inside an expression"),
                ));
                return;
            }
            _ => {}
        }

        if self.table.get(&key).is_some() {
            self.check_builtin_arity(node, &key, args.len());
            args.iter().for_each(|a| self.expr(a));
            return;
        }
        if let Some(def) = self.defined.get(&key).copied() {
            self.check_user_arity(node, head, def, args.len());
            if def.kind == UserKind::Function {
                args.iter().for_each(|a| self.expr(a));
            }
            return;
        }
        if let Some(&(idx, def)) = self.later.get(&key) {
            if idx > self.current {
                self.push(Diagnostic {
                    span: node.as_list().map_or(node.span(), |c| c[0].span()),
                    severity: Severity::Warning,
                    code: Code::ForwardReference,
                    message: format!("{head} is used before its definition"),
                });
                if def.kind == UserKind::Function {
                    args.iter().for_each(|a| self.expr(a));
                }
                return;
            }
        }
        let span = node.as_list().map_or(node.span(), |c| c[0].span());
        self.push(Diagnostic::error(span, Code::UndefinedFunction, format!("undefined function {head}")));
        args.iter().for_each(|a| self.expr(a));
    }

    fn check_user_arity(&mut self, node: &Node, head: &str, def: UserDef, argc: usize) {
        if !def.arity.accepts(argc) {
            self.push(Diagnostic::error(
                node.span(),
                Code::ArityMismatch,
                format!("{head} expects {} argument{}, given {argc}", def.arity, plural(def.arity)),
            ));
        }
    }

    fn let_form(&mut self, node: &Node, head: &str, args: &[Node]) {
        let Some(bindings) = args.first().and_then(Node::as_list) else {
            self.malformed(node, &format!("{head} requires a list of bindings"));
            return;
        };
        let body: Vec<&Node> =
            args[1..].iter().filter(|n| !n.head().is_some_and(|h| h.eq_ignore_ascii_case("declare"))).collect();
        if body.is_empty() {
            self.malformed(node, &format!("{head} is missing a body"));
            return;
        }
        let mark = self.scope.len();
        let mut vars = Vec::new();
        for binding in bindings {
            let (var, init) = match binding {
                Node::List { children, .. } if children.len() == 2 && children[0].as_symbol().is_some() => {
                    (children[0].as_symbol().unwrap(), children.get(1))
                }
                _ => {
                    self.malformed(binding, &format!("malformed {head} binding"));
                    self.scope.truncate(mark);
                    return;
                }
            };
            if let Some(init) = init {
                self.expr(init);
            }
            if head == "let*" {
                self.scope.push(lower(var));
            } else {
                vars.push(lower(var));
            }
        }
        self.scope.extend(vars);
        body.into_iter().for_each(|b| self.expr(b));
        self.scope.truncate(mark);
    }

    fn mv_let(&mut self, node: &Node, args: &[Node]) {
        let Some(vars) = args.first().and_then(Node::as_list).filter(|v| v.iter().all(|n| n.as_symbol().is_some()))
        else {
            self.malformed(node, "mv-let requires a list of variables");
            return;
        };
        if args.len() < 3 {
            self.malformed(node, "mv-let expects variables, an expression and a body");
            return;
        }
        self.expr(&args[1]);
        let mark = self.scope.len();
        self.scope.extend(vars.iter().filter_map(Node::as_symbol).map(lower));
        args[2..].iter().for_each(|b| self.expr(b));
        self.scope.truncate(mark);
    }
}

fn plural(arity: Arity) -> &'static str {
    if arity.max == Some(1) {
        ""
    } else {
        "s"
    }
}

fn abbreviate(text: &str) -> String {
    let first_line = text.lines().next().unwrap_or("");
    if first_line.chars().count() > 40 {
        format!("{}...", first_line.chars().take(40).collect::<String>())
    } else {
        first_line.to_string()
    }
}
