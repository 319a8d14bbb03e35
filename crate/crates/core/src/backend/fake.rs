//! A hermetic stand-in for ACL2 that speaks the same line protocol.

use std::collections::VecDeque;
use std::sync::{Arc, Mutex, MutexGuard};
use std::time::Duration;

use super::eval::{self, EvalError, Evaluator, UserFn, World};
use super::{Recv, Transport};
use crate::lex::{BuiltinKind, BuiltinTable};
use crate::sexp::{self, kind_of_head, FormKind, Node, TopLevelForm};
use crate::value::symbol_name;

pub const FAKE_PROMPT: &str = "ACL2 !>";
pub const FAKE_BANNER: &str = "ACL2 Version 8.5 (fake backend for proofpad)\n\n";
const TIME_LINE: &str = "Time:  0.00 seconds (prove: 0.00, print: 0.00, other: 0.00)";

struct Command {
    before: World,
    events: usize,
}

/// The fake's interpreter state. Feed it input text, get output text back.
#[derive(Default)]
pub struct FakeAcl2 {
    world: World,
    commands: Vec<Command>,
    pending: String,
    log: Vec<String>,
}

fn ctx(head: &str, name: Option<&str>) -> String {
    match name {
        Some(n) => format!("( {} {} ...)", head.to_ascii_uppercase(), n),
        None => format!("( {} ...)", head.to_ascii_uppercase()),
    }
}

fn summary(context: &str) -> String {
    format!("Summary\nForm:  {context}\nRules: NIL\n{TIME_LINE}\n")
}

fn failure(context: &str, messages: &[String]) -> String {
    let mut out = String::from("\n");
    for m in messages {
        out.push_str(&format!("\nACL2 Error in {context}:  {m}\n"));
    }
    out.push_str(&format!(
        "\n{}\nACL2 Error in {context}:  See :DOC failure.\n\n******** FAILED ********\n",
        summary(context)
    ));
    out
}

fn top_level_error(context: &str, e: &EvalError) -> String {
    format!("\n\nACL2 Error in {context}:  {e}\n\n")
}

type EventResult = Result<(String, usize), String>;

impl FakeAcl2 {
    pub fn new() -> Self {
        FakeAcl2::default()
    }

    pub fn world(&self) -> &World {
        &self.world
    }

    /// Events in the current world.
    pub fn world_events(&self) -> usize {
        self.commands.iter().map(|c| c.events).sum()
    }

    /// Every form read so far, in order.
    pub fn log(&self) -> &[String] {
        &self.log
    }

    /// Accepts raw input; returns output for every form completed by it,
    /// each followed by a prompt.
    pub fn feed(&mut self, input: &str) -> String {
        self.pending.push_str(input);
        let Some(nl) = self.pending.rfind('\n') else { return String::new() };
        let ready: String = self.pending[..=nl].to_string();
        let forms = sexp::parse_source(&ready);
        let mut consumed = ready.len();
        let mut out = String::new();
        let mut i = 0;
        while i < forms.len() {
            let form = &forms[i];
            if !form.complete {
                if form.text(&ready).trim() == ")" {
                    i += 1;
                    continue;
                }
                consumed = form.span.start;
                break;
            }
            if let Some(keyword) = form.tree.as_symbol().filter(|s| s.starts_with(':')) {
                let arg_count = match keyword.to_ascii_lowercase().as_str() {
                    ":ubt" | ":ubt!" | ":ubu" | ":ubu!" | ":pe" | ":pbt" => 1,
                    _ => 0,
                };
                let args = &forms[i + 1..(i + 1 + arg_count).min(forms.len())];
                let text = ready[form.span.start..args.last().map_or(form.span.end, |a| a.span.end)].to_string();
                self.log.push(text);
                out.push_str(&self.keyword_command(&keyword.to_ascii_lowercase(), args, &ready));
                i += 1 + args.len();
            } else {
                let text = form.text(&ready).to_string();
                self.log.push(text);
                out.push_str(&self.top_level(form));
                i += 1;
            }
            out.push_str(FAKE_PROMPT);
        }
        self.pending.drain(..consumed);
        out
    }

    fn keyword_command(&mut self, keyword: &str, args: &[TopLevelForm], src: &str) -> String {
        let target = match (keyword, args.first()) {
            (":u", _) => Some(1),
            (":ubt" | ":ubt!", Some(arg)) => {
                let text = arg.text(src).to_ascii_lowercase();
                if text == ":x" {
                    Some(1)
                } else if let Some(k) = text.strip_prefix(":x-") {
                    k.parse::<usize>().ok().map(|k| k + 1)
                } else {
                    text.parse::<usize>().ok().and_then(|n| self.commands.len().checked_sub(n.checked_sub(1)?))
                }
            }
            _ => {
                return format!(
                    "\n\nACL2 Error in TOP-LEVEL:  Unsupported keyword command {}.\n\n",
                    keyword.to_uppercase()
                )
            }
        };
        match target {
            Some(k) if k >= 1 && k <= self.commands.len() => {
                let keep = self.commands.len() - k;
                let mut undone = self.commands.split_off(keep);
                self.world = undone.swap_remove(0).before;
                format!("          {}:x(UNDONE)\n", keep)
            }
            _ => format!("\n\nACL2 Error in {}:  There is no such command to undo.\n\n", keyword.to_uppercase()),
        }
    }

    fn top_level(&mut self, form: &TopLevelForm) -> String {
        let table = BuiltinTable::standard();
        let is_event = form.kind == FormKind::Event && table.kind(&form.head) == Some(BuiltinKind::Event)
            || self.handles_event(&form.head);
        if is_event {
            let before = self.world.clone();
            match self.event(&form.tree) {
                Ok((text, events)) => {
                    if events > 0 {
                        self.commands.push(Command { before, events });
                    }
                    text
                }
                Err(text) => {
                    self.world = before;
                    text
                }
            }
        } else {
            let mut evaluator = Evaluator::new(&self.world);
            let result = evaluator.eval_top(&form.tree);
            let mut text = std::mem::take(&mut evaluator.printed);
            match result {
                Ok(v) => text.push_str(&format!("{v}\n")),
                Err(e @ EvalError::CheckFailed { .. }) => text.push_str(&top_level_error("CHECK-EXPECT", &e)),
                Err(e) => text.push_str(&top_level_error("TOP-LEVEL", &e)),
            }
            text
        }
    }

    fn handles_event(&self, head: &str) -> bool {
        matches!(
            head.to_ascii_lowercase().as_str(),
            "defun"
                | "defund"
                | "defthm"
                | "defthmd"
                | "defconst"
                | "defmacro"
                | "progn"
                | "include-book"
                | "mutual-recursion"
        )
    }

    fn event(&mut self, node: &Node) -> EventResult {
        let head = node.head().unwrap_or("").to_ascii_lowercase();
        let parts = node.as_list().unwrap_or_default();
        let name = parts.get(1).and_then(Node::as_symbol).map(symbol_name);
        let context = ctx(&head, name.as_deref());
        match head.as_str() {
            "defun" | "defund" => self.defun(parts, &context),
            "defthm" | "defthmd" => self.defthm(parts, &context),
            "defconst" => self.defconst(parts, &context),
            "defmacro" => {
                let name = name.ok_or_else(|| failure(&context, &["A macro needs a name.".into()]))?;
                self.claim(&name, &context)?;
                self.world.macros.insert(name.clone());
                Ok((format!("\n{}{name}\n", summary(&context)), 1))
            }
            "progn" => {
                let mut text = String::new();
                let mut events = 0;
                for child in &parts[1..] {
                    let (t, e) = self.event(child)?;
                    text.push_str(&t);
                    events += e;
                }
                Ok((text, events))
            }
            "mutual-recursion" => self.mutual_recursion(&parts[1..], &context),
            "include-book" => {
                let book = match parts.get(1) {
                    Some(Node::Atom { text, .. }) => text.trim_matches('"').to_string(),
                    _ => String::new(),
                };
                let context = format!("( INCLUDE-BOOK \"{book}\" ...)");
                Err(format!(
                    "ACL2 Warning [Compiled file] in {context}:  Unable to load\ncompiled file for book\n  <book path>\n\
                     because that book is not certified.  See :DOC include-book.  No load was in\n\
                     progress for any parent book.\n\n\
                     ACL2 Error in {context}:  There is no file named\n\"/{book}.lisp\" that can be opened for input.\n\n\
                     {}\n\
                     ACL2 Error in {context}:  See :DOC failure.\n\n******** FAILED ********\n",
                    summary(&context).replace("Rules: NIL\n", "Rules: NIL\nWarnings:  Compiled file\n"),
                ))
            }
            _ if kind_of_head(&head, BuiltinTable::standard()) == FormKind::Event
                && BuiltinTable::standard().kind(&head) == Some(BuiltinKind::Event) =>
            {
                Ok((format!("\n{}{}\n", summary(&context), name.unwrap_or_else(|| ":INVISIBLE".into())), 1))
            }
            _ => Err(top_level_error("TOP-LEVEL", &EvalError::UndefinedFunction(head.to_ascii_uppercase()))),
        }
    }

    fn claim(&self, name: &str, context: &str) -> Result<(), String> {
        match self.world.name_in_use(name) {
            Some(kind) => Err(failure(context, &[format!("The name {name} is in use as a {kind}.")])),
            None => Ok(()),
        }
    }

    fn defun(&mut self, parts: &[Node], context: &str) -> EventResult {
        let fail = |m: String| failure(context, &[m]);
        let name = parts
            .get(1)
            .and_then(Node::as_symbol)
            .map(symbol_name)
            .ok_or_else(|| fail("A definition needs a name.".into()))?;
        let formals = parts.get(2).and_then(Node::as_list).ok_or_else(|| fail("Missing formals.".into()))?;
        let body = parts.last().filter(|_| parts.len() >= 4).ok_or_else(|| fail("Missing body.".into()))?;
        self.claim(&name, context)?;
        let mut params = Vec::new();
        for f in formals {
            let p = f.as_symbol().map(symbol_name).ok_or_else(|| fail("Formals must be symbols.".into()))?;
            if params.contains(&p) {
                return Err(fail(format!("The formal {p} appears twice.")));
            }
            params.push(p);
        }
        eval::check_definition(&self.world, &name, &params, body).map_err(|e| fail(e.to_string()))?;
        let recursive = mentions(body, &name);
        let mut text = String::from("\n");
        if recursive {
            text.push_str(&format!(
                "The admission of {name} is trivial, using the relation O< (which is known\nto be well-founded on the domain recognized by O-P) and the measure\n(ACL2-COUNT {}).\n\n",
                params.first().map_or("NIL", String::as_str)
            ));
        } else {
            text.push_str(&format!("Since {name} is non-recursive, its admission is trivial.\n\n"));
        }
        text.push_str(&summary(context));
        text.push_str(&format!(" {name}\n"));
        self.world.functions.insert(name, UserFn { params, body: body.clone() });
        Ok((text, 1))
    }

    fn mutual_recursion(&mut self, defs: &[Node], context: &str) -> EventResult {
        let fail = |m: String| failure(context, &[m]);
        let mut stubs = Vec::new();
        for d in defs {
            let parts = d.as_list().unwrap_or_default();
            let name = parts.get(1).and_then(Node::as_symbol).map(symbol_name);
            let formals = parts.get(2).and_then(Node::as_list);
            let (Some(name), Some(formals), Some(body)) = (name, formals, parts.last().filter(|_| parts.len() >= 4))
            else {
                return Err(fail("Each member must be a well-formed definition.".into()));
            };
            self.claim(&name, context)?;
            let params: Vec<String> = formals.iter().filter_map(Node::as_symbol).map(symbol_name).collect();
            self.world.functions.insert(
                name.clone(),
                UserFn {
                    params: params.clone(),
                    body: Node::Atom { span: body.span(), class: crate::lex::TokenClass::Symbol, text: "nil".into() },
                },
            );
            stubs.push((name, params, body.clone()));
        }
        let mut text = String::from("\nThe admission of these mutually recursive functions is trivial.\n\n");
        for (name, params, body) in stubs {
            eval::check_definition(&self.world, &name, &params, &body).map_err(|e| fail(e.to_string()))?;
            self.world.functions.insert(name, UserFn { params, body });
        }
        text.push_str(&summary(context));
        Ok((text, 1))
    }

    fn defthm(&mut self, parts: &[Node], context: &str) -> EventResult {
        let name = parts
            .get(1)
            .and_then(Node::as_symbol)
            .map(symbol_name)
            .ok_or_else(|| failure(context, &["A theorem needs a name.".into()]))?;
        let body = parts.get(2).ok_or_else(|| failure(context, &["A theorem needs a body.".into()]))?;
        self.claim(&name, context)?;
        if body.as_symbol().is_some_and(|s| s.eq_ignore_ascii_case("nil")) {
            let mut text = String::from("\nGoal reduces to NIL.\n\n");
            text.push_str(&summary(context));
            text.push_str(&format!("\nACL2 Error in {context}:  See :DOC failure.\n\n******** FAILED ********\n"));
            return Err(text);
        }
        self.world.theorems.insert(name.clone());
        Ok((format!("\nQ.E.D.\n\n{}Proof succeeded.\n {name}\n", summary(context)), 1))
    }

    fn defconst(&mut self, parts: &[Node], context: &str) -> EventResult {
        let fail = |m: String| failure(context, &[m]);
        let name = parts
            .get(1)
            .and_then(Node::as_symbol)
            .map(symbol_name)
            .filter(|n| n.len() > 2 && n.starts_with('*') && n.ends_with('*'))
            .ok_or_else(|| fail("Constant names must begin and end with *.".into()))?;
        let expr = parts.get(2).ok_or_else(|| fail("A constant needs a value.".into()))?;
        self.claim(&name, context)?;
        let value = Evaluator::new(&self.world).eval_top(expr).map_err(|e| fail(e.to_string()))?;
        self.world.constants.insert(name.clone(), value);
        Ok((format!("\n{}{name}\n", summary(context)), 1))
    }
}

fn mentions(node: &Node, name: &str) -> bool {
    match node {
        Node::List { children, .. } => {
            children.first().and_then(Node::as_symbol).is_some_and(|h| symbol_name(h) == name)
                || children.iter().any(|c| mentions(c, name))
        }
        _ => false,
    }
}

#[derive(Debug, Clone)]
pub struct FakeOptions {
    /// Output is delivered in chunks of these sizes, cycling; empty means whole.
    pub chunk_sizes: Vec<usize>,
    pub form_timeout: Duration,
}

impl Default for FakeOptions {
    fn default() -> Self {
        FakeOptions { chunk_sizes: Vec::new(), form_timeout: Duration::from_secs(30) }
    }
}

struct FakeState {
    acl2: FakeAcl2,
    hang: bool,
    crashed: bool,
}

/// Observation and fault-injection handle shared with a [`FakeTransport`].
#[derive(Clone)]
pub struct FakeProbe {
    state: Arc<Mutex<FakeState>>,
}

impl FakeProbe {
    fn lock(&self) -> MutexGuard<'_, FakeState> {
        self.state.lock().unwrap_or_else(|e| e.into_inner())
    }

    pub fn world_events(&self) -> usize {
        self.lock().acl2.world_events()
    }

    /// Every form the fake has read, including sentinel prints.
    pub fn submissions(&self) -> Vec<String> {
        self.lock().acl2.log().to_vec()
    }

    pub fn set_hang(&self, hang: bool) {
        self.lock().hang = hang;
    }

    pub fn crash(&self) {
        self.lock().crashed = true;
    }

    pub fn function_names(&self) -> Vec<String> {
        self.lock().acl2.world().functions.keys().cloned().collect()
    }
}

pub struct FakeTransport {
    state: Arc<Mutex<FakeState>>,
    outbox: VecDeque<u8>,
    chunk_sizes: Vec<usize>,
    next_chunk: usize,
}

impl FakeTransport {
    pub fn new(options: FakeOptions) -> (Self, FakeProbe) {
        let state = Arc::new(Mutex::new(FakeState { acl2: FakeAcl2::new(), hang: false, crashed: false }));
        let mut outbox = VecDeque::new();
        outbox.extend(FAKE_BANNER.bytes().chain(FAKE_PROMPT.bytes()));
        let transport = FakeTransport { state: state.clone(), outbox, chunk_sizes: options.chunk_sizes, next_chunk: 0 };
        (transport, FakeProbe { state })
    }
}

impl Transport for FakeTransport {
    fn send(&mut self, bytes: &[u8]) -> std::io::Result<()> {
        let mut state = self.state.lock().unwrap_or_else(|e| e.into_inner());
        if state.crashed {
            return Err(std::io::Error::new(std::io::ErrorKind::BrokenPipe, "fake backend crashed"));
        }
        if state.hang {
            return Ok(());
        }
        let out = state.acl2.feed(&String::from_utf8_lossy(bytes));
        self.outbox.extend(out.bytes());
        Ok(())
    }

    fn recv(&mut self, timeout: Duration) -> Recv {
        if self.state.lock().unwrap_or_else(|e| e.into_inner()).crashed {
            return Recv::Eof;
        }
        if self.outbox.is_empty() {
            std::thread::sleep(timeout);
            return Recv::Timeout;
        }
        let size = match self.chunk_sizes.len() {
            0 => self.outbox.len(),
            n => {
                let s = self.chunk_sizes[self.next_chunk % n].max(1);
                self.next_chunk += 1;
                s.min(self.outbox.len())
            }
        };
        Recv::Data(self.outbox.drain(..size).collect())
    }

    fn kill(&mut self) {
        self.outbox.clear();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(acl2: &mut FakeAcl2, form: &str) -> String {
        acl2.feed(&format!("{form}\n"))
    }

    #[test]
    fn prompts_follow_each_form() {
        let mut a = FakeAcl2::new();
        assert_eq!(run(&mut a, "(+ 1 2) (cons 1 2)"), "3\nACL2 !>(1 . 2)\nACL2 !>");
        assert_eq!(a.log(), &["(+ 1 2)".to_string(), "(cons 1 2)".to_string()]);
    }

    #[test]
    fn forms_may_span_feeds() {
        let mut a = FakeAcl2::new();
        assert_eq!(a.feed("(+ 1\n"), "");
        assert_eq!(a.feed("2)"), "");
        assert_eq!(a.feed("\n"), "3\nACL2 !>");
    }

    #[test]
    fn events_and_undo() {
        let mut a = FakeAcl2::new();
        run(&mut a, "(defun f (x) x)");
        run(&mut a, "(defconst *k* (+ 1 2))");
        run(&mut a, "(defthm t2 (equal (f x) x))");
        assert_eq!(a.world_events(), 3);
        assert_eq!(run(&mut a, "(f *k*)"), "3\nACL2 !>");
        run(&mut a, ":ubt! :x-1");
        assert_eq!(a.world_events(), 1);
        assert!(run(&mut a, "*k*").contains("Global variables"));
        run(&mut a, ":u");
        assert_eq!(a.world_events(), 0);
        assert!(run(&mut a, ":ubt! :x").contains("ACL2 Error"));
    }

    #[test]
    fn failed_progn_leaves_world_unchanged() {
        let mut a = FakeAcl2::new();
        let out = run(&mut a, "(progn (defun f (x) x) (defun g (x) (h x)))");
        assert!(out.contains("******** FAILED ********"));
        assert_eq!(a.world_events(), 0);
        assert!(a.world().functions.is_empty());
    }

    #[test]
    fn defun_rejections() {
        let mut a = FakeAcl2::new();
        assert!(run(&mut a, "(defun f (x) y)").contains("free occurrence of the variable symbol Y"));
        assert!(run(&mut a, "(defun car (x) x)").contains("in use as a function"));
        assert!(run(&mut a, "(defun f (x) (g x))").contains("neither a function nor macro"));
    }

    #[test]
    fn include_book_matches_transcript_shape() {
        let mut a = FakeAcl2::new();
        let out = run(&mut a, "(include-book \"book\")");
        let raw = out.strip_suffix(FAKE_PROMPT).unwrap();
        let s = crate::output::summarize_raw(raw);
        assert_eq!(s.overall, crate::output::Overall::Failure);
        assert_eq!(s.items[0].headline, "The book could not be found at /book.lisp");
        assert_eq!(a.world_events(), 0);
    }

    #[test]
    fn check_expect_reports() {
        let mut a = FakeAcl2::new();
        assert_eq!(run(&mut a, "(check-expect (+ 1 1) 2)"), "T\nACL2 !>");
        assert!(run(&mut a, "(check-expect (+ 1 1) 3)").contains("ACL2 Error in CHECK-EXPECT"));
    }
}
