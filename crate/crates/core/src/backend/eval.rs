//! Evaluator for the logic-mode subset understood by the fake backend.
//!
//! Guards of built-in functions are checked only for calls written directly in
//! a top-level expression. Inside user functions the logical completions apply
//! (`(car 3)` is `nil`, non-numbers act as `0`), as in ACL2 for definitions
//! whose guards have not been verified.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::sexp::Node;
use crate::value::{symbol_name, Value};

const STEP_LIMIT: u64 = 5_000_000;
const DEPTH_LIMIT: usize = 1_500;
const EVAL_STACK_BYTES: usize = 256 << 20;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UserFn {
    pub params: Vec<String>,
    pub body: Node,
}

/// The logical world of the fake: what has been admitted so far.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct World {
    pub functions: BTreeMap<String, UserFn>,
    pub macros: BTreeSet<String>,
    pub constants: BTreeMap<String, Value>,
    pub theorems: BTreeSet<String>,
}

impl World {
    /// What `name` already denotes, if anything.
    pub fn name_in_use(&self, name: &str) -> Option<&'static str> {
        if self.functions.contains_key(name) || builtin_arity(name).is_some() || SPECIAL_FORMS.contains(&name) {
            Some("function")
        } else if self.macros.contains(name) {
            Some("macro")
        } else if self.constants.contains_key(name) {
            Some("constant")
        } else if self.theorems.contains(name) {
            Some("theorem")
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EvalError {
    UndefinedFunction(String),
    UnboundVariable(String),
    FreeVariable { function: String, variable: String },
    Arity { name: String, expected: String, given: usize, call: String },
    Guard { name: String, call: String },
    Macro(String),
    Unsupported(String),
    CheckFailed { form: String, expected: Box<Value>, actual: Box<Value> },
    StepLimit,
    DepthLimit,
    Malformed(String),
}

impl fmt::Display for EvalError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EvalError::UndefinedFunction(n) => write!(
                f,
                "The symbol {n} (in package \"ACL2\") has neither a function nor macro definition in ACL2.  Please define {n}."
            ),
            EvalError::UnboundVariable(n) => {
                write!(f, "Global variables, such as {n}, are not allowed.  See :DOC ASSIGN and :DOC @.")
            }
            EvalError::FreeVariable { function, variable } => write!(
                f,
                "The body of {function} contains a free occurrence of the variable symbol {variable}."
            ),
            EvalError::Arity { name, expected, given, call } => {
                write!(f, "{name} takes {expected} but in the call {call} it is given {given} argument{}.", plural(*given))
            }
            EvalError::Guard { name, call } => {
                write!(f, "The guard for the function call ({name} ...) is violated by the arguments in the call {call}.")
            }
            EvalError::Macro(n) => write!(f, "The fake backend cannot expand the user macro {n}."),
            EvalError::Unsupported(what) => write!(f, "The fake backend does not support {what}."),
            EvalError::CheckFailed { form, expected, actual } => {
                write!(f, "Check failed: {form} evaluated to {actual} but {expected} was expected.")
            }
            EvalError::StepLimit => f.write_str("Evaluation exceeded the step limit."),
            EvalError::DepthLimit => f.write_str("Call depth exceeded the limit."),
            EvalError::Malformed(what) => write!(f, "Malformed form: {what}."),
        }
    }
}

impl std::error::Error for EvalError {}

fn plural(n: usize) -> &'static str {
    if n == 1 {
        ""
    } else {
        "s"
    }
}

const SPECIAL_FORMS: &[&str] = &[
    "QUOTE",
    "IF",
    "COND",
    "CASE",
    "AND",
    "OR",
    "LET",
    "LET*",
    "THE",
    "MBE",
    "CW",
    "CHECK-EXPECT",
    "LIST",
    "LIST*",
    "APPEND",
    "+",
    "*",
    "DECLARE",
    "LAMBDA",
];

/// Arity bounds of functions the evaluator implements directly.
pub fn builtin_arity(name: &str) -> Option<(usize, Option<usize>)> {
    let exact = |n| Some((n, Some(n)));
    match name {
        "CONS" | "EQUAL" | "EQ" | "EQL" | "=" | "/=" | "<" | ">" | "<=" | ">=" | "MIN" | "MAX" | "EXPT" | "FLOOR"
        | "MOD" | "NTH" | "NTHCDR" | "TAKE" | "MEMBER" | "MEMBER-EQUAL" | "IMPLIES" | "IFF" | "XOR"
        | "STRING-APPEND" | "ASSOC" | "ASSOC-EQUAL" | "REMOVE" | "REMOVE-EQUAL" | "BINARY-+" | "BINARY-*"
        | "BINARY-APPEND" => exact(2),
        "CAR" | "CDR" | "CONSP" | "ATOM" | "ENDP" | "LISTP" | "TRUE-LISTP" | "NULL" | "NOT" | "ZP" | "ZIP" | "NATP"
        | "POSP" | "INTEGERP" | "RATIONALP" | "ACL2-NUMBERP" | "BOOLEANP" | "SYMBOLP" | "STRINGP" | "CHARACTERP"
        | "KEYWORDP" | "EVENP" | "ODDP" | "1+" | "1-" | "ABS" | "NUMERATOR" | "DENOMINATOR" | "FIRST" | "SECOND"
        | "THIRD" | "FOURTH" | "FIFTH" | "REST" | "LEN" | "REV" | "REVERSE" | "LAST" | "NAT-LISTP"
        | "INTEGER-LISTP" | "RATIONAL-LISTP" | "SYMBOL-LISTP" | "CHARACTER-LISTP" | "STRING-LISTP"
        | "BOOLEAN-LISTP" | "LENGTH" | "SYMBOL-NAME" | "UNARY--" | "UNARY-/" | "NO-DUPLICATESP" | "IDENTITY" => {
            exact(1)
        }
        "-" | "/" => Some((1, Some(2))),
        "IF" => exact(3),
        _ => None,
    }
}

pub fn is_known(name: &str) -> bool {
    builtin_arity(name).is_some() || SPECIAL_FORMS.contains(&name)
}

type Env = Vec<(String, Value)>;

pub struct Evaluator<'w> {
    world: &'w World,
    steps: u64,
    depth: usize,
    /// Text printed by `cw` during evaluation.
    pub printed: String,
}

fn num(v: &Value) -> BigRational {
    match v {
        Value::Number(r) => r.clone(),
        _ => BigRational::zero(),
    }
}

fn int(v: &Value) -> BigInt {
    match v.as_integer() {
        Some(i) => i.clone(),
        None => BigInt::zero(),
    }
}

fn number(r: BigRational) -> Value {
    Value::Number(r)
}

fn car(v: &Value) -> Value {
    match v {
        Value::Cons(a, _) => (**a).clone(),
        _ => Value::nil(),
    }
}

fn cdr(v: &Value) -> Value {
    match v {
        Value::Cons(_, b) => (**b).clone(),
        _ => Value::nil(),
    }
}

fn is_listp(v: &Value) -> bool {
    matches!(v, Value::Cons(..)) || v.is_nil()
}

fn is_true_list(v: &Value) -> bool {
    v.to_vec().is_some()
}

/// Elements of a list, ignoring a non-nil final cdr.
fn elements(v: &Value) -> Vec<Value> {
    let mut out = Vec::new();
    let mut cur = v;
    while let Value::Cons(a, b) = cur {
        out.push((**a).clone());
        cur = b;
    }
    out
}

fn is_nat(v: &Value) -> bool {
    v.as_integer().is_some_and(|i| !i.is_negative())
}

fn list_of(v: &Value, pred: impl Fn(&Value) -> bool) -> bool {
    v.to_vec().is_some_and(|xs| xs.iter().all(pred))
}

fn is_boolean(v: &Value) -> bool {
    matches!(v, Value::Symbol(s) if s == "T" || s == "NIL")
}

fn is_symbol(v: &Value) -> bool {
    matches!(v, Value::Symbol(_))
}

fn to_usize(v: &Value) -> usize {
    v.as_integer().and_then(ToPrimitive::to_usize).unwrap_or(0)
}

fn render_call(node: &Node) -> String {
    Value::from_node(node).map(|v| v.to_string()).unwrap_or_else(|_| "(...)".into())
}

fn render_values(name: &str, args: &[Value]) -> String {
    let mut s = format!("({name}");
    for a in args {
        s.push(' ');
        match a {
            Value::Symbol(_) | Value::Cons(..) => s.push_str(&a.to_literal()),
            _ => s.push_str(&a.to_string()),
        }
    }
    s.push(')');
    s
}

impl<'w> Evaluator<'w> {
    pub fn new(world: &'w World) -> Self {
        Evaluator { world, steps: 0, depth: 0, printed: String::new() }
    }

    /// Evaluates a top-level expression on a thread with a stack large enough
    /// for the depth limit.
    pub fn eval_top(&mut self, node: &Node) -> Result<Value, EvalError> {
        std::thread::scope(|scope| {
            std::thread::Builder::new()
                .stack_size(EVAL_STACK_BYTES)
                .spawn_scoped(scope, || self.eval(node, &Vec::new(), true))
                .expect("spawn evaluator thread")
                .join()
                .unwrap_or(Err(EvalError::DepthLimit))
        })
    }

    fn eval(&mut self, node: &Node, env: &Env, checked: bool) -> Result<Value, EvalError> {
        self.steps += 1;
        if self.steps > STEP_LIMIT {
            return Err(EvalError::StepLimit);
        }
        match node {
            Node::Atom { .. } => {
                if let Some(sym) = node.as_symbol().filter(|s| !s.starts_with(':')) {
                    let name = symbol_name(sym);
                    return self.variable(&name, env);
                }
                Value::from_node(node).map_err(EvalError::Malformed)
            }
            Node::Quoted { prefix, inner, .. } if prefix == "'" => {
                Value::from_node(inner.as_deref().ok_or(EvalError::Malformed("empty quote".into()))?)
                    .map_err(EvalError::Malformed)
            }
            Node::Quoted { .. } => Err(EvalError::Unsupported("backquote".into())),
            Node::List { children, .. } => {
                let Some(first) = children.first() else { return Ok(Value::nil()) };
                if let Some(lambda) =
                    first.as_list().filter(|_| first.head().is_some_and(|h| h.eq_ignore_ascii_case("lambda")))
                {
                    return self.lambda(lambda, &children[1..], env, checked);
                }
                let Some(head) = first.as_symbol() else {
                    return Err(EvalError::Malformed(format!("{} is not a function name", render_call(first))));
                };
                self.call(&symbol_name(head), node, &children[1..], env, checked)
            }
        }
    }

    fn variable(&self, name: &str, env: &Env) -> Result<Value, EvalError> {
        if name == "T" || name == "NIL" {
            return Ok(Value::symbol(name));
        }
        if let Some((_, v)) = env.iter().rev().find(|(n, _)| n == name) {
            return Ok(v.clone());
        }
        self.world.constants.get(name).cloned().ok_or_else(|| EvalError::UnboundVariable(name.to_string()))
    }

    fn eval_args(&mut self, args: &[Node], env: &Env, checked: bool) -> Result<Vec<Value>, EvalError> {
        args.iter().map(|a| self.eval(a, env, checked)).collect()
    }

    fn lambda(&mut self, lambda: &[Node], args: &[Node], env: &Env, checked: bool) -> Result<Value, EvalError> {
        let params = lambda
            .get(1)
            .and_then(Node::as_list)
            .ok_or_else(|| EvalError::Malformed("lambda without formals".into()))?;
        let body =
            lambda.last().filter(|_| lambda.len() >= 3).ok_or(EvalError::Malformed("lambda without body".into()))?;
        if params.len() != args.len() {
            return Err(EvalError::Malformed("lambda applied to the wrong number of arguments".into()));
        }
        let values = self.eval_args(args, env, checked)?;
        let mut inner = Env::new();
        for (p, v) in params.iter().zip(values) {
            inner.push((symbol_name(p.as_symbol().unwrap_or("")), v));
        }
        self.eval(body, &inner, checked)
    }

    fn call(&mut self, name: &str, node: &Node, args: &[Node], env: &Env, checked: bool) -> Result<Value, EvalError> {
        match name {
            "QUOTE" => {
                let [datum] = args else { return Err(EvalError::Malformed("quote takes one argument".into())) };
                return Value::from_node(datum).map_err(EvalError::Malformed);
            }
            "IF" => {
                let [c, a, b] = args else {
                    return Err(arity_error("IF", (3, Some(3)), args.len(), node));
                };
                let branch = if self.eval(c, env, checked)?.is_true() { a } else { b };
                return self.eval(branch, env, checked);
            }
            "AND" => {
                let mut last = Value::t();
                for a in args {
                    last = self.eval(a, env, checked)?;
                    if last.is_nil() {
                        return Ok(last);
                    }
                }
                return Ok(last);
            }
            "OR" => {
                for a in args {
                    let v = self.eval(a, env, checked)?;
                    if v.is_true() {
                        return Ok(v);
                    }
                }
                return Ok(Value::nil());
            }
            "COND" => {
                for clause in args {
                    let parts = clause.as_list().ok_or_else(|| EvalError::Malformed("cond clause".into()))?;
                    let Some(test) = parts.first() else { continue };
                    let v = self.eval(test, env, checked)?;
                    if v.is_true() {
                        return match parts.last() {
                            Some(last) if parts.len() > 1 => self.eval(last, env, checked),
                            _ => Ok(v),
                        };
                    }
                }
                return Ok(Value::nil());
            }
            "CASE" => {
                let Some((key, clauses)) = args.split_first() else {
                    return Err(EvalError::Malformed("case without a key".into()));
                };
                let key = self.eval(key, env, checked)?;
                for clause in clauses {
                    let parts = clause.as_list().ok_or_else(|| EvalError::Malformed("case clause".into()))?;
                    let Some(keys) = parts.first() else { continue };
                    let hit = match keys.as_symbol().map(symbol_name).as_deref() {
                        Some("OTHERWISE") | Some("T") => true,
                        _ => match Value::from_node(keys).map_err(EvalError::Malformed)? {
                            v @ Value::Cons(..) => v.to_vec().unwrap_or_default().contains(&key),
                            v if v.is_nil() => false,
                            v => v == key,
                        },
                    };
                    if hit {
                        return match parts.last() {
                            Some(last) if parts.len() > 1 => self.eval(last, env, checked),
                            _ => Ok(Value::nil()),
                        };
                    }
                }
                return Ok(Value::nil());
            }
            "LET" | "LET*" => {
                let (Some(bindings), Some(body)) = (args.first().and_then(Node::as_list), args.last()) else {
                    return Err(EvalError::Malformed("let bindings".into()));
                };
                if args.len() < 2 {
                    return Err(EvalError::Malformed("let without a body".into()));
                }
                let mut inner = env.clone();
                for b in bindings {
                    let pair =
                        b.as_list().filter(|p| p.len() == 2).ok_or(EvalError::Malformed("let binding".into()))?;
                    let var = symbol_name(pair[0].as_symbol().ok_or(EvalError::Malformed("let variable".into()))?);
                    let scope = if name == "LET" { env } else { &inner };
                    let v = self.eval(&pair[1], scope, checked)?;
                    inner.push((var, v));
                }
                return self.eval(body, &inner, checked);
            }
            "THE" => {
                let [_, x] = args else { return Err(EvalError::Malformed("the".into())) };
                return self.eval(x, env, checked);
            }
            "MBE" => {
                let logic = args
                    .chunks(2)
                    .find(|kv| kv[0].as_symbol().is_some_and(|k| k.eq_ignore_ascii_case(":logic")))
                    .and_then(|kv| kv.get(1))
                    .ok_or(EvalError::Malformed("mbe without :logic".into()))?;
                return self.eval(logic, env, checked);
            }
            "CW" => {
                let values = self.eval_args(args, env, checked)?;
                let Some((Value::Str(fmt), rest)) = values.split_first() else {
                    return Err(EvalError::Malformed("cw needs a format string".into()));
                };
                self.printed.push_str(&format_cw(fmt, rest));
                return Ok(Value::nil());
            }
            "CHECK-EXPECT" => {
                let [actual, expected] = args else {
                    return Err(arity_error("CHECK-EXPECT", (2, Some(2)), args.len(), node));
                };
                let a = self.eval(actual, env, checked)?;
                let e = self.eval(expected, env, checked)?;
                if a == e {
                    return Ok(Value::t());
                }
                return Err(EvalError::CheckFailed {
                    form: render_call(actual),
                    expected: Box::new(e),
                    actual: Box::new(a),
                });
            }
            "LIST" => return Ok(Value::list(self.eval_args(args, env, checked)?)),
            "LIST*" => {
                let mut values = self.eval_args(args, env, checked)?;
                let tail = values.pop().ok_or_else(|| arity_error("LIST*", (1, None), 0, node))?;
                return Ok(values.into_iter().rev().fold(tail, |acc, v| Value::cons(v, acc)));
            }
            "+" | "*" => {
                let values = self.eval_args(args, env, checked)?;
                if checked && values.iter().any(|v| !matches!(v, Value::Number(_))) {
                    return Err(guard_error(if name == "+" { "BINARY-+" } else { "BINARY-*" }, &values));
                }
                let nums = values.iter().map(num);
                return Ok(number(if name == "+" { nums.sum() } else { nums.product() }));
            }
            "APPEND" => {
                let values = self.eval_args(args, env, checked)?;
                if checked && values.iter().rev().skip(1).any(|v| !is_true_list(v)) {
                    return Err(guard_error("BINARY-APPEND", &values));
                }
                let mut iter = values.into_iter().rev();
                let tail = iter.next().unwrap_or_else(Value::nil);
                return Ok(iter.fold(tail, |acc, v| elements(&v).into_iter().rev().fold(acc, |a, x| Value::cons(x, a))));
            }
            "DECLARE" => return Ok(Value::nil()),
            "LAMBDA" => return Err(EvalError::Malformed("lambda is not a function".into())),
            _ => {}
        }

        if let Some(f) = self.world.functions.get(name) {
            if f.params.len() != args.len() {
                return Err(EvalError::Arity {
                    name: name.to_string(),
                    expected: format!("{} argument{}", f.params.len(), plural(f.params.len())),
                    given: args.len(),
                    call: render_call(node),
                });
            }
            let values = self.eval_args(args, env, checked)?;
            if self.depth >= DEPTH_LIMIT {
                return Err(EvalError::DepthLimit);
            }
            let inner: Env = f.params.iter().cloned().zip(values).collect();
            self.depth += 1;
            let result = self.eval(&f.body, &inner, false);
            self.depth -= 1;
            return result;
        }
        if self.world.macros.contains(name) {
            return Err(EvalError::Macro(name.to_string()));
        }
        let Some(bounds) = builtin_arity(name) else {
            return Err(EvalError::UndefinedFunction(name.to_string()));
        };
        if args.len() < bounds.0 || bounds.1.is_some_and(|max| args.len() > max) {
            return Err(arity_error(name, bounds, args.len(), node));
        }
        let values = self.eval_args(args, env, checked)?;
        apply_builtin(name, &values, checked)
    }
}

fn arity_error(name: &str, (min, max): (usize, Option<usize>), given: usize, node: &Node) -> EvalError {
    let expected = match max {
        Some(m) if m == min => format!("{min} argument{}", plural(min)),
        Some(m) => format!("{min} to {m} arguments"),
        None => format!("at least {min} argument{}", plural(min)),
    };
    EvalError::Arity { name: name.to_string(), expected, given, call: render_call(node) }
}

fn guard_error(name: &str, args: &[Value]) -> EvalError {
    EvalError::Guard { name: name.to_string(), call: render_values(name, args) }
}

/// `cw` directives: `~x`/`~y`/`~s` followed by an argument digit, `~%` and `~~`.
pub fn format_cw(fmt: &str, args: &[Value]) -> String {
    let mut out = String::new();
    let mut chars = fmt.chars().peekable();
    while let Some(c) = chars.next() {
        if c != '~' {
            out.push(c);
            continue;
        }
        match chars.next() {
            Some('%') => out.push('\n'),
            Some('~') => out.push('~'),
            Some(d @ ('x' | 'y' | 's' | 'X' | 'Y' | 'S')) => {
                let idx = chars.next().and_then(|n| n.to_digit(10)).unwrap_or(0) as usize;
                match (d.to_ascii_lowercase(), args.get(idx)) {
                    ('s', Some(Value::Str(s))) => out.push_str(s),
                    (_, Some(v)) => out.push_str(&v.to_string()),
                    (_, None) => {}
                }
            }
            Some(other) => {
                out.push('~');
                out.push(other);
            }
            None => out.push('~'),
        }
    }
    out
}

fn apply_builtin(name: &str, a: &[Value], checked: bool) -> Result<Value, EvalError> {
    let guard = |ok: bool| if checked && !ok { Err(guard_error(name, a)) } else { Ok(()) };
    let is_num = |v: &Value| matches!(v, Value::Number(_));
    let is_rat = is_num;
    let b = Value::bool;
    Ok(match name {
        "CONS" => Value::cons(a[0].clone(), a[1].clone()),
        "CAR" | "FIRST" => {
            guard(is_listp(&a[0]))?;
            car(&a[0])
        }
        "CDR" | "REST" => {
            guard(is_listp(&a[0]))?;
            cdr(&a[0])
        }
        "SECOND" | "THIRD" | "FOURTH" | "FIFTH" => {
            guard(is_listp(&a[0]))?;
            let n = ["SECOND", "THIRD", "FOURTH", "FIFTH"].iter().position(|s| *s == name).unwrap_or(0) + 1;
            elements(&a[0]).get(n).cloned().unwrap_or_else(Value::nil)
        }
        "CONSP" => b(matches!(a[0], Value::Cons(..))),
        "ATOM" => b(!matches!(a[0], Value::Cons(..))),
        "ENDP" => {
            guard(is_listp(&a[0]))?;
            b(!matches!(a[0], Value::Cons(..)))
        }
        "LISTP" => b(is_listp(&a[0])),
        "TRUE-LISTP" => b(is_true_list(&a[0])),
        "NULL" | "NOT" => b(a[0].is_nil()),
        "IDENTITY" => a[0].clone(),
        "EQUAL" => b(a[0] == a[1]),
        "EQ" | "EQL" => b(a[0] == a[1]),
        "=" | "/=" => {
            guard(is_num(&a[0]) && is_num(&a[1]))?;
            b((num(&a[0]) == num(&a[1])) == (name == "="))
        }
        "<" | ">" | "<=" | ">=" => {
            guard(is_rat(&a[0]) && is_rat(&a[1]))?;
            let (x, y) = (num(&a[0]), num(&a[1]));
            b(match name {
                "<" => x < y,
                ">" => x > y,
                "<=" => x <= y,
                _ => x >= y,
            })
        }
        "ZP" => {
            guard(is_nat(&a[0]))?;
            b(!is_nat(&a[0]) || int(&a[0]).is_zero())
        }
        "ZIP" => {
            guard(a[0].as_integer().is_some())?;
            b(int(&a[0]).is_zero())
        }
        "NATP" => b(is_nat(&a[0])),
        "POSP" => b(a[0].as_integer().is_some_and(|i| i.is_positive())),
        "INTEGERP" => b(a[0].as_integer().is_some()),
        "RATIONALP" | "ACL2-NUMBERP" => b(is_num(&a[0])),
        "BOOLEANP" => b(is_boolean(&a[0])),
        "SYMBOLP" => b(is_symbol(&a[0])),
        "KEYWORDP" => b(matches!(&a[0], Value::Symbol(s) if s.starts_with(':'))),
        "STRINGP" => b(matches!(a[0], Value::Str(_))),
        "CHARACTERP" => b(matches!(a[0], Value::Char(_))),
        "EVENP" | "ODDP" => {
            guard(a[0].as_integer().is_some())?;
            let even = (int(&a[0]) % BigInt::from(2)).is_zero();
            b(even == (name == "EVENP"))
        }
        "1+" | "1-" => {
            guard(is_num(&a[0]))?;
            let one = BigRational::one();
            number(if name == "1+" { num(&a[0]) + one } else { num(&a[0]) - one })
        }
        "-" | "UNARY--" => {
            guard(a.iter().all(is_num))?;
            match a {
                [x] => number(-num(x)),
                [x, y] => number(num(x) - num(y)),
                _ => unreachable!("arity checked"),
            }
        }
        "/" | "UNARY-/" => {
            let (x, y) = match a {
                [y] => (BigRational::one(), y),
                [x, y] => (num(x), y),
                _ => unreachable!("arity checked"),
            };
            guard(a.iter().all(is_num) && !num(y).is_zero())?;
            let y = num(y);
            number(if y.is_zero() { BigRational::zero() } else { x / y })
        }
        "ABS" => {
            guard(is_rat(&a[0]))?;
            number(num(&a[0]).abs())
        }
        "MIN" | "MAX" => {
            guard(is_rat(&a[0]) && is_rat(&a[1]))?;
            let (x, y) = (num(&a[0]), num(&a[1]));
            let pick_x = if name == "MIN" { x <= y } else { x >= y };
            if pick_x {
                a[0].clone()
            } else {
                a[1].clone()
            }
        }
        "EXPT" => {
            guard(is_num(&a[0]) && a[1].as_integer().is_some())?;
            let base = num(&a[0]);
            let e = int(&a[1]).to_i32().unwrap_or(0);
            if base.is_zero() && e < 0 {
                number(BigRational::zero())
            } else {
                number(num_traits::pow::Pow::pow(base, e))
            }
        }
        "FLOOR" | "MOD" => {
            guard(is_rat(&a[0]) && is_rat(&a[1]) && !num(&a[1]).is_zero())?;
            let (x, y) = (num(&a[0]), num(&a[1]));
            if y.is_zero() {
                if name == "FLOOR" {
                    number(BigRational::zero())
                } else {
                    number(x)
                }
            } else {
                let q = (x.clone() / y.clone()).floor();
                if name == "FLOOR" {
                    number(q)
                } else {
                    number(x - q * y)
                }
            }
        }
        "NUMERATOR" => number(BigRational::from_integer(num(&a[0]).numer().clone())),
        "DENOMINATOR" => number(BigRational::from_integer(num(&a[0]).denom().clone())),
        "LEN" => Value::int(elements(&a[0]).len() as i64),
        "REV" | "REVERSE" => {
            guard(is_true_list(&a[0]) || (name == "REVERSE" && matches!(a[0], Value::Str(_))))?;
            match &a[0] {
                Value::Str(s) => Value::Str(s.chars().rev().collect()),
                v => Value::list(elements(v).into_iter().rev().collect::<Vec<_>>()),
            }
        }
        "LAST" => {
            guard(is_listp(&a[0]))?;
            let mut cur = a[0].clone();
            while let Value::Cons(_, rest) = &cur {
                if !matches!(**rest, Value::Cons(..)) {
                    break;
                }
                cur = (**rest).clone();
            }
            cur
        }
        "NTH" => {
            guard(is_nat(&a[0]) && is_true_list(&a[1]))?;
            elements(&a[1]).get(to_usize(&a[0])).cloned().unwrap_or_else(Value::nil)
        }
        "NTHCDR" => {
            guard(is_nat(&a[0]) && is_true_list(&a[1]))?;
            let mut cur = a[1].clone();
            for _ in 0..to_usize(&a[0]) {
                cur = cdr(&cur);
            }
            cur
        }
        "TAKE" => {
            guard(is_nat(&a[0]) && is_true_list(&a[1]))?;
            let xs = elements(&a[1]);
            let n = to_usize(&a[0]);
            Value::list((0..n).map(|i| xs.get(i).cloned().unwrap_or_else(Value::nil)).collect::<Vec<_>>())
        }
        "MEMBER" | "MEMBER-EQUAL" => {
            guard(is_true_list(&a[1]))?;
            let mut cur = a[1].clone();
            loop {
                match &cur {
                    Value::Cons(x, rest) => {
                        if **x == a[0] {
                            break cur.clone();
                        }
                        let next = (**rest).clone();
                        cur = next;
                    }
                    _ => break Value::nil(),
                }
            }
        }
        "ASSOC" | "ASSOC-EQUAL" => {
            guard(is_true_list(&a[1]))?;
            elements(&a[1])
                .into_iter()
                .find(|p| matches!(p, Value::Cons(..)) && car(p) == a[0])
                .unwrap_or_else(Value::nil)
        }
        "REMOVE" | "REMOVE-EQUAL" => {
            guard(is_true_list(&a[1]))?;
            Value::list(elements(&a[1]).into_iter().filter(|x| *x != a[0]).collect::<Vec<_>>())
        }
        "NO-DUPLICATESP" => {
            guard(is_true_list(&a[0]))?;
            let xs = elements(&a[0]);
            b(xs.iter().enumerate().all(|(i, x)| !xs[i + 1..].contains(x)))
        }
        "NAT-LISTP" => b(list_of(&a[0], is_nat)),
        "INTEGER-LISTP" => b(list_of(&a[0], |v| v.as_integer().is_some())),
        "RATIONAL-LISTP" => b(list_of(&a[0], is_num)),
        "SYMBOL-LISTP" => b(list_of(&a[0], is_symbol)),
        "CHARACTER-LISTP" => b(list_of(&a[0], |v| matches!(v, Value::Char(_)))),
        "STRING-LISTP" => b(list_of(&a[0], |v| matches!(v, Value::Str(_)))),
        "BOOLEAN-LISTP" => b(list_of(&a[0], is_boolean)),
        "IMPLIES" => b(a[0].is_nil() || a[1].is_true()),
        "IFF" => b(a[0].is_true() == a[1].is_true()),
        "XOR" => b(a[0].is_true() != a[1].is_true()),
        "STRING-APPEND" => {
            guard(matches!((&a[0], &a[1]), (Value::Str(_), Value::Str(_))))?;
            let text = |v: &Value| if let Value::Str(s) = v { s.clone() } else { String::new() };
            Value::Str(text(&a[0]) + &text(&a[1]))
        }
        "LENGTH" => match &a[0] {
            Value::Str(s) => Value::int(s.chars().count() as i64),
            v => {
                guard(is_true_list(v))?;
                Value::int(elements(v).len() as i64)
            }
        },
        "SYMBOL-NAME" => {
            guard(is_symbol(&a[0]))?;
            match &a[0] {
                Value::Symbol(s) => Value::Str(s.trim_start_matches(':').to_string()),
                _ => Value::Str(String::new()),
            }
        }
        "BINARY-+" => number(num(&a[0]) + num(&a[1])),
        "BINARY-*" => number(num(&a[0]) * num(&a[1])),
        "BINARY-APPEND" => elements(&a[0]).into_iter().rev().fold(a[1].clone(), |acc, x| Value::cons(x, acc)),
        "IF" => {
            if a[0].is_true() {
                a[1].clone()
            } else {
                a[2].clone()
            }
        }
        other => return Err(EvalError::UndefinedFunction(other.to_string())),
    })
}

/// Static admission check for a definition body: every call names a known or
/// already-defined function with the right arity, and every variable is bound.
pub fn check_definition(world: &World, name: &str, params: &[String], body: &Node) -> Result<(), EvalError> {
    let mut checker = Checker { world, name, arity: params.len(), bound: params.to_vec() };
    checker.check(body)
}

struct Checker<'w> {
    world: &'w World,
    name: &'w str,
    arity: usize,
    bound: Vec<String>,
}

impl Checker<'_> {
    fn check(&mut self, node: &Node) -> Result<(), EvalError> {
        match node {
            Node::Atom { .. } => {
                let Some(sym) = node.as_symbol().filter(|s| !s.starts_with(':')) else { return Ok(()) };
                let var = symbol_name(sym);
                if var == "T" || var == "NIL" || self.bound.contains(&var) || self.world.constants.contains_key(&var) {
                    Ok(())
                } else {
                    Err(EvalError::FreeVariable { function: self.name.to_string(), variable: var })
                }
            }
            Node::Quoted { .. } => Ok(()),
            Node::List { children, .. } => {
                let Some(first) = children.first() else { return Ok(()) };
                let args = &children[1..];
                if first.head().is_some_and(|h| h.eq_ignore_ascii_case("lambda")) {
                    let lambda = first.as_list().unwrap_or_default();
                    let mark = self.bound.len();
                    for p in lambda.get(1).and_then(Node::as_list).unwrap_or_default() {
                        self.bound.push(symbol_name(p.as_symbol().unwrap_or("")));
                    }
                    let r = lambda.last().map_or(Ok(()), |b| self.check(b));
                    self.bound.truncate(mark);
                    r?;
                    return self.all(args);
                }
                let Some(head) = first.as_symbol() else {
                    return Err(EvalError::Malformed(format!("{} is not a function name", render_call(first))));
                };
                let head = symbol_name(head);
                match head.as_str() {
                    "QUOTE" | "DECLARE" => Ok(()),
                    "LET" | "LET*" => {
                        let bindings = args.first().and_then(Node::as_list).unwrap_or_default();
                        let mark = self.bound.len();
                        let mut names = Vec::new();
                        for b in bindings {
                            let pair = b.as_list().unwrap_or_default();
                            if let Some(v) = pair.get(1) {
                                self.check(v)?;
                            }
                            let var = symbol_name(pair.first().and_then(Node::as_symbol).unwrap_or(""));
                            if head == "LET*" {
                                self.bound.push(var);
                            } else {
                                names.push(var);
                            }
                        }
                        self.bound.extend(names);
                        let r = self.all(&args[1.min(args.len())..]);
                        self.bound.truncate(mark);
                        r
                    }
                    "COND" => args.iter().try_for_each(|c| self.all(c.as_list().unwrap_or_default())),
                    "CASE" => {
                        if let Some(key) = args.first() {
                            self.check(key)?;
                        }
                        args.iter()
                            .skip(1)
                            .try_for_each(|c| self.all(c.as_list().map_or(&[][..], |p| &p[1.min(p.len())..])))
                    }
                    "THE" => self.all(&args[1.min(args.len())..]),
                    "MBE" => args
                        .iter()
                        .filter(|a| a.as_symbol().is_none_or(|s| !s.starts_with(':')))
                        .try_for_each(|a| self.check(a)),
                    _ if self.world.macros.contains(&head) => Ok(()),
                    _ => {
                        let bounds = if head == self.name {
                            Some((self.arity, Some(self.arity)))
                        } else if let Some(f) = self.world.functions.get(&head) {
                            Some((f.params.len(), Some(f.params.len())))
                        } else if let Some(b) = builtin_arity(&head) {
                            Some(b)
                        } else if SPECIAL_FORMS.contains(&head.as_str()) {
                            None
                        } else {
                            return Err(EvalError::UndefinedFunction(head));
                        };
                        if let Some(bounds) = bounds {
                            if args.len() < bounds.0 || bounds.1.is_some_and(|m| args.len() > m) {
                                return Err(arity_error(&head, bounds, args.len(), node));
                            }
                        }
                        self.all(args)
                    }
                }
            }
        }
    }

    fn all(&mut self, nodes: &[Node]) -> Result<(), EvalError> {
        nodes.iter().try_for_each(|n| self.check(n))
    }
}
