//! Property-based testing for `defproperty` forms.
//!
//! ```text
//! (defproperty name [:repeat n]
//!   (var :value (random-...) ...)
//!   body)
//! ```
//!
//! Values come from a xorshift64* generator seeded through splitmix64, so a
//! report is a pure function of the property, trial count, seed and backend.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::backend::{BackendError, BackendHandle, Outcome};
use crate::lex::TokenClass;
use crate::output;
use crate::par;
use crate::sexp::{self, Node, TopLevelForm};
use crate::value::{symbol_name, Value};

pub const DEFAULT_LIST_MAX: usize = 5;
pub const DEFAULT_INT_RANGE: (i64, i64) = (-1000, 1000);
pub const DEFAULT_NAT_MAX: u64 = 1000;
pub const DEFAULT_DENOM_MAX: u64 = 1000;
const NAME_MAX: u64 = 8;

/// xorshift64* (Vigna), constants 12/25/27 and 0x2545F4914F6CDD1D.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Rng(u64);

impl Rng {
    /// Seeds through one splitmix64 step so that small seeds spread out.
    pub fn from_seed(seed: u64) -> Rng {
        let mut z = seed.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^= z >> 31;
        Rng(if z == 0 { 0x9E37_79B9_7F4A_7C15 } else { z })
    }

    pub fn next_u64(&mut self) -> u64 {
        let mut x = self.0;
        x ^= x >> 12;
        x ^= x << 25;
        x ^= x >> 27;
        self.0 = x;
        x.wrapping_mul(0x2545_F491_4F6C_DD1D)
    }

    /// Uniform-ish in `[0, n)` by reduction modulo `n`.
    pub fn below(&mut self, n: u64) -> u64 {
        if n == 0 {
            0
        } else {
            self.next_u64() % n
        }
    }

    fn range(&mut self, lo: i64, hi: i64) -> i64 {
        lo + self.below((hi - lo + 1) as u64) as i64
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum GeneratorSpec {
    Natural,
    Integer,
    Rational,
    Boolean,
    Character,
    Symbol,
    String,
    Between { lo: i64, hi: i64 },
    ListOf { element: Box<GeneratorSpec>, max_length: usize },
    OneOf { constants: Vec<String> },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Binding {
    /// The variable as written in the source.
    pub var: String,
    pub generator: GeneratorSpec,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PropertySpec {
    pub name: String,
    pub bindings: Vec<Binding>,
    /// Body text exactly as written.
    pub body: String,
    pub body_node: Node,
    pub repeat: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("malformed property: {0}")]
pub struct PropertyError(pub String);

impl PropertyError {
    pub fn code(&self) -> &'static str {
        "malformed-property"
    }
}

fn malformed<T>(msg: impl Into<String>) -> Result<T, PropertyError> {
    Err(PropertyError(msg.into()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportStatus {
    Passed,
    Falsified,
    Aborted,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestReport {
    pub property: String,
    pub status: ReportStatus,
    pub trials_run: usize,
    pub passes: usize,
    /// Variable and printed value pairs of the first falsifying trial.
    pub counterexample: Option<Vec<(String, String)>>,
    pub seed: u64,
    /// Backend failure that aborted the run.
    pub error: Option<String>,
}

impl TestReport {
    /// One summary line followed by counterexample bindings, one per line.
    pub fn render(&self) -> String {
        let mut out = match self.status {
            ReportStatus::Passed => {
                format!("{}: passed {}/{} trials (seed {})", self.property, self.passes, self.trials_run, self.seed)
            }
            ReportStatus::Falsified => format!(
                "{}: falsified after {} trial{} (seed {})",
                self.property,
                self.trials_run,
                if self.trials_run == 1 { "" } else { "s" },
                self.seed
            ),
            ReportStatus::Aborted => format!(
                "{}: aborted after {} trials: {} (seed {})",
                self.property,
                self.trials_run,
                self.error.as_deref().unwrap_or("backend failure"),
                self.seed
            ),
        };
        for (var, value) in self.counterexample.iter().flatten() {
            out.push_str(&format!("\n  {var} = {value}"));
        }
        out
    }
}

fn keyword(node: &Node) -> Option<String> {
    match node {
        Node::Atom { class: TokenClass::Keyword, text, .. } => Some(text.to_ascii_lowercase()),
        _ => None,
    }
}

fn small_int(node: &Node) -> Option<i64> {
    match Value::from_node(node).ok()? {
        Value::Number(r) if r.is_integer() => r.numer().to_i64(),
        _ => None,
    }
}

/// Reads a `(random-...)` generator expression.
pub fn parse_generator(node: &Node) -> Result<GeneratorSpec, PropertyError> {
    let Some(head) = node.head().map(str::to_ascii_lowercase) else {
        return malformed("a generator must be a (random-...) call");
    };
    let args = &node.as_list().unwrap_or_default()[1..];
    let nullary =
        |g: GeneratorSpec| if args.is_empty() { Ok(g) } else { malformed(format!("{head} takes no arguments")) };
    match head.as_str() {
        "random-natural" => nullary(GeneratorSpec::Natural),
        "random-integer" => nullary(GeneratorSpec::Integer),
        "random-rational" => nullary(GeneratorSpec::Rational),
        "random-boolean" => nullary(GeneratorSpec::Boolean),
        "random-char" | "random-character" => nullary(GeneratorSpec::Character),
        "random-symbol" => nullary(GeneratorSpec::Symbol),
        "random-string" => nullary(GeneratorSpec::String),
        "random-between" => {
            let [lo, hi] = args else { return malformed("random-between takes two integer bounds") };
            let (Some(lo), Some(hi)) = (small_int(lo), small_int(hi)) else {
                return malformed("random-between bounds must be integer literals");
            };
            if lo > hi {
                return malformed(format!("random-between bounds are reversed ({lo} > {hi})"));
            }
            Ok(GeneratorSpec::Between { lo, hi })
        }
        "random-list-of" => {
            let Some((element, options)) = args.split_first() else {
                return malformed("random-list-of needs an element generator");
            };
            let element = Box::new(parse_generator(element)?);
            let max_length = match options {
                [] => DEFAULT_LIST_MAX,
                [k, n] if keyword(k).as_deref() == Some(":size") => match small_int(n) {
                    Some(n) if n >= 0 => n as usize,
                    _ => return malformed(":size must be a non-negative integer"),
                },
                _ => return malformed("random-list-of accepts only a :size option"),
            };
            Ok(GeneratorSpec::ListOf { element, max_length })
        }
        "random-one-of" => {
            if args.is_empty() {
                return malformed("random-one-of needs at least one constant");
            }
            let constants = args
                .iter()
                .map(|a| match a {
                    Node::Quoted { prefix, inner: Some(inner), .. } if prefix == "'" => {
                        Value::from_node(inner).map_err(PropertyError)
                    }
                    Node::Atom { .. }
                        if a.as_symbol().is_none_or(|s| matches!(symbol_name(s).as_str(), "T" | "NIL")) =>
                    {
                        Value::from_node(a).map_err(PropertyError)
                    }
                    Node::Atom { class: TokenClass::Keyword, .. } => Value::from_node(a).map_err(PropertyError),
                    _ => malformed("random-one-of takes constants"),
                })
                .map(|v| v.map(|v| v.to_string()))
                .collect::<Result<Vec<_>, _>>()?;
            Ok(GeneratorSpec::OneOf { constants })
        }
        other => malformed(format!("unknown generator {other}")),
    }
}

/// Draws one value. Pure: the same state always yields the same value.
pub fn generate(gen: &GeneratorSpec, rng: Rng) -> (Value, Rng) {
    let mut rng = rng;
    let v = draw(gen, &mut rng);
    (v, rng)
}

fn draw(gen: &GeneratorSpec, rng: &mut Rng) -> Value {
    const LETTERS: &[u8] = b"ABCDEFGHIJKLMNOPQRSTUVWXYZ";
    const STRING_CHARS: &[u8] = b"abcdefghijklmnopqrstuvwxyz0123456789 ";
    match gen {
        GeneratorSpec::Natural => Value::int(rng.below(DEFAULT_NAT_MAX + 1) as i64),
        GeneratorSpec::Integer => Value::int(rng.range(DEFAULT_INT_RANGE.0, DEFAULT_INT_RANGE.1)),
        GeneratorSpec::Rational => {
            let n = rng.range(DEFAULT_INT_RANGE.0, DEFAULT_INT_RANGE.1);
            let d = 1 + rng.below(DEFAULT_DENOM_MAX) as i64;
            Value::Number(BigRational::new(BigInt::from(n), BigInt::from(d)))
        }
        GeneratorSpec::Boolean => Value::bool(rng.below(2) == 1),
        GeneratorSpec::Character => Value::Char(char::from(32 + rng.below(95) as u8)),
        GeneratorSpec::Symbol => {
            let len = 1 + rng.below(NAME_MAX);
            Value::Symbol((0..len).map(|_| LETTERS[rng.below(26) as usize] as char).collect())
        }
        GeneratorSpec::String => {
            let len = rng.below(NAME_MAX + 1);
            Value::Str((0..len).map(|_| STRING_CHARS[rng.below(STRING_CHARS.len() as u64) as usize] as char).collect())
        }
        GeneratorSpec::Between { lo, hi } => Value::int(rng.range(*lo, *hi)),
        GeneratorSpec::ListOf { element, max_length } => {
            let len = rng.below(*max_length as u64 + 1);
            Value::list((0..len).map(|_| draw(element, rng)).collect::<Vec<_>>())
        }
        GeneratorSpec::OneOf { constants } => {
            let pick = &constants[rng.below(constants.len() as u64) as usize];
            let forms = sexp::parse_source(pick);
            forms.first().and_then(|f| Value::from_node(&f.tree).ok()).unwrap_or_else(Value::nil)
        }
    }
}

/// True if `v` is a value `gen` can produce.
pub fn satisfies(gen: &GeneratorSpec, v: &Value) -> bool {
    let int_in = |lo: &BigInt, hi: &BigInt| v.as_integer().is_some_and(|i| lo <= i && i <= hi);
    match gen {
        GeneratorSpec::Natural => int_in(&BigInt::zero(), &BigInt::from(DEFAULT_NAT_MAX)),
        GeneratorSpec::Integer => int_in(&BigInt::from(DEFAULT_INT_RANGE.0), &BigInt::from(DEFAULT_INT_RANGE.1)),
        GeneratorSpec::Rational => matches!(v, Value::Number(_)),
        GeneratorSpec::Boolean => matches!(v, Value::Symbol(s) if s == "T" || s == "NIL"),
        GeneratorSpec::Character => matches!(v, Value::Char(c) if (' '..='~').contains(c)),
        GeneratorSpec::Symbol => matches!(v, Value::Symbol(_)),
        GeneratorSpec::String => matches!(v, Value::Str(_)),
        GeneratorSpec::Between { lo, hi } => int_in(&BigInt::from(*lo), &BigInt::from(*hi)),
        GeneratorSpec::ListOf { element, max_length } => {
            v.to_vec().is_some_and(|xs| xs.len() <= *max_length && xs.iter().all(|x| satisfies(element, x)))
        }
        GeneratorSpec::OneOf { constants } => constants.contains(&v.to_string()),
    }
}

/// Parses a `defproperty` form from its source text.
pub fn parse_property(form: &TopLevelForm, source: &str) -> Result<PropertySpec, PropertyError> {
    if !form.head.eq_ignore_ascii_case("defproperty") {
        return malformed("not a defproperty form");
    }
    if !form.complete {
        return malformed("the form is incomplete");
    }
    let items = form.tree.as_list().unwrap_or_default();
    let Some(name) = items.get(1).and_then(Node::as_symbol).filter(|s| !s.starts_with(':')) else {
        return malformed("missing property name");
    };
    let mut i = 2;
    let mut repeat = None;
    while let Some(k) = items.get(i).and_then(keyword) {
        let value = items.get(i + 1).and_then(small_int);
        match (k.as_str(), value) {
            (":repeat", Some(n)) if n > 0 => repeat = Some(n as usize),
            (":limit", Some(_)) => {}
            _ => return malformed(format!("bad option {k}")),
        }
        i += 2;
    }
    let (Some(binding_list), Some(body)) = (items.get(i).and_then(Node::as_list), items.get(i + 1)) else {
        return malformed("expected a binding list and a body");
    };
    if items.len() != i + 2 {
        return malformed("a property has exactly one body form");
    }
    let mut bindings: Vec<Binding> = Vec::new();
    let mut j = 0;
    while j < binding_list.len() {
        let Some(var) = binding_list[j].as_symbol().filter(|_| keyword(&binding_list[j]).is_none()) else {
            return malformed("bad binding shape: expected a variable");
        };
        if bindings.iter().any(|b| symbol_name(&b.var) == symbol_name(var)) {
            return malformed(format!("variable {var} is bound twice"));
        }
        let (Some(k), Some(gen)) = (binding_list.get(j + 1).and_then(keyword), binding_list.get(j + 2)) else {
            return malformed(format!("bad binding shape for {var}: expected :value and a generator"));
        };
        if k != ":value" {
            return malformed(format!("unsupported binding option {k}"));
        }
        bindings.push(Binding { var: var.to_string(), generator: parse_generator(gen)? });
        j += 3;
    }
    let bound: Vec<String> = bindings.iter().map(|b| symbol_name(&b.var)).collect();
    if let Some(free) = free_variables(body).into_iter().find(|v| !bound.contains(v)) {
        return malformed(format!("unbound body variable {free}"));
    }
    Ok(PropertySpec {
        name: name.to_string(),
        bindings,
        body: body.span().slice(source).to_string(),
        body_node: body.clone(),
        repeat,
    })
}

/// Variables referenced in `node`, upper-cased, in first-occurrence order.
pub fn free_variables(node: &Node) -> Vec<String> {
    let mut out = Vec::new();
    collect_free(node, &mut Vec::new(), &mut out);
    out
}

fn collect_free(node: &Node, bound: &mut Vec<String>, out: &mut Vec<String>) {
    match node {
        Node::Atom { .. } => {
            let Some(s) = node.as_symbol().filter(|s| !s.starts_with(':')) else { return };
            let name = symbol_name(s);
            let constant =
                name == "T" || name == "NIL" || (name.len() > 2 && name.starts_with('*') && name.ends_with('*'));
            if !constant && !bound.contains(&name) && !out.contains(&name) {
                out.push(name);
            }
        }
        Node::Quoted { .. } => {}
        Node::List { children, .. } => {
            let head = children.first().and_then(Node::as_symbol).map(symbol_name).unwrap_or_default();
            let rest = children.get(1..).unwrap_or_default();
            match head.as_str() {
                "QUOTE" | "DECLARE" => {}
                "LET" | "LET*" => {
                    let mark = bound.len();
                    let mut names = Vec::new();
                    for b in rest.first().and_then(Node::as_list).unwrap_or_default() {
                        let pair = b.as_list().unwrap_or_default();
                        if let Some(v) = pair.get(1) {
                            collect_free(v, bound, out);
                        }
                        if let Some(var) = pair.first().and_then(Node::as_symbol) {
                            if head == "LET*" {
                                bound.push(symbol_name(var));
                            } else {
                                names.push(symbol_name(var));
                            }
                        }
                    }
                    bound.extend(names);
                    rest.iter().skip(1).for_each(|c| collect_free(c, bound, out));
                    bound.truncate(mark);
                }
                "COND" => {
                    for clause in rest {
                        clause.as_list().unwrap_or_default().iter().for_each(|c| collect_free(c, bound, out));
                    }
                }
                "CASE" => {
                    if let Some(k) = rest.first() {
                        collect_free(k, bound, out);
                    }
                    for clause in rest.iter().skip(1) {
                        clause.as_list().unwrap_or_default().iter().skip(1).for_each(|c| collect_free(c, bound, out));
                    }
                }
                _ => {
                    let start = if children.first().is_some_and(|h| h.as_symbol().is_some()) { 1 } else { 0 };
                    children[start..].iter().for_each(|c| collect_free(c, bound, out));
                }
            }
        }
    }
}

fn hypotheses_for(var: &str, gen: &GeneratorSpec) -> Vec<String> {
    let pred = match gen {
        GeneratorSpec::Natural => "natp",
        GeneratorSpec::Integer => "integerp",
        GeneratorSpec::Rational => "rationalp",
        GeneratorSpec::Boolean => "booleanp",
        GeneratorSpec::Character => "characterp",
        GeneratorSpec::Symbol => "symbolp",
        GeneratorSpec::String => "stringp",
        GeneratorSpec::Between { lo, hi } => {
            return vec![format!("(integerp {var})"), format!("(<= {lo} {var})"), format!("(<= {var} {hi})")];
        }
        GeneratorSpec::ListOf { element, .. } => match **element {
            GeneratorSpec::Natural => "nat-listp",
            GeneratorSpec::Integer | GeneratorSpec::Between { .. } => "integer-listp",
            GeneratorSpec::Rational => "rational-listp",
            GeneratorSpec::Boolean => "boolean-listp",
            GeneratorSpec::Character => "character-listp",
            GeneratorSpec::Symbol => "symbol-listp",
            GeneratorSpec::String => "string-listp",
            _ => "true-listp",
        },
        GeneratorSpec::OneOf { constants } => {
            return vec![format!("(member-equal {var} '({}))", constants.join(" "))];
        }
    };
    vec![format!("({pred} {var})")]
}

/// Type hypotheses implied by the generators, in binding order.
pub fn hypotheses(spec: &PropertySpec) -> Vec<String> {
    spec.bindings.iter().flat_map(|b| hypotheses_for(&b.var, &b.generator)).collect()
}

/// The theorem a property stands for.
pub fn to_theorem(spec: &PropertySpec) -> String {
    let hyps = hypotheses(spec);
    match hyps.len() {
        0 => format!("(defthm {} {})", spec.name, spec.body),
        1 => format!("(defthm {} (implies {} {}))", spec.name, hyps[0], spec.body),
        _ => format!("(defthm {} (implies (and {}) {}))", spec.name, hyps.join(" "), spec.body),
    }
}

/// The expression evaluated for one trial.
pub fn trial_expression(spec: &PropertySpec, values: &[Value]) -> String {
    if spec.bindings.is_empty() {
        return spec.body.clone();
    }
    let binds: Vec<String> =
        spec.bindings.iter().zip(values).map(|(b, v)| format!("({} {})", b.var, v.to_literal())).collect();
    format!("(let ({}) {})", binds.join(" "), spec.body)
}

/// The value printed for an expression, with the trailing prompt removed.
fn printed_value(raw: &str) -> &str {
    let text = raw.trim_end();
    let text = match text.rfind('\n') {
        Some(i) if text[i + 1..].contains('>') && text[i + 1..].starts_with("ACL2") => &text[..i],
        None if text.starts_with("ACL2") && text.ends_with('>') => "",
        _ => text,
    };
    text.trim_end().rsplit('\n').next().unwrap_or("").trim()
}

/// Runs up to `trials` trials, stopping at the first falsifying one.
pub fn run_property(spec: &PropertySpec, trials: usize, seed: u64, backend: &mut BackendHandle) -> TestReport {
    let mut report = TestReport {
        property: spec.name.clone(),
        status: ReportStatus::Passed,
        trials_run: 0,
        passes: 0,
        counterexample: None,
        seed,
        error: None,
    };
    let mut rng = Rng::from_seed(seed);
    for _ in 0..trials.max(1) {
        let values: Vec<Value> = spec.bindings.iter().map(|b| draw(&b.generator, &mut rng)).collect();
        report.trials_run += 1;
        let submission = match backend.submit(&trial_expression(spec, &values)) {
            Ok(s) => s,
            Err(e) => return abort(report, e.to_string()),
        };
        if submission.outcome != Outcome::Success {
            let summary = output::summarize_raw(&submission.result);
            let message = summary
                .items
                .first()
                .map(|m| m.headline.clone())
                .unwrap_or_else(|| format!("backend outcome {:?}", submission.outcome).to_lowercase());
            return abort(report, message);
        }
        if printed_value(&submission.result).eq_ignore_ascii_case("nil") {
            report.status = ReportStatus::Falsified;
            report.counterexample =
                Some(spec.bindings.iter().zip(&values).map(|(b, v)| (b.var.clone(), v.to_string())).collect());
            return report;
        }
        report.passes += 1;
    }
    report
}

fn abort(mut report: TestReport, message: String) -> TestReport {
    report.status = ReportStatus::Aborted;
    report.error = Some(message);
    report
}

/// Runs the property once per seed, each against a fresh backend from
/// `make_backend`. Uses the data-parallel map when enabled.
pub fn sweep_seeds<F>(spec: &PropertySpec, trials: usize, seeds: Vec<u64>, make_backend: F) -> Vec<TestReport>
where
    F: Fn() -> Result<BackendHandle, BackendError> + Sync + Send,
{
    par::map(seeds, |seed| match make_backend() {
        Ok(mut backend) => run_property(spec, trials, seed, &mut backend),
        Err(e) => TestReport {
            property: spec.name.clone(),
            status: ReportStatus::Aborted,
            trials_run: 0,
            passes: 0,
            counterexample: None,
            seed,
            error: Some(e.to_string()),
        },
    })
}
