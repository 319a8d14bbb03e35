use proofpad_core::backend::{BackendHandle, FakeOptions, Submission};
use proofpad_core::docmodel::{Document, Origin, HEADER, READONLY_BEGIN, READONLY_END};
use proofpad_core::doublecheck::{self, GeneratorSpec, ReportStatus, Rng};
use proofpad_core::lex::{self, BuiltinTable};
use proofpad_core::session::{ProofStatus, Session};
use proofpad_core::{indent, sexp};
use proptest::prelude::*;

fn atom() -> impl Strategy<Value = String> {
    prop_oneof![
        prop::sample::select(vec!["x", "xs", "car", "cons", "append", "defun", "let", "if", "nil", "t", ":key"])
            .prop_map(String::from),
        (-999i64..999).prop_map(|n| n.to_string()),
        "[a-z][a-z0-9-]{0,6}",
        "\"[a-z ;()]{0,6}\"",
        Just("#\\a".to_string()),
        Just("|odd sym|".to_string()),
    ]
}

fn gap() -> impl Strategy<Value = String> {
    prop::sample::select(vec![" ", "  ", "\n", "\n   ", " ; note\n", "\t"]).prop_map(String::from)
}

fn datum() -> impl Strategy<Value = String> {
    atom().prop_recursive(4, 40, 6, |inner| {
        prop_oneof![
            prop::collection::vec((inner.clone(), gap()), 0..6).prop_map(|items| {
                let body: String = items.iter().map(|(d, g)| format!("{d}{g}")).collect();
                format!("({})", body.trim_end())
            }),
            inner.prop_map(|d| format!("'{d}")),
        ]
    })
}

fn source() -> impl Strategy<Value = String> {
    prop::collection::vec((datum(), gap()), 0..6)
        .prop_map(|forms| forms.iter().map(|(d, g)| format!("{d}{g}")).collect())
}

fn significant(source: &str) -> Vec<(lex::TokenClass, String)> {
    lex::tokenize(source).into_iter().filter(|t| !t.is_trivia()).map(|t| (t.class, t.text.to_string())).collect()
}

proptest! {
    #[test]
    fn tokens_cover_the_source(src in "\\PC{0,80}") {
        let tokens = lex::tokenize(&src);
        let joined: String = tokens.iter().map(|t| t.text).collect();
        prop_assert_eq!(joined, src.clone());
        for t in &tokens {
            prop_assert_eq!(&src[t.span.start..t.span.end], t.text);
        }
    }

    #[test]
    fn reindent_is_idempotent_and_keeps_tokens(src in source()) {
        let table = BuiltinTable::standard();
        let once = indent::reindent_all(&src, table);
        prop_assert_eq!(indent::reindent_all(&once, table), once.clone());
        prop_assert_eq!(significant(&src), significant(&once));
    }

    #[test]
    fn proofpad_contents_round_trip(blocks in prop::collection::vec((any::<bool>(), "([a-z() ]{0,10}\n){0,3}"), 0..6)) {
        let mut contents = format!("{HEADER}\n");
        for (ro, text) in &blocks {
            if *ro {
                contents.push_str(&format!("{READONLY_BEGIN}\n{text}{READONLY_END}\n"));
            } else {
                contents.push_str(text);
            }
        }
        let doc = Document::parse(&contents, Origin::Proofpad).unwrap();
        prop_assert_eq!(doc.to_file_contents(), contents);
        let mut end = 0;
        for r in &doc.regions {
            prop_assert_eq!(r.span.start, end);
            end = r.span.end;
        }
        prop_assert_eq!(end, doc.text.len());
    }
}

const FORMS: [&str; 6] = [
    "(defun inc (x) (+ x 1))",
    "(inc 41)",
    "(defthm wrong nil)",
    "(append '(1 2) '(3 4))",
    "(include-book \"missing\")",
    "(cons 'a \"str\")",
];

fn run_all(options: FakeOptions) -> Vec<Submission> {
    let mut backend = BackendHandle::fake_with(options);
    FORMS.iter().map(|f| backend.submit(f).unwrap()).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn chunking_does_not_change_submissions(chunks in prop::collection::vec(1usize..40, 1..8)) {
        let whole = run_all(FakeOptions::default());
        let chunked = run_all(FakeOptions { chunk_sizes: chunks, ..FakeOptions::default() });
        prop_assert_eq!(whole, chunked);
    }

    #[test]
    fn admitted_forms_are_always_a_prefix(clicks in prop::collection::vec(0usize..7, 1..12), bad in 0usize..7) {
        let forms: Vec<String> = (0..7)
            .map(|i| if i == bad { "(defthm nope nil)".to_string() } else { format!("(defun p{i} (x) (+ x {i}))") })
            .collect();
        let source = forms.join("\n");
        let mut backend = BackendHandle::fake();
        let mut session = Session::new(&source);
        for target in clicks {
            let plan = session.plan_click(target).unwrap();
            session.execute(&plan, &mut backend, |_| {}).unwrap();
            let statuses = session.statuses();
            let line = session.proof_line();
            prop_assert!(statuses[..line].iter().all(|s| *s == ProofStatus::Admitted));
            prop_assert!(statuses[line..].iter().all(|s| matches!(s, ProofStatus::Unadmitted | ProofStatus::Failed)));
            prop_assert!(line <= bad);
            prop_assert_eq!(backend.world_events(), session.admitted_events());
        }
    }

    #[test]
    fn identical_seeds_give_identical_reports(seed in any::<u64>()) {
        let src = "(defproperty rev-len (xs :value (random-list-of (random-integer)) n :value (random-between 0 3)) (< (len xs) (+ n 4)))";
        let form = sexp::parse_source(src).remove(0);
        let spec = doublecheck::parse_property(&form, src).unwrap();
        let a = doublecheck::run_property(&spec, 20, seed, &mut BackendHandle::fake());
        let b = doublecheck::run_property(&spec, 20, seed, &mut BackendHandle::fake());
        prop_assert_eq!(a.render(), b.render());
        prop_assert_eq!(a, b);
    }

    #[test]
    fn counterexamples_falsify_the_body(seed in any::<u64>()) {
        let src = "(defproperty small (a :value (random-natural) b :value (random-between -5 5)) (< (+ a b) 600))";
        let form = sexp::parse_source(src).remove(0);
        let spec = doublecheck::parse_property(&form, src).unwrap();
        let mut backend = BackendHandle::fake();
        let report = doublecheck::run_property(&spec, 50, seed, &mut backend);
        prop_assert_ne!(report.status, ReportStatus::Aborted);
        if let Some(cx) = report.counterexample {
            let check = format!("(let ((a {}) (b {})) (< (+ a b) 600))", cx[0].1, cx[1].1);
            let sub = backend.submit(&check).unwrap();
            prop_assert!(sub.result.starts_with("NIL"), "{}", sub.result);
        }
    }
}

fn soundness(gen: &GeneratorSpec) {
    let mut rng = Rng::from_seed(99);
    for _ in 0..10_000 {
        let (v, next) = doublecheck::generate(gen, rng);
        assert!(doublecheck::satisfies(gen, &v), "{gen:?} produced {v}");
        assert_eq!(doublecheck::generate(gen, rng).0, v);
        rng = next;
    }
}

#[test]
fn generated_values_satisfy_their_kind() {
    let kinds = [
        GeneratorSpec::Natural,
        GeneratorSpec::Integer,
        GeneratorSpec::Rational,
        GeneratorSpec::Boolean,
        GeneratorSpec::Character,
        GeneratorSpec::Symbol,
        GeneratorSpec::String,
        GeneratorSpec::Between { lo: -3, hi: 7 },
        GeneratorSpec::Between { lo: 5, hi: 5 },
        GeneratorSpec::ListOf { element: Box::new(GeneratorSpec::Natural), max_length: 5 },
        GeneratorSpec::ListOf { element: Box::new(GeneratorSpec::Between { lo: 0, hi: 1 }), max_length: 0 },
        GeneratorSpec::OneOf { constants: vec!["1".into(), "A".into(), "\"s\"".into()] },
    ];
    for gen in &kinds {
        soundness(gen);
    }
}

#[test]
fn between_stays_in_range() {
    let gen = GeneratorSpec::Between { lo: -10, hi: 10 };
    let mut rng = Rng::from_seed(3);
    let mut seen = std::collections::BTreeSet::new();
    for _ in 0..10_000 {
        let (v, next) = doublecheck::generate(&gen, rng);
        rng = next;
        let n: i64 = v.to_string().parse().unwrap();
        assert!((-10..=10).contains(&n));
        seen.insert(n);
    }
    assert_eq!(seen.len(), 21);
}

#[test]
fn theorem_conclusion_is_the_body() {
    let src = "(defproperty p (xs :value (random-list-of (random-natural)) k :value (random-between 1 9)) (equal (len (append xs xs))   (* 2 (len xs))))";
    let form = sexp::parse_source(src).remove(0);
    let spec = doublecheck::parse_property(&form, src).unwrap();
    let thm = doublecheck::to_theorem(&spec);
    assert!(thm.ends_with(&format!(" {}))", spec.body)), "{thm}");
    assert!(thm.contains("(and (nat-listp xs)"), "{thm}");
    let parsed = sexp::parse_source(&thm);
    assert_eq!(parsed.len(), 1);
    assert!(parsed[0].complete);
}
