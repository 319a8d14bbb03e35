use std::path::Path;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use proofpad_core::backend::BackendHandle;
use proofpad_core::doublecheck::{self, PropertySpec};
use proofpad_core::lex::BuiltinTable;
use proofpad_core::{indent, lint, par, sexp};

const PROPERTY: &str = "(defproperty rev-rev
  (xs :value (random-list-of (random-integer) :size 8))
  (equal (rev (rev xs)) xs))";

const REV: &str = "(defun rev (xs) (if (endp xs) nil (append (rev (cdr xs)) (list (car xs)))))";

fn corpus() -> Vec<String> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/corpus");
    let mut files: Vec<_> = std::fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).collect();
    files.sort();
    files.iter().map(|p| std::fs::read_to_string(p).unwrap()).collect()
}

fn spec() -> PropertySpec {
    let form = sexp::parse_source(PROPERTY).remove(0);
    doublecheck::parse_property(&form, PROPERTY).unwrap()
}

fn run_seed(spec: &PropertySpec, seed: u64) -> doublecheck::TestReport {
    let mut backend = BackendHandle::fake();
    backend.submit(REV).unwrap();
    doublecheck::run_property(spec, 50, seed, &mut backend)
}

fn seed_sweep(c: &mut Criterion) {
    let spec = spec();
    let mut group = c.benchmark_group("seed-sweep");
    group.sample_size(10);
    for seeds in [8u64, 32] {
        group.bench_with_input(BenchmarkId::new("parallel", seeds), &seeds, |b, &n| {
            b.iter(|| par::map((0..n).collect(), |s| run_seed(&spec, s)))
        });
        group.bench_with_input(BenchmarkId::new("sequential", seeds), &seeds, |b, &n| {
            b.iter(|| par::map_sequential((0..n).collect(), |s| run_seed(&spec, s)))
        });
    }
    group.finish();
}

fn corpus_tooling(c: &mut Criterion) {
    let files = corpus();
    let table = BuiltinTable::standard();
    let work = |src: &String| (lint::lint_source(src).len(), indent::reindent_all(src, table).len());
    let mut group = c.benchmark_group("corpus-lint-indent");
    group.bench_function("parallel", |b| b.iter(|| par::map(files.iter().collect(), work)));
    group.bench_function("sequential", |b| b.iter(|| par::map_sequential(files.iter().collect(), work)));
    group.finish();
}

criterion_group!(benches, seed_sweep, corpus_tooling);
criterion_main!(benches);
