//! Editor tooling, proof-session engine and property runner for ACL2.

pub mod backend;
pub mod docmodel;
pub mod doublecheck;
pub mod indent;
pub mod lex;
pub mod lint;
pub mod output;
pub mod par;
pub mod repl;
pub mod session;
pub mod sexp;
pub mod span;
pub mod value;

pub use span::Span;
