use std::io::{self, BufRead, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use proofpad_core::backend::fake::{FAKE_BANNER, FAKE_PROMPT};
use proofpad_core::backend::{BackendConfig, BackendHandle, FakeAcl2, Outcome};
use proofpad_core::docmodel::Document;
use proofpad_core::doublecheck::{self, ReportStatus};
use proofpad_core::lex::BuiltinTable;
use proofpad_core::lint::{self, Diagnostic};
use proofpad_core::repl::{self, Repl};
use proofpad_core::session::{status_line, ProofStatus, Session, SessionConfig};
use proofpad_core::{indent, output, sexp};
use proofpad_server::{BackendChoice, ServeConfig, Server};

const ACL2_ENV: &str = "PROOFPAD_ACL2";
const ACL2_NAMES: [&str; 2] = ["acl2", "saved_acl2"];

#[derive(Parser)]
#[command(name = "proofpad", version, about = "Editor tooling, proof sessions and property testing for ACL2")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Report simple errors without running ACL2.
    Lint {
        file: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Re-indent a file.
    Indent {
        file: PathBuf,
        /// Rewrite the file instead of printing the result.
        #[arg(long)]
        write: bool,
    },
    /// Interactive read-eval-print loop.
    Repl {
        #[command(flatten)]
        backend: BackendArgs,
    },
    /// Run every defproperty in a file as random trials.
    Check {
        file: PathBuf,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
        #[command(flatten)]
        backend: BackendArgs,
    },
    /// Admit every form in a file and print the resulting statuses.
    Admit {
        file: PathBuf,
        #[command(flatten)]
        backend: BackendArgs,
    },
    /// Start the local service for the browser UI.
    Serve {
        #[arg(long, default_value_t = proofpad_server::service::DEFAULT_PORT)]
        port: u16,
        /// Directory of UI assets to serve over HTTP.
        #[arg(long = "static")]
        static_dir: Option<PathBuf>,
        /// Admit every form when a document is opened.
        #[arg(long)]
        auto_admit: bool,
        #[command(flatten)]
        backend: BackendArgs,
    },
    /// Run the fake backend on standard input and output.
    #[command(hide = true)]
    FakeAcl2,
}

#[derive(Args, Clone)]
struct BackendArgs {
    /// Use the built-in fake ACL2 instead of a real one.
    #[arg(long)]
    fake_backend: bool,
    /// Path to the ACL2 executable.
    #[arg(long, value_name = "PATH")]
    acl2: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
}

fn find_on_path(names: &[&str]) -> Option<PathBuf> {
    let path = std::env::var_os("PATH")?;
    std::env::split_paths(&path).flat_map(|dir| names.iter().map(move |n| dir.join(n))).find(|p| p.is_file())
}

impl BackendArgs {
    fn choice(&self) -> Result<BackendChoice> {
        if self.fake_backend {
            return Ok(BackendChoice::Fake);
        }
        let exe = self
            .acl2
            .clone()
            .or_else(|| std::env::var_os(ACL2_ENV).map(PathBuf::from))
            .or_else(|| find_on_path(&ACL2_NAMES));
        match exe {
            Some(executable) => Ok(BackendChoice::Process(BackendConfig { executable, ..BackendConfig::default() })),
            None => bail!("no ACL2 executable found; pass --acl2 PATH, set {ACL2_ENV}, or use --fake-backend"),
        }
    }

    fn start(&self) -> Result<BackendHandle> {
        Ok(self.choice()?.start()?)
    }
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn line_col(source: &str, offset: usize) -> (usize, usize) {
    let before = &source[..offset.min(source.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, col)
}

fn print_diagnostics(file: &Path, source: &str, diags: &[Diagnostic], format: Format) -> Result<()> {
    let mut out = io::stdout().lock();
    match format {
        Format::Json => writeln!(out, "{}", serde_json::to_string(diags)?)?,
        Format::Text => {
            for d in diags {
                let (line, col) = line_col(source, d.span.start);
                let severity = match d.severity {
                    lint::Severity::Error => "error",
                    lint::Severity::Warning => "warning",
                };
                writeln!(out, "{}:{line}:{col}: {severity}[{}]: {}", file.display(), d.code, d.message)?;
            }
        }
    }
    Ok(())
}

fn cmd_lint(file: &Path, format: Format) -> Result<ExitCode> {
    let source = read(file)?;
    let diags = lint::lint_source(&source);
    if !diags.is_empty() || format == Format::Json {
        print_diagnostics(file, &source, &diags, format)?;
    }
    Ok(if lint::has_errors(&diags) { ExitCode::from(1) } else { ExitCode::SUCCESS })
}

fn cmd_indent(file: &Path, write: bool) -> Result<ExitCode> {
    let source = read(file)?;
    let result = indent::reindent_all(&source, BuiltinTable::standard());
    if write {
        if result != source {
            std::fs::write(file, &result).with_context(|| format!("cannot write {}", file.display()))?;
        }
    } else {
        io::stdout().write_all(result.as_bytes())?;
    }
    Ok(ExitCode::SUCCESS)
}

fn input_complete(buffer: &str) -> bool {
    sexp::parse_source(buffer).last().is_none_or(|f| f.complete)
}

fn cmd_repl(backend: &BackendArgs) -> Result<ExitCode> {
    let mut handle = backend.start()?;
    let mut session = Session::new("");
    let mut repl = Repl::new();
    let stdin = io::stdin();
    let mut out = io::stdout();
    let mut buffer = String::new();
    write!(out, "{}", repl::PROMPT)?;
    out.flush()?;
    for line in stdin.lock().lines() {
        let line = line?;
        if buffer.trim().is_empty() && line.trim() == ":defs" {
            write!(out, "{}{}", session.source(), repl::PROMPT)?;
            out.flush()?;
            continue;
        }
        if buffer.trim().is_empty() && line.trim() == ":admit" {
            if !session.forms().is_empty() {
                let plan = session.plan_click(session.forms().len() - 1)?;
                session.execute(&plan, &mut handle, |_| {})?;
            }
            write!(out, "{}\n{}", status_line(&session.statuses()), repl::PROMPT)?;
            out.flush()?;
            continue;
        }
        buffer.push_str(&line);
        buffer.push('\n');
        if !input_complete(&buffer) {
            continue;
        }
        let (entries, err) = repl.submit(&buffer, &mut session, &mut handle);
        for entry in &entries {
            write!(out, "{}", repl::render_result(&entry.result))?;
        }
        if let Some(e) = err {
            writeln!(out, "error: {e}")?;
        }
        buffer.clear();
        if handle.is_poisoned() {
            writeln!(out, "the backend stopped responding; restarting")?;
            handle = backend.start()?;
        }
        write!(out, "{}", repl::PROMPT)?;
        out.flush()?;
    }
    writeln!(out)?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_check(file: &Path, trials: Option<usize>, seed: u64, format: Format, backend: &BackendArgs) -> Result<ExitCode> {
    let doc = Document::load(file)?;
    let source = doc.text.as_str();
    let mut handle = backend.start()?;
    let mut reports = Vec::new();
    let mut failed = false;
    for form in sexp::parse_source(source) {
        if !form.head.eq_ignore_ascii_case("defproperty") {
            if !form.complete {
                continue;
            }
            let sub = handle.submit(form.text(source))?;
            if sub.outcome != Outcome::Success {
                let headline = output::summarize_raw(&sub.result).items.first().map(|m| m.headline.clone());
                eprintln!("{}: {}", form.head, headline.unwrap_or_else(|| "rejected".into()));
            }
            continue;
        }
        match doublecheck::parse_property(&form, source) {
            Ok(spec) => {
                let n = trials.or(spec.repeat).unwrap_or(100);
                let report = doublecheck::run_property(&spec, n, seed, &mut handle);
                failed |= report.status != ReportStatus::Passed;
                if format == Format::Text {
                    println!("{}", report.render());
                }
                reports.push(report);
            }
            Err(e) => {
                failed = true;
                let (line, _) = line_col(source, form.span.start);
                eprintln!("{}:{line}: {e}", file.display());
            }
        }
    }
    if format == Format::Json {
        println!("{}", serde_json::to_string(&reports)?);
    }
    Ok(if failed { ExitCode::from(1) } else { ExitCode::SUCCESS })
}

fn cmd_admit(file: &Path, backend: &BackendArgs) -> Result<ExitCode> {
    let doc = Document::load(file)?;
    let mut handle = backend.start()?;
    let mut session = Session::new(&doc.text);
    if !session.forms().is_empty() {
        let plan = session.plan_click(session.forms().len() - 1)?;
        session.execute(&plan, &mut handle, |_| {})?;
    }
    println!("{}", status_line(&session.statuses()));
    for (i, f) in session.forms().iter().enumerate().filter(|(_, f)| f.status == ProofStatus::Failed) {
        let headline = f
            .submission
            .as_ref()
            .and_then(|s| output::summarize_raw(&s.result).items.first().map(|m| m.headline.clone()))
            .or_else(|| f.error.clone())
            .unwrap_or_default();
        eprintln!("form {i} ({}): {headline}", f.form.head);
    }
    let all = session.proof_line() == session.forms().len();
    Ok(if all { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn cmd_serve(port: u16, static_dir: Option<PathBuf>, auto_admit: bool, backend: &BackendArgs) -> Result<ExitCode> {
    let config = ServeConfig {
        port,
        backend: backend.choice()?,
        session: SessionConfig { auto_admit },
        static_dir,
        ..ServeConfig::default()
    };
    let server = Server::bind(config)?;
    eprintln!("listening on http://{}", server.local_addr()?);
    server.run()?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_fake_acl2() -> Result<ExitCode> {
    let mut acl2 = FakeAcl2::new();
    let mut out = io::stdout();
    write!(out, "{}{FAKE_PROMPT}", FAKE_BANNER)?;
    out.flush()?;
    for line in io::stdin().lock().lines() {
        let reply = acl2.feed(&format!("{}\n", line?));
        out.write_all(reply.as_bytes())?;
        out.flush()?;
    }
    Ok(ExitCode::SUCCESS)
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Lint { file, format } => cmd_lint(&file, format),
        Command::Indent { file, write } => cmd_indent(&file, write),
        Command::Repl { backend } => cmd_repl(&backend),
        Command::Check { file, trials, seed, format, backend } => cmd_check(&file, trials, seed, format, &backend),
        Command::Admit { file, backend } => cmd_admit(&file, &backend),
        Command::Serve { port, static_dir, auto_admit, backend } => cmd_serve(port, static_dir, auto_admit, &backend),
        Command::FakeAcl2 => cmd_fake_acl2(),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("proofpad: {e:#}");
            ExitCode::from(1)
        }
    }
}
