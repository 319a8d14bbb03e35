//! Driving ACL2 (or the in-process fake) over a byte stream.
//!
//! Each submission writes the form followed by a command that prints
//! `PROOFPAD-SENTINEL-<id>` on its own line. A submission is complete once that
//! line has been read and a prompt follows it, so forms that print several
//! prompts are handled. The result is every byte before the sentinel line.

pub mod eval;
pub mod fake;
pub mod process;

use std::path::PathBuf;
use std::time::{Duration, Instant};

use regex::bytes::Regex;
use serde::{Deserialize, Serialize};

use crate::lex::BuiltinTable;
use crate::output;
use crate::sexp;

pub use fake::{FakeAcl2, FakeOptions, FakeProbe, FakeTransport};
pub use process::ProcessTransport;

pub const DEFAULT_PROMPT: &str = r"ACL2 !?>";
pub const SENTINEL_PREFIX: &str = "PROOFPAD-SENTINEL-";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BackendConfig {
    pub executable: PathBuf,
    pub args: Vec<String>,
    pub prompt_pattern: String,
    pub startup_timeout: Duration,
    pub form_timeout: Duration,
}

impl Default for BackendConfig {
    fn default() -> Self {
        BackendConfig {
            executable: PathBuf::from("acl2"),
            args: Vec::new(),
            prompt_pattern: DEFAULT_PROMPT.to_string(),
            startup_timeout: Duration::from_secs(60),
            form_timeout: Duration::from_secs(300),
        }
    }
}

impl BackendConfig {
    pub fn validate(&self) -> Result<Regex, BackendError> {
        if self.startup_timeout.is_zero() || self.form_timeout.is_zero() {
            return Err(BackendError::InvalidConfig("timeouts must be positive".into()));
        }
        Regex::new(&self.prompt_pattern).map_err(|e| BackendError::InvalidConfig(format!("prompt pattern: {e}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    Success,
    Failure,
    Timeout,
    Crashed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Submission {
    pub form: String,
    pub sentinel_id: u64,
    pub result: String,
    pub outcome: Outcome,
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum BackendError {
    #[error("could not start {path}: {message}")]
    Spawn { path: String, message: String },
    #[error("backend did not print a prompt within the startup timeout")]
    StartupTimeout,
    #[error("backend exited during startup")]
    StartupExit,
    #[error("backend handle is poisoned by an earlier timeout or crash; restart it")]
    Poisoned,
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("invalid backend configuration: {0}")]
    InvalidConfig(String),
}

impl BackendError {
    pub fn code(&self) -> &'static str {
        match self {
            BackendError::Spawn { .. } => "spawn-failure",
            BackendError::StartupTimeout => "startup-timeout",
            BackendError::StartupExit => "crashed",
            BackendError::Poisoned => "poisoned",
            BackendError::Precondition(_) => "precondition",
            BackendError::InvalidConfig(_) => "invalid-config",
        }
    }
}

#[derive(Debug, PartialEq, Eq)]
pub enum Recv {
    Data(Vec<u8>),
    Eof,
    Timeout,
}

/// A duplex byte stream to an ACL2-like process.
pub trait Transport: Send {
    fn send(&mut self, bytes: &[u8]) -> std::io::Result<()>;
    /// Waits up to `timeout` for the next chunk of output.
    fn recv(&mut self, timeout: Duration) -> Recv;
    fn kill(&mut self);
}

/// One backend session. Submissions take `&mut self`, so at most one is ever
/// in flight on the wire.
pub struct BackendHandle {
    transport: Box<dyn Transport>,
    config: BackendConfig,
    prompt: Regex,
    next_id: u64,
    buffer: Vec<u8>,
    poisoned: bool,
    /// Event counts of admitted world-changing commands, oldest first.
    commands: Vec<usize>,
    probe: Option<FakeProbe>,
    banner: String,
}

enum Wait {
    Done(Vec<u8>),
    Timeout(Vec<u8>),
    Eof(Vec<u8>),
}

impl BackendHandle {
    /// Spawns the configured executable and waits for its first prompt.
    pub fn start(config: BackendConfig) -> Result<Self, BackendError> {
        config.validate()?;
        let transport = ProcessTransport::spawn(&config.executable, &config.args)?;
        Self::with_transport(Box::new(transport), config, None)
    }

    /// An in-process fake with default options.
    pub fn fake() -> Self {
        Self::fake_with(FakeOptions::default())
    }

    pub fn fake_with(options: FakeOptions) -> Self {
        let config = BackendConfig {
            executable: PathBuf::from("<fake>"),
            form_timeout: options.form_timeout,
            ..BackendConfig::default()
        };
        let (transport, probe) = FakeTransport::new(options);
        Self::with_transport(Box::new(transport), config, Some(probe)).expect("fake backend starts")
    }

    pub fn with_transport(
        transport: Box<dyn Transport>,
        config: BackendConfig,
        probe: Option<FakeProbe>,
    ) -> Result<Self, BackendError> {
        let prompt = config.validate()?;
        let mut handle = BackendHandle {
            transport,
            config,
            prompt,
            next_id: 1,
            buffer: Vec::new(),
            poisoned: false,
            commands: Vec::new(),
            probe,
            banner: String::new(),
        };
        let deadline = Instant::now() + handle.config.startup_timeout;
        loop {
            if let Some(m) = handle.prompt.find(&handle.buffer) {
                let end = m.end();
                handle.banner = String::from_utf8_lossy(&handle.buffer[..end]).into_owned();
                handle.buffer.drain(..end);
                return Ok(handle);
            }
            let remaining = deadline.saturating_duration_since(Instant::now());
            if remaining.is_zero() {
                handle.transport.kill();
                return Err(BackendError::StartupTimeout);
            }
            match handle.transport.recv(remaining) {
                Recv::Data(bytes) => handle.buffer.extend_from_slice(&bytes),
                Recv::Eof => return Err(BackendError::StartupExit),
                Recv::Timeout => {}
            }
        }
    }

    pub fn config(&self) -> &BackendConfig {
        &self.config
    }

    /// Output printed before the first prompt.
    pub fn banner(&self) -> &str {
        &self.banner
    }

    pub fn probe(&self) -> Option<&FakeProbe> {
        self.probe.as_ref()
    }

    pub fn is_poisoned(&self) -> bool {
        self.poisoned
    }

    /// World-changing events admitted through this handle and not undone.
    pub fn world_events(&self) -> usize {
        self.commands.iter().sum()
    }

    pub fn command_events(&self) -> &[usize] {
        &self.commands
    }

    /// Submits one top-level form.
    pub fn submit(&mut self, form: &str) -> Result<Submission, BackendError> {
        let submission = self.exchange(form)?;
        if submission.outcome == Outcome::Success {
            let table = BuiltinTable::standard();
            let events: usize = sexp::parse_source(form).iter().map(|f| f.event_count(table)).sum();
            if events > 0 {
                self.commands.push(events);
            }
        }
        Ok(submission)
    }

    /// Undoes the most recent `count` events. `count` must cover whole commands.
    pub fn undo_through(&mut self, count: usize) -> Result<Submission, BackendError> {
        if count == 0 {
            return Err(BackendError::Precondition("undo count must be positive".into()));
        }
        if count > self.world_events() {
            return Err(BackendError::Precondition(format!(
                "cannot undo {count} events; only {} admitted",
                self.world_events()
            )));
        }
        let mut covered = 0;
        let mut commands = 0;
        for events in self.commands.iter().rev() {
            if covered >= count {
                break;
            }
            covered += events;
            commands += 1;
        }
        if covered != count {
            return Err(BackendError::Precondition(format!("{count} events do not end on a command boundary")));
        }
        let text = if commands == 1 { ":ubt! :x".to_string() } else { format!(":ubt! :x-{}", commands - 1) };
        let submission = self.exchange(&text)?;
        if submission.outcome == Outcome::Success {
            let keep = self.commands.len() - commands;
            self.commands.truncate(keep);
        }
        Ok(submission)
    }

    fn exchange(&mut self, form: &str) -> Result<Submission, BackendError> {
        if self.poisoned {
            return Err(BackendError::Poisoned);
        }
        let id = self.next_id;
        self.next_id += 1;
        let wire = format!("{}\n(cw \"~%{SENTINEL_PREFIX}{id}~%\")\n", form.trim_end());
        let done = |result: Vec<u8>, outcome: Option<Outcome>| {
            let result = String::from_utf8_lossy(&result).into_owned();
            let outcome = outcome.unwrap_or_else(|| {
                if output::has_failure_marker(&result) {
                    Outcome::Failure
                } else {
                    Outcome::Success
                }
            });
            Submission { form: form.to_string(), sentinel_id: id, result, outcome }
        };
        if self.transport.send(wire.as_bytes()).is_err() {
            self.poison();
            return Ok(done(std::mem::take(&mut self.buffer), Some(Outcome::Crashed)));
        }
        Ok(match self.wait_for_sentinel(id) {
            Wait::Done(result) => done(result, None),
            Wait::Timeout(partial) => {
                self.poison();
                done(partial, Some(Outcome::Timeout))
            }
            Wait::Eof(partial) => {
                self.poison();
                done(partial, Some(Outcome::Crashed))
            }
        })
    }

    fn poison(&mut self) {
        self.poisoned = true;
        self.transport.kill();
    }

    fn wait_for_sentinel(&mut self, id: u64) -> Wait {
        let marker = format!("\n{SENTINEL_PREFIX}{id}");
        let marker = marker.as_bytes();
        let deadline = Instant::now() + self.config.form_timeout;
        let mut scan_from = 0usize;
        let mut sentinel: Option<(usize, usize)> = None;
        loop {
            if sentinel.is_none() {
                sentinel = find_sentinel_line(&self.buffer, marker, scan_from);
                if sentinel.is_none() {
                    scan_from = self.buffer.len().saturating_sub(marker.len() + 1);
                }
            }
            if let Some((line_start, line_end)) = sentinel {
                if let Some(m) = self.prompt.find(&self.buffer[line_end..]) {
                    let consumed = line_end + m.end();
                    let mut result: Vec<u8> = self.buffer.drain(..consumed).collect();
                    result.truncate(line_start);
                    return Wait::Done(result);
                }
            }
            let remaining = deadline.saturating_duration_since(Instant::now());
            if remaining.is_zero() {
                return Wait::Timeout(std::mem::take(&mut self.buffer));
            }
            match self.transport.recv(remaining) {
                Recv::Data(bytes) => self.buffer.extend_from_slice(&bytes),
                Recv::Eof => return Wait::Eof(std::mem::take(&mut self.buffer)),
                Recv::Timeout => {}
            }
        }
    }
}

impl Drop for BackendHandle {
    fn drop(&mut self) {
        self.transport.kill();
    }
}

/// Finds `\n<marker>` followed by a line ending; returns the offset of the
/// leading newline and the offset just past the line ending.
fn find_sentinel_line(buf: &[u8], marker: &[u8], from: usize) -> Option<(usize, usize)> {
    let mut start = from;
    while start + marker.len() <= buf.len() {
        let pos = start + buf[start..].windows(marker.len()).position(|w| w == marker)?;
        let after = pos + marker.len();
        match buf.get(after) {
            Some(b'\n') => return Some((pos, after + 1)),
            Some(b'\r') if buf.get(after + 1) == Some(&b'\n') => return Some((pos, after + 2)),
            None => return None,
            Some(b'\r') if after + 1 == buf.len() => return None,
            Some(_) => start = pos + 1,
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sentinel_line_search() {
        let m = b"\nPROOFPAD-SENTINEL-1";
        assert_eq!(find_sentinel_line(b"x\nPROOFPAD-SENTINEL-1\nNIL", m, 0), Some((1, 22)));
        assert_eq!(find_sentinel_line(b"x\nPROOFPAD-SENTINEL-1", m, 0), None);
        assert_eq!(find_sentinel_line(b"x\nPROOFPAD-SENTINEL-12\n\nPROOFPAD-SENTINEL-1\r\n", m, 0), Some((23, 45)));
    }

    #[test]
    fn config_validation() {
        let bad = BackendConfig { form_timeout: Duration::ZERO, ..BackendConfig::default() };
        assert!(matches!(bad.validate(), Err(BackendError::InvalidConfig(_))));
        let bad = BackendConfig { prompt_pattern: "(".into(), ..BackendConfig::default() };
        assert!(matches!(bad.validate(), Err(BackendError::InvalidConfig(_))));
        assert!(BackendConfig::default().validate().unwrap().is_match(b"ACL2 >"));
    }

    #[test]
    fn fake_examples() {
        let mut h = BackendHandle::fake();
        assert_eq!(h.probe().unwrap().world_events(), 0);
        let s = h.submit("(defun f (x) x)").unwrap();
        assert_eq!(s.outcome, Outcome::Success);
        assert_eq!(h.probe().unwrap().world_events(), 1);
        assert_eq!(h.submit("(defun f (x) x)").unwrap().outcome, Outcome::Failure);
        let s = h.submit("(+ 1 2)").unwrap();
        assert!(s.result.contains('3'));
        assert_eq!(s.outcome, Outcome::Success);
        let s = h.submit("(defthm t1 nil)").unwrap();
        assert_eq!(s.outcome, Outcome::Failure);
        assert!(s.result.contains(output::FAILED_BANNER));
        assert_eq!(h.submit("(defthm t2 (equal x x))").unwrap().outcome, Outcome::Success);
        assert!(h.submit("(defun g (x) x)").unwrap().sentinel_id > s.sentinel_id);
    }

    #[test]
    fn undo_arithmetic() {
        let mut h = BackendHandle::fake();
        for f in ["(defun a (x) x)", "(defun b (x) x)", "(defun c (x) x)"] {
            h.submit(f).unwrap();
        }
        h.undo_through(2).unwrap();
        assert_eq!(h.probe().unwrap().world_events(), 1);
        assert_eq!(h.world_events(), 1);
        assert!(matches!(h.undo_through(0), Err(BackendError::Precondition(_))));
        assert!(matches!(h.undo_through(2), Err(BackendError::Precondition(_))));

        let mut h = BackendHandle::fake();
        h.submit("(defun a (x) x)").unwrap();
        h.submit("(defun b (x) x)").unwrap();
        h.undo_through(2).unwrap();
        assert_eq!(h.submit("(defun a (x) x)").unwrap().outcome, Outcome::Success);
        assert_eq!(h.probe().unwrap().world_events(), 1);
    }

    #[test]
    fn progn_is_one_command() {
        let mut h = BackendHandle::fake();
        h.submit("(defun a (x) x)").unwrap();
        h.submit("(progn (defun b (x) x) (defun c (x) x))").unwrap();
        assert_eq!(h.command_events(), &[1, 2]);
        assert!(matches!(h.undo_through(1), Err(BackendError::Precondition(_))));
        h.undo_through(2).unwrap();
        assert_eq!(h.probe().unwrap().world_events(), 1);
    }

    #[test]
    fn hang_poisons_handle() {
        let mut h =
            BackendHandle::fake_with(FakeOptions { form_timeout: Duration::from_millis(50), ..FakeOptions::default() });
        h.probe().unwrap().set_hang(true);
        let s = h.submit("(+ 1 2)").unwrap();
        assert_eq!(s.outcome, Outcome::Timeout);
        assert!(h.is_poisoned());
        assert_eq!(h.submit("(+ 1 2)"), Err(BackendError::Poisoned));
    }

    #[test]
    fn crash_poisons_handle() {
        let mut h = BackendHandle::fake();
        h.probe().unwrap().crash();
        assert_eq!(h.submit("(+ 1 2)").unwrap().outcome, Outcome::Crashed);
        assert!(h.is_poisoned());
    }
}
