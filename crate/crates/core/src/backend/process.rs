use std::io::{Read, Write};
use std::path::Path;
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::thread;
use std::time::Duration;

use super::{BackendError, Recv, Transport};

enum Chunk {
    Data(Vec<u8>),
    Eof,
}

/// A child process; stdout and stderr are read on background threads and
/// merged into one queue.
pub struct ProcessTransport {
    child: Child,
    stdin: Option<ChildStdin>,
    rx: Receiver<Chunk>,
    eof: bool,
}

fn pump(mut source: impl Read, tx: mpsc::Sender<Chunk>, signal_eof: bool) {
    let mut buf = [0u8; 8192];
    loop {
        match source.read(&mut buf) {
            Ok(0) | Err(_) => break,
            Ok(n) => {
                if tx.send(Chunk::Data(buf[..n].to_vec())).is_err() {
                    return;
                }
            }
        }
    }
    if signal_eof {
        let _ = tx.send(Chunk::Eof);
    }
}

impl ProcessTransport {
    pub fn spawn(executable: &Path, args: &[String]) -> Result<Self, BackendError> {
        let mut child = Command::new(executable)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|e| BackendError::Spawn { path: executable.display().to_string(), message: e.to_string() })?;
        let (tx, rx) = mpsc::channel();
        let stdout = child.stdout.take().expect("stdout is piped");
        let stderr = child.stderr.take().expect("stderr is piped");
        let tx_err = tx.clone();
        thread::spawn(move || pump(stdout, tx, true));
        thread::spawn(move || pump(stderr, tx_err, false));
        Ok(ProcessTransport { stdin: child.stdin.take(), child, rx, eof: false })
    }
}

impl Transport for ProcessTransport {
    fn send(&mut self, bytes: &[u8]) -> std::io::Result<()> {
        let stdin =
            self.stdin.as_mut().ok_or_else(|| std::io::Error::new(std::io::ErrorKind::BrokenPipe, "stdin closed"))?;
        stdin.write_all(bytes)?;
        stdin.flush()
    }

    fn recv(&mut self, timeout: Duration) -> Recv {
        if self.eof {
            return Recv::Eof;
        }
        match self.rx.recv_timeout(timeout) {
            Ok(Chunk::Data(bytes)) => Recv::Data(bytes),
            Ok(Chunk::Eof) | Err(RecvTimeoutError::Disconnected) => {
                self.eof = true;
                Recv::Eof
            }
            Err(RecvTimeoutError::Timeout) => Recv::Timeout,
        }
    }

    fn kill(&mut self) {
        self.stdin = None;
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}
