//! Line-based prediction protocol for auditing external black-box models.
//!
//! One child process is launched per handle and kept alive across calls;
//! requests are serialized. Each request writes
//!
//! ```text
//! #predict n=<rows> p=<features> q=<outputs>
//! <row 1 as comma-separated reals>
//! ...
//! <row n>
//! ```
//!
//! to the child's standard input, and expects `n` rows of `q` comma-separated
//! finite reals followed by a literal `#end` line. Reals are rendered with
//! Rust's shortest round-trip float formatting, so a well-behaved echo server
//! reproduces values bit for bit. A configurable timeout (default 60 s)
//! covers each full response.

use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{Receiver, RecvTimeoutError};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use ndarray::Array2;

use crate::error::{Error, Result};

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(60);

struct Inner {
    child: Child,
    stdin: Option<ChildStdin>,
    lines: Receiver<std::io::Result<String>>,
    /// Set after a protocol failure; the child state is unknown, so further
    /// requests are refused.
    broken: bool,
}

/// A running external predictor process speaking protocol v1.
pub struct ExternalPredictor {
    command: Vec<String>,
    q: usize,
    timeout: Duration,
    inner: Mutex<Inner>,
}

impl std::fmt::Debug for ExternalPredictor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ExternalPredictor")
            .field("command", &self.command)
            .field("q", &self.q)
            .field("timeout", &self.timeout)
            .finish()
    }
}

impl ExternalPredictor {
    /// Launch `command` (program plus arguments) with piped stdio. `q` is the
    /// declared output arity per row.
    pub fn spawn(command: &[String], q: usize, timeout: Duration) -> Result<Self> {
        if command.is_empty() {
            return Err(Error::InvalidArgument(
                "external predictor command is empty".into(),
            ));
        }
        if q == 0 {
            return Err(Error::InvalidArgument(
                "external predictor output arity must be ≥ 1".into(),
            ));
        }
        let mut child = Command::new(&command[0])
            .args(&command[1..])
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| Error::Predictor(format!("cannot launch `{}`: {e}", command[0])))?;
        let stdin = child.stdin.take();
        let stdout = child
            .stdout
            .take()
            .ok_or_else(|| Error::Predictor("child stdout unavailable".into()))?;

        // A dedicated reader thread turns blocking reads into a channel we
        // can wait on with a timeout.
        let (tx, rx) = std::sync::mpsc::channel();
        std::thread::spawn(move || {
            let mut reader = BufReader::new(stdout);
            loop {
                let mut line = String::new();
                match reader.read_line(&mut line) {
                    Ok(0) => break, // EOF
                    Ok(_) => {
                        let trimmed = line.trim_end_matches(['\n', '\r']).to_string();
                        if tx.send(Ok(trimmed)).is_err() {
                            break;
                        }
                    }
                    Err(e) => {
                        let _ = tx.send(Err(e));
                        break;
                    }
                }
            }
        });

        Ok(Self {
            command: command.to_vec(),
            q,
            timeout,
            inner: Mutex::new(Inner {
                child,
                stdin,
                lines: rx,
                broken: false,
            }),
        })
    }

    pub fn output_arity(&self) -> usize {
        self.q
    }

    /// Round-trip one prediction request. Returns an n×q matrix of finite
    /// reals or a [`Error::Predictor`] describing the protocol failure.
    pub fn predict(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        let (n, p) = x.dim();
        let mut inner = self.inner.lock().unwrap_or_else(|e| e.into_inner());
        if inner.broken {
            return Err(Error::Predictor(
                "external predictor is in a failed state from an earlier request".into(),
            ));
        }
        let result = self.request(&mut inner, n, p, x);
        if result.is_err() {
            inner.broken = true;
            let _ = inner.child.kill();
        }
        result
    }

    fn request(
        &self,
        inner: &mut Inner,
        n: usize,
        p: usize,
        x: &Array2<f64>,
    ) -> Result<Array2<f64>> {
        let stdin = inner
            .stdin
            .as_mut()
            .ok_or_else(|| Error::Predictor("child stdin already closed".into()))?;
        let mut payload = String::with_capacity(n * p * 8 + 32);
        payload.push_str(&format!("#predict n={n} p={p} q={}\n", self.q));
        for i in 0..n {
            for j in 0..p {
                if j > 0 {
                    payload.push(',');
                }
                payload.push_str(&format!("{}", x[(i, j)]));
            }
            payload.push('\n');
        }
        stdin
            .write_all(payload.as_bytes())
            .and_then(|_| stdin.flush())
            .map_err(|e| Error::Predictor(format!("writing request to child: {e}")))?;

        let deadline = Instant::now() + self.timeout;
        let mut out = Array2::<f64>::zeros((n, self.q));
        for i in 0..=n {
            let remaining = deadline.saturating_duration_since(Instant::now());
            let line = match inner.lines.recv_timeout(remaining) {
                Ok(Ok(line)) => line,
                Ok(Err(e)) => {
                    return Err(Error::Predictor(format!("reading child output: {e}")))
                }
                Err(RecvTimeoutError::Timeout) => {
                    return Err(Error::Predictor(format!(
                        "timed out after {:?} waiting for row {i} of {n}",
                        self.timeout
                    )))
                }
                Err(RecvTimeoutError::Disconnected) => {
                    return Err(Error::Predictor(
                        "child closed its output before completing the response".into(),
                    ))
                }
            };
            if i == n {
                if line != "#end" {
                    return Err(Error::Predictor(format!(
                        "expected `#end` terminator, got `{line}`"
                    )));
                }
                break;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != self.q {
                return Err(Error::Predictor(format!(
                    "row {i}: expected {} values, got {} (`{line}`)",
                    self.q,
                    fields.len()
                )));
            }
            for (k, field) in fields.iter().enumerate() {
                let v: f64 = field.trim().parse().map_err(|_| {
                    Error::Predictor(format!("row {i}: cannot parse `{field}` as a real"))
                })?;
                if !v.is_finite() {
                    return Err(Error::Predictor(format!(
                        "row {i}: non-finite prediction {v}"
                    )));
                }
                out[(i, k)] = v;
            }
        }
        Ok(out)
    }

    /// Close the child's stdin, wait for exit, and require status 0.
    pub fn shutdown(self) -> Result<()> {
        let mut inner = self.inner.lock().unwrap_or_else(|e| e.into_inner());
        drop(inner.stdin.take());
        let deadline = Instant::now() + Duration::from_secs(5);
        loop {
            match inner.child.try_wait() {
                Ok(Some(status)) => {
                    return if status.success() {
                        Ok(())
                    } else {
                        Err(Error::Predictor(format!(
                            "external predictor exited with {status}"
                        )))
                    };
                }
                Ok(None) if Instant::now() < deadline => {
                    std::thread::sleep(Duration::from_millis(10));
                }
                Ok(None) => {
                    let _ = inner.child.kill();
                    return Err(Error::Predictor(
                        "external predictor did not exit after stdin closed".into(),
                    ));
                }
                Err(e) => return Err(Error::Predictor(format!("waiting for child: {e}"))),
            }
        }
    }
}

impl Drop for ExternalPredictor {
    fn drop(&mut self) {
        if let Ok(mut inner) = self.inner.lock() {
            drop(inner.stdin.take());
            // Give a well-behaved child a moment to exit on EOF, then kill.
            for _ in 0..50 {
                match inner.child.try_wait() {
                    Ok(Some(_)) => return,
                    Ok(None) => std::thread::sleep(Duration::from_millis(2)),
                    Err(_) => break,
                }
            }
            let _ = inner.child.kill();
            let _ = inner.child.wait();
        }
    }
}
