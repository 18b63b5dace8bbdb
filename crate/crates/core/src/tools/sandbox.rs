//! Experiment-code execution in a child process.
//!
//! Code is first passed through [`sanitize`], which neutralizes calls that
//! would end the interpreter or shell out to the host. The sanitized program
//! then runs in a fresh scratch directory, in its own process group so a
//! timeout can kill everything it spawned.

use std::collections::BTreeMap;
use std::io::Read;
use std::os::unix::process::CommandExt;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

/// Call targets replaced by a no-op. Entries ending in `.` match any
/// attribute of that module.
const BLOCKED_CALLS: &[&str] = &[
    "exit",
    "quit",
    "sys.exit",
    "os._exit",
    "os.abort",
    "os.kill",
    "os.killpg",
    "os.system",
    "os.popen",
    "os.exec",
    "os.spawn",
    "os.fork",
    "subprocess.",
    "pty.spawn",
];

/// Stand-in for a blocked callee. Arguments are still evaluated and the call
/// expression yields `None`.
pub const NEUTRALIZED_CALL: &str = "(lambda *_a, **_k: None)";

fn is_blocked(chain: &str) -> bool {
    BLOCKED_CALLS.iter().any(|b| {
        if let Some(module) = b.strip_suffix('.') {
            chain.len() > module.len() + 1 && chain.starts_with(module) && chain.as_bytes()[module.len()] == b'.'
        } else if *b == "os.exec" || *b == "os.spawn" {
            chain.starts_with(b)
        } else {
            chain == *b
        }
    })
}

fn is_ident_start(c: u8) -> bool {
    c.is_ascii_alphabetic() || c == b'_' || c >= 0x80
}

fn is_ident_char(c: u8) -> bool {
    is_ident_start(c) || c.is_ascii_digit()
}

fn is_string_prefix(word: &str) -> bool {
    word.len() <= 2 && word.chars().all(|c| "rRbBuUfF".contains(c))
}

/// Skips a string literal starting at the opening quote `i`; returns the
/// index just past its end (or the end of input if unterminated).
fn skip_string(b: &[u8], i: usize) -> usize {
    let q = b[i];
    let triple = b.len() >= i + 3 && b[i + 1] == q && b[i + 2] == q;
    let mut j = if triple { i + 3 } else { i + 1 };
    while j < b.len() {
        match b[j] {
            b'\\' => j += 2,
            c if c == q => {
                if !triple {
                    return j + 1;
                }
                if b.len() >= j + 3 && b[j + 1] == q && b[j + 2] == q {
                    return j + 3;
                }
                j += 1;
            }
            b'\n' if !triple => return j,
            _ => j += 1,
        }
    }
    b.len()
}

/// Replaces blocked call targets with [`NEUTRALIZED_CALL`].
///
/// Matching is token based: names inside string literals and comments are
/// ignored, as are attribute accesses on other objects (`obj.exit()`) and
/// definitions (`def exit(...)`). Code without blocked calls comes back
/// unchanged, and sanitizing twice equals sanitizing once.
pub fn sanitize(code: &str) -> String {
    let b = code.as_bytes();
    let mut out = String::with_capacity(code.len());
    let mut copied = 0;
    let mut i = 0;
    // Last significant token: Some('.') after a dot, Some('d') after def/class.
    let mut prev: Option<u8> = None;
    while i < b.len() {
        let c = b[i];
        if c == b'#' {
            while i < b.len() && b[i] != b'\n' {
                i += 1;
            }
        } else if c == b'"' || c == b'\'' {
            i = skip_string(b, i);
            prev = Some(b'"');
        } else if is_ident_start(c) {
            let start = i;
            let mut chain_end;
            loop {
                while i < b.len() && is_ident_char(b[i]) {
                    i += 1;
                }
                chain_end = i;
                let mut j = i;
                while j < b.len() && (b[j] == b' ' || b[j] == b'\t') {
                    j += 1;
                }
                if j < b.len() && b[j] == b'.' {
                    let mut k = j + 1;
                    while k < b.len() && (b[k] == b' ' || b[k] == b'\t') {
                        k += 1;
                    }
                    if k < b.len() && is_ident_start(b[k]) {
                        i = k;
                        continue;
                    }
                }
                break;
            }
            let word = &code[start..chain_end];
            if is_string_prefix(word) && chain_end < b.len() && (b[chain_end] == b'"' || b[chain_end] == b'\'') {
                i = skip_string(b, chain_end);
                prev = Some(b'"');
                continue;
            }
            let chain: String = word.chars().filter(|c| !c.is_whitespace()).collect();
            let mut j = chain_end;
            while j < b.len() && (b[j] == b' ' || b[j] == b'\t') {
                j += 1;
            }
            let called = j < b.len() && b[j] == b'(';
            if called && prev != Some(b'.') && prev != Some(b'd') && is_blocked(&chain) {
                out.push_str(&code[copied..start]);
                out.push_str(NEUTRALIZED_CALL);
                copied = chain_end;
            }
            prev = if chain == "def" || chain == "class" { Some(b'd') } else { Some(b'a') };
        } else {
            if !c.is_ascii_whitespace() {
                prev = Some(c);
            }
            i += 1;
        }
    }
    out.push_str(&code[copied..]);
    out
}

const HEAD_TAIL_MARKER: &str = "\n[... output truncated ...]\n";

/// Shortens `text` to at most `budget` characters, keeping the first part
/// and exactly the last quarter of the budget.
pub fn truncate_head_tail(text: &str, budget: usize) -> String {
    let n = text.chars().count();
    if n <= budget {
        return text.to_string();
    }
    let tail = budget / 4;
    let head = budget.saturating_sub(tail + HEAD_TAIL_MARKER.chars().count());
    let mut out: String = text.chars().take(head).collect();
    if head > 0 {
        out.push_str(HEAD_TAIL_MARKER);
    }
    out.extend(text.chars().skip(n - tail));
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecutionResult {
    pub stdout: String,
    pub error: Option<String>,
    #[serde(skip)]
    pub duration: Duration,
    pub timed_out: bool,
    /// Requested output files, read back as text.
    #[serde(default)]
    pub files: BTreeMap<String, String>,
    /// PNG files the program left in its working directory.
    #[serde(default)]
    pub figures: Vec<String>,
}

impl ExecutionResult {
    pub fn succeeded(&self) -> bool {
        self.error.is_none() && !self.timed_out
    }

    /// Error text for feedback and repair prompts, with a synthetic message
    /// when the run timed out without a traceback.
    pub fn error_text(&self, timeout: Duration) -> Option<String> {
        match (&self.error, self.timed_out) {
            (Some(e), _) if !e.trim().is_empty() => Some(e.clone()),
            (_, true) => Some(crate::prompts::fill(
                crate::prompts::TIMEOUT_ERROR,
                &[("secs", &timeout.as_secs().to_string())],
            )),
            (Some(e), false) => Some(e.clone()),
            (None, false) => None,
        }
    }

    /// Feedback block shown to agents.
    pub fn render(&self, timeout: Duration) -> String {
        match self.error_text(timeout) {
            Some(e) => format!("[CODE EXECUTION ERROR]: {e}\n{}", self.stdout),
            None => self.stdout.clone(),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct ExecJob {
    pub code: String,
    pub timeout: Duration,
    /// Files written into the scratch directory before the run.
    pub stage: Vec<(String, String)>,
    /// Files read back after the run, if the program created them.
    pub collect: Vec<String>,
}

impl ExecJob {
    pub fn new(code: impl Into<String>, timeout: Duration) -> Self {
        Self { code: code.into(), timeout, ..Self::default() }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SandboxError {
    #[error("could not start interpreter `{interpreter}`: {source}")]
    Spawn {
        interpreter: String,
        #[source]
        source: std::io::Error,
    },
    #[error("scratch directory: {0}")]
    Scratch(#[from] std::io::Error),
}

pub trait CodeExecutor: Send + Sync {
    fn execute(&self, job: &ExecJob) -> Result<ExecutionResult, SandboxError>;
}

#[derive(Debug)]
pub struct Sandbox {
    interpreter: String,
    root: PathBuf,
    stdout_budget: usize,
    figures_dir: Option<PathBuf>,
    lock: Mutex<()>,
}

impl Sandbox {
    /// Scratch directories are created under `root` and removed after each
    /// run.
    pub fn new(interpreter: impl Into<String>, root: impl Into<PathBuf>, stdout_budget: usize) -> Self {
        Self {
            interpreter: interpreter.into(),
            root: root.into(),
            stdout_budget,
            figures_dir: None,
            lock: Mutex::new(()),
        }
    }

    /// Copies figures produced by runs into `dir`.
    pub fn with_figures_dir(mut self, dir: impl Into<PathBuf>) -> Self {
        self.figures_dir = Some(dir.into());
        self
    }

    fn collect_figures(&self, scratch: &Path) -> Vec<String> {
        let Ok(rd) = std::fs::read_dir(scratch) else { return Vec::new() };
        let mut names: Vec<String> = rd
            .filter_map(Result::ok)
            .map(|e| e.file_name().to_string_lossy().into_owned())
            .filter(|n| n.to_ascii_lowercase().ends_with(".png"))
            .collect();
        names.sort();
        if let Some(dir) = &self.figures_dir {
            if std::fs::create_dir_all(dir).is_ok() {
                for n in &names {
                    let _ = std::fs::copy(scratch.join(n), dir.join(n));
                }
            }
        }
        names
    }
}

fn drain<R: Read + Send + 'static>(r: Option<R>) -> std::thread::JoinHandle<String> {
    std::thread::spawn(move || {
        let mut buf = Vec::new();
        if let Some(mut r) = r {
            let _ = r.read_to_end(&mut buf);
        }
        String::from_utf8_lossy(&buf).into_owned()
    })
}

impl CodeExecutor for Sandbox {
    fn execute(&self, job: &ExecJob) -> Result<ExecutionResult, SandboxError> {
        let _serial = self.lock.lock().unwrap_or_else(|e| e.into_inner());
        std::fs::create_dir_all(&self.root)?;
        let scratch = tempfile::Builder::new().prefix("exec-").tempdir_in(&self.root)?;
        let dir = scratch.path();
        for (name, contents) in &job.stage {
            std::fs::write(dir.join(name), contents)?;
        }
        std::fs::write(dir.join("main.py"), sanitize(&job.code))?;

        let mut cmd = Command::new(&self.interpreter);
        cmd.arg("main.py")
            .current_dir(dir)
            .stdin(Stdio::null())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .env("HOME", dir)
            .env("XDG_CACHE_HOME", dir.join(".cache"))
            .env("MPLCONFIGDIR", dir.join(".cache"))
            .env("MPLBACKEND", "Agg")
            .env("PYTHONDONTWRITEBYTECODE", "1")
            .env("PYTHONUNBUFFERED", "1");
        // SAFETY: setsid is async-signal-safe and touches no parent state.
        unsafe {
            cmd.pre_exec(|| {
                if libc::setsid() < 0 {
                    return Err(std::io::Error::last_os_error());
                }
                Ok(())
            });
        }
        let started = Instant::now();
        let mut child = cmd.spawn().map_err(|source| SandboxError::Spawn {
            interpreter: self.interpreter.clone(),
            source,
        })?;
        let out = drain(child.stdout.take());
        let err = drain(child.stderr.take());
        let pgid = child.id() as libc::pid_t;
        let mut timed_out = false;
        let status = loop {
            if let Some(s) = child.try_wait()? {
                break s;
            }
            if started.elapsed() >= job.timeout {
                timed_out = true;
                // SAFETY: plain syscall on the group we created with setsid.
                unsafe {
                    libc::killpg(pgid, libc::SIGKILL);
                }
                break child.wait()?;
            }
            std::thread::sleep(Duration::from_millis(10));
        };
        // Reap anything left in the group before the pipes are drained.
        // SAFETY: as above.
        unsafe {
            libc::killpg(pgid, libc::SIGKILL);
        }
        let duration = started.elapsed();
        let stdout = out.join().unwrap_or_default();
        let stderr = err.join().unwrap_or_default();
        let error = if timed_out || status.success() {
            None
        } else if stderr.trim().is_empty() {
            Some(format!("process exited with {status}"))
        } else {
            Some(truncate_head_tail(&stderr, self.stdout_budget))
        };
        let mut files = BTreeMap::new();
        for name in &job.collect {
            if let Ok(s) = std::fs::read_to_string(dir.join(name)) {
                files.insert(name.clone(), s);
            }
        }
        let figures = self.collect_figures(dir);
        Ok(ExecutionResult {
            stdout: truncate_head_tail(&stdout, self.stdout_budget),
            error,
            duration,
            timed_out,
            files,
            figures,
        })
    }
}
