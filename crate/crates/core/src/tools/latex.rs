//! LaTeX compile checking.
//!
//! [`BuiltinChecker`] is a structural checker that needs no TeX install: it
//! verifies the document frame, brace balance, environment nesting, inline
//! math delimiters and referenced graphics. [`Pdflatex`] shells out to a real
//! compiler when one is available.

use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use crate::config::LatexBackend;

#[derive(Debug, Clone, thiserror::Error, PartialEq, Eq)]
pub enum LatexError {
    #[error("LaTeX compilation failed:\n{log_tail}")]
    Compile { log_tail: String },
    #[error("LaTeX compiler `{0}` is not installed")]
    CompilerMissing(String),
    #[error("LaTeX scratch directory: {0}")]
    Io(String),
}

pub trait LatexCompiler: Send + Sync {
    /// Checks that `source` compiles. Graphics paths resolve against
    /// `resources` when given.
    fn check(&self, source: &str, resources: Option<&Path>) -> Result<(), LatexError>;

    /// Short name recorded in run metadata.
    fn name(&self) -> &str;

    /// Produces a PDF in `out_dir` if the backend can; returns its path.
    fn render_pdf(&self, _source: &str, _resources: Option<&Path>, _out_dir: &Path) -> Result<Option<PathBuf>, LatexError> {
        Ok(None)
    }
}

pub fn compiler_for(backend: LatexBackend) -> Box<dyn LatexCompiler> {
    match backend {
        LatexBackend::Builtin => Box::new(BuiltinChecker),
        LatexBackend::Pdflatex => Box::new(Pdflatex::default()),
    }
}

/// Removes `%` comments, keeping escaped `\%`.
pub fn strip_comment(line: &str) -> &str {
    let b = line.as_bytes();
    let mut backslashes = 0;
    for (i, &c) in b.iter().enumerate() {
        if c == b'%' && backslashes % 2 == 0 {
            return &line[..i];
        }
        backslashes = if c == b'\\' { backslashes + 1 } else { 0 };
    }
    line
}

/// Position of the first unescaped `%` in a line, if any.
pub fn unescaped_percent(line: &str) -> Option<usize> {
    let stripped = strip_comment(line);
    (stripped.len() < line.len()).then_some(stripped.len())
}

#[derive(Debug, Clone, Copy, Default)]
pub struct BuiltinChecker;

struct Log {
    lines: Vec<String>,
}

impl Log {
    fn error(&mut self, line_no: usize, msg: &str, context: &str) {
        self.lines.push(format!("! {msg}"));
        self.lines.push(format!("l.{line_no} {}", context.trim_end()));
    }
}

/// Reads `{...}` following position `at` in `s`; returns the group content.
fn brace_arg(s: &str, at: usize) -> Option<&str> {
    let rest = s[at..].trim_start();
    let rest = rest.strip_prefix('{')?;
    rest.find('}').map(|e| &rest[..e])
}

fn command_positions<'a>(s: &'a str, name: &'a str) -> impl Iterator<Item = usize> + 'a {
    s.match_indices(name).filter_map(move |(i, _)| {
        let escaped = s[..i].chars().rev().take_while(|&c| c == '\\').count() % 2 == 1;
        let after = s[i + name.len()..].chars().next();
        (!escaped && !after.is_some_and(|c| c.is_ascii_alphabetic())).then_some(i + name.len())
    })
}

impl LatexCompiler for BuiltinChecker {
    fn name(&self) -> &str {
        "builtin"
    }

    fn check(&self, source: &str, resources: Option<&Path>) -> Result<(), LatexError> {
        let mut log = Log { lines: Vec::new() };
        let lines: Vec<&str> = source.lines().map(strip_comment).collect();
        let mut envs: Vec<(String, usize)> = Vec::new();
        let mut depth: i64 = 0;
        let mut seen_class = false;
        let mut begin_doc: Option<usize> = None;
        let mut end_doc: Option<usize> = None;
        let mut dollars = 0usize;
        let mut dollar_line = 0usize;

        for (idx, line) in lines.iter().enumerate() {
            let n = idx + 1;
            if end_doc.is_some() {
                continue;
            }
            if command_positions(line, "\\documentclass").next().is_some() {
                if seen_class {
                    log.error(n, "LaTeX Error: Two \\documentclass or \\documentstyle commands.", line);
                }
                seen_class = true;
            }
            let b = line.as_bytes();
            let mut i = 0;
            while i < b.len() {
                match b[i] {
                    b'\\' => {
                        if i + 1 < b.len() && !b[i + 1].is_ascii_alphabetic() {
                            i += 2;
                            continue;
                        }
                        let start = i + 1;
                        let mut j = start;
                        while j < b.len() && b[j].is_ascii_alphabetic() {
                            j += 1;
                        }
                        let name = &line[start..j];
                        if name == "begin" || name == "end" {
                            if let Some(env) = brace_arg(line, j) {
                                if name == "begin" {
                                    if env == "document" {
                                        if !seen_class {
                                            log.error(n, "LaTeX Error: Missing \\begin{document} preamble: no \\documentclass.", line);
                                        }
                                        if begin_doc.is_some() {
                                            log.error(n, "LaTeX Error: Can be used only in preamble.", line);
                                        }
                                        begin_doc = Some(n);
                                    }
                                    envs.push((env.to_string(), n));
                                } else {
                                    match envs.pop() {
                                        Some((open, _)) if open == env => {}
                                        Some((open, at)) => log.error(
                                            n,
                                            &format!("LaTeX Error: \\begin{{{open}}} on input line {at} ended by \\end{{{env}}}."),
                                            line,
                                        ),
                                        None => log.error(n, &format!("LaTeX Error: \\end{{{env}}} without matching \\begin."), line),
                                    }
                                    if env == "document" {
                                        end_doc = Some(n);
                                    }
                                }
                            }
                        }
                        if name == "includegraphics" {
                            let arg_at = line[j..]
                                .trim_start()
                                .strip_prefix('[')
                                .and_then(|r| r.find(']').map(|e| line.len() - r.len() + e + 1))
                                .unwrap_or(j);
                            if let Some(file) = brace_arg(line, arg_at) {
                                let found = resources.is_some_and(|dir| {
                                    let p = dir.join(file);
                                    p.exists() || ["png", "pdf", "jpg"].iter().any(|e| p.with_extension(e).exists())
                                });
                                if !found {
                                    log.error(n, &format!("LaTeX Error: File `{file}' not found."), line);
                                }
                            }
                        }
                        i = j.max(i + 1);
                        continue;
                    }
                    b'{' => depth += 1,
                    b'}' => {
                        depth -= 1;
                        if depth < 0 {
                            log.error(n, "Too many }'s.", line);
                            depth = 0;
                        }
                    }
                    b'$' if begin_doc.is_some() => {
                        if dollars % 2 == 0 {
                            dollar_line = n;
                        }
                        dollars += 1;
                    }
                    _ => {}
                }
                i += 1;
            }
            // Inline math may not cross a blank line.
            if line.trim().is_empty() && dollars % 2 == 1 {
                log.error(dollar_line, "Missing $ inserted.", lines[dollar_line - 1]);
                dollars += 1;
            }
        }

        if !seen_class {
            log.error(1, "LaTeX Error: Missing \\documentclass.", lines.first().copied().unwrap_or(""));
        }
        if begin_doc.is_none() {
            log.error(lines.len(), "LaTeX Error: Missing \\begin{document}.", "");
        }
        if end_doc.is_none() {
            log.error(lines.len(), "Emergency stop.", "*** (job aborted, no legal \\end found)");
        }
        if depth > 0 {
            log.error(lines.len(), &format!("File ended while scanning use of a group ({depth} unclosed {{)."), "");
        }
        if dollars % 2 == 1 {
            log.error(dollar_line, "Missing $ inserted.", lines[dollar_line - 1]);
        }
        for (env, at) in envs.iter().filter(|(e, _)| e != "document") {
            log.error(*at, &format!("LaTeX Error: \\begin{{{env}}} on input line {at} ended by \\end{{document}}."), "");
        }

        if log.lines.is_empty() {
            Ok(())
        } else {
            let tail: Vec<String> = log.lines.iter().rev().take(40).rev().cloned().collect();
            Err(LatexError::Compile { log_tail: tail.join("\n") })
        }
    }
}

#[derive(Debug, Clone)]
pub struct Pdflatex {
    program: String,
    timeout: Duration,
}

impl Default for Pdflatex {
    fn default() -> Self {
        Self {
            program: "pdflatex".into(),
            timeout: Duration::from_secs(120),
        }
    }
}

impl Pdflatex {
    pub fn new(program: impl Into<String>, timeout: Duration) -> Self {
        Self { program: program.into(), timeout }
    }

    fn run(&self, source: &str, resources: Option<&Path>, dir: &Path, draft: bool) -> Result<(), LatexError> {
        let io = |e: std::io::Error| LatexError::Io(e.to_string());
        std::fs::write(dir.join("main.tex"), source).map_err(io)?;
        if let Some(res) = resources {
            if let Ok(rd) = std::fs::read_dir(res) {
                for e in rd.filter_map(Result::ok) {
                    if e.path().is_file() {
                        let _ = std::fs::copy(e.path(), dir.join(e.file_name()));
                    }
                }
            }
        }
        let mut cmd = Command::new(&self.program);
        cmd.args(["-interaction=nonstopmode", "-halt-on-error"]);
        if draft {
            cmd.arg("-draftmode");
        }
        cmd.arg("main.tex")
            .current_dir(dir)
            .stdin(Stdio::null())
            .stdout(Stdio::null())
            .stderr(Stdio::null());
        let mut child = match cmd.spawn() {
            Ok(c) => c,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                return Err(LatexError::CompilerMissing(self.program.clone()))
            }
            Err(e) => return Err(io(e)),
        };
        let started = Instant::now();
        let status = loop {
            if let Some(s) = child.try_wait().map_err(io)? {
                break Some(s);
            }
            if started.elapsed() > self.timeout {
                let _ = child.kill();
                let _ = child.wait();
                break None;
            }
            std::thread::sleep(Duration::from_millis(20));
        };
        match status {
            Some(s) if s.success() => Ok(()),
            _ => {
                let log = std::fs::read_to_string(dir.join("main.log")).unwrap_or_default();
                let tail: Vec<&str> = log.lines().rev().take(40).collect();
                Err(LatexError::Compile {
                    log_tail: tail.into_iter().rev().collect::<Vec<_>>().join("\n"),
                })
            }
        }
    }
}

impl LatexCompiler for Pdflatex {
    fn name(&self) -> &str {
        "pdflatex"
    }

    fn check(&self, source: &str, resources: Option<&Path>) -> Result<(), LatexError> {
        let dir = tempfile::tempdir().map_err(|e| LatexError::Io(e.to_string()))?;
        self.run(source, resources, dir.path(), true)
    }

    fn render_pdf(&self, source: &str, resources: Option<&Path>, out_dir: &Path) -> Result<Option<PathBuf>, LatexError> {
        let dir = tempfile::tempdir().map_err(|e| LatexError::Io(e.to_string()))?;
        self.run(source, resources, dir.path(), false)?;
        std::fs::create_dir_all(out_dir).map_err(|e| LatexError::Io(e.to_string()))?;
        let dest = out_dir.join("report.pdf");
        std::fs::copy(dir.path().join("main.pdf"), &dest).map_err(|e| LatexError::Io(e.to_string()))?;
        Ok(Some(dest))
    }
}
