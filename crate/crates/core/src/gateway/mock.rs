//! Scripted provider: canned responses served strictly in call order.
//!
//! A script is a JSON array. Each entry is either a response
//!
//! ```json
//! {"text": "```DIALOGUE\nhi\n```", "usage": {"prompt_tokens": 12, "completion_tokens": 4}}
//! ```
//!
//! or an injected failure such as `{"error": "rate_limited"}` (also `auth`,
//! `server`, `fatal`). `usage` is optional; when absent it is estimated from
//! the prompt and response lengths. An optional `expect` string must occur
//! in the request's system or user prompt, which catches scripts that have
//! drifted out of step with the pipeline.

use std::path::Path;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::{estimate_tokens, ChatRequest, Completion, Provider, ProviderError, Usage};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InjectedError {
    RateLimited,
    Auth,
    Server,
    Fatal,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScriptEntry {
    Response {
        text: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        usage: Option<Usage>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        expect: Option<String>,
    },
    Failure {
        error: InjectedError,
    },
}

impl ScriptEntry {
    pub fn text(text: impl Into<String>) -> Self {
        ScriptEntry::Response { text: text.into(), usage: None, expect: None }
    }

    pub fn expecting(text: impl Into<String>, expect: impl Into<String>) -> Self {
        ScriptEntry::Response { text: text.into(), usage: None, expect: Some(expect.into()) }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ScriptError {
    #[error("reading mock script {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parsing mock script: {0}")]
    Parse(#[from] serde_json::Error),
}

#[derive(Debug)]
pub struct ScriptedProvider {
    entries: Vec<ScriptEntry>,
    cursor: Mutex<usize>,
    seen: Mutex<Vec<ChatRequest>>,
}

impl ScriptedProvider {
    pub fn new(entries: Vec<ScriptEntry>) -> Self {
        Self {
            entries,
            cursor: Mutex::new(0),
            seen: Mutex::new(Vec::new()),
        }
    }

    pub fn from_json(s: &str) -> Result<Self, ScriptError> {
        Ok(Self::new(serde_json::from_str(s)?))
    }

    /// Loads `path`, or `path/script.json` when `path` is a directory.
    pub fn load(path: &Path) -> Result<Self, ScriptError> {
        let file = if path.is_dir() { path.join("script.json") } else { path.to_path_buf() };
        let s = std::fs::read_to_string(&file).map_err(|source| ScriptError::Io {
            path: file.display().to_string(),
            source,
        })?;
        Self::from_json(&s)
    }

    pub fn entries(&self) -> &[ScriptEntry] {
        &self.entries
    }

    /// Index of the next entry to serve.
    pub fn cursor(&self) -> usize {
        *self.cursor.lock().unwrap_or_else(|e| e.into_inner())
    }

    /// Resumes serving from `cursor`, used when a run is reopened.
    pub fn set_cursor(&self, cursor: usize) {
        *self.cursor.lock().unwrap_or_else(|e| e.into_inner()) = cursor;
    }

    pub fn remaining(&self) -> usize {
        self.entries.len().saturating_sub(self.cursor())
    }

    /// Requests received so far, in order.
    pub fn requests(&self) -> Vec<ChatRequest> {
        self.seen.lock().unwrap_or_else(|e| e.into_inner()).clone()
    }
}

impl Provider for ScriptedProvider {
    fn name(&self) -> &str {
        "mock"
    }

    fn complete(&self, request: &ChatRequest) -> Result<Completion, ProviderError> {
        self.seen
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .push(request.clone());
        let mut cursor = self.cursor.lock().unwrap_or_else(|e| e.into_inner());
        let Some(entry) = self.entries.get(*cursor) else {
            return Err(ProviderError::Fatal(format!(
                "mock script exhausted after {} responses",
                self.entries.len()
            )));
        };
        let index = *cursor;
        *cursor += 1;
        match entry {
            ScriptEntry::Failure { error } => Err(match error {
                InjectedError::RateLimited => ProviderError::Transient("429 rate limited (scripted)".into()),
                InjectedError::Server => ProviderError::Transient("503 server error (scripted)".into()),
                InjectedError::Auth => ProviderError::Auth("401 invalid credentials (scripted)".into()),
                InjectedError::Fatal => ProviderError::Fatal("scripted failure".into()),
            }),
            ScriptEntry::Response { text, usage, expect } => {
                if let Some(needle) = expect {
                    if !request.system.contains(needle.as_str()) && !request.user.contains(needle.as_str()) {
                        return Err(ProviderError::Fatal(format!(
                            "mock script out of sync at entry {index}: prompt lacks {needle:?}"
                        )));
                    }
                }
                let usage = usage.unwrap_or_else(|| Usage {
                    prompt_tokens: estimate_tokens(&request.system) + estimate_tokens(&request.user),
                    completion_tokens: estimate_tokens(text),
                });
                Ok(Completion { text: text.clone(), usage })
            }
        }
    }
}
