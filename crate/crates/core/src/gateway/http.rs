//! HTTP adapters for hosted chat-completion APIs.

use std::time::Duration;

use reqwest::blocking::Client;
use reqwest::StatusCode;
use serde_json::{json, Value};

use super::{ChatRequest, Completion, Provider, ProviderError, Usage};

/// Which wire format to speak.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Flavor {
    OpenAi,
    Anthropic,
}

#[derive(Debug)]
pub struct HttpProvider {
    flavor: Flavor,
    base_url: String,
    api_key: String,
    client: Client,
}

#[derive(Debug, thiserror::Error)]
pub enum HttpSetupError {
    #[error("environment variable {0} is not set")]
    MissingKey(&'static str),
    #[error("building HTTP client: {0}")]
    Client(#[from] reqwest::Error),
}

impl HttpProvider {
    pub fn new(flavor: Flavor, base_url: impl Into<String>, api_key: impl Into<String>) -> Result<Self, HttpSetupError> {
        let client = Client::builder().timeout(Duration::from_secs(600)).build()?;
        Ok(Self {
            flavor,
            base_url: base_url.into().trim_end_matches('/').to_string(),
            api_key: api_key.into(),
            client,
        })
    }

    /// Picks the flavor from the model id and reads the key from
    /// `OPENAI_API_KEY` or `ANTHROPIC_API_KEY`.
    pub fn from_env(model_id: &str) -> Result<Self, HttpSetupError> {
        if model_id.starts_with("claude") {
            let key = std::env::var("ANTHROPIC_API_KEY").map_err(|_| HttpSetupError::MissingKey("ANTHROPIC_API_KEY"))?;
            let base = std::env::var("ANTHROPIC_BASE_URL").unwrap_or_else(|_| "https://api.anthropic.com".into());
            Self::new(Flavor::Anthropic, base, key)
        } else {
            let key = std::env::var("OPENAI_API_KEY").map_err(|_| HttpSetupError::MissingKey("OPENAI_API_KEY"))?;
            let base = std::env::var("OPENAI_BASE_URL").unwrap_or_else(|_| "https://api.openai.com".into());
            Self::new(Flavor::OpenAi, base, key)
        }
    }

    fn body(&self, r: &ChatRequest) -> (String, Value) {
        match self.flavor {
            Flavor::OpenAi => {
                let mut body = json!({
                    "model": r.model_id,
                    "temperature": r.temperature,
                    "messages": [
                        {"role": "system", "content": r.system},
                        {"role": "user", "content": r.user},
                    ],
                });
                if let Some(n) = r.max_output_tokens {
                    body["max_tokens"] = json!(n);
                }
                (format!("{}/v1/chat/completions", self.base_url), body)
            }
            Flavor::Anthropic => {
                let body = json!({
                    "model": r.model_id,
                    "temperature": r.temperature.min(1.0),
                    "system": r.system,
                    "max_tokens": r.max_output_tokens.unwrap_or(4096),
                    "messages": [{"role": "user", "content": r.user}],
                });
                (format!("{}/v1/messages", self.base_url), body)
            }
        }
    }

    fn parse(&self, v: &Value) -> Option<Completion> {
        match self.flavor {
            Flavor::OpenAi => Some(Completion {
                text: v["choices"][0]["message"]["content"].as_str()?.to_string(),
                usage: Usage {
                    prompt_tokens: v["usage"]["prompt_tokens"].as_u64().unwrap_or(0),
                    completion_tokens: v["usage"]["completion_tokens"].as_u64().unwrap_or(0),
                },
            }),
            Flavor::Anthropic => {
                let text: String = v["content"]
                    .as_array()?
                    .iter()
                    .filter_map(|b| b["text"].as_str())
                    .collect();
                Some(Completion {
                    text,
                    usage: Usage {
                        prompt_tokens: v["usage"]["input_tokens"].as_u64().unwrap_or(0),
                        completion_tokens: v["usage"]["output_tokens"].as_u64().unwrap_or(0),
                    },
                })
            }
        }
    }
}

fn classify(status: StatusCode, body: &str) -> ProviderError {
    let msg = format!("HTTP {status}: {}", body.chars().take(500).collect::<String>());
    match status.as_u16() {
        401 | 403 => ProviderError::Auth(msg),
        408 | 409 | 429 | 500..=599 => ProviderError::Transient(msg),
        _ => ProviderError::Fatal(msg),
    }
}

impl Provider for HttpProvider {
    fn name(&self) -> &str {
        match self.flavor {
            Flavor::OpenAi => "openai",
            Flavor::Anthropic => "anthropic",
        }
    }

    fn complete(&self, request: &ChatRequest) -> Result<Completion, ProviderError> {
        let (url, body) = self.body(request);
        let builder = self.client.post(&url).json(&body);
        let builder = match self.flavor {
            Flavor::OpenAi => builder.bearer_auth(&self.api_key),
            Flavor::Anthropic => builder
                .header("x-api-key", &self.api_key)
                .header("anthropic-version", "2023-06-01"),
        };
        let resp = builder
            .send()
            .map_err(|e| ProviderError::Transient(e.to_string()))?;
        let status = resp.status();
        let text = resp.text().map_err(|e| ProviderError::Transient(e.to_string()))?;
        if !status.is_success() {
            return Err(classify(status, &text));
        }
        let v: Value = serde_json::from_str(&text)
            .map_err(|e| ProviderError::Fatal(format!("malformed response body: {e}")))?;
        self.parse(&v)
            .ok_or_else(|| ProviderError::Fatal("response lacks message content".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::{BufRead, BufReader, Read, Write};
    use std::net::TcpListener;

    /// Serves each canned (status, body) pair to one connection and returns
    /// the raw requests it saw.
    fn serve(replies: Vec<(u16, String)>) -> (String, std::thread::JoinHandle<Vec<String>>) {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = format!("http://{}", listener.local_addr().unwrap());
        let handle = std::thread::spawn(move || {
            let mut seen = Vec::new();
            for (status, body) in replies {
                let (stream, _) = listener.accept().unwrap();
                let mut reader = BufReader::new(stream.try_clone().unwrap());
                let mut head = String::new();
                let mut len = 0usize;
                loop {
                    let mut line = String::new();
                    reader.read_line(&mut line).unwrap();
                    if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                        len = v.trim().parse().unwrap();
                    }
                    head.push_str(&line);
                    if line == "\r\n" {
                        break;
                    }
                }
                let mut buf = vec![0; len];
                reader.read_exact(&mut buf).unwrap();
                head.push_str(&String::from_utf8_lossy(&buf));
                seen.push(head);
                let mut s = stream;
                write!(
                    s,
                    "HTTP/1.1 {status} X\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{body}",
                    body.len()
                )
                .unwrap();
            }
            seen
        });
        (addr, handle)
    }

    #[test]
    fn openai_success_and_usage() {
        let (addr, h) = serve(vec![(
            200,
            r#"{"choices":[{"message":{"content":"```PLAN\nx\n```"}}],"usage":{"prompt_tokens":11,"completion_tokens":4}}"#.into(),
        )]);
        let p = HttpProvider::new(Flavor::OpenAi, addr, "k").unwrap();
        let c = p.complete(&ChatRequest::new("gpt-4o", "s", "u", 0.8)).unwrap();
        assert_eq!(c.text, "```PLAN\nx\n```");
        assert_eq!(c.usage, Usage { prompt_tokens: 11, completion_tokens: 4 });
        let seen = h.join().unwrap();
        assert!(seen[0].starts_with("POST /v1/chat/completions"));
        assert!(seen[0].to_ascii_lowercase().contains("authorization: bearer k"));
    }

    #[test]
    fn anthropic_success() {
        let (addr, h) = serve(vec![(
            200,
            r#"{"content":[{"type":"text","text":"hello"}],"usage":{"input_tokens":3,"output_tokens":1}}"#.into(),
        )]);
        let p = HttpProvider::new(Flavor::Anthropic, addr, "k").unwrap();
        let c = p.complete(&ChatRequest::new("claude-x", "s", "u", 0.8)).unwrap();
        assert_eq!(c.text, "hello");
        assert_eq!(c.usage.prompt_tokens, 3);
        assert!(h.join().unwrap()[0].contains("x-api-key: k"));
    }

    #[test]
    fn status_classification() {
        let (addr, h) = serve(vec![
            (401, "{}".into()),
            (429, "{}".into()),
            (503, "{}".into()),
            (400, "{}".into()),
        ]);
        let p = HttpProvider::new(Flavor::OpenAi, addr, "k").unwrap();
        let r = ChatRequest::new("gpt-4o", "s", "u", 0.8);
        assert!(matches!(p.complete(&r), Err(ProviderError::Auth(_))));
        assert!(matches!(p.complete(&r), Err(ProviderError::Transient(_))));
        assert!(matches!(p.complete(&r), Err(ProviderError::Transient(_))));
        assert!(matches!(p.complete(&r), Err(ProviderError::Fatal(_))));
        h.join().unwrap();
    }
}
