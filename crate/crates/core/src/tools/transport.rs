//! GET-only transports: live HTTP or a directory of recorded responses.

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use sha2::{Digest, Sha256};

use super::ToolError;

pub trait Transport: Send + Sync {
    fn get(&self, url: &str) -> Result<String, ToolError>;
}

#[derive(Debug)]
pub struct HttpTransport {
    client: reqwest::blocking::Client,
}

impl HttpTransport {
    pub fn new() -> Result<Self, ToolError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(60))
            .user_agent("agentlab/0.1")
            .build()
            .map_err(|e| ToolError::Network(e.to_string()))?;
        Ok(Self { client })
    }
}

impl Transport for HttpTransport {
    fn get(&self, url: &str) -> Result<String, ToolError> {
        let resp = self
            .client
            .get(url)
            .send()
            .map_err(|e| ToolError::Network(e.to_string()))?;
        match resp.status().as_u16() {
            200..=299 => resp.text().map_err(|e| ToolError::Network(e.to_string())),
            404 => Err(ToolError::NotFound(url.to_string())),
            429 | 503 => Err(ToolError::RateLimited),
            s => Err(ToolError::Network(format!("HTTP {s} for {url}"))),
        }
    }
}

/// Serves responses recorded as one file per request, named by the hex
/// SHA-256 of the URL. A missing file is a 404.
#[derive(Debug, Clone)]
pub struct FixtureTransport {
    dir: PathBuf,
}

impl FixtureTransport {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn file_name(url: &str) -> String {
        hex::encode(Sha256::digest(url.as_bytes()))
    }

    /// Stores `body` as the recorded response for `url`.
    pub fn record(&self, url: &str, body: &str) -> std::io::Result<()> {
        std::fs::create_dir_all(&self.dir)?;
        std::fs::write(self.dir.join(Self::file_name(url)), body)
    }
}

impl Transport for FixtureTransport {
    fn get(&self, url: &str) -> Result<String, ToolError> {
        let path = self.dir.join(Self::file_name(url));
        match std::fs::read_to_string(&path) {
            Ok(s) => Ok(s),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Err(ToolError::NotFound(url.to_string())),
            Err(e) => Err(ToolError::Network(format!("{}: {e}", path.display()))),
        }
    }
}

/// Adapter for closures; handy for fault injection.
pub struct FnTransport<F>(pub F);

impl<F> Transport for FnTransport<F>
where
    F: Fn(&str) -> Result<String, ToolError> + Send + Sync,
{
    fn get(&self, url: &str) -> Result<String, ToolError> {
        (self.0)(url)
    }
}

impl<T: Transport + ?Sized> Transport for Arc<T> {
    fn get(&self, url: &str) -> Result<String, ToolError> {
        (**self).get(url)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixture_round_trip_and_miss() {
        let dir = tempfile::tempdir().unwrap();
        let t = FixtureTransport::new(dir.path());
        t.record("http://x/a?b=1", "body").unwrap();
        assert_eq!(t.get("http://x/a?b=1").unwrap(), "body");
        assert!(matches!(t.get("http://x/other"), Err(ToolError::NotFound(_))));
    }

    #[test]
    fn file_names_are_sha256_hex() {
        assert_eq!(
            FixtureTransport::file_name("abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
