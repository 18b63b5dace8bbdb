//! arXiv search (Atom feed) and full-text retrieval.

use std::sync::Mutex;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::transport::Transport;
use super::{html_to_text, ToolError};
use crate::gateway::truncate_tail;

pub const DEFAULT_QUERY_URL: &str = "http://export.arxiv.org/api/query";
pub const DEFAULT_HTML_URL: &str = "https://arxiv.org/html";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PaperSummary {
    pub arxiv_id: String,
    pub title: String,
    #[serde(rename = "abstract")]
    pub abstract_text: String,
}

impl PaperSummary {
    /// Block shown to agents after a search.
    pub fn render(&self) -> String {
        format!(
            "Title: {}\nSummary: {}\narXiv paper ID: {}",
            self.title, self.abstract_text, self.arxiv_id
        )
    }
}

/// Accepts `2308.11483`, `2308.11483v1`, `1501.0001` style ids as well as
/// old-style ids such as `hep-th/9901001v2` or `math.GT/0309136`.
pub fn is_arxiv_id(id: &str) -> bool {
    let base = match id.rsplit_once('v') {
        Some((b, v)) if !v.is_empty() && v.bytes().all(|c| c.is_ascii_digit()) => b,
        _ => id,
    };
    if let Some((yymm, num)) = base.split_once('.') {
        if yymm.len() == 4
            && yymm.chars().all(|c| c.is_ascii_digit())
            && (4..=5).contains(&num.len())
            && num.chars().all(|c| c.is_ascii_digit())
        {
            return true;
        }
    }
    if let Some((archive, num)) = base.split_once('/') {
        let (name, sub) = archive.split_once('.').unwrap_or((archive, ""));
        return !name.is_empty()
            && name.chars().all(|c| c.is_ascii_lowercase() || c == '-')
            && (sub.is_empty() || sub.chars().all(|c| c.is_ascii_uppercase()))
            && num.len() == 7
            && num.chars().all(|c| c.is_ascii_digit());
    }
    false
}

fn collapse_ws(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Parses an arXiv Atom feed into summaries, in feed order.
pub fn parse_feed(xml: &str) -> Result<Vec<PaperSummary>, ToolError> {
    let doc = roxmltree::Document::parse(xml).map_err(|e| ToolError::Malformed(e.to_string()))?;
    let mut out = Vec::new();
    for entry in doc.descendants().filter(|n| n.has_tag_name("entry")) {
        let child = |name: &str| {
            entry
                .children()
                .find(|c| c.has_tag_name(name))
                .and_then(|c| c.text())
                .unwrap_or("")
        };
        let raw_id = child("id");
        let id = raw_id.rsplit_once("/abs/").map(|(_, id)| id).unwrap_or(raw_id).trim();
        if !is_arxiv_id(id) {
            // The API reports errors as a pseudo-entry without a paper id.
            continue;
        }
        out.push(PaperSummary {
            arxiv_id: id.to_string(),
            title: collapse_ws(child("title")),
            abstract_text: collapse_ws(child("summary")),
        });
    }
    Ok(out)
}

pub struct ArxivClient {
    transport: Box<dyn Transport>,
    query_url: String,
    html_url: String,
    min_interval: Duration,
    last: Mutex<Option<Instant>>,
}

impl std::fmt::Debug for ArxivClient {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ArxivClient")
            .field("query_url", &self.query_url)
            .field("min_interval", &self.min_interval)
            .finish_non_exhaustive()
    }
}

impl ArxivClient {
    pub fn new(transport: Box<dyn Transport>, min_interval: Duration) -> Self {
        Self {
            transport,
            query_url: DEFAULT_QUERY_URL.into(),
            html_url: DEFAULT_HTML_URL.into(),
            min_interval,
            last: Mutex::new(None),
        }
    }

    pub fn search_url(&self, query: &str, max_results: usize) -> String {
        let mut url = url::Url::parse(&self.query_url).expect("valid base url");
        url.query_pairs_mut()
            .append_pair("search_query", &format!("all:{query}"))
            .append_pair("start", "0")
            .append_pair("max_results", &max_results.to_string())
            .append_pair("sortBy", "relevance");
        url.to_string()
    }

    pub fn full_text_url(&self, arxiv_id: &str) -> String {
        format!("{}/{}", self.html_url, arxiv_id)
    }

    /// Holds the lock across the request so concurrent callers queue up
    /// behind the interval.
    fn get(&self, url: &str) -> Result<String, ToolError> {
        let mut last = self.last.lock().unwrap_or_else(|e| e.into_inner());
        if let Some(t) = *last {
            let since = t.elapsed();
            if since < self.min_interval {
                std::thread::sleep(self.min_interval - since);
            }
        }
        let r = self.transport.get(url);
        *last = Some(Instant::now());
        r
    }

    pub fn search(&self, query: &str, max_results: usize) -> Result<Vec<PaperSummary>, ToolError> {
        let query = query.trim();
        if query.is_empty() {
            return Err(ToolError::EmptyQuery);
        }
        let body = self.get(&self.search_url(query, max_results))?;
        let mut papers = parse_feed(&body)?;
        papers.truncate(max_results);
        Ok(papers)
    }

    pub fn full_text(&self, arxiv_id: &str, budget_chars: usize) -> Result<String, ToolError> {
        let id = arxiv_id.trim();
        if !is_arxiv_id(id) {
            return Err(ToolError::NotFound(id.to_string()));
        }
        let html = self.get(&self.full_text_url(id))?;
        Ok(truncate_tail(&html_to_text(&html), budget_chars))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::TRUNCATION_MARKER;
    use crate::tools::transport::{FixtureTransport, FnTransport};

    pub(crate) fn feed(n: usize) -> String {
        let mut s = String::from(r#"<?xml version="1.0" encoding="UTF-8"?><feed xmlns="http://www.w3.org/2005/Atom">"#);
        for i in 0..n {
            s.push_str(&format!(
                "<entry><id>http://arxiv.org/abs/2401.{:05}v1</id><title>Paper\n  {i}</title><summary>  Abstract {i}.\n</summary></entry>",
                i + 1
            ));
        }
        s.push_str("</feed>");
        s
    }

    fn client_with(dir: &std::path::Path) -> ArxivClient {
        ArxivClient::new(Box::new(FixtureTransport::new(dir)), Duration::ZERO)
    }

    #[test]
    fn ids() {
        for ok in ["2308.11483v1", "2308.11483", "1501.0001", "hep-th/9901001", "math.GT/0309136v2"] {
            assert!(is_arxiv_id(ok), "{ok}");
        }
        for bad in ["", "2308", "abc.12345", "2308.11483v", "hep-th/99", "HEP/9901001"] {
            assert!(!is_arxiv_id(bad), "{bad}");
        }
    }

    #[test]
    fn fixture_search_returns_feed_order() {
        let dir = tempfile::tempdir().unwrap();
        let c = client_with(dir.path());
        FixtureTransport::new(dir.path())
            .record(&c.search_url("attention", 20), &feed(20))
            .unwrap();
        let papers = c.search("attention", 20).unwrap();
        assert_eq!(papers.len(), 20);
        assert_eq!(papers[0].arxiv_id, "2401.00001v1");
        assert_eq!(papers[0].title, "Paper 0");
        assert_eq!(papers[19].abstract_text, "Abstract 19.");
    }

    #[test]
    fn empty_feed_is_success() {
        let dir = tempfile::tempdir().unwrap();
        let c = client_with(dir.path());
        FixtureTransport::new(dir.path())
            .record(&c.search_url("zzz", 20), &feed(0))
            .unwrap();
        assert!(c.search("zzz", 20).unwrap().is_empty());
        assert!(matches!(c.search("  ", 20), Err(ToolError::EmptyQuery)));
    }

    #[test]
    fn max_results_bound() {
        for k in 0..8 {
            let c = ArxivClient::new(Box::new(FnTransport(|_: &str| Ok(feed(5)))), Duration::ZERO);
            assert!(c.search("q", k).unwrap().len() <= k);
        }
    }

    #[test]
    fn full_text_truncates_with_marker() {
        let big = format!("<html><body><p>{}</p></body></html>", "a".repeat(400_000));
        let c = ArxivClient::new(Box::new(FnTransport(move |_: &str| Ok(big.clone()))), Duration::ZERO);
        let t = c.full_text("2401.00001", 100_000).unwrap();
        assert_eq!(t.chars().count(), 100_000);
        assert!(t.ends_with(TRUNCATION_MARKER));
    }

    #[test]
    fn unknown_id_is_not_found() {
        let dir = tempfile::tempdir().unwrap();
        let c = client_with(dir.path());
        assert!(matches!(c.full_text("2401.99999", 10), Err(ToolError::NotFound(_))));
        assert!(matches!(c.full_text("not an id", 10), Err(ToolError::NotFound(_))));
    }

    #[test]
    fn requests_are_spaced() {
        let c = ArxivClient::new(Box::new(FnTransport(|_: &str| Ok(feed(1)))), Duration::from_millis(60));
        let t = Instant::now();
        for _ in 0..3 {
            c.search("q", 1).unwrap();
        }
        assert!(t.elapsed() >= Duration::from_millis(120));
    }
}
