//! Dataset hub search over the public JSON API.

use serde::{Deserialize, Serialize};

use super::transport::Transport;
use super::ToolError;

pub const DEFAULT_HUB_URL: &str = "https://huggingface.co/api/datasets";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetDescription {
    pub dataset_id: String,
    pub description: String,
}

impl DatasetDescription {
    pub fn render(&self) -> String {
        format!("Dataset ID: {}\nDescription: {}", self.dataset_id, self.description)
    }
}

#[derive(Deserialize)]
struct HubRow {
    id: String,
    #[serde(default)]
    description: Option<String>,
}

pub struct HubClient {
    transport: Box<dyn Transport>,
    base_url: String,
    limit: usize,
}

impl std::fmt::Debug for HubClient {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HubClient").field("base_url", &self.base_url).finish_non_exhaustive()
    }
}

impl HubClient {
    pub fn new(transport: Box<dyn Transport>) -> Self {
        Self {
            transport,
            base_url: DEFAULT_HUB_URL.into(),
            limit: 10,
        }
    }

    pub fn search_url(&self, query: &str) -> String {
        let mut url = url::Url::parse(&self.base_url).expect("valid base url");
        url.query_pairs_mut()
            .append_pair("search", query)
            .append_pair("limit", &self.limit.to_string())
            .append_pair("full", "true");
        url.to_string()
    }

    pub fn search(&self, query: &str) -> Result<Vec<DatasetDescription>, ToolError> {
        let query = query.trim();
        if query.is_empty() {
            return Err(ToolError::EmptyQuery);
        }
        let body = self.transport.get(&self.search_url(query))?;
        let rows: Vec<HubRow> = serde_json::from_str(&body).map_err(|e| ToolError::Malformed(e.to_string()))?;
        Ok(rows
            .into_iter()
            .filter(|r| !r.id.is_empty())
            .map(|r| DatasetDescription {
                dataset_id: r.id,
                description: r
                    .description
                    .map(|d| d.split_whitespace().collect::<Vec<_>>().join(" "))
                    .unwrap_or_default(),
            })
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tools::transport::{FixtureTransport, FnTransport};

    #[test]
    fn fixture_list_passthrough() {
        let dir = tempfile::tempdir().unwrap();
        let c = HubClient::new(Box::new(FixtureTransport::new(dir.path())));
        FixtureTransport::new(dir.path())
            .record(
                &c.search_url("medical qa"),
                r#"[{"id":"org/medqa","description":"Medical\n questions"},{"id":"x/y"}]"#,
            )
            .unwrap();
        let rows = c.search("medical qa").unwrap();
        assert_eq!(
            rows,
            vec![
                DatasetDescription { dataset_id: "org/medqa".into(), description: "Medical questions".into() },
                DatasetDescription { dataset_id: "x/y".into(), description: String::new() },
            ]
        );
    }

    #[test]
    fn empty_and_failure() {
        let c = HubClient::new(Box::new(FnTransport(|_: &str| Ok("[]".to_string()))));
        assert!(c.search("nothing").unwrap().is_empty());
        let c = HubClient::new(Box::new(FnTransport(|_: &str| Err(ToolError::Network("down".into())))));
        assert!(matches!(c.search("q"), Err(ToolError::Network(_))));
    }
}
