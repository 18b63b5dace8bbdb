//! External capabilities used by agents: literature search, dataset search,
//! code execution, and LaTeX checking.

pub mod arxiv;
pub mod hub;
pub mod latex;
pub mod sandbox;
pub mod transport;

#[derive(Debug, Clone, thiserror::Error, PartialEq, Eq)]
pub enum ToolError {
    #[error("network error: {0}")]
    Network(String),
    #[error("rate limited by remote service")]
    RateLimited,
    #[error("not found: {0}")]
    NotFound(String),
    #[error("query must not be empty")]
    EmptyQuery,
    #[error("malformed response: {0}")]
    Malformed(String),
}

/// Flattens HTML to readable text: drops scripts, styles and tags, decodes
/// the common entities, and collapses runs of blank space.
pub fn html_to_text(html: &str) -> String {
    let mut out = String::with_capacity(html.len() / 2);
    let lower = html.to_ascii_lowercase();
    let mut i = 0;
    let bytes = html.as_bytes();
    while i < bytes.len() {
        if bytes[i] == b'<' {
            let skip_block = ["script", "style"]
                .into_iter()
                .find(|t| lower[i + 1..].starts_with(t));
            let end = match skip_block {
                Some(tag) => lower[i..]
                    .find(&format!("</{tag}"))
                    .and_then(|e| lower[i + e..].find('>').map(|g| i + e + g + 1)),
                None => lower[i..].find('>').map(|g| i + g + 1),
            };
            let Some(end) = end else { break };
            let tag = &lower[i..end];
            if ["<p", "<br", "<div", "<h1", "<h2", "<h3", "<h4", "<li", "</p", "</div", "<tr", "<section"]
                .iter()
                .any(|t| tag.starts_with(t))
            {
                out.push('\n');
            } else {
                out.push(' ');
            }
            i = end;
        } else {
            let next = html[i..].find('<').map(|n| i + n).unwrap_or(html.len());
            out.push_str(&decode_entities(&html[i..next]));
            i = next;
        }
    }
    out.lines()
        .map(|l| l.split_whitespace().collect::<Vec<_>>().join(" "))
        .filter(|l| !l.is_empty())
        .collect::<Vec<_>>()
        .join("\n")
}

fn decode_entities(s: &str) -> String {
    if !s.contains('&') {
        return s.to_string();
    }
    s.replace("&nbsp;", " ")
        .replace("&lt;", "<")
        .replace("&gt;", ">")
        .replace("&quot;", "\"")
        .replace("&#39;", "'")
        .replace("&amp;", "&")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn strips_tags_scripts_and_entities() {
        let html = "<html><head><style>p{x:1}</style><script>var a = '<p>';</script></head>\
                    <body><h1>Title</h1><p>A &amp; B &lt;3</p><p>second   para</p></body></html>";
        assert_eq!(html_to_text(html), "Title\nA & B <3\nsecond para");
    }

    #[test]
    fn plain_text_survives() {
        assert_eq!(html_to_text("just text"), "just text");
    }
}
