//! Line-range edits shared by the code and paper solvers.

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("cannot edit lines {from}..={to} of a {len}-line document")]
pub struct RangeError {
    pub from: usize,
    pub to: usize,
    pub len: usize,
}

/// Replaces lines `n..=m` with `new_lines`. Both ends are inclusive.
pub fn apply_edit<S: Clone>(lines: &[S], n: usize, m: usize, new_lines: &[S]) -> Result<Vec<S>, RangeError> {
    if n > m || m >= lines.len() {
        return Err(RangeError { from: n, to: m, len: lines.len() });
    }
    let mut out = Vec::with_capacity(lines.len() - (m - n + 1) + new_lines.len());
    out.extend_from_slice(&lines[..n]);
    out.extend_from_slice(new_lines);
    out.extend_from_slice(&lines[m + 1..]);
    Ok(out)
}

/// Lines with their indices on the left, as shown to editing agents.
pub fn numbered(lines: &[String]) -> String {
    lines
        .iter()
        .enumerate()
        .map(|(i, l)| format!("{i} |{l}"))
        .collect::<Vec<_>>()
        .join("\n")
}

/// Splits source into lines; the empty string has none.
pub fn split_lines(text: &str) -> Vec<String> {
    if text.is_empty() {
        Vec::new()
    } else {
        text.split('\n').map(str::to_string).collect()
    }
}
