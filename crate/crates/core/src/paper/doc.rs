//! Line-addressed LaTeX report with an index of its eight sections.

use std::fmt;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::edit::split_lines;
use crate::prompts;
use crate::tools::latex::strip_comment;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SectionId {
    Abstract,
    Introduction,
    Background,
    RelatedWork,
    Methods,
    ExperimentalSetup,
    Results,
    Discussion,
}

impl SectionId {
    pub const ALL: [SectionId; 8] = [
        SectionId::Abstract,
        SectionId::Introduction,
        SectionId::Background,
        SectionId::RelatedWork,
        SectionId::Methods,
        SectionId::ExperimentalSetup,
        SectionId::Results,
        SectionId::Discussion,
    ];

    pub fn title(self) -> &'static str {
        match self {
            SectionId::Abstract => "Abstract",
            SectionId::Introduction => "Introduction",
            SectionId::Background => "Background",
            SectionId::RelatedWork => "Related Work",
            SectionId::Methods => "Methods",
            SectionId::ExperimentalSetup => "Experimental Setup",
            SectionId::Results => "Results",
            SectionId::Discussion => "Discussion",
        }
    }

    /// Marker the scaffold leaves where the section body goes.
    pub fn placeholder(self) -> String {
        format!("({} HERE)", self.title().to_uppercase())
    }

    pub fn tips(self) -> &'static str {
        match self {
            SectionId::Abstract => prompts::TIP_ABSTRACT,
            SectionId::Introduction => prompts::TIP_INTRODUCTION,
            SectionId::Background => prompts::TIP_BACKGROUND,
            SectionId::RelatedWork => prompts::TIP_RELATED_WORK,
            SectionId::Methods => prompts::TIP_METHODS,
            SectionId::ExperimentalSetup => prompts::TIP_EXPERIMENTAL_SETUP,
            SectionId::Results => prompts::TIP_RESULTS,
            SectionId::Discussion => prompts::TIP_DISCUSSION,
        }
    }

    fn from_title(title: &str) -> Option<SectionId> {
        let norm: String = title.chars().filter(|c| c.is_alphanumeric()).collect::<String>().to_lowercase();
        SectionId::ALL
            .into_iter()
            .find(|s| s.title().chars().filter(|c| c.is_alphanumeric()).collect::<String>().to_lowercase() == norm)
    }
}

impl fmt::Display for SectionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.title())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum StructureError {
    #[error("section `{0}` is not one of the eight report sections")]
    Unknown(String),
    #[error("section {0} appears more than once")]
    Duplicate(SectionId),
    #[error("section {0} is missing")]
    Missing(SectionId),
    #[error("section {found} appears before {expected_before}")]
    OutOfOrder { found: SectionId, expected_before: SectionId },
}

/// Argument of `\name{...}` or `\name*{...}` at the start of `line`, if any.
fn command_arg<'a>(line: &'a str, name: &str) -> Option<&'a str> {
    let rest = line.trim_start().strip_prefix('\\')?.strip_prefix(name)?;
    let rest = rest.strip_prefix('*').unwrap_or(rest);
    let rest = rest.trim_start().strip_prefix('{')?;
    let mut depth = 1;
    for (i, c) in rest.char_indices() {
        match c {
            '{' => depth += 1,
            '}' => {
                depth -= 1;
                if depth == 0 {
                    return Some(&rest[..i]);
                }
            }
            _ => {}
        }
    }
    None
}

/// Finds the line of each section header. The abstract may be either a
/// `\section{Abstract}` or an `abstract` environment.
pub fn index_sections(lines: &[String]) -> Result<Vec<(SectionId, usize)>, StructureError> {
    let mut found: Vec<(SectionId, usize)> = Vec::new();
    for (i, raw) in lines.iter().enumerate() {
        let line = strip_comment(raw);
        let id = if let Some(title) = command_arg(line, "section") {
            Some(SectionId::from_title(title).ok_or_else(|| StructureError::Unknown(title.to_string()))?)
        } else if command_arg(line, "begin") == Some("abstract") {
            Some(SectionId::Abstract)
        } else {
            None
        };
        if let Some(id) = id {
            if found.iter().any(|(s, _)| *s == id) {
                return Err(StructureError::Duplicate(id));
            }
            if let Some(&(prev, _)) = found.last() {
                if prev > id {
                    return Err(StructureError::OutOfOrder { found: prev, expected_before: id });
                }
            }
            found.push((id, i));
        }
    }
    for s in SectionId::ALL {
        if !found.iter().any(|(f, _)| *f == s) {
            return Err(StructureError::Missing(s));
        }
    }
    Ok(found)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PaperDoc {
    lines: Vec<String>,
    sections: Vec<(SectionId, usize)>,
}

impl PaperDoc {
    /// Parses a source whose section structure is valid. Compilation is
    /// checked separately.
    pub fn parse(source: &str) -> Result<Self, StructureError> {
        let lines = split_lines(source);
        let sections = index_sections(&lines)?;
        Ok(Self { lines, sections })
    }

    pub fn lines(&self) -> &[String] {
        &self.lines
    }

    pub fn source(&self) -> String {
        self.lines.join("\n")
    }

    /// Header line range of each section, ending where the next begins (or
    /// at `\end{document}` for the last).
    pub fn sections(&self) -> Vec<(SectionId, Range<usize>)> {
        let end_doc = self
            .lines
            .iter()
            .rposition(|l| command_arg(strip_comment(l), "end") == Some("document"))
            .unwrap_or(self.lines.len());
        self.sections
            .iter()
            .enumerate()
            .map(|(k, &(id, start))| {
                let end = self.sections.get(k + 1).map_or(end_doc.max(start + 1), |&(_, s)| s);
                (id, start..end)
            })
            .collect()
    }

    pub fn has_placeholder(&self, section: SectionId) -> bool {
        let p = section.placeholder();
        self.lines.iter().any(|l| l.contains(&p))
    }

    /// Source with the section's placeholder swapped for `body`.
    pub fn with_section_body(&self, section: SectionId, body: &str) -> Option<String> {
        let source = self.source();
        let p = section.placeholder();
        source.contains(&p).then(|| source.replacen(&p, body.trim(), 1))
    }
}

/// Why a generated section body was refused before compiling.
pub fn lint_section_body(body: &str) -> Result<(), String> {
    const FORBIDDEN: [&str; 7] =
        ["section", "usepackage", "documentclass", "title", "maketitle", "begin{document}", "end{document}"];
    for (n, line) in body.lines().enumerate() {
        let code = strip_comment(line);
        for cmd in FORBIDDEN {
            let pat = format!("\\{cmd}");
            // \section but not \subsection
            if code.match_indices(&pat).any(|(i, _)| {
                let after = &code[i + pat.len()..];
                !after.starts_with(|c: char| c.is_ascii_alphabetic())
            }) {
                return Err(format!("line {n} of the section uses \\{cmd}, which is not allowed in a section body"));
            }
        }
        if let Some(col) = crate::tools::latex::unescaped_percent(line) {
            return Err(format!(
                "line {n} has an unescaped % at column {col}; write \\% for a percentage sign"
            ));
        }
    }
    Ok(())
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub fn scaffold() -> String {
        let mut s = String::from(
            "\\documentclass{article}\n\\usepackage{amsmath}\n\\title{Research Report: Test}\n\\author{Agent Laboratory}\n\\begin{document}\n\\maketitle\n\\begin{abstract}\n(ABSTRACT HERE)\n\\end{abstract}\n",
        );
        for sec in &SectionId::ALL[1..] {
            s.push_str(&format!("\\section{{{}}}\n{}\n", sec.title(), sec.placeholder()));
        }
        s.push_str("\\end{document}");
        s
    }

    #[test]
    fn scaffold_has_eight_sections_in_order() {
        let doc = PaperDoc::parse(&scaffold()).unwrap();
        let secs = doc.sections();
        assert_eq!(secs.iter().map(|s| s.0).collect::<Vec<_>>(), SectionId::ALL);
        assert_eq!(secs[0].1, 6..9);
        assert_eq!(secs[7].1.end, doc.lines().len() - 1);
        assert!(SectionId::ALL.iter().all(|s| doc.has_placeholder(*s)));
    }

    #[test]
    fn abstract_may_be_a_section() {
        let s = scaffold().replace("\\begin{abstract}\n(ABSTRACT HERE)\n\\end{abstract}", "\\section{Abstract}\n(ABSTRACT HERE)");
        assert!(PaperDoc::parse(&s).is_ok());
    }

    #[test]
    fn structure_violations() {
        let s = scaffold();
        assert_eq!(
            PaperDoc::parse(&s.replace("\\section{Results}\n(RESULTS HERE)\n", "")),
            Err(StructureError::Missing(SectionId::Results))
        );
        assert_eq!(
            PaperDoc::parse(&s.replace("\\end{document}", "\\section{Results}\n\\end{document}")),
            Err(StructureError::Duplicate(SectionId::Results))
        );
        assert!(matches!(
            PaperDoc::parse(&s.replace("\\section{Background}", "\\section{Appendix}")),
            Err(StructureError::Unknown(_))
        ));
        let swapped = s
            .replace("\\section{Methods}", "\\section{TMP}")
            .replace("\\section{Results}", "\\section{Methods}")
            .replace("\\section{TMP}", "\\section{Results}");
        assert!(matches!(PaperDoc::parse(&swapped), Err(StructureError::OutOfOrder { .. })));
        // commented-out headers do not count
        assert!(PaperDoc::parse(&s.replace("\\section{Results}", "% \\section{Results}")).is_err());
        // subsections are fine
        assert!(PaperDoc::parse(&s.replace("(METHODS HERE)", "\\subsection{Model}\nx")).is_ok());
    }

    #[test]
    fn placeholder_replacement() {
        let doc = PaperDoc::parse(&scaffold()).unwrap();
        let new = doc.with_section_body(SectionId::Methods, "We do things.\n").unwrap();
        let doc2 = PaperDoc::parse(&new).unwrap();
        assert!(!doc2.has_placeholder(SectionId::Methods));
        assert!(new.contains("\\section{Methods}\nWe do things.\n"));
        assert!(doc2.with_section_body(SectionId::Methods, "again").is_none());
    }

    #[test]
    fn section_body_lint() {
        assert!(lint_section_body("Plain text with \\subsection{A} and \\% and \\textbf{x}.").is_ok());
        assert!(lint_section_body("\\section{Intro}\ntext").is_err());
        assert!(lint_section_body("\\usepackage{x}").is_err());
        assert!(lint_section_body("accuracy of 95% overall").is_err());
        assert!(lint_section_body("\\title{T}").is_err());
        assert!(lint_section_body("a \\titlecase word").is_ok());
    }
}
