//! Fenced agent commands.
//!
//! Agents act by emitting a triple-backtick fence whose first line starts with
//! a command keyword:
//!
//! ````text
//! ```SUMMARY
//! transformer robustness
//! ```
//! ````
//!
//! Only the first well-formed fence in a response is honoured. Fences whose
//! keyword is not part of the active grammar are inert text and are skipped.

use std::fmt;

use serde::{Deserialize, Serialize};

const FENCE: &str = "```";

/// Command keyword without payload; used to describe which commands a
/// phase or agent accepts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Keyword {
    Summary,
    FullText,
    AddPaper,
    Dialogue,
    Plan,
    SubmitCode,
    SearchHub,
    ExecuteCode,
    Interpretation,
    Edit,
    Replace,
    Score,
}

impl Keyword {
    pub const ALL: [Keyword; 12] = [
        Keyword::Summary,
        Keyword::FullText,
        Keyword::AddPaper,
        Keyword::Dialogue,
        Keyword::Plan,
        Keyword::SubmitCode,
        Keyword::SearchHub,
        Keyword::ExecuteCode,
        Keyword::Interpretation,
        Keyword::Edit,
        Keyword::Replace,
        Keyword::Score,
    ];

    /// Spelling inside the fence. Matching is case-sensitive.
    pub fn as_str(self) -> &'static str {
        match self {
            Keyword::Summary => "SUMMARY",
            Keyword::FullText => "FULL_TEXT",
            Keyword::AddPaper => "ADD_PAPER",
            Keyword::Dialogue => "DIALOGUE",
            Keyword::Plan => "PLAN",
            Keyword::SubmitCode => "SUBMIT_CODE",
            Keyword::SearchHub => "SEARCH_HF",
            Keyword::ExecuteCode => "python",
            Keyword::Interpretation => "INTERPRETATION",
            Keyword::Edit => "EDIT",
            Keyword::Replace => "REPLACE",
            Keyword::Score => "SCORE",
        }
    }

    fn from_token(token: &str) -> Option<Keyword> {
        Keyword::ALL.into_iter().find(|k| k.as_str() == token)
    }
}

impl fmt::Display for Keyword {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum CommandKind {
    Summary,
    FullText,
    AddPaper,
    Dialogue,
    Plan,
    SubmitCode,
    SearchHub,
    ExecuteCode,
    Interpretation,
    /// Inclusive line range `from..=to`; validity is checked when applied.
    Edit { from: usize, to: usize },
    Replace,
    Score,
}

impl CommandKind {
    pub fn keyword(self) -> Keyword {
        match self {
            CommandKind::Summary => Keyword::Summary,
            CommandKind::FullText => Keyword::FullText,
            CommandKind::AddPaper => Keyword::AddPaper,
            CommandKind::Dialogue => Keyword::Dialogue,
            CommandKind::Plan => Keyword::Plan,
            CommandKind::SubmitCode => Keyword::SubmitCode,
            CommandKind::SearchHub => Keyword::SearchHub,
            CommandKind::ExecuteCode => Keyword::ExecuteCode,
            CommandKind::Interpretation => Keyword::Interpretation,
            CommandKind::Edit { .. } => Keyword::Edit,
            CommandKind::Replace => Keyword::Replace,
            CommandKind::Score => Keyword::Score,
        }
    }
}

/// A parsed agent action.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Command {
    pub kind: CommandKind,
    pub body: String,
}

impl Command {
    pub fn new(kind: CommandKind, body: impl Into<String>) -> Self {
        Self {
            kind,
            body: body.into(),
        }
    }

    /// Renders the command as the fence an agent would emit.
    pub fn to_fence(&self) -> String {
        let header = match self.kind {
            CommandKind::Edit { from, to } => format!("EDIT {from} {to}"),
            other => other.keyword().as_str().to_string(),
        };
        format!("{FENCE}{header}\n{}\n{FENCE}", self.body)
    }

    /// Body split into lines; an empty body has no lines.
    pub fn body_lines(&self) -> Vec<String> {
        if self.body.is_empty() {
            Vec::new()
        } else {
            self.body.split('\n').map(str::to_string).collect()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CommandError {
    #[error("no well-formed command fence found")]
    NoCommand,
    #[error("EDIT command needs two integer line indices, got `{0}`")]
    MalformedEdit(String),
}

/// The set of keywords recognised in a given context.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Grammar {
    allowed: Vec<Keyword>,
}

impl Grammar {
    pub fn new(allowed: impl IntoIterator<Item = Keyword>) -> Self {
        let mut allowed: Vec<Keyword> = allowed.into_iter().collect();
        allowed.sort();
        allowed.dedup();
        Self { allowed }
    }

    /// Every keyword, including the code-execution one.
    pub fn full() -> Self {
        Self::new(Keyword::ALL)
    }

    pub fn allows(&self, keyword: Keyword) -> bool {
        self.allowed.contains(&keyword)
    }

    pub fn keywords(&self) -> &[Keyword] {
        &self.allowed
    }

    pub fn parse(&self, response: &str) -> Result<Command, CommandError> {
        let mut cursor = 0;
        loop {
            let open = match response[cursor..].find(FENCE) {
                Some(i) => cursor + i,
                None => return Err(CommandError::NoCommand),
            };
            let inner_start = open + FENCE.len();
            let close = match response[inner_start..].find(FENCE) {
                Some(i) => inner_start + i,
                // unterminated fence: never consume to end of text
                None => return Err(CommandError::NoCommand),
            };
            let inner = &response[inner_start..close];
            let (header, rest) = match inner.find('\n') {
                Some(nl) => (&inner[..nl], &inner[nl + 1..]),
                None => (inner, ""),
            };
            let header = header.trim_end_matches('\r').trim_start();
            let token_end = header
                .find(char::is_whitespace)
                .unwrap_or(header.len());
            let (token, header_tail) = header.split_at(token_end);
            let keyword = match Keyword::from_token(token) {
                Some(k) if self.allows(k) => k,
                _ => {
                    cursor = close + FENCE.len();
                    continue;
                }
            };
            let body = rest.strip_suffix('\n').unwrap_or(rest);
            let header_tail = header_tail.trim();
            let kind = match keyword {
                Keyword::Edit => parse_edit_range(header_tail)?,
                other => simple_kind(other),
            };
            let body = if keyword != Keyword::Edit && !header_tail.is_empty() {
                if body.is_empty() && rest.is_empty() {
                    header_tail.to_string()
                } else {
                    format!("{header_tail}\n{body}")
                }
            } else {
                body.to_string()
            };
            return Ok(Command { kind, body });
        }
    }
}

fn parse_edit_range(args: &str) -> Result<CommandKind, CommandError> {
    let mut it = args.split_whitespace();
    let parsed = (
        it.next().and_then(|s| s.parse::<usize>().ok()),
        it.next().and_then(|s| s.parse::<usize>().ok()),
        it.next(),
    );
    match parsed {
        (Some(from), Some(to), None) => Ok(CommandKind::Edit { from, to }),
        _ => Err(CommandError::MalformedEdit(format!("EDIT {args}").trim().to_string())),
    }
}

fn simple_kind(k: Keyword) -> CommandKind {
    match k {
        Keyword::Summary => CommandKind::Summary,
        Keyword::FullText => CommandKind::FullText,
        Keyword::AddPaper => CommandKind::AddPaper,
        Keyword::Dialogue => CommandKind::Dialogue,
        Keyword::Plan => CommandKind::Plan,
        Keyword::SubmitCode => CommandKind::SubmitCode,
        Keyword::SearchHub => CommandKind::SearchHub,
        Keyword::ExecuteCode => CommandKind::ExecuteCode,
        Keyword::Interpretation => CommandKind::Interpretation,
        Keyword::Replace => CommandKind::Replace,
        Keyword::Score => CommandKind::Score,
        Keyword::Edit => unreachable!("EDIT carries a range"),
    }
}

/// Parses the first command fence using the full grammar.
pub fn parse_command(response: &str) -> Result<Command, CommandError> {
    Grammar::full().parse(response)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn summary_fence() {
        let c = parse_command("```SUMMARY\ntransformer robustness\n```").unwrap();
        assert_eq!(c, Command::new(CommandKind::Summary, "transformer robustness"));
    }

    #[test]
    fn only_first_fence_counts() {
        let text = "thinking...\n```DIALOGUE\nhello there\n```\nand also\n```PLAN\nthe plan\n```";
        let c = parse_command(text).unwrap();
        assert_eq!(c.kind, CommandKind::Dialogue);
        assert_eq!(c.body, "hello there");
    }

    #[test]
    fn no_fence_is_no_command() {
        assert_eq!(parse_command("no fences at all"), Err(CommandError::NoCommand));
        assert_eq!(parse_command(""), Err(CommandError::NoCommand));
    }

    #[test]
    fn unterminated_fence_is_no_command() {
        assert_eq!(
            parse_command("```PLAN\nrun forever and never close"),
            Err(CommandError::NoCommand)
        );
    }

    #[test]
    fn edit_needs_two_integers() {
        let c = parse_command("```EDIT 3 7\nx = 1\n```").unwrap();
        assert_eq!(c.kind, CommandKind::Edit { from: 3, to: 7 });
        assert_eq!(c.body, "x = 1");
        for bad in ["```EDIT 3\nx\n```", "```EDIT a b\nx\n```", "```EDIT -1 2\nx\n```", "```EDIT 1 2 3\nx\n```"] {
            assert!(
                matches!(parse_command(bad), Err(CommandError::MalformedEdit(_))),
                "{bad}"
            );
        }
    }

    #[test]
    fn inverted_edit_range_parses() {
        // range validity is the applier's concern
        let c = parse_command("```EDIT 1 0\nx\n```").unwrap();
        assert_eq!(c.kind, CommandKind::Edit { from: 1, to: 0 });
    }

    #[test]
    fn keywords_are_case_sensitive() {
        assert_eq!(parse_command("```summary\nq\n```"), Err(CommandError::NoCommand));
        assert_eq!(parse_command("```Python\nq\n```"), Err(CommandError::NoCommand));
    }

    #[test]
    fn code_fence_is_inert_outside_execution_grammar() {
        let text = "```python\nprint(1)\n```\n```DIALOGUE\nlet's talk\n```";
        let dialogue_only = Grammar::new([Keyword::Dialogue, Keyword::Plan]);
        let c = dialogue_only.parse(text).unwrap();
        assert_eq!(c.kind, CommandKind::Dialogue);
        let with_exec = Grammar::new([Keyword::Dialogue, Keyword::ExecuteCode]);
        assert_eq!(with_exec.parse(text).unwrap().kind, CommandKind::ExecuteCode);
    }

    #[test]
    fn unknown_fences_are_skipped() {
        let text = "```json\n{}\n```\n```SCORE\n0.5\n```";
        assert_eq!(parse_command(text).unwrap(), Command::new(CommandKind::Score, "0.5"));
    }

    #[test]
    fn leading_space_and_inline_body() {
        let c = parse_command("```  DIALOGUE\nhi\n```").unwrap();
        assert_eq!(c, Command::new(CommandKind::Dialogue, "hi"));
        let c = parse_command("```SUMMARY graph neural nets```").unwrap();
        assert_eq!(c, Command::new(CommandKind::Summary, "graph neural nets"));
    }

    #[test]
    fn add_paper_keeps_multiline_body() {
        let c = parse_command("```ADD_PAPER\n2308.11483v1\nA paper about things.\n```").unwrap();
        assert_eq!(c.kind, CommandKind::AddPaper);
        assert_eq!(c.body, "2308.11483v1\nA paper about things.");
    }

    #[test]
    fn empty_body_has_no_lines() {
        let c = parse_command("```EDIT 0 0\n```").unwrap();
        assert!(c.body_lines().is_empty());
    }

    fn arb_kind() -> impl Strategy<Value = CommandKind> {
        prop_oneof![
            Just(CommandKind::Summary),
            Just(CommandKind::FullText),
            Just(CommandKind::AddPaper),
            Just(CommandKind::Dialogue),
            Just(CommandKind::Plan),
            Just(CommandKind::SubmitCode),
            Just(CommandKind::SearchHub),
            Just(CommandKind::ExecuteCode),
            Just(CommandKind::Interpretation),
            (0usize..500, 0usize..500).prop_map(|(from, to)| CommandKind::Edit { from, to }),
            Just(CommandKind::Replace),
            Just(CommandKind::Score),
        ]
    }

    fn arb_body() -> impl Strategy<Value = String> {
        "[a-zA-Z0-9 _.,:;(){}=+\\-\n\t`]{0,80}".prop_filter("no fence", |s| !s.contains(FENCE))
    }

    proptest! {
        #[test]
        fn serialize_then_parse_is_identity(kind in arb_kind(), body in arb_body()) {
            let cmd = Command::new(kind, body);
            prop_assert_eq!(parse_command(&cmd.to_fence()).unwrap(), cmd);
        }

        #[test]
        fn concatenations_yield_the_first(
            cmds in proptest::collection::vec((arb_kind(), arb_body()), 1..5),
            noise in "[a-z \n]{0,20}",
        ) {
            let cmds: Vec<Command> = cmds.into_iter().map(|(k, b)| Command::new(k, b)).collect();
            let text = cmds.iter().map(Command::to_fence).collect::<Vec<_>>().join(&noise);
            prop_assert_eq!(parse_command(&text).unwrap(), cmds[0].clone());
        }
    }
}
