//! Report writing: scaffold, per-section generation with citations, then
//! reviewed line edits keeping the best-scoring document.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::command::{Command, CommandKind, Grammar, Keyword};
use crate::context::{PhaseCtx, PhaseError};
use crate::edit::{apply_edit, numbered};
use crate::gateway::GatewayError;
use crate::output::ReportOutput;
use crate::prompts::{self, fill};
use crate::tools::arxiv::PaperSummary;

use super::doc::{lint_section_body, PaperDoc, SectionId};
use super::review::{mean_overall, review_paper, Review};

/// Sections that get an arXiv search for citable work.
pub const CITING_SECTIONS: [SectionId; 3] = [SectionId::Introduction, SectionId::Background, SectionId::RelatedWork];

/// Results fetched per section search.
pub const SECTION_SEARCH_RESULTS: usize = 5;

#[derive(Debug, thiserror::Error)]
pub enum PaperError {
    #[error("no valid scaffold after {attempts} attempts: {last}")]
    ScaffoldFailed { attempts: u32, last: String },
    #[error("section {section} could not be written: {last}")]
    SectionFailed { section: SectionId, last: String },
    #[error(transparent)]
    Gateway(#[from] GatewayError),
}

impl From<PaperError> for PhaseError {
    fn from(e: PaperError) -> Self {
        match e {
            PaperError::Gateway(g) => PhaseError::Gateway(g),
            other => PhaseError::Failed(other.to_string()),
        }
    }
}

/// Why a proposed document change was not committed.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EditRejected {
    #[error(transparent)]
    Range(#[from] crate::edit::RangeError),
    #[error("the edited document was rejected: {0}")]
    Compile(String),
}

#[derive(Debug, Clone)]
pub struct ReportInputs<'a> {
    pub plan: &'a str,
    pub lit_review: &'a str,
    pub exp_code: &'a str,
    pub exp_results: &'a str,
    pub insights: &'a str,
    /// Figure file names produced by the experiments.
    pub figures: &'a [String],
}

/// One edit iteration as persisted next to the report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PaperTraceRecord {
    pub step: u32,
    pub command: Option<String>,
    pub committed: bool,
    pub score: Option<f64>,
    pub best_score: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone)]
pub struct PaperResult {
    pub doc: PaperDoc,
    pub reviews: Vec<Review>,
    pub score: Option<f64>,
    pub trace: Vec<PaperTraceRecord>,
}

impl PaperResult {
    pub fn into_output(self) -> ReportOutput {
        ReportOutput { latex: self.doc.source(), reviews: self.reviews, score: self.score.unwrap_or(0.0) }
    }
}

fn header_of(cmd: &Command) -> String {
    match cmd.kind {
        CommandKind::Edit { from, to } => format!("EDIT {from} {to}"),
        k => k.keyword().as_str().to_string(),
    }
}

pub struct PaperSolver<'c, 'a> {
    ctx: &'c PhaseCtx<'a>,
    inputs: ReportInputs<'c>,
}

impl<'c, 'a> PaperSolver<'c, 'a> {
    pub fn new(ctx: &'c PhaseCtx<'a>, inputs: ReportInputs<'c>) -> Self {
        Self { ctx, inputs }
    }

    fn system(&self, lines: &[String], ref_papers: &str, tools: &str, section_cmd: &str) -> String {
        let cmd_set = fill(prompts::PAPER_COMMAND_DESCRIPTION, &[("cmd_strings", tools)]);
        fill(
            prompts::PAPER_SYSTEM,
            &[
                ("ref_papers", ref_papers),
                ("role_description", prompts::PAPER_ROLE),
                ("phase_prompt", prompts::PAPER_PHASE),
                ("notes", &prompts::notes_block(self.ctx.task, self.ctx.phase)),
                ("lit_review", self.inputs.lit_review),
                ("plan", self.inputs.plan),
                ("exp_code", self.inputs.exp_code),
                ("exp_results", self.inputs.exp_results),
                ("insights", self.inputs.insights),
                ("paper_progress", ""),
                ("cmd_set", &cmd_set),
                ("paper_lines", &numbered(lines)),
                ("section_cmd", section_cmd),
            ],
        )
    }

    /// Structure check followed by a compile check. The error text is fed
    /// back to the model.
    pub fn gate(&self, source: &str) -> Result<PaperDoc, String> {
        let doc = PaperDoc::parse(source).map_err(|e| e.to_string())?;
        let resources = self.ctx.services.figures_dir.as_deref();
        self.ctx.services.latex.check(source, resources).map_err(|e| e.to_string())?;
        Ok(doc)
    }

    fn available_figures(&self) -> Vec<String> {
        let Some(dir) = &self.ctx.services.figures_dir else { return Vec::new() };
        self.inputs.figures.iter().filter(|f| dir.join(f).is_file()).cloned().collect()
    }

    pub fn build_scaffold(&self) -> Result<(PaperDoc, u32), PaperError> {
        let cfg = self.ctx.config;
        let system = self.system(&[], "", prompts::PAPER_REPLACE_TOOL, prompts::PAPER_SCAFFOLD);
        let grammar = Grammar::new([Keyword::Replace]);
        let mut err = String::new();
        for attempt in 1..=cfg.scaffold_attempts {
            let user = fill(prompts::PAPER_SCAFFOLD_USER, &[("err", &err)]);
            let response = self.ctx.chat("paper_solver", attempt - 1, &system, &user, cfg.initial_paper_temperature)?;
            let outcome = grammar.parse(&response).map_err(|e| e.to_string()).and_then(|cmd| {
                let doc = self.gate(&cmd.body)?;
                if let Some(s) = SectionId::ALL.into_iter().find(|s| !doc.has_placeholder(*s)) {
                    return Err(format!("the scaffold must contain the placeholder {}", s.placeholder()));
                }
                if !cmd.body.contains("\\title{Research Report:") {
                    return Err("the title must start with Research Report:".to_string());
                }
                if !cmd.body.contains("Agent Laboratory") {
                    return Err("the author must be Agent Laboratory".to_string());
                }
                Ok(doc)
            });
            match outcome {
                Ok(doc) => return Ok((doc, attempt)),
                Err(e) => err = format!("The previous scaffold was rejected: {e}"),
            }
        }
        Err(PaperError::ScaffoldFailed { attempts: cfg.scaffold_attempts, last: err })
    }

    /// Asks for search queries until one returns papers, at most
    /// `search_attempt_cap` times. An empty result is acceptable.
    pub fn section_search(&self, section: SectionId) -> Result<Vec<PaperSummary>, PaperError> {
        let cfg = self.ctx.config;
        let system = fill(prompts::PAPER_SEARCH_SYSTEM, &[("section", section.title())]);
        let mut tried: Vec<String> = Vec::new();
        for attempt in 0..cfg.search_attempt_cap {
            let att_str = if tried.is_empty() {
                String::new()
            } else {
                fill(prompts::PAPER_SEARCH_RETRY, &[("previous", &tried.join("; "))])
            };
            let user = fill(
                prompts::PAPER_SEARCH_USER,
                &[("topic", self.ctx.task.topic()), ("plan", self.inputs.plan), ("att_str", &att_str)],
            );
            let query = self.ctx.chat("paper_search", attempt, &system, &user, cfg.agent_temperature)?;
            let query = query.trim().trim_matches('"').trim().to_string();
            if !query.is_empty() {
                match self.ctx.services.arxiv.search(&query, SECTION_SEARCH_RESULTS) {
                    Ok(found) if !found.is_empty() => return Ok(found),
                    Ok(_) => {}
                    Err(e) => log::warn!("section search for {section} failed: {e}"),
                }
            }
            tried.push(query);
        }
        Ok(Vec::new())
    }

    /// Replaces the section placeholder with generated text that passes the
    /// lint, structure, and compile checks.
    pub fn generate_section(&self, doc: &PaperDoc, section: SectionId, related: &[PaperSummary]) -> Result<PaperDoc, PaperError> {
        let cfg = self.ctx.config;
        let length = if section == SectionId::Abstract { "" } else { prompts::PAPER_SECTION_LENGTH };
        let figures = self.available_figures();
        let methods_str = if section == SectionId::Results && !figures.is_empty() {
            let lines: Vec<String> =
                figures.iter().map(|f| format!("\\includegraphics[width=\\textwidth]{{{f}}}")).collect();
            fill(prompts::PAPER_FIGURES, &[("figures", &lines.join("\n"))])
        } else {
            String::new()
        };
        let section_cmd = fill(
            prompts::PAPER_SECTION_ONLY,
            &[
                ("section", section.title()),
                ("length", length),
                ("per_section_tips", section.tips()),
                ("methods_str", &methods_str),
            ],
        );
        let related_text: String = related.iter().map(|p| format!("\n{}", p.render())).collect();
        let system = self.system(doc.lines(), "", prompts::PAPER_REPLACE_TOOL, &section_cmd);
        let grammar = Grammar::new([Keyword::Replace]);
        let mut err = String::new();
        for attempt in 0..cfg.section_attempts {
            let user = fill(prompts::PAPER_SECTION_USER, &[("err", &err), ("section_related_work", &related_text)]);
            let response = self.ctx.chat("paper_solver", attempt, &system, &user, cfg.initial_paper_temperature)?;
            let outcome = grammar.parse(&response).map_err(|e| e.to_string()).and_then(|cmd| {
                lint_section_body(&cmd.body)?;
                let source = doc
                    .with_section_body(section, &cmd.body)
                    .ok_or_else(|| format!("the placeholder {} is gone", section.placeholder()))?;
                self.gate(&source)
            });
            match outcome {
                Ok(next) => return Ok(next),
                Err(e) => err = format!("The previous {section} text was rejected: {e}"),
            }
        }
        Err(PaperError::SectionFailed { section, last: err })
    }

    /// Applies an EDIT or REPLACE; the result is committed only if it passes
    /// the gate.
    pub fn edit_paper(&self, doc: &PaperDoc, cmd: &Command) -> Result<PaperDoc, EditRejected> {
        let source = match cmd.kind {
            CommandKind::Edit { from, to } => apply_edit(doc.lines(), from, to, &cmd.body_lines())?.join("\n"),
            _ => cmd.body.clone(),
        };
        self.gate(&source).map_err(EditRejected::Compile)
    }

    pub fn solve(&self) -> Result<PaperResult, PaperError> {
        let cfg = self.ctx.config;
        let (mut doc, _) = self.build_scaffold()?;
        let mut cited: Vec<PaperSummary> = Vec::new();
        for section in SectionId::ALL {
            let related = if CITING_SECTIONS.contains(&section) { self.section_search(section)? } else { Vec::new() };
            doc = self.generate_section(&doc, section, &related)?;
            for p in related {
                if !cited.iter().any(|c| c.arxiv_id == p.arxiv_id) {
                    cited.push(p);
                }
            }
        }

        let mut best_reviews = review_paper(self.ctx, 0, self.inputs.plan, &doc.source(), cfg.writing_reviewers);
        let mut best_score = mean_overall(&best_reviews);
        let mut best = doc;
        let ref_papers = if cited.is_empty() {
            String::new()
        } else {
            let list: Vec<String> = cited.iter().map(PaperSummary::render).collect();
            format!("Here are related papers you can cite:\n{}", list.join("\n"))
        };
        let tools = format!("{}\n{}", prompts::PAPER_EDIT_TOOL, prompts::PAPER_REPLACE_TOOL);
        let grammar = Grammar::new([Keyword::Edit, Keyword::Replace]);
        let mut history: VecDeque<String> = VecDeque::new();
        let mut prev_command = String::new();
        let mut err = String::new();
        let mut trace = Vec::new();

        for step in 0..cfg.papersolver_steps {
            let system = self.system(best.lines(), &ref_papers, &tools, "");
            let history_str: Vec<&str> = history.iter().map(String::as_str).collect();
            let score_str = best_score.map_or("none".to_string(), |s| s.to_string());
            let user = fill(
                prompts::PAPER_EDIT_USER,
                &[
                    ("err", &err),
                    ("history_str", &history_str.join("\n")),
                    ("step", &step.to_string()),
                    ("score", &score_str),
                    ("prev_command", &prev_command),
                ],
            );
            let response = self.ctx.chat("paper_solver", step, &system, &user, cfg.paper_solver_temperature)?;
            let mut record = PaperTraceRecord { step, command: None, committed: false, score: None, best_score, error: None };
            match grammar.parse(&response) {
                Err(e) => {
                    prev_command = response.clone();
                    record.error = Some(e.to_string());
                }
                Ok(cmd) => {
                    prev_command = cmd.to_fence();
                    record.command = Some(header_of(&cmd));
                    match self.edit_paper(&best, &cmd) {
                        Err(e) => record.error = Some(e.to_string()),
                        Ok(candidate) => {
                            record.committed = true;
                            let reviews = review_paper(self.ctx, step + 1, self.inputs.plan, &candidate.source(), cfg.writing_reviewers);
                            let score = mean_overall(&reviews);
                            record.score = score;
                            let better = match (score, best_score) {
                                (Some(s), Some(b)) => s > b,
                                (Some(_), None) => true,
                                (None, _) => false,
                            };
                            if better {
                                best = candidate;
                                best_reviews = reviews;
                                best_score = score;
                            }
                        }
                    }
                }
            }
            record.best_score = best_score;
            err = record.error.as_ref().map_or(String::new(), |e| format!("The previous command failed: {e}"));
            let outcome = match (&record.error, record.score) {
                (Some(e), _) => format!("rejected: {}", e.lines().next().unwrap_or("")),
                (None, Some(s)) => format!("review score {s}"),
                (None, None) => "no review available".to_string(),
            };
            history.push_back(format!("Step {step}: {} -> {outcome}", record.command.as_deref().unwrap_or("no command")));
            while history.len() > cfg.paper_history_len {
                history.pop_front();
            }
            trace.push(record);
        }
        Ok(PaperResult { doc: best, reviews: best_reviews, score: best_score, trace })
    }
}

/// The report-writing phase.
pub fn report_writing(ctx: &PhaseCtx<'_>, inputs: ReportInputs<'_>) -> Result<PaperResult, PhaseError> {
    Ok(PaperSolver::new(ctx, inputs).solve()?)
}

#[cfg(test)]
mod tests;
