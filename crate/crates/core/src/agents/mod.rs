//! Role-playing agents and the turn engine behind the dialogue phases.
//!
//! Agents speak in a fixed rotation. Before each turn an agent receives
//! feedback built from two sources only: the result of its own previous
//! command, and whatever the other agents relayed to it since. A response
//! without a valid command still uses up the turn; the agent is told why on
//! its next turn.

pub mod dialogue;
pub mod lit_review;
pub mod roles;

use crate::command::{Command, CommandError};
use crate::context::{PhaseCtx, PhaseError};
use crate::history::{AgentHistory, HistoryEntry};
use crate::prompts::{self, render_prompt, AgentContext};
pub use roles::Role;

#[derive(Debug, Clone)]
pub struct Agent {
    pub role: Role,
    pub history: AgentHistory,
    own_result: String,
    own_result_is_full_text: bool,
    inbox: Vec<String>,
}

impl Agent {
    pub fn new(role: Role, history_len: usize) -> Self {
        Self {
            role,
            history: AgentHistory::new(history_len),
            own_result: String::new(),
            own_result_is_full_text: false,
            inbox: Vec::new(),
        }
    }

    fn take_feedback(&mut self) -> (String, bool) {
        let mut parts = Vec::new();
        if !self.own_result.is_empty() {
            parts.push(std::mem::take(&mut self.own_result));
        }
        parts.append(&mut self.inbox);
        let full = std::mem::take(&mut self.own_result_is_full_text);
        (parts.join("\n"), full)
    }
}

/// What a command handler decided.
#[derive(Debug)]
pub enum Turn<T> {
    Continue {
        /// Shown to the acting agent on its next turn.
        result: String,
        /// Marks `result` as a full paper text subject to history decay.
        full_text: bool,
        /// Shown to every other agent on their next turn.
        relay: Option<String>,
    },
    Done(T),
}

impl<T> Turn<T> {
    pub fn result(result: impl Into<String>) -> Self {
        Turn::Continue { result: result.into(), full_text: false, relay: None }
    }

    pub fn relay(relay: impl Into<String>) -> Self {
        Turn::Continue { result: String::new(), full_text: false, relay: Some(relay.into()) }
    }
}

/// Outcome of [`run_agents`].
#[derive(Debug)]
pub enum Ended<T> {
    Done { value: T, steps: u32 },
    Exhausted,
}

/// Runs agents in rotation until a handler returns [`Turn::Done`] or
/// `max_steps` turns have been taken.
pub fn run_agents<T>(
    ctx: &PhaseCtx<'_>,
    agents: &mut [Agent],
    context_prompt: &str,
    max_steps: u32,
    mut handle: impl FnMut(usize, u32, Command) -> Result<Turn<T>, PhaseError>,
) -> Result<Ended<T>, PhaseError> {
    assert!(!agents.is_empty());
    for step in 0..max_steps {
        let i = step as usize % agents.len();
        let (feedback, full_text) = agents[i].take_feedback();
        agents[i].history.decay(step, ctx.config);
        let agent = &agents[i];
        let role = agent.role;
        let actx = AgentContext {
            role_description: role.description(),
            phase_prompt: role.phase_prompt(ctx.phase).unwrap_or(""),
            command_descriptions: role.command_prompt(ctx.phase).unwrap_or(""),
            context_prompt,
            history: &agent.history,
            max_steps,
        };
        let prompt = render_prompt(&actx, ctx.phase, step, &feedback, ctx.task, ctx.config);
        let response = ctx.chat(role.label(), step, &prompt.system, &prompt.user, ctx.config.agent_temperature)?;
        let parsed = role.grammar(ctx.phase).parse(&response);

        let agent = &mut agents[i];
        agent.history.push(HistoryEntry {
            step,
            phase: ctx.phase,
            feedback,
            response: response.clone(),
            full_text,
        });
        agent.history.set_prev_command(match &parsed {
            Ok(cmd) => cmd.to_fence(),
            Err(_) => response.clone(),
        });

        let cmd = match parsed {
            Ok(cmd) => cmd,
            Err(CommandError::NoCommand) => {
                agent.own_result = prompts::NO_COMMAND_FEEDBACK.to_string();
                continue;
            }
            Err(e @ CommandError::MalformedEdit(_)) => {
                agent.own_result = e.to_string();
                continue;
            }
        };
        match handle(i, step, cmd)? {
            Turn::Done(value) => return Ok(Ended::Done { value, steps: step + 1 }),
            Turn::Continue { result, full_text, relay } => {
                agents[i].own_result = result;
                agents[i].own_result_is_full_text = full_text;
                if let Some(r) = relay {
                    for (j, other) in agents.iter_mut().enumerate() {
                        if j != i {
                            other.inbox.push(r.clone());
                        }
                    }
                }
            }
        }
    }
    Ok(Ended::Exhausted)
}
