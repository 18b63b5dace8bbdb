//! Multi-agent research pipeline: from a topic to a literature review, plan,
//! experiments, and a LaTeX report.

pub mod agents;
pub mod command;
pub mod config;
pub mod context;
pub mod edit;
pub mod gateway;
pub mod history;
pub mod mle;
pub mod orchestrator;
pub mod output;
pub mod paper;
pub mod phase;
pub mod prompts;
pub mod task;
pub mod tools;
