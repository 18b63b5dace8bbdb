//! Experiment-code solver: edits a pool of candidate programs and keeps the
//! best-scoring ones.

pub mod pool;
pub mod scoring;
pub mod solver;
pub mod split;

pub use pool::{CandidatePool, Offer, ProgramCandidate};
pub use scoring::{parse_score, HeldOut, LabeledData, Metric, ScoringMode};
pub use solver::{running_experiments, trace_hash, SolveResult, Solver, SolverError, SolverInputs, SolverState, TraceRecord};
