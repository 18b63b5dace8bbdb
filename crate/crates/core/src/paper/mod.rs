//! Report writing: a LaTeX document built section by section, then edited
//! under compile and review gates.

pub mod doc;
pub mod review;
pub mod solver;

pub use doc::{PaperDoc, SectionId};
pub use review::{Decision, Review};
pub use solver::{report_writing, PaperResult, PaperSolver, ReportInputs};
