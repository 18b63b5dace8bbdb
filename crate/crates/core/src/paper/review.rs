//! Reviewer output: the conference-style review form, parsed and validated.

use serde::{Deserialize, Serialize};

use crate::context::PhaseCtx;
use crate::prompts::{self, fill};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Decision {
    Accept,
    Reject,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Review {
    #[serde(rename = "Summary", default)]
    pub summary: String,
    #[serde(rename = "Strengths", default)]
    pub strengths: Vec<String>,
    #[serde(rename = "Weaknesses", default)]
    pub weaknesses: Vec<String>,
    #[serde(rename = "Originality")]
    pub originality: u8,
    #[serde(rename = "Quality")]
    pub quality: u8,
    #[serde(rename = "Clarity")]
    pub clarity: u8,
    #[serde(rename = "Significance")]
    pub significance: u8,
    #[serde(rename = "Questions", default)]
    pub questions: Vec<String>,
    #[serde(rename = "Limitations", default)]
    pub limitations: Vec<String>,
    #[serde(rename = "Ethical Concerns")]
    pub ethical_concerns: bool,
    #[serde(rename = "Soundness")]
    pub soundness: u8,
    #[serde(rename = "Presentation")]
    pub presentation: u8,
    #[serde(rename = "Contribution")]
    pub contribution: u8,
    #[serde(rename = "Overall")]
    pub overall: u8,
    #[serde(rename = "Confidence")]
    pub confidence: u8,
    #[serde(rename = "Decision")]
    pub decision: Decision,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ReviewError {
    #[error("no JSON object found in the review")]
    NoJson,
    #[error("review JSON is invalid: {0}")]
    Invalid(String),
    #[error("{field} is {value}, expected {min} to {max}")]
    OutOfRange { field: &'static str, value: u8, min: u8, max: u8 },
}

impl Review {
    /// Parses the JSON part of a reviewer response and checks every rating.
    pub fn parse(response: &str) -> Result<Self, ReviewError> {
        let json = extract_json(response).ok_or(ReviewError::NoJson)?;
        let review: Review = serde_json::from_str(json).map_err(|e| ReviewError::Invalid(e.to_string()))?;
        review.validate()?;
        Ok(review)
    }

    pub fn validate(&self) -> Result<(), ReviewError> {
        let checks: [(&'static str, u8, u8, u8); 9] = [
            ("Originality", self.originality, 1, 4),
            ("Quality", self.quality, 1, 4),
            ("Clarity", self.clarity, 1, 4),
            ("Significance", self.significance, 1, 4),
            ("Soundness", self.soundness, 1, 4),
            ("Presentation", self.presentation, 1, 4),
            ("Contribution", self.contribution, 1, 4),
            ("Overall", self.overall, 1, 10),
            ("Confidence", self.confidence, 1, 5),
        ];
        for (field, value, min, max) in checks {
            if !(min..=max).contains(&value) {
                return Err(ReviewError::OutOfRange { field, value, min, max });
            }
        }
        Ok(())
    }
}

/// The body of a ```json fence, or else the outermost braces.
fn extract_json(text: &str) -> Option<&str> {
    if let Some(start) = text.find("```json") {
        let body = &text[start + 7..];
        if let Some(end) = body.find("```") {
            return Some(body[..end].trim());
        }
    }
    let (a, b) = (text.find('{')?, text.rfind('}')?);
    (a < b).then(|| &text[a..=b])
}

/// Mean overall rating, or `None` without reviews.
pub fn mean_overall(reviews: &[Review]) -> Option<f64> {
    if reviews.is_empty() {
        None
    } else {
        Some(reviews.iter().map(|r| r.overall as f64).sum::<f64>() / reviews.len() as f64)
    }
}

/// Collects `count` reviews of `latex`. Each reviewer is re-asked up to
/// `comparison_trials` times; reviewers that never produce a valid form are
/// left out.
pub fn review_paper(ctx: &PhaseCtx<'_>, step: u32, plan: &str, latex: &str, count: u32) -> Vec<Review> {
    let system = prompts::reviewer_system();
    let base_user = fill(prompts::REVIEWER_USER, &[("outlined_plan", plan), ("latex", latex)]);
    let mut reviews = Vec::new();
    for reviewer in 0..count {
        let agent = format!("reviewer_{}", reviewer + 1);
        let mut user = base_user.clone();
        for _ in 0..=ctx.config.comparison_trials {
            let response = match ctx.chat(&agent, step, &system, &user, ctx.config.score_temperature) {
                Ok(r) => r,
                Err(e) => {
                    log::warn!("{agent} unavailable: {e}");
                    break;
                }
            };
            match Review::parse(&response) {
                Ok(r) => {
                    reviews.push(r);
                    break;
                }
                Err(e) => {
                    user = format!("{base_user}\n{}", fill(prompts::REVIEW_RETRY, &[("error", &e.to_string())]));
                }
            }
        }
    }
    reviews
}
