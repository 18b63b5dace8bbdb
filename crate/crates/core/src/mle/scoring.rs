//! Candidate scoring: an LLM reward model or a held-out metric on a dev split.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::command::{CommandError, Grammar, Keyword};
use crate::context::PhaseCtx;
use crate::prompts::{self, fill};

use super::split::dev_split;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ScoreError {
    #[error("no ```SCORE block in the response")]
    NoFence,
    #[error("`{0}` is not a decimal number")]
    Malformed(String),
    #[error("{0} is outside [0, 1]")]
    OutOfRange(String),
}

fn is_plain_decimal(s: &str) -> bool {
    let s = s.strip_prefix(['+', '-']).unwrap_or(s);
    let (int, frac) = s.split_once('.').unwrap_or((s, ""));
    let digits = |p: &str| p.bytes().all(|b| b.is_ascii_digit());
    !(int.is_empty() && frac.is_empty()) && digits(int) && digits(frac) && s != "."
}

/// Reads the first SCORE fence of a reward-model response. Only plain
/// decimals inside [0, 1] are accepted; nothing is clamped.
pub fn parse_score(response: &str) -> Result<f64, ScoreError> {
    let cmd = match Grammar::new([Keyword::Score]).parse(response) {
        Ok(c) => c,
        Err(CommandError::NoCommand) | Err(CommandError::MalformedEdit(_)) => return Err(ScoreError::NoFence),
    };
    let text = cmd.body.trim();
    if !is_plain_decimal(text) {
        return Err(ScoreError::Malformed(text.to_string()));
    }
    let value: f64 = text.parse().map_err(|_| ScoreError::Malformed(text.to_string()))?;
    if (0.0..=1.0).contains(&value) {
        Ok(value)
    } else {
        Err(ScoreError::OutOfRange(text.to_string()))
    }
}

/// Result of asking the reward model, including how many completions it took.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RewardScore {
    pub score: f64,
    pub asks: u32,
}

/// Asks the professor reward model for a score, re-asking up to
/// `comparison_trials` times when the reply is unusable. Falls back to 0.
pub fn llm_reward(ctx: &PhaseCtx<'_>, step: u32, plan: &str, code: &str, output: &str) -> RewardScore {
    let base_user = fill(prompts::SCORE_USER, &[("outlined_plan", plan), ("code", code), ("code_return", output)]);
    let mut user = base_user.clone();
    let max_asks = 1 + ctx.config.comparison_trials;
    for ask in 1..=max_asks {
        let response = match ctx.chat("professor", step, prompts::SCORE_SYSTEM, &user, ctx.config.score_temperature) {
            Ok(r) => r,
            Err(e) => {
                log::warn!("reward model unavailable, scoring 0: {e}");
                return RewardScore { score: 0.0, asks: ask };
            }
        };
        match parse_score(&response) {
            Ok(score) => return RewardScore { score, asks: ask },
            Err(e) => {
                user = format!("{base_user}\n{}", fill(prompts::SCORE_RETRY, &[("error", &e.to_string())]));
            }
        }
    }
    RewardScore { score: 0.0, asks: max_asks }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Accuracy,
    MacroF1,
}

/// Numbers compare by value, so `1` and `1.0` are the same label.
fn label_key(v: &Value) -> String {
    match v {
        Value::Number(n) => n.as_f64().map(|f| format!("{f:?}")).unwrap_or_else(|| n.to_string()),
        other => other.to_string(),
    }
}

impl Metric {
    /// Score in [0, 1]; `predictions` and `labels` must be the same length
    /// and non-empty.
    pub fn compute(self, predictions: &[Value], labels: &[Value]) -> f64 {
        assert_eq!(predictions.len(), labels.len());
        assert!(!labels.is_empty());
        let pairs = predictions.iter().map(label_key).zip(labels.iter().map(label_key));
        match self {
            Metric::Accuracy => pairs.filter(|(p, y)| p == y).count() as f64 / labels.len() as f64,
            Metric::MacroF1 => {
                // (tp, fp, fn) per class over the union of seen classes
                let mut counts: BTreeMap<String, (u32, u32, u32)> = BTreeMap::new();
                for (p, y) in pairs {
                    if p == y {
                        counts.entry(p).or_default().0 += 1;
                    } else {
                        counts.entry(p).or_default().1 += 1;
                        counts.entry(y).or_default().2 += 1;
                    }
                }
                let f1s = counts.values().map(|&(tp, fp, fn_)| {
                    let denom = 2 * tp + fp + fn_;
                    if denom == 0 { 0.0 } else { 2.0 * tp as f64 / denom as f64 }
                });
                f1s.sum::<f64>() / counts.len() as f64
            }
        }
    }
}

/// Inputs and labels for a supervised task, as read from a JSON file with
/// `inputs` and `labels` arrays.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledData {
    pub inputs: Vec<Value>,
    pub labels: Vec<Value>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum HeldOutError {
    #[error("dev split is empty")]
    Empty,
    #[error("{inputs} inputs but {labels} labels")]
    Misaligned { inputs: usize, labels: usize },
}

/// Dev rows the program must predict; the labels never leave this process.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeldOut {
    dev_inputs: Vec<Value>,
    dev_labels: Vec<Value>,
    pub metric: Metric,
}

impl HeldOut {
    pub const INPUTS_FILE: &'static str = "dev_inputs.json";
    pub const PREDICTIONS_FILE: &'static str = "dev_predictions.json";

    pub fn new(dev_inputs: Vec<Value>, dev_labels: Vec<Value>, metric: Metric) -> Result<Self, HeldOutError> {
        if dev_inputs.len() != dev_labels.len() {
            return Err(HeldOutError::Misaligned { inputs: dev_inputs.len(), labels: dev_labels.len() });
        }
        if dev_inputs.is_empty() {
            return Err(HeldOutError::Empty);
        }
        Ok(Self { dev_inputs, dev_labels, metric })
    }

    /// Moves a random 20% of `data` into a dev split; the rest is returned
    /// for training.
    pub fn split(data: LabeledData, seed: u64, metric: Metric) -> Result<(LabeledData, HeldOut), HeldOutError> {
        if data.inputs.len() != data.labels.len() {
            return Err(HeldOutError::Misaligned { inputs: data.inputs.len(), labels: data.labels.len() });
        }
        let (train_idx, dev_idx) = dev_split(data.inputs.len(), seed);
        let pick = |idx: &[usize], v: &[Value]| idx.iter().map(|&i| v[i].clone()).collect::<Vec<_>>();
        let train = LabeledData { inputs: pick(&train_idx, &data.inputs), labels: pick(&train_idx, &data.labels) };
        let held = HeldOut::new(pick(&dev_idx, &data.inputs), pick(&dev_idx, &data.labels), metric)?;
        Ok((train, held))
    }

    pub fn len(&self) -> usize {
        self.dev_inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dev_inputs.is_empty()
    }

    pub fn dev_inputs(&self) -> &[Value] {
        &self.dev_inputs
    }

    pub fn inputs_json(&self) -> String {
        serde_json::to_string(&self.dev_inputs).expect("json values serialize")
    }

    /// Scores the predictions file a program wrote. Missing, malformed, or
    /// misaligned predictions score 0.
    pub fn score_predictions(&self, predictions_json: Option<&str>) -> f64 {
        let Some(text) = predictions_json else { return 0.0 };
        match serde_json::from_str::<Vec<Value>>(text) {
            Ok(preds) if preds.len() == self.dev_labels.len() => self.metric.compute(&preds, &self.dev_labels),
            _ => 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ScoringMode {
    LlmReward { plan: String },
    HeldOutMetric(HeldOut),
}
