//! The bounded set of best programs the solver edits from.

use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProgramCandidate {
    pub lines: Vec<String>,
    pub score: Option<f64>,
    pub output: String,
    pub compiled: bool,
    #[serde(default)]
    pub figures: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CandidateError {
    #[error("score {0} is outside [0, 1]")]
    OutOfRange(f64),
}

impl ProgramCandidate {
    /// A program that ran cleanly and received `score`.
    pub fn scored(lines: Vec<String>, output: impl Into<String>, score: f64) -> Result<Self, CandidateError> {
        if !(0.0..=1.0).contains(&score) {
            return Err(CandidateError::OutOfRange(score));
        }
        Ok(Self { lines, score: Some(score), output: output.into(), compiled: true, figures: Vec::new() })
    }

    pub fn code(&self) -> String {
        self.lines.join("\n")
    }

    fn score_value(&self) -> f64 {
        self.score.unwrap_or(0.0)
    }
}

/// What happened when a candidate was offered to the pool.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Offer {
    Inserted,
    ReplacedLowest,
    Rejected,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidatePool {
    entries: Vec<ProgramCandidate>,
    capacity: usize,
}

impl CandidatePool {
    pub fn new(capacity: usize) -> Self {
        Self { entries: Vec::new(), capacity: capacity.max(1) }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Best first.
    pub fn entries(&self) -> &[ProgramCandidate] {
        &self.entries
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn best(&self) -> Option<&ProgramCandidate> {
        self.entries.first()
    }

    pub fn max_score(&self) -> Option<f64> {
        self.best().map(ProgramCandidate::score_value)
    }

    /// Inserts while there is room; afterwards a candidate only displaces the
    /// lowest entry by scoring strictly higher. Unscored or uncompiled
    /// candidates are always rejected.
    pub fn offer(&mut self, candidate: ProgramCandidate) -> Offer {
        let Some(score) = candidate.score else { return Offer::Rejected };
        if !candidate.compiled || !(0.0..=1.0).contains(&score) {
            return Offer::Rejected;
        }
        let outcome = if self.entries.len() < self.capacity {
            Offer::Inserted
        } else if self.entries.last().is_some_and(|low| score > low.score_value()) {
            self.entries.pop();
            Offer::ReplacedLowest
        } else {
            return Offer::Rejected;
        };
        // after existing entries with the same score, so incumbents keep rank
        let at = self.entries.partition_point(|e| e.score_value() >= score);
        self.entries.insert(at, candidate);
        debug_assert!(self.invariants_hold());
        outcome
    }

    /// Uniform draw of an editing base.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<&ProgramCandidate> {
        if self.entries.is_empty() {
            None
        } else {
            Some(&self.entries[rng.gen_range(0..self.entries.len())])
        }
    }

    pub fn invariants_hold(&self) -> bool {
        self.entries.len() <= self.capacity
            && self.entries.iter().all(|e| e.compiled && e.score.is_some_and(|s| (0.0..=1.0).contains(&s)))
            && self.entries.windows(2).all(|w| w[0].score_value() >= w[1].score_value())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(tag: &str, score: f64) -> ProgramCandidate {
        ProgramCandidate::scored(vec![tag.to_string()], "", score).unwrap()
    }

    fn pool(scores: &[(&str, f64)]) -> CandidatePool {
        let mut p = CandidatePool::new(2);
        for (t, s) in scores {
            p.offer(c(t, *s));
        }
        p
    }

    fn scores(p: &CandidatePool) -> Vec<f64> {
        p.entries().iter().map(|e| e.score.unwrap()).collect()
    }

    #[test]
    fn replaces_lowest_when_better() {
        let mut p = pool(&[("a", 0.9), ("b", 0.5)]);
        assert_eq!(p.offer(c("n", 0.7)), Offer::ReplacedLowest);
        assert_eq!(scores(&p), [0.9, 0.7]);
    }

    #[test]
    fn rejects_when_not_better() {
        let mut p = pool(&[("a", 0.9), ("b", 0.5)]);
        assert_eq!(p.offer(c("n", 0.4)), Offer::Rejected);
        assert_eq!(scores(&p), [0.9, 0.5]);
    }

    #[test]
    fn tie_keeps_incumbent() {
        let mut p = pool(&[("a", 0.9), ("b", 0.5)]);
        assert_eq!(p.offer(c("n", 0.5)), Offer::Rejected);
        assert_eq!(p.entries()[1].lines, ["b"]);
    }

    #[test]
    fn empty_pool_accepts_anything_compiled_including_zero() {
        let mut p = CandidatePool::new(2);
        assert_eq!(p.offer(c("z", 0.0)), Offer::Inserted);
        assert_eq!(scores(&p), [0.0]);
        let mut p = CandidatePool::new(2);
        p.offer(c("x", 0.3));
        assert_eq!(scores(&p), [0.3]);
    }

    #[test]
    fn uncompiled_is_rejected() {
        let mut p = CandidatePool::new(2);
        let bad = ProgramCandidate { lines: vec![], score: None, output: String::new(), compiled: false, figures: vec![] };
        assert_eq!(p.offer(bad), Offer::Rejected);
        assert!(ProgramCandidate::scored(vec![], "", 1.2).is_err());
    }

    #[test]
    fn sampling_covers_the_pool_uniformly() {
        let p = pool(&[("A", 0.9), ("B", 0.5)]);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 4000;
        let a = (0..n).filter(|_| p.sample(&mut rng).unwrap().lines[0] == "A").count();
        // binomial(4000, 0.5) has sd ~32; allow 5 sd
        assert!((a as i64 - 2000).abs() < 160, "{a}");
        assert!(CandidatePool::new(2).sample(&mut rng).is_none());
    }

    proptest! {
        #[test]
        fn invariants_and_monotone_max(cap in 1usize..4, offers in proptest::collection::vec(0u32..=100, 0..60)) {
            let mut p = CandidatePool::new(cap);
            let mut last_max = None::<f64>;
            for (i, s) in offers.iter().enumerate() {
                let before = scores(&p);
                let score = *s as f64 / 100.0;
                let outcome = p.offer(c(&i.to_string(), score));
                prop_assert!(p.invariants_hold());
                // oracle for the replace-lowest rule
                let expected = if before.len() < cap {
                    Offer::Inserted
                } else if score > *before.last().unwrap() {
                    Offer::ReplacedLowest
                } else {
                    Offer::Rejected
                };
                prop_assert_eq!(outcome, expected);
                let max = p.max_score();
                prop_assert!(last_max.is_none() || max >= last_max);
                last_max = max;
            }
        }
    }
}
