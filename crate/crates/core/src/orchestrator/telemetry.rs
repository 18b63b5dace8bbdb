//! Per-phase time and cost accounting.

use std::collections::BTreeMap;

use rust_decimal::Decimal;
use serde::{Deserialize, Serialize};

use crate::phase::PhaseId;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseStats {
    pub phase: PhaseId,
    pub wall_time_secs: f64,
    #[serde(with = "rust_decimal::serde::str")]
    pub cost: Decimal,
    pub attempts: u32,
    pub succeeded: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Totals {
    pub wall_time_secs: f64,
    #[serde(with = "rust_decimal::serde::str")]
    pub cost: Decimal,
    pub attempts: u32,
}

pub fn totals(rows: &[PhaseStats]) -> Totals {
    rows.iter().fold(Totals::default(), |t, r| Totals {
        wall_time_secs: t.wall_time_secs + r.wall_time_secs,
        cost: t.cost + r.cost,
        attempts: t.attempts + r.attempts,
    })
}

/// Fraction of runs in which each phase eventually succeeded. A phase that
/// never ran in a run counts as a failure for that run only if an earlier
/// row for it exists.
pub fn success_rates(runs: &[Vec<PhaseStats>]) -> BTreeMap<PhaseId, f64> {
    let mut out = BTreeMap::new();
    for phase in PhaseId::ALL {
        let attempted: Vec<bool> = runs
            .iter()
            .filter(|rows| rows.iter().any(|r| r.phase == phase))
            .map(|rows| rows.iter().any(|r| r.phase == phase && r.succeeded))
            .collect();
        if !attempted.is_empty() {
            let ok = attempted.iter().filter(|s| **s).count();
            out.insert(phase, ok as f64 / attempted.len() as f64);
        }
    }
    out
}

/// Plain-text table with one row per phase execution and a total line.
pub fn render_table(rows: &[PhaseStats]) -> String {
    let mut s = format!("{:<24} {:>10} {:>12} {:>8} {:>9}\n", "phase", "time (s)", "cost (USD)", "attempts", "succeeded");
    for r in rows {
        s.push_str(&format!(
            "{:<24} {:>10.2} {:>12} {:>8} {:>9}\n",
            r.phase.slug(),
            r.wall_time_secs,
            r.cost.round_dp(6),
            r.attempts,
            if r.succeeded { "yes" } else { "no" }
        ));
    }
    let t = totals(rows);
    s.push_str(&format!("{:<24} {:>10.2} {:>12} {:>8}\n", "total", t.wall_time_secs, t.cost.round_dp(6), t.attempts));
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::str::FromStr;

    fn row(phase: PhaseId, cost: &str, ok: bool) -> PhaseStats {
        PhaseStats { phase, wall_time_secs: 1.5, cost: Decimal::from_str(cost).unwrap(), attempts: 1, succeeded: ok }
    }

    #[test]
    fn totals_are_exact_sums() {
        let rows = [row(PhaseId::LiteratureReview, "0.10", true), row(PhaseId::PlanFormulation, "0.20", true)];
        let t = totals(&rows);
        assert_eq!(t.cost, Decimal::from_str("0.30").unwrap());
        assert_eq!(t.wall_time_secs, 3.0);
        assert_eq!(t.attempts, 2);
    }

    #[test]
    fn failed_rows_are_kept() {
        let rows = vec![row(PhaseId::LiteratureReview, "0.01", false)];
        assert!(render_table(&rows).contains("literature_review"));
        assert!(render_table(&rows).contains(" no"));
    }

    #[test]
    fn success_rate_per_phase() {
        let runs = vec![
            vec![row(PhaseId::LiteratureReview, "0", true)],
            vec![row(PhaseId::LiteratureReview, "0", false)],
            vec![row(PhaseId::LiteratureReview, "0", false), row(PhaseId::LiteratureReview, "0", true)],
            vec![row(PhaseId::LiteratureReview, "0", false)],
        ];
        let rates = success_rates(&runs);
        assert_eq!(rates[&PhaseId::LiteratureReview], 0.5);
        assert!(!rates.contains_key(&PhaseId::PlanFormulation));
    }

    #[test]
    fn cost_serializes_as_string() {
        let json = serde_json::to_string(&row(PhaseId::ReportWriting, "0.000123", true)).unwrap();
        assert!(json.contains("\"cost\":\"0.000123\""));
    }
}
