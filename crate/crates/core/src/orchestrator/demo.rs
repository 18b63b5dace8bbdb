//! A complete offline run: the scripted model responses for every phase
//! plus the arXiv and dataset-hub fixtures they rely on.
//!
//! Every entry carries an `expect` needle taken from the prompt it answers,
//! so a change in call order fails loudly instead of feeding a response to
//! the wrong agent.

use std::path::Path;
use std::time::Duration;

use crate::gateway::mock::ScriptEntry;
use crate::paper::doc::{PaperDoc, SectionId};
use crate::paper::solver::{CITING_SECTIONS, SECTION_SEARCH_RESULTS};
use crate::phase::PhaseId;
use crate::tools::arxiv::ArxivClient;
use crate::tools::hub::HubClient;
use crate::tools::transport::FixtureTransport;

pub const TOPIC: &str = "Does a nearest-centroid classifier match logistic regression on small synthetic tabular data?";

const LIT_QUERY: &str = "nearest centroid classifier small data";
const HUB_QUERY: &str = "synthetic tabular classification";
const EXAMPLE_REVIEW: &str = include_str!("../../fixtures/example_review.json");

const DATASET_CODE: &str = "import random
rng = random.Random(0)
def sample(n):
    rows = []
    for _ in range(n):
        y = rng.randint(0, 1)
        x = [rng.gauss(1.0 if y else -1.0, 1.2), rng.gauss(0.5 if y else -0.5, 1.0)]
        rows.append((x, y))
    return rows
train = sample(200)
test = sample(100)
print('train', len(train), 'test', len(test))";

/// Experiment programs of increasing quality, one per candidate.
const PROGRAMS: [&str; 6] = [
    "pred = [1 if x[0] > 0 else 0 for x, _ in test]\nacc = sum(p == y for p, (_, y) in zip(pred, test)) / len(test)\nprint('threshold accuracy', round(acc, 3))",
    "def mean(v):\n    return sum(v) / len(v)\nc = {k: [mean([x[i] for x, y in train if y == k]) for i in range(2)] for k in (0, 1)}\ndef d(x, m):\n    return sum((a - b) ** 2 for a, b in zip(x, m))\npred = [min((0, 1), key=lambda k: d(x, c[k])) for x, _ in test]\nacc = sum(p == y for p, (_, y) in zip(pred, test)) / len(test)\nprint('centroid accuracy', round(acc, 3))",
    "import math\nw = [0.0, 0.0, 0.0]\nfor _ in range(50):\n    for x, y in train:\n        z = w[0] + w[1] * x[0] + w[2] * x[1]\n        p = 1 / (1 + math.exp(-z))\n        g = y - p\n        w = [w[0] + 0.05 * g, w[1] + 0.05 * g * x[0], w[2] + 0.05 * g * x[1]]\npred = [1 if w[0] + w[1] * x[0] + w[2] * x[1] > 0 else 0 for x, _ in test]\nacc = sum(p == y for p, (_, y) in zip(pred, test)) / len(test)\nprint('logistic accuracy', round(acc, 3))",
    "pred = [1 if x[0] + x[1] > 0 else 0 for x, _ in test]\nacc = sum(p == y for p, (_, y) in zip(pred, test)) / len(test)\nprint('sum-threshold accuracy', round(acc, 3))",
    "def mean(v):\n    return sum(v) / len(v)\nc = {k: [mean([x[i] for x, y in train if y == k]) for i in range(2)] for k in (0, 1)}\ns = [mean([(x[i] - c[y][i]) ** 2 for x, y in train]) ** 0.5 for i in range(2)]\ndef d(x, m):\n    return sum(((a - b) / v) ** 2 for a, b, v in zip(x, m, s))\npred = [min((0, 1), key=lambda k: d(x, c[k])) for x, _ in test]\nacc = sum(p == y for p, (_, y) in zip(pred, test)) / len(test)\nprint('scaled centroid accuracy', round(acc, 3))",
    "import math\nw = [0.0, 0.0, 0.0]\nfor epoch in range(100):\n    lr = 0.1 / (1 + epoch)\n    for x, y in train:\n        z = w[0] + w[1] * x[0] + w[2] * x[1]\n        g = y - 1 / (1 + math.exp(-z))\n        w = [w[0] + lr * g, w[1] + lr * g * x[0], w[2] + lr * g * x[1]]\npred = [1 if w[0] + w[1] * x[0] + w[2] * x[1] > 0 else 0 for x, _ in test]\nacc = sum(p == y for p, (_, y) in zip(pred, test)) / len(test)\nprint('decayed logistic accuracy', round(acc, 3))",
];
const PROGRAM_SCORES: [&str; 6] = ["0.55", "0.7", "0.8", "0.6", "0.75", "0.85"];

/// Review scores of the drafted report and of each committed edit.
const DRAFT_SCORE: u8 = 6;
const EDITS: [(&str, Option<u8>); 5] = [
    ("Both classifiers reach similar accuracy, so the simpler centroid rule is a reasonable default.", Some(7)),
    ("{unbalanced", None),
    ("The gap is small.", Some(5)),
    ("Both classifiers reach similar accuracy; the scaled centroid rule closes most of the gap to logistic regression at a fraction of the cost.", Some(8)),
    ("Accuracy is similar across methods.", Some(6)),
];

/// A scripted run: model responses in call order plus recorded HTTP
/// responses keyed by URL.
#[derive(Debug, Clone, Default)]
pub struct MockBundle {
    pub script: Vec<ScriptEntry>,
    pub fixtures: Vec<(String, String)>,
}

fn fence(kw: &str, body: &str, expect: &str) -> ScriptEntry {
    ScriptEntry::expecting(format!("```{kw}\n{body}\n```"), expect)
}

fn phase_needle(phase: PhaseId) -> String {
    format!("Phase: {}", phase.name())
}

fn review(overall: u8) -> ScriptEntry {
    let mut v: serde_json::Value = serde_json::from_str(EXAMPLE_REVIEW).expect("bundled review parses");
    v["Overall"] = overall.into();
    ScriptEntry::expecting(
        format!("THOUGHT:\nThe study is small but sound.\n\nREVIEW JSON:\n```json\n{v}\n```"),
        "research plan that the machine learning engineer was tasked with",
    )
}

fn feed(ids: &[(String, String)]) -> String {
    let mut s = String::from(r#"<feed xmlns="http://www.w3.org/2005/Atom">"#);
    for (id, title) in ids {
        s.push_str(&format!(
            "<entry><id>http://arxiv.org/abs/{id}</id><title>{title}</title><summary>An empirical study of {title}.</summary><published>2024-01-15T00:00:00Z</published></entry>"
        ));
    }
    s.push_str("</feed>");
    s
}

fn paper_ids() -> Vec<(String, String)> {
    let titles = ["centroid classifiers", "linear models on small data", "synthetic benchmarks", "shrunken centroids", "calibration of simple classifiers"];
    titles.iter().enumerate().map(|(i, t)| (format!("2401.0{:04}v1", 1001 + i), t.to_string())).collect()
}

fn search_query(section: SectionId) -> String {
    format!("{} for nearest centroid classification", section.title().to_lowercase())
}

/// The report after drafting, as the paper solver builds it from the
/// scripted scaffold and section bodies.
fn drafted_report() -> (String, Vec<(SectionId, String)>) {
    let mut scaffold = String::from(
        "\\documentclass{article}\n\\usepackage{amsmath}\n\\title{Research Report: Nearest Centroids on Small Tabular Data}\n\\author{Agent Laboratory}\n\\begin{document}\n\\maketitle\n\\begin{abstract}\n(ABSTRACT HERE)\n\\end{abstract}\n",
    );
    for sec in &SectionId::ALL[1..] {
        scaffold.push_str(&format!("\\section{{{}}}\n{}\n", sec.title(), sec.placeholder()));
    }
    scaffold.push_str("\\end{document}");
    let ids = paper_ids();
    let bodies = SectionId::ALL
        .iter()
        .map(|&sec| {
            let body = match sec {
                SectionId::Abstract => "We compare a nearest-centroid rule with logistic regression on a synthetic two-class problem and find comparable accuracy.".to_string(),
                SectionId::Introduction => format!("Simple classifiers remain strong baselines on small data (arXiv {}).", ids[0].0),
                SectionId::Background => format!("A nearest-centroid rule assigns each point to the class with the closest mean (arXiv {}).", ids[3].0),
                SectionId::RelatedWork => format!("Linear models are a common reference point (arXiv {}).", ids[1].0),
                SectionId::Methods => "We train a centroid rule, a feature-scaled centroid rule and logistic regression fitted by stochastic gradient descent.".to_string(),
                SectionId::ExperimentalSetup => "The data has 200 training and 100 test points with two Gaussian features; accuracy is the metric.".to_string(),
                SectionId::Results => "Logistic regression reached the highest accuracy, closely followed by the scaled centroid rule.".to_string(),
                SectionId::Discussion => "The methods differ little on this problem.".to_string(),
            };
            (sec, body)
        })
        .collect();
    (scaffold, bodies)
}

impl MockBundle {
    /// Script for a co-pilot or autonomous run that finalizes after one
    /// round.
    pub fn happy() -> Self {
        let mut b = Self::default();
        for phase in &PhaseId::ALL[..6] {
            b.phase(*phase);
        }
        b.refinement(Some(None));
        b
    }

    /// Appends the entries of one phase. Refinement finalizes.
    pub fn phase(&mut self, phase: PhaseId) {
        let needle = phase_needle(phase);
        let n = needle.as_str();
        match phase {
            PhaseId::LiteratureReview => {
                self.script.push(fence("SUMMARY", LIT_QUERY, n));
                for (id, title) in paper_ids() {
                    self.script.push(fence("ADD_PAPER", &format!("{id}\nA study of {title}, relevant as a baseline."), n));
                }
                let arxiv = arxiv_client();
                self.fixtures.push((arxiv.search_url(LIT_QUERY, 20), feed(&paper_ids())));
            }
            PhaseId::PlanFormulation => {
                self.script.push(fence("DIALOGUE", "Which baselines should we compare against?", n));
                self.script.push(fence("DIALOGUE", "A nearest-centroid rule, a scaled variant and logistic regression.", n));
                self.script.push(fence(
                    "PLAN",
                    "Generate a synthetic two-class dataset with two Gaussian features. Compare a threshold rule, nearest centroids, scaled nearest centroids and logistic regression by test accuracy.",
                    n,
                ));
            }
            PhaseId::DataPreparation => {
                self.script.push(fence("DIALOGUE", "Is there a hub dataset we could start from?", n));
                self.script.push(fence("SEARCH_HF", HUB_QUERY, n));
                self.script.push(fence("DIALOGUE", "A synthetic set keeps the study controlled; please generate one.", n));
                self.script.push(fence("python", DATASET_CODE, n));
                self.script.push(fence("SUBMIT_CODE", DATASET_CODE, n));
                let hub = HubClient::new(Box::new(FixtureTransport::new("")));
                self.fixtures.push((
                    hub.search_url(HUB_QUERY),
                    r#"[{"id":"demo/synthetic-tabular","description":"Two-class synthetic tabular data","downloads":12,"likes":1}]"#.to_string(),
                ));
            }
            PhaseId::RunningExperiments => {
                for step in 0..3 {
                    for c in 0..2 {
                        let i = step * 2 + c;
                        self.script.push(fence("REPLACE", PROGRAMS[i], "REWRITE CODE EDITING TOOL"));
                        self.script.push(fence("SCORE", PROGRAM_SCORES[i], "expert reward model"));
                    }
                    self.script.push(ScriptEntry::expecting(
                        "The best program so far separates the classes well; scaling the features or a tuned learning rate may help further.",
                        "eflect",
                    ));
                }
            }
            PhaseId::ResultsInterpretation => {
                self.script.push(fence("DIALOGUE", "What do the accuracies tell us?", n));
                self.script.push(fence("DIALOGUE", "Logistic regression leads, but the scaled centroid rule is close.", n));
                self.script.push(fence(
                    "INTERPRETATION",
                    "Decayed logistic regression scored best (0.85 by the reward model); the scaled centroid rule came close (0.75), so centroid methods are competitive on this small problem.",
                    n,
                ));
            }
            PhaseId::ReportWriting => self.report_writing(),
            PhaseId::ReportRefinement => self.refinement(Some(None)),
        }
    }

    fn report_writing(&mut self) {
        let (scaffold, bodies) = drafted_report();
        let arxiv = arxiv_client();
        let ids = paper_ids();
        self.script.push(fence("REPLACE", &scaffold, "create the scaffold"));
        let mut doc = PaperDoc::parse(&scaffold).expect("scaffold parses");
        for (sec, body) in &bodies {
            if CITING_SECTIONS.contains(sec) {
                let q = search_query(*sec);
                self.script.push(ScriptEntry::expecting(q.clone(), "research paper finder"));
                self.fixtures.push((arxiv.search_url(&q, SECTION_SEARCH_RESULTS), feed(&ids[..3])));
            }
            self.script.push(fence("REPLACE", body, "related papers you can cite"));
            doc = PaperDoc::parse(&doc.with_section_body(*sec, body).expect("section exists")).expect("section parses");
        }
        self.script.push(review(DRAFT_SCORE));
        let discussion = doc.sections().iter().find(|s| s.0 == SectionId::Discussion).expect("discussion").1.start + 1;
        for (text, score) in EDITS {
            self.script.push(fence(&format!("EDIT {discussion} {discussion}"), text, "Current review score"));
            if let Some(s) = score {
                self.script.push(review(s));
            }
        }
    }

    /// Appends the reviews of a refinement round. `None` means the rewind
    /// budget is spent and no decision is asked; `Some(None)` finalizes and
    /// `Some(Some(p))` asks to revisit `p`.
    pub fn refinement(&mut self, decision: Option<Option<PhaseId>>) {
        for s in [7, 6, 7] {
            self.script.push(review(s));
        }
        let n = phase_needle(PhaseId::ReportRefinement);
        match decision {
            None => {}
            Some(None) => self.script.push(fence("FINALIZE", "The reviewers are broadly positive.", &n)),
            Some(Some(p)) => self.script.push(fence("REVISIT", &format!("{}\nThe reviewers asked for more analysis.", p.name()), &n)),
        }
    }

    /// Writes `script.json` and the fixture files into `dir`.
    pub fn write(&self, dir: &Path) -> std::io::Result<()> {
        std::fs::create_dir_all(dir)?;
        let json = serde_json::to_string_pretty(&self.script).map_err(std::io::Error::other)?;
        std::fs::write(dir.join("script.json"), json + "\n")?;
        let t = FixtureTransport::new(dir);
        for (url, body) in &self.fixtures {
            t.record(url, body)?;
        }
        Ok(())
    }
}

fn arxiv_client() -> ArxivClient {
    ArxivClient::new(Box::new(FixtureTransport::new("")), Duration::ZERO)
}
