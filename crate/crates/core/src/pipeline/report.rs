use std::fmt::Write as _;
use std::time::Duration;

use crate::kg::EntityId;

/// One of the top-N candidates as the pipeline saw it.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateTrace {
    pub entity: EntityId,
    pub label: String,
    pub filter_score: f64,
    /// Relation labels joined by `>`; `None` when unreachable.
    pub chain: Option<String>,
    pub similarity: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub question: String,
    pub topic: String,
    pub candidates: Vec<CandidateTrace>,
    pub answer: EntityId,
    pub answer_label: String,
    /// True when no candidate had a chain and the filter decided.
    pub fell_back: bool,
    /// Filled in by evaluation.
    pub gold: Vec<String>,
}

impl Trace {
    pub fn correct(&self) -> bool {
        self.gold.contains(&self.answer_label)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EvaluationReport {
    pub hit_at_1: f64,
    pub hit_at_5: f64,
    pub hit_at_10: f64,
    pub filter_hit_at_1: f64,
    pub filter_hit_at_5: f64,
    pub filter_hit_at_10: f64,
    /// Filter hit@N for the configured N: the ceiling of `hit_at_1`.
    pub filter_hit_at_n: f64,
    pub top_n: usize,
    pub evaluated: usize,
    /// Examples whose topic or answers are not KG entities.
    pub skipped: usize,
    /// Top-N candidates with no chain from the topic.
    pub unreachable: usize,
    /// Questions answered by the filter because no candidate was reachable.
    pub fallbacks: usize,
    pub traces: Vec<Trace>,
    pub elapsed: Duration,
}

impl EvaluationReport {
    pub fn tsv_header() -> &'static str {
        "setting\ttop_n\thit@1\thit@5\thit@10\tfilter_hit@1\tfilter_hit@5\tfilter_hit@10\tfilter_hit@N\tevaluated\tskipped\tunreachable\tfallbacks\tseconds"
    }

    pub fn tsv_row(&self, setting: &str) -> String {
        format!(
            "{setting}\t{}\t{:.4}\t{:.4}\t{:.4}\t{:.4}\t{:.4}\t{:.4}\t{:.4}\t{}\t{}\t{}\t{}\t{:.1}",
            self.top_n,
            self.hit_at_1,
            self.hit_at_5,
            self.hit_at_10,
            self.filter_hit_at_1,
            self.filter_hit_at_5,
            self.filter_hit_at_10,
            self.filter_hit_at_n,
            self.evaluated,
            self.skipped,
            self.unreachable,
            self.fallbacks,
            self.elapsed.as_secs_f64()
        )
    }

    /// Summary lines followed by one block per question.
    pub fn to_text(&self, setting: &str) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{}", Self::tsv_header());
        let _ = writeln!(s, "{}", self.tsv_row(setting));
        for t in &self.traces {
            let _ = writeln!(s);
            let _ = writeln!(s, "question\t{}", t.question);
            let _ = writeln!(s, "topic\t{}", t.topic);
            let _ = writeln!(s, "gold\t{}", t.gold.join("|"));
            let mark = if t.correct() { "correct" } else { "wrong" };
            let via = if t.fell_back { "filter" } else { "reasoner" };
            let _ = writeln!(s, "answer\t{}\t{mark}\t{via}", t.answer_label);
            for c in &t.candidates {
                let _ = writeln!(
                    s,
                    "candidate\t{}\t{:.6}\t{}\t{}",
                    c.label,
                    c.filter_score,
                    c.chain.as_deref().unwrap_or("-"),
                    c.similarity.map_or("-".to_string(), |v| format!("{v:.6}")),
                );
            }
        }
        s
    }
}

/// One row of a top-N comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub top_n: usize,
    pub report: EvaluationReport,
}

pub fn sweep_table(rows: &[SweepRow]) -> String {
    let mut s = String::from("top_n\thit@1\tfilter_hit@N\tfilter_hit@1\twithin_filter_bound\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{}\t{:.4}\t{:.4}\t{:.4}\t{}",
            r.top_n,
            r.report.hit_at_1,
            r.report.filter_hit_at_n,
            r.report.filter_hit_at_1,
            r.report.hit_at_1 <= r.report.filter_hit_at_n
        );
    }
    s
}
