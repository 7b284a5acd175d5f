//! Exact-match accuracy and length statistics.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::graph::graphs_isomorphic;
use crate::lf::{lf_to_actions, lf_to_graph, linearize, parse_lf, print_lf, LfError, LogicalForm};
use crate::schema::KbSchema;

/// Equal canonical prints, or isomorphic graphs. Forms that cannot be
/// turned into graphs only match by print.
pub fn exact_match(predicted: &LogicalForm, gold: &LogicalForm, schema: &KbSchema) -> bool {
    if print_lf(predicted) == print_lf(gold) {
        return true;
    }
    match (lf_to_graph(predicted, schema), lf_to_graph(gold, schema)) {
        (Ok(p), Ok(g)) => graphs_isomorphic(&p, &g),
        _ => false,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LengthStats {
    pub examples: usize,
    pub mean_lf_tokens: f64,
    pub mean_actions: f64,
}

impl LengthStats {
    /// Relative shortening of action sequences against logical forms.
    pub fn reduction(&self) -> f64 {
        if self.mean_lf_tokens == 0.0 {
            return 0.0;
        }
        1.0 - self.mean_actions / self.mean_lf_tokens
    }
}

pub fn length_stats(corpus: &[LogicalForm], schema: &KbSchema) -> Result<LengthStats, LfError> {
    let (mut lf, mut act) = (0usize, 0usize);
    for l in corpus {
        lf += linearize(l).len();
        act += lf_to_actions(l, schema)?.len();
    }
    let n = corpus.len().max(1) as f64;
    Ok(LengthStats {
        examples: corpus.len(),
        mean_lf_tokens: lf as f64 / n,
        mean_actions: act as f64 / n,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExampleVerdict {
    pub index: usize,
    pub correct: bool,
    pub string_match: bool,
    pub predicted: Option<String>,
    pub gold: String,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub accuracy: f64,
    pub correct: usize,
    pub total: usize,
    /// Share of predictions whose canonical print equals gold's.
    pub string_accuracy: f64,
    /// Length statistics over the gold forms that convert.
    pub lengths: LengthStats,
    pub verdicts: Vec<ExampleVerdict>,
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{:<28}{:>12}", "metric", "value");
        let _ = writeln!(s, "{:<28}{:>12.4}", "exact match", self.accuracy);
        let _ = writeln!(s, "{:<28}{:>12.4}", "string match", self.string_accuracy);
        let _ = writeln!(s, "{:<28}{:>12}", "correct", self.correct);
        let _ = writeln!(s, "{:<28}{:>12}", "total", self.total);
        let _ = writeln!(
            s,
            "{:<28}{:>12.2}",
            "mean lf tokens", self.lengths.mean_lf_tokens
        );
        let _ = writeln!(
            s,
            "{:<28}{:>12.2}",
            "mean actions", self.lengths.mean_actions
        );
        let _ = writeln!(
            s,
            "{:<28}{:>11.1}%",
            "length reduction",
            100.0 * self.lengths.reduction()
        );
        s
    }
}

fn judge(
    index: usize,
    predicted: Option<&str>,
    gold: &str,
    schema: &KbSchema,
) -> (ExampleVerdict, Option<LogicalForm>) {
    let mut v = ExampleVerdict {
        index,
        correct: false,
        string_match: false,
        predicted: predicted.map(str::to_string),
        gold: gold.to_string(),
        error: None,
    };
    let g = match parse_lf(gold, schema) {
        Ok(g) => g,
        Err(e) => {
            v.error = Some(format!("gold: {e}"));
            return (v, None);
        }
    };
    match predicted.map(|p| parse_lf(p, schema)) {
        None => v.error = Some("no prediction".into()),
        Some(Err(e)) => v.error = Some(format!("prediction: {e}")),
        Some(Ok(p)) => {
            v.string_match = print_lf(&p) == print_lf(&g);
            v.correct = v.string_match || exact_match(&p, &g, schema);
        }
    }
    (v, Some(g))
}

/// Scores aligned predictions against gold texts. A missing prediction
/// counts as wrong.
pub fn evaluate(predictions: &[Option<String>], gold: &[String], schema: &KbSchema) -> EvalReport {
    let pairs: Vec<(usize, Option<&str>, &str)> = gold
        .iter()
        .enumerate()
        .map(|(i, g)| (i, predictions.get(i).and_then(|p| p.as_deref()), g.as_str()))
        .collect();
    let judged = crate::par::map(&pairs, |&(i, p, g)| judge(i, p, g, schema));
    let golds: Vec<LogicalForm> = judged
        .iter()
        .filter_map(|(_, g)| g.clone())
        .filter(|g| lf_to_actions(g, schema).is_ok())
        .collect();
    let lengths = length_stats(&golds, schema).expect("filtered to convertible forms");
    let verdicts: Vec<ExampleVerdict> = judged.into_iter().map(|(v, _)| v).collect();
    let total = verdicts.len();
    let correct = verdicts.iter().filter(|v| v.correct).count();
    let strings = verdicts.iter().filter(|v| v.string_match).count();
    let frac = |k: usize| {
        if total == 0 {
            0.0
        } else {
            k as f64 / total as f64
        }
    };
    EvalReport {
        accuracy: frac(correct),
        correct,
        total,
        string_accuracy: frac(strings),
        lengths,
        verdicts,
    }
}
