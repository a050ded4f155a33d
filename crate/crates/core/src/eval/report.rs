//! The evaluation report: per-test tables, per-model means and the three
//! paired comparisons, as text and as JSON.

use std::collections::BTreeMap;
use std::fmt::Write;

use serde::{Deserialize, Serialize};

use super::{
    average_by_model, average_by_test, series_by_model, sign_test, EvalError, Metric,
    RatingRecord, SignTestResult, TestAverages, TESTS,
};

/// (from-test, to-test) of each reported comparison.
pub const ANALYSES: [(u8, u8); 3] = [(1, 8), (1, 6), (6, 8)];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct MetricTable {
    pub by_test: TestAverages,
    pub by_model: BTreeMap<String, f64>,
    /// Per-model (test, mean) points, e.g. for a bar chart.
    pub series: BTreeMap<String, Vec<(u8, f64)>>,
    /// Per-model mean of the last test minus mean of the first.
    pub change_by_model: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct Analysis {
    pub number: usize,
    pub from: u8,
    pub to: u8,
    pub accuracy: SignTestResult,
    pub coherence: SignTestResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct Evaluation {
    pub records: usize,
    pub models: Vec<String>,
    pub accuracy: MetricTable,
    pub coherence: MetricTable,
    pub relevance: MetricTable,
    pub analyses: Vec<Analysis>,
}

fn table(records: &[RatingRecord], metric: Metric) -> MetricTable {
    let series = series_by_model(records, metric);
    let change_by_model = series
        .iter()
        .filter_map(|(model, points)| {
            let at = |t: u8| points.iter().find(|(test, _)| *test == t).map(|(_, m)| *m);
            Some((model.clone(), at(*TESTS.end())? - at(*TESTS.start())?))
        })
        .collect();
    MetricTable {
        by_test: average_by_test(records, metric),
        by_model: average_by_model(records, metric),
        series,
        change_by_model,
    }
}

/// Computes every table and each comparison whose two tests occur in the data.
pub fn evaluate(records: &[RatingRecord]) -> Result<Evaluation, EvalError> {
    let mut models: Vec<String> = records.iter().map(|r| r.model.clone()).collect();
    models.sort();
    models.dedup();
    let has = |t: u8| records.iter().any(|r| r.test == t);
    let mut analyses = Vec::new();
    for (i, (from, to)) in ANALYSES.into_iter().enumerate() {
        if !(has(from) && has(to)) {
            continue;
        }
        analyses.push(Analysis {
            number: i + 1,
            from,
            to,
            accuracy: sign_test(records, Metric::Accuracy, from, to)?,
            coherence: sign_test(records, Metric::Coherence, from, to)?,
        });
    }
    Ok(Evaluation {
        records: records.len(),
        models,
        accuracy: table(records, Metric::Accuracy),
        coherence: table(records, Metric::Coherence),
        relevance: table(records, Metric::Relevance),
        analyses,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub text: String,
    pub json: serde_json::Value,
}

/// `6.10e-05`: two decimals, two-digit signed exponent.
pub fn format_sci(x: f64) -> String {
    let raw = format!("{x:.2e}");
    let (mantissa, exp) = raw.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    let sign = if exp < 0 { '-' } else { '+' };
    format!("{mantissa}e{sign}{:02}", exp.abs())
}

/// Two decimals, halves rounded away from zero (4.625 prints as 4.63).
fn fixed2(x: f64) -> String {
    format!("{:.2}", (x * 100.0).round() / 100.0)
}

fn signed(x: f64) -> String {
    let s = fixed2(x);
    if s.starts_with('-') {
        s
    } else {
        format!("+{s}")
    }
}

const LABEL: usize = 27;

fn write_table(out: &mut String, name: &str, t: &MetricTable) {
    if t.by_test.means.is_empty() {
        let _ = writeln!(out, "Average {name} by test: no data");
        return;
    }
    let _ = writeln!(out, "Average {name} by test");
    let mut header = format!("{:<LABEL$}", "test");
    for test in t.by_test.means.keys() {
        let _ = write!(header, "{test:>6}");
    }
    if t.by_test.change.is_some() {
        let _ = write!(header, "{:>8}", "change");
    }
    let _ = writeln!(out, "{}", header.trim_end());
    let mut all = format!("{:<LABEL$}", "all");
    for m in t.by_test.means.values() {
        let _ = write!(all, "{:>6}", fixed2(*m));
    }
    if let Some(c) = t.by_test.change {
        let _ = write!(all, "{:>8}", signed(c));
    }
    let _ = writeln!(out, "{all}");
    for (model, points) in &t.series {
        let mut row = format!("{model:<LABEL$}");
        for (_, m) in points {
            let _ = write!(row, "{:>6}", fixed2(*m));
        }
        if let Some(c) = t.change_by_model.get(model) {
            let _ = write!(row, "{:>8}", signed(*c));
        }
        let _ = writeln!(out, "{row}");
    }
    let means: Vec<String> = t
        .by_model
        .iter()
        .map(|(m, v)| format!("{m} {}", fixed2(*v)))
        .collect();
    let _ = writeln!(out, "Overall {name} by model: {}", means.join(", "));
}

fn write_result(out: &mut String, metric: &str, r: &SignTestResult) {
    let pct = r
        .proportion()
        .map(|p| format!(" ({:.1}%)", p * 100.0))
        .unwrap_or_default();
    let _ = writeln!(
        out,
        "  {metric:<10} improvements {}/{}{pct}, declines {}, ties {}; p (two-sided) = {} [{:.4}]; 95% CI [{:.3}, {:.3}]{}",
        r.improvements,
        r.n_effective,
        r.declines,
        r.ties,
        format_sci(r.p_two_sided),
        r.p_two_sided,
        r.ci.0,
        r.ci.1,
        if r.degenerate { " (all tied)" } else { "" },
    );
}

/// Renders an evaluation. Output is a pure function of the evaluation.
pub fn emit_report(evaluation: &Evaluation) -> Report {
    let mut text = String::new();
    let _ = writeln!(
        text,
        "Ratings: {} records from {} model(s)\n",
        evaluation.records,
        evaluation.models.len()
    );
    write_table(&mut text, "accuracy", &evaluation.accuracy);
    text.push('\n');
    write_table(&mut text, "coherence", &evaluation.coherence);
    text.push('\n');
    write_table(&mut text, "relevance", &evaluation.relevance);
    for a in &evaluation.analyses {
        let _ = writeln!(text, "\nAnalysis {}: test {} -> test {}", a.number, a.from, a.to);
        write_result(&mut text, "accuracy", &a.accuracy);
        write_result(&mut text, "coherence", &a.coherence);
    }
    if evaluation.analyses.is_empty() {
        let _ = writeln!(text, "\nNo paired comparisons: tests missing from the data");
    }
    let mut bars = String::from("\nBar values (mean accuracy per test):");
    for (test, m) in &evaluation.accuracy.by_test.means {
        let _ = write!(bars, " {test}={}", fixed2(*m));
    }
    let _ = writeln!(text, "{bars}");
    Report {
        text,
        json: serde_json::to_value(evaluation).expect("evaluation serializes"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scientific_format() {
        assert_eq!(format_sci(6.103515625e-5), "6.10e-05");
        assert_eq!(format_sci(1.0), "1.00e+00");
        assert_eq!(format_sci(0.625), "6.25e-01");
    }

    #[test]
    fn empty_input_gives_empty_sections() {
        let e = evaluate(&[]).unwrap();
        assert!(e.analyses.is_empty());
        let r = emit_report(&e);
        assert!(r.text.contains("no data"));
    }
}
