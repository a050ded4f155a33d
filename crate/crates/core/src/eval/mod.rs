//! Ratings of generator responses, descriptive tables, and exact sign tests
//! between context levels.

mod report;
mod stats;

use std::collections::BTreeMap;
use std::io::Read;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use report::{emit_report, evaluate, Analysis, Evaluation, MetricTable, Report, ANALYSES};
pub use stats::{binom_two_sided, exact_ci, Sign, SignTestResult};

const EMBEDDED: &str = include_str!("../../assets/data/ratings.csv");

pub const MAX_RATING: u8 = 5;
pub const CYCLES: std::ops::RangeInclusive<u8> = 1..=5;
pub const TESTS: std::ops::RangeInclusive<u8> = 1..=8;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum EvalError {
    #[error("line {line}: {message}")]
    Malformed { line: u64, message: String },
    #[error("line {line}: {field} = {value} is outside {min}..={max}")]
    OutOfBounds {
        line: u64,
        field: &'static str,
        value: i64,
        min: i64,
        max: i64,
    },
    #[error("line {line}: duplicate rating for {model} cycle {cycle} test {test}")]
    Duplicate {
        line: u64,
        model: String,
        cycle: u8,
        test: u8,
    },
    #[error("{model} cycle {cycle} has no rating for test {test}")]
    MissingPair { model: String, cycle: u8, test: u8 },
    #[error("k = {k}, n = {n} is not a valid binomial outcome")]
    InvalidBounds { k: u64, n: u64 },
    #[error("confidence level {0} is not inside (0, 1)")]
    InvalidLevel(f64),
}

impl EvalError {
    pub fn code(&self) -> &'static str {
        match self {
            EvalError::Malformed { .. } => "malformed-row",
            EvalError::OutOfBounds { .. } => "scale-bound",
            EvalError::Duplicate { .. } => "duplicate-rating",
            EvalError::MissingPair { .. } => "missing-pair",
            EvalError::InvalidBounds { .. } => "invalid-bounds",
            EvalError::InvalidLevel(_) => "invalid-level",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RatingRecord {
    pub model: String,
    pub cycle: u8,
    pub test: u8,
    pub accuracy: u8,
    pub coherence: u8,
    pub relevance: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Metric {
    Accuracy,
    Coherence,
    Relevance,
}

impl Metric {
    pub fn of(self, r: &RatingRecord) -> u8 {
        match self {
            Metric::Accuracy => r.accuracy,
            Metric::Coherence => r.coherence,
            Metric::Relevance => r.relevance,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Metric::Accuracy => "accuracy",
            Metric::Coherence => "coherence",
            Metric::Relevance => "relevance",
        }
    }
}

#[derive(Deserialize)]
struct Row {
    model: String,
    cycle: i64,
    test: i64,
    accuracy: i64,
    coherence: i64,
    relevance: i64,
}

fn bounded(line: u64, field: &'static str, value: i64, min: i64, max: i64) -> Result<u8, EvalError> {
    if value < min || value > max {
        return Err(EvalError::OutOfBounds {
            line,
            field,
            value,
            min,
            max,
        });
    }
    Ok(value as u8)
}

/// Reads ratings CSV with header `model,cycle,test,accuracy,coherence,relevance`.
/// Errors carry the 1-based line number of the offending row.
pub fn load_ratings(source: impl Read) -> Result<Vec<RatingRecord>, EvalError> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(source);
    let mut out: Vec<RatingRecord> = Vec::new();
    let mut seen = std::collections::BTreeSet::new();
    for row in reader.deserialize::<Row>() {
        let row = row.map_err(|e| EvalError::Malformed {
            line: e.position().map(|p| p.line()).unwrap_or(0),
            message: match e.kind() {
                csv::ErrorKind::Deserialize { err, .. } => err.to_string(),
                _ => e.to_string(),
            },
        })?;
        let line = out.len() as u64 + 2;
        if row.model.is_empty() {
            return Err(EvalError::Malformed {
                line,
                message: "model label is empty".into(),
            });
        }
        let max = i64::from(MAX_RATING);
        let record = RatingRecord {
            cycle: bounded(line, "cycle", row.cycle, 1, 5)?,
            test: bounded(line, "test", row.test, 1, 8)?,
            accuracy: bounded(line, "accuracy", row.accuracy, 0, max)?,
            coherence: bounded(line, "coherence", row.coherence, 0, max)?,
            relevance: bounded(line, "relevance", row.relevance, 0, max)?,
            model: row.model,
        };
        if !seen.insert((record.model.clone(), record.cycle, record.test)) {
            return Err(EvalError::Duplicate {
                line,
                model: record.model,
                cycle: record.cycle,
                test: record.test,
            });
        }
        out.push(record);
    }
    Ok(out)
}

pub fn load_ratings_str(csv: &str) -> Result<Vec<RatingRecord>, EvalError> {
    load_ratings(csv.as_bytes())
}

/// The shipped reference dataset: three generators, five cycles, eight tests.
pub fn embedded_ratings() -> Vec<RatingRecord> {
    let records = load_ratings_str(EMBEDDED).expect("embedded ratings parse");
    assert_eq!(records.len(), 120, "embedded dataset has 120 ratings");
    assert!(
        records.iter().all(|r| r.relevance == MAX_RATING),
        "every embedded rating has full relevance"
    );
    records
}

pub fn embedded_ratings_csv() -> &'static str {
    EMBEDDED
}

fn mean(values: impl Iterator<Item = u8>) -> Option<f64> {
    let (sum, n) = values.fold((0u64, 0u64), |(s, n), v| (s + u64::from(v), n + 1));
    (n > 0).then(|| sum as f64 / n as f64)
}

/// Mean rating per test over every model and cycle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct TestAverages {
    pub metric: Metric,
    pub means: BTreeMap<u8, f64>,
    /// Mean of the last test minus mean of the first, when both exist.
    pub change: Option<f64>,
}

pub fn average_by_test(records: &[RatingRecord], metric: Metric) -> TestAverages {
    let mut groups: BTreeMap<u8, Vec<u8>> = BTreeMap::new();
    for r in records {
        groups.entry(r.test).or_default().push(metric.of(r));
    }
    let means: BTreeMap<u8, f64> = groups
        .into_iter()
        .filter_map(|(t, v)| Some((t, mean(v.into_iter())?)))
        .collect();
    let change = match (means.get(TESTS.start()), means.get(TESTS.end())) {
        (Some(first), Some(last)) => Some(last - first),
        _ => None,
    };
    TestAverages {
        metric,
        means,
        change,
    }
}

/// Mean rating per generator over all cycles and tests.
pub fn average_by_model(records: &[RatingRecord], metric: Metric) -> BTreeMap<String, f64> {
    let mut groups: BTreeMap<&str, Vec<u8>> = BTreeMap::new();
    for r in records {
        groups.entry(&r.model).or_default().push(metric.of(r));
    }
    groups
        .into_iter()
        .filter_map(|(m, v)| Some((m.to_owned(), mean(v.into_iter())?)))
        .collect()
}

/// Per-model mean for every test, for plotting.
pub fn series_by_model(records: &[RatingRecord], metric: Metric) -> BTreeMap<String, Vec<(u8, f64)>> {
    let mut groups: BTreeMap<&str, BTreeMap<u8, Vec<u8>>> = BTreeMap::new();
    for r in records {
        groups
            .entry(&r.model)
            .or_default()
            .entry(r.test)
            .or_default()
            .push(metric.of(r));
    }
    groups
        .into_iter()
        .map(|(m, tests)| {
            let points = tests
                .into_iter()
                .filter_map(|(t, v)| Some((t, mean(v.into_iter())?)))
                .collect();
            (m.to_owned(), points)
        })
        .collect()
}

/// Signs of the change from `from` to `to` for every model and cycle.
pub fn paired_signs(
    records: &[RatingRecord],
    metric: Metric,
    from: u8,
    to: u8,
) -> Result<BTreeMap<(String, u8), Sign>, EvalError> {
    let mut cells: BTreeMap<(String, u8), BTreeMap<u8, u8>> = BTreeMap::new();
    for r in records {
        cells
            .entry((r.model.clone(), r.cycle))
            .or_default()
            .insert(r.test, metric.of(r));
    }
    cells
        .into_iter()
        .map(|((model, cycle), tests)| {
            let get = |test: u8| {
                tests.get(&test).copied().ok_or_else(|| EvalError::MissingPair {
                    model: model.clone(),
                    cycle,
                    test,
                })
            };
            let sign = Sign::of(get(from)?, get(to)?);
            Ok(((model, cycle), sign))
        })
        .collect()
}

/// Sign test of `to` against `from`, pairing ratings by model and cycle.
pub fn sign_test(
    records: &[RatingRecord],
    metric: Metric,
    from: u8,
    to: u8,
) -> Result<SignTestResult, EvalError> {
    Ok(SignTestResult::from_signs(
        paired_signs(records, metric, from, to)?.into_values(),
    ))
}
