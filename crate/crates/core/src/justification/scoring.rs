//! Likelihood/loveliness scoring of competing explanations and evidence
//! assessment. All functions are pure.

use serde::{Deserialize, Serialize};

use super::ScoreError;

fn unit(field: &'static str, value: f64) -> Result<f64, ScoreError> {
    if (0.0..=1.0).contains(&value) {
        Ok(value)
    } else {
        Err(ScoreError::OutOfRange { field, value })
    }
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Explanatory virtues of a candidate explanation, each in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct Loveliness {
    pub explanatory_power: f64,
    pub simplicity: f64,
    pub coherence: f64,
    pub depth: f64,
    pub breadth: f64,
}

impl Loveliness {
    pub fn new(
        explanatory_power: f64,
        simplicity: f64,
        coherence: f64,
        depth: f64,
        breadth: f64,
    ) -> Self {
        Self {
            explanatory_power,
            simplicity,
            coherence,
            depth,
            breadth,
        }
    }

    pub fn uniform(value: f64) -> Self {
        Self::new(value, value, value, value, value)
    }

    fn checked(&self) -> Result<[f64; 5], ScoreError> {
        Ok([
            unit("explanatory-power", self.explanatory_power)?,
            unit("simplicity", self.simplicity)?,
            unit("coherence", self.coherence)?,
            unit("depth", self.depth)?,
            unit("breadth", self.breadth)?,
        ])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct ExplanationScore {
    pub likelihood: f64,
    #[serde(flatten)]
    pub loveliness: Loveliness,
    pub aggregate: f64,
}

/// `aggregate = likelihood * mean(loveliness)`. An implausible explanation
/// scores low however lovely it is.
pub fn score_explanation(
    likelihood: f64,
    loveliness: &Loveliness,
) -> Result<ExplanationScore, ScoreError> {
    let likelihood = unit("likelihood", likelihood)?;
    let virtues = loveliness.checked()?;
    Ok(ExplanationScore {
        likelihood,
        loveliness: *loveliness,
        aggregate: likelihood * mean(&virtues),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct Candidate {
    pub id: String,
    pub claim: String,
    pub score: ExplanationScore,
}

impl Candidate {
    pub fn new(id: impl Into<String>, claim: impl Into<String>, score: ExplanationScore) -> Self {
        Self {
            id: id.into(),
            claim: claim.into(),
            score,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct RankedCandidate {
    pub id: String,
    pub aggregate: f64,
}

/// Outcome of choosing among competing claims, with the alternatives kept.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct Selection {
    pub selected: String,
    /// Every candidate, best first.
    pub ranking: Vec<RankedCandidate>,
    pub rejected: Vec<String>,
}

/// Picks the candidate with the highest aggregate; ties go to the
/// lexicographically smallest id.
pub fn select_best_claim(candidates: &[Candidate]) -> Result<Selection, ScoreError> {
    select_by(candidates, |c| c.score.aggregate)
}

/// As [`select_best_claim`] but ranking by `key`, which lets callers apply a
/// transform to the aggregate.
pub fn select_by(
    candidates: &[Candidate],
    key: impl Fn(&Candidate) -> f64,
) -> Result<Selection, ScoreError> {
    if candidates.is_empty() {
        return Err(ScoreError::NoCandidates);
    }
    let mut ranking: Vec<RankedCandidate> = candidates
        .iter()
        .map(|c| RankedCandidate {
            id: c.id.clone(),
            aggregate: key(c),
        })
        .collect();
    if let Some(bad) = ranking.iter().find(|r| r.aggregate.is_nan()) {
        return Err(ScoreError::OutOfRange {
            field: "aggregate",
            value: bad.aggregate,
        });
    }
    ranking.sort_by(|a, b| {
        b.aggregate
            .total_cmp(&a.aggregate)
            .then_with(|| a.id.cmp(&b.id))
    });
    let selected = ranking[0].id.clone();
    let rejected = ranking[1..].iter().map(|r| r.id.clone()).collect();
    Ok(Selection {
        selected,
        ranking,
        rejected,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct Validity {
    pub face: f64,
    pub criterion: f64,
    pub construct: f64,
    pub content: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct EvidenceProfile {
    pub comprehensiveness: f64,
    pub relevance: f64,
    pub objectivity: f64,
    pub quantity: f64,
    pub consistency: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct EvidenceAssessment {
    pub validity: Validity,
    pub profile: EvidenceProfile,
    pub validity_score: f64,
    pub profile_score: f64,
}

/// Equal-weight means of the four validity and five profile sub-scores.
pub fn assess_evidence(
    validity: Validity,
    profile: EvidenceProfile,
) -> Result<EvidenceAssessment, ScoreError> {
    let v = [
        unit("face", validity.face)?,
        unit("criterion", validity.criterion)?,
        unit("construct", validity.construct)?,
        unit("content", validity.content)?,
    ];
    let p = [
        unit("comprehensiveness", profile.comprehensiveness)?,
        unit("relevance", profile.relevance)?,
        unit("objectivity", profile.objectivity)?,
        unit("quantity", profile.quantity)?,
        unit("consistency", profile.consistency)?,
    ];
    Ok(EvidenceAssessment {
        validity,
        profile,
        validity_score: mean(&v),
        profile_score: mean(&p),
    })
}
