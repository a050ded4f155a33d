//! The human decision gate in front of enactment.

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::record::{Decision, JustificationRecord, RiskTier, Status};
use super::GateError;
use crate::workflow::{AuditAction, AuditLog, GateDecision, Principal, PrincipalId, Role, Subject};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Approve,
    Reject,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VerdictInput {
    pub principal: Principal,
    pub verdict: Verdict,
    pub rationale: String,
    /// Rebuttals the approver accepts as standing without a qualifier.
    pub accepted_rebuttals: Vec<String>,
}

impl VerdictInput {
    pub fn approve(principal: Principal, rationale: impl Into<String>) -> Self {
        Self {
            principal,
            verdict: Verdict::Approve,
            rationale: rationale.into(),
            accepted_rebuttals: Vec::new(),
        }
    }

    pub fn reject(principal: Principal, rationale: impl Into<String>) -> Self {
        Self {
            verdict: Verdict::Reject,
            ..Self::approve(principal, rationale)
        }
    }

    pub fn accepting<I, S>(mut self, rebuttals: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.accepted_rebuttals
            .extend(rebuttals.into_iter().map(Into::into));
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum GateOutcome {
    /// High-risk record awaiting a human verdict; nothing was recorded.
    PendingHuman,
    Decided(JustificationRecord),
}

impl GateOutcome {
    pub fn record(&self) -> Option<&JustificationRecord> {
        match self {
            GateOutcome::PendingHuman => None,
            GateOutcome::Decided(r) => Some(r),
        }
    }

    pub fn enactment_permitted(&self) -> bool {
        self.record().is_some_and(JustificationRecord::enactment_permitted)
    }
}

fn check_complete(record: &JustificationRecord, accepted: &[String]) -> Result<(), GateError> {
    let missing = record.missing_parts();
    if !missing.is_empty() {
        return Err(GateError::Incomplete { missing });
    }
    if let Some(unknown) = accepted
        .iter()
        .find(|a| !record.rebuttals.iter().any(|r| &r.id == *a))
    {
        return Err(GateError::UnknownRebuttal(unknown.clone()));
    }
    let open: Vec<String> = record
        .unanswered_rebuttals()
        .into_iter()
        .filter(|id| !accepted.iter().any(|a| a == id))
        .map(str::to_owned)
        .collect();
    if !open.is_empty() {
        return Err(GateError::UnansweredRebuttals(open));
    }
    Ok(())
}

/// Decides what happens to a proposed record.
///
/// High risk without a verdict stays pending. A verdict must come from an
/// operator with a rationale. Approving, or recording a low-risk record
/// without a verdict, requires all six parts and every rebuttal answered by a
/// qualifier or accepted in the verdict. Every decision appends one audit event.
pub fn gate_decision(
    record: &JustificationRecord,
    verdict: Option<&VerdictInput>,
    log: &mut AuditLog,
    now: DateTime<Utc>,
) -> Result<GateOutcome, GateError> {
    if record.status.is_terminal() {
        return Err(GateError::AlreadyTerminal {
            id: record.id.clone(),
            status: record.status,
        });
    }
    let (outcome, actor, human, rationale, accepted) = match (verdict, record.risk) {
        (None, RiskTier::High) => return Ok(GateOutcome::PendingHuman),
        (None, RiskTier::Low) => {
            check_complete(record, &[])?;
            (
                GateDecision::Recorded,
                PrincipalId::new(record.created_by.clone()),
                false,
                "low-risk decision recorded for audit".to_owned(),
                Vec::new(),
            )
        }
        (Some(v), _) => {
            if !v.principal.has_role(Role::Operator) {
                return Err(GateError::Unauthorized {
                    actor: v.principal.id.clone(),
                });
            }
            if v.rationale.trim().is_empty() {
                return Err(GateError::EmptyRationale);
            }
            let outcome = match v.verdict {
                Verdict::Approve => {
                    check_complete(record, &v.accepted_rebuttals)?;
                    GateDecision::Approved
                }
                Verdict::Reject => GateDecision::Rejected,
            };
            (
                outcome,
                v.principal.id.clone(),
                true,
                v.rationale.trim().to_owned(),
                v.accepted_rebuttals.clone(),
            )
        }
    };
    let event = log.append(
        now,
        actor.clone(),
        AuditAction::Gate { decision: outcome },
        Subject::Justification {
            justification: record.id.clone(),
        },
        rationale.clone(),
    );
    let mut next = record.clone();
    next.status = match outcome {
        GateDecision::Approved => Status::Approved,
        GateDecision::Rejected => Status::Rejected,
        GateDecision::Recorded => Status::Recorded,
    };
    next.decision = Some(Decision {
        outcome,
        actor,
        human,
        rationale,
        accepted_rebuttals: accepted,
        audit_sequence: event.sequence,
        at: now,
    });
    Ok(GateOutcome::Decided(next))
}

/// Proof that a record may be acted on.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EnactmentPermit {
    pub justification: String,
    pub audit_sequence: u64,
}

/// Grants enactment only when the audit log holds the gate event that moved
/// the record to approved (any risk) or recorded (low risk).
pub fn enact(record: &JustificationRecord, log: &AuditLog) -> Result<EnactmentPermit, GateError> {
    let blocked = || GateError::EnactmentBlocked {
        id: record.id.clone(),
        status: record.status,
    };
    let decision = record.decision.as_ref().ok_or_else(blocked)?;
    let expected = match (record.status, record.risk) {
        (Status::Approved, _) => GateDecision::Approved,
        (Status::Recorded, RiskTier::Low) => GateDecision::Recorded,
        _ => return Err(blocked()),
    };
    let logged = log.events().iter().any(|e| {
        e.sequence == decision.audit_sequence
            && e.action == AuditAction::Gate { decision: expected }
            && e.subject
                == Subject::Justification {
                    justification: record.id.clone(),
                }
    });
    if !logged || decision.outcome != expected {
        return Err(blocked());
    }
    Ok(EnactmentPermit {
        justification: record.id.clone(),
        audit_sequence: decision.audit_sequence,
    })
}
