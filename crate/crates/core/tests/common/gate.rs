//! Gate and selection properties shared by the justification suite and the
//! acceptance runner.

use chrono::{DateTime, TimeZone, Utc};
use knowloop::fixtures::{outage_generator, outage_request};
use knowloop::justification::{
    compose_justification, enact, gate_decision, score_explanation, select_best_claim, select_by,
    Candidate, GateOutcome, JustificationRecord, Loveliness, Part, RiskTier, Verdict, VerdictInput,
};
use knowloop::workflow::{AuditAction, AuditLog, GateDecision, Principal, Role, Subject};
use proptest::prelude::*;
use proptest::test_runner::TestCaseError;

pub fn now() -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2025, 6, 2, 8, 30, 0).unwrap()
}

pub fn outage(risk: RiskTier) -> JustificationRecord {
    compose_justification("j-1", &outage_request(risk), &outage_generator(), now()).unwrap()
}

#[derive(Debug, Clone)]
pub struct Attempt {
    pub roles: Vec<Role>,
    pub verdict: Option<Verdict>,
    pub rationale: &'static str,
    pub accept_all: bool,
}

pub fn attempt() -> impl Strategy<Value = Attempt> {
    (
        proptest::sample::subsequence(Role::ALL.to_vec(), 0..=4),
        proptest::option::of(prop_oneof![Just(Verdict::Approve), Just(Verdict::Reject)]),
        prop_oneof![Just("looked at it"), Just(""), Just("  ")],
        any::<bool>(),
    )
        .prop_map(|(roles, verdict, rationale, accept_all)| Attempt { roles, verdict, rationale, accept_all })
}

/// A composed record with parts randomly emptied and rebuttals randomly
/// left unanswered.
pub fn record() -> impl Strategy<Value = JustificationRecord> {
    (
        proptest::sample::select(vec![RiskTier::Low, RiskTier::High]),
        proptest::collection::vec(any::<bool>(), 6),
        any::<bool>(),
    )
        .prop_map(|(risk, empty, unanswer)| {
            let mut r = outage(risk);
            for (part, e) in Part::ALL.into_iter().zip(empty) {
                if !e {
                    continue;
                }
                match part {
                    Part::Claim => r.claim = " ".into(),
                    Part::Grounds => r.grounds.clear(),
                    Part::Warrant => r.warrant.clear(),
                    Part::Backing => r.backing.clear(),
                    Part::Rebuttals => r.rebuttals.clear(),
                    Part::Qualifiers => r.qualifiers.clear(),
                }
            }
            if unanswer {
                for q in &mut r.qualifiers {
                    q.answers.clear();
                }
            }
            r
        })
}

/// Drives `start` through `attempts` and checks that nothing incomplete is
/// ever enactable and nothing high-risk is enacted without an operator's
/// approval.
pub fn check_gate_path(start: &JustificationRecord, attempts: &[Attempt]) -> Result<(), TestCaseError> {
    let mut log = AuditLog::new();
    let mut current = start.clone();
    let mut seen = vec![current.clone()];
    for (i, a) in attempts.iter().enumerate() {
        let principal = Principal::new(format!("p{i}"), a.roles.clone());
        let verdict = a.verdict.map(|v| {
            let base = match v {
                Verdict::Approve => VerdictInput::approve(principal.clone(), a.rationale),
                Verdict::Reject => VerdictInput::reject(principal.clone(), a.rationale),
            };
            if a.accept_all {
                base.accepting(current.rebuttals.iter().map(|r| r.id.clone()))
            } else {
                base
            }
        });
        let before = log.len();
        match gate_decision(&current, verdict.as_ref(), &mut log, now()) {
            Ok(GateOutcome::Decided(next)) => {
                prop_assert_eq!(log.len(), before + 1);
                current = next;
                seen.push(current.clone());
            }
            Ok(GateOutcome::PendingHuman) | Err(_) => prop_assert_eq!(log.len(), before),
        }
    }
    for r in &seen {
        let permitted = enact(r, &log).is_ok();
        if permitted || r.enactment_permitted() {
            prop_assert!(r.missing_parts().is_empty(), "{:?}", r.missing_parts());
        }
        if permitted && r.risk == RiskTier::High {
            let approved_by_operator = log.events().iter().any(|e| {
                e.action == AuditAction::Gate { decision: GateDecision::Approved }
                    && e.subject == Subject::Justification { justification: r.id.clone() }
                    && attempts.iter().enumerate().any(|(i, a)| {
                        e.actor.as_str() == format!("p{i}")
                            && a.roles.contains(&Role::Operator)
                            && a.verdict == Some(Verdict::Approve)
                    })
            });
            prop_assert!(approved_by_operator);
        }
    }
    // at most one decision per record
    prop_assert!(log.len() <= 1);
    Ok(())
}

/// Strictly increasing maps of [0, 1] onto itself, composed at random and
/// followed by a positive affine map. All are well conditioned on the grid
/// used below, so distinct inputs stay distinct in f64.
#[derive(Debug, Clone)]
pub enum Monotone {
    Power(f64),
    Exp(f64),
    Log(f64),
    Sine,
    Logistic(f64),
}

impl Monotone {
    pub fn apply(&self, x: f64) -> f64 {
        let sigmoid = |t: f64| 1.0 / (1.0 + (-t).exp());
        match *self {
            Monotone::Power(p) => x.powf(p),
            Monotone::Exp(k) => (k * x).exp_m1() / k.exp_m1(),
            Monotone::Log(k) => (k * x).ln_1p() / k.ln_1p(),
            Monotone::Sine => (x * std::f64::consts::FRAC_PI_2).sin(),
            Monotone::Logistic(k) => {
                (sigmoid(k * (x - 0.5)) - sigmoid(-k / 2.0)) / (sigmoid(k / 2.0) - sigmoid(-k / 2.0))
            }
        }
    }
}

pub type Transform = (Vec<Monotone>, f64, f64);

pub fn monotone() -> impl Strategy<Value = Transform> {
    let one = prop_oneof![
        (0.3f64..3.0).prop_map(Monotone::Power),
        (0.1f64..5.0).prop_map(Monotone::Exp),
        (0.1f64..20.0).prop_map(Monotone::Log),
        Just(Monotone::Sine),
        (0.5f64..8.0).prop_map(Monotone::Logistic),
    ];
    (proptest::collection::vec(one, 1..4), 0.01f64..100.0, -50.0f64..50.0)
}

pub fn grid() -> impl Strategy<Value = Vec<(u32, u32)>> {
    proptest::collection::vec((0u32..=16, 0u32..=16), 1..8)
}

/// The claim chosen by aggregate score is the one chosen by every transform.
pub fn check_argmax(grid: &[(u32, u32)], transforms: &[Transform]) -> Result<(), TestCaseError> {
    // aggregates on a coarse grid so transforms cannot merge distinct values
    let candidates: Vec<Candidate> = grid
        .iter()
        .enumerate()
        .map(|(i, (l, v))| {
            let s = score_explanation(f64::from(*l) / 16.0, &Loveliness::uniform(f64::from(*v) / 16.0)).unwrap();
            Candidate::new(format!("c{}", (i * 7) % 11), "claim", s)
        })
        .collect();
    let mut ids: Vec<&str> = candidates.iter().map(|c| c.id.as_str()).collect();
    ids.sort();
    ids.dedup();
    prop_assume!(ids.len() == candidates.len());
    let base = select_best_claim(&candidates).unwrap().selected;
    for t in transforms {
        let (chain, a, b) = t;
        let chosen = select_by(&candidates, |c| a * chain.iter().fold(c.score.aggregate, |x, f| f.apply(x)) + b).unwrap();
        prop_assert_eq!(&chosen.selected, &base, "{:?}", t);
    }
    Ok(())
}
