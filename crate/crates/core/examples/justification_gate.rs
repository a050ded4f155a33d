//! Composes an argued decision for the server outage, shows that a high-risk
//! record cannot be enacted until an operator approves it, and prints the
//! provenance document.

use chrono::Utc;
use knowloop::fixtures::{outage_generator, outage_request};
use knowloop::justification::{
    compose_justification, enact, export_provenance, gate_decision, replay_justification,
    GateOutcome, RiskTier, VerdictInput,
};
use knowloop::workflow::{AuditLog, Principal, Role};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut log = AuditLog::new();
    let record = compose_justification(
        "j-1",
        &outage_request(RiskTier::High),
        &outage_generator(),
        Utc::now(),
    )?;
    println!("claim:      {}", record.claim);
    println!("grounds:    {}", record.grounds.join(", "));
    println!("warrant:    {}", record.warrant);
    println!("backing:    {}", record.backing.join(" | "));
    for r in &record.rebuttals {
        println!("rebuttal:   [{}] attacks {}: {}", r.id, r.attacks.as_str(), r.text);
    }
    for q in &record.qualifiers {
        println!("qualifier:  {} (answers {})", q.text, q.answers.join(", "));
    }
    println!("prompts stored: {}", record.transcript.len());
    assert!(replay_justification(&record)?.same_composition(&record));

    let pending = gate_decision(&record, None, &mut log, Utc::now())?;
    assert_eq!(pending, GateOutcome::PendingHuman);
    println!("without a verdict: pending human review, enact -> {}", enact(&record, &log).unwrap_err());

    let operator = Principal::new("morgan", [Role::Operator]);
    let verdict = VerdictInput::approve(operator, "ID range exhaustion confirmed in the system log");
    let GateOutcome::Decided(approved) = gate_decision(&record, Some(&verdict), &mut log, Utc::now())? else {
        unreachable!("a verdict always decides");
    };
    let permit = enact(&approved, &log)?;
    println!("approved; enactment permitted by audit event {}", permit.audit_sequence);
    print!("{}", export_provenance(&approved)?.to_json());
    Ok(())
}
