//! Extends a small animal model with birds through the twelve-step procedure,
//! using a scripted mock generator.

use chrono::Utc;
use knowloop::fixtures::{animal_model, bird_generator, bird_source};
use knowloop::knowledge::ExemplarKind;
use knowloop::pipeline::{identify_implicit_classes, run_enhancement};
use knowloop::workflow::{transition, AuditLog, Principal, Role, WorkflowState};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut log = AuditLog::new();
    let now = Utc::now();
    let contributor = Principal::new("ada", [Role::Contributor]);
    let reviewer = Principal::new("grace", [Role::Reviewer]);
    let publisher = Principal::new("lin", [Role::Publisher]);

    // The universe must itself be published before candidates merge into it.
    let mut universe = animal_model();
    for (actor, target) in [
        (&contributor, WorkflowState::InReview),
        (&reviewer, WorkflowState::ReadyToPublish),
        (&publisher, WorkflowState::Published),
    ] {
        universe = transition(&universe, target, actor, "baseline", &mut log, now)?;
    }

    let mut run = run_enhancement(&universe, bird_source(), &bird_generator(), 7)?;
    for step in &run.steps {
        println!("step {:>2} {}", step.step, step.title);
    }
    for r in run.rejected_relationships() {
        println!("  rejected {} {}: {}", r.relationship.subject, r.relationship.predicate, r.reason);
    }
    let implicit = identify_implicit_classes(&run);
    for p in &implicit.proposals {
        println!("  implicit {}: {}", p.id, p.rationale.as_deref().unwrap_or(""));
    }
    for d in &implicit.dropped {
        println!("  dropped {}: {}", d.id, d.reason);
    }

    let candidate = run.candidate().expect("step 9 produced a candidate");
    println!("candidate {} in {}", candidate.id(), candidate.state().label());
    for class in candidate.classes() {
        let names = |kind| {
            class
                .exemplars_of(kind)
                .map(|e| e.label.as_str())
                .collect::<Vec<_>>()
                .join(", ")
        };
        println!(
            "  {:<8} archetypical [{}] atypical [{}] exotypical [{}]",
            class.id.as_str(),
            names(ExemplarKind::Archetypical),
            names(ExemplarKind::Atypical),
            names(ExemplarKind::Exotypical)
        );
    }

    run.validate(&contributor, &reviewer, "exemplars checked by hand", &mut log, now)?;
    run.publish(&publisher, "approved for the universe", &mut log, now)?;
    let merged = run.merge_into(&universe, &[])?;
    println!(
        "universe {} v{}: {} classes, {} relationships; {} generator calls; audit has {} events",
        merged.id(),
        merged.version(),
        merged.class_count(),
        merged.relationships().len(),
        run.generator_calls(),
        log.len()
    );
    Ok(())
}
