//! Ready-made scenarios for examples, tests and the CLI demo commands: a small
//! animal model extended with birds by a scripted generator, and the
//! server-outage decision with its evidence.

use crate::generator::MockGenerator;
use crate::justification::{EvidenceItem, JustificationRequest, RiskTier};
use crate::knowledge::{EntityClass, KnowledgeModel, ModelId, Relationship, SourceRef};
use crate::pipeline::SourceDocument;

/// `Animal livesIn Habitat`, both classes defined, in Draft at version 4.
pub fn animal_model() -> KnowledgeModel {
    let src = SourceRef::document("zoology-handbook");
    KnowledgeModel::create_with_id(ModelId::new("animals"), "Animals", src.clone())
        .and_then(|m| {
            m.add_entity_class(
                EntityClass::new("Animal", "Animal")
                    .with_definition("A living organism that feeds on organic matter and can move."),
            )
        })
        .and_then(|m| {
            m.add_entity_class(
                EntityClass::new("Habitat", "Habitat")
                    .with_definition("The natural environment in which an organism lives."),
            )
        })
        .and_then(|m| m.add_relationship(Relationship::between("Animal", "livesIn", "Habitat", src)))
        .expect("fixture model is valid")
}

pub fn bird_source() -> SourceDocument {
    SourceDocument::new(
        SourceRef::document("field-notes-birds"),
        "Birds are feathered animals with wings that lay eggs; most of them fly. \
         Sparrows build cup nests in hedges. Penguins cannot fly but swim. \
         Bats fly at night, yet they are mammals. Birds live in nests.",
    )
}

/// Scripted answers for every generator step of the bird enhancement.
///
/// Step 2 proposes `Animal livesIn Nest`, which collides with the existing
/// `Animal livesIn Habitat`. Step 4 proposes `Feather` (implicit) and
/// re-proposes `Animal` (dropped as a duplicate).
pub fn bird_generator() -> MockGenerator {
    MockGenerator::new()
        .rule(
            "pipeline-step: 1",
            "## element\nid: Bird\nlabel: Bird\n\n## element\nid: Nest\nlabel: Nest\n",
        )
        .rule(
            "pipeline-step: 2",
            "## relationship\nsubject: Bird\npredicate: isA\nobject: Animal\n\n\
             ## relationship\nsubject: Bird\npredicate: builds\nobject: Nest\n\n\
             ## relationship\nsubject: Bird\npredicate: typicalClutch\nliteral: 4\ntype: integer\n\n\
             ## relationship\nsubject: Animal\npredicate: livesIn\nobject: Nest\n\n\
             ## relationship\nsubject: Animal\npredicate: livesIn\nobject: Habitat\n",
        )
        .rule(
            "pipeline-step: 4",
            "## class\nid: Feather\nlabel: Feather\nrationale: The source describes birds by their feathers but no class captures them.\n\n\
             ## class\nid: Animal\nlabel: Animal\nrationale: Birds are animals.\n",
        )
        .rule(
            "pipeline-step: 5",
            "## exemplar\nclass: Bird\nlabel: sparrow\nproperty: flies\nproperty: has feathers\nproperty: lays eggs\nrationale: It flies, has feathers and lays eggs.\n\n\
             ## exemplar\nclass: Nest\nlabel: cup nest\nproperty: woven from twigs\nrationale: The common open bowl built in hedges and trees.\n\n\
             ## exemplar\nclass: Feather\nlabel: flight feather\nproperty: vaned\nrationale: The stiff vaned feather that makes flight possible.\n",
        )
        .rule(
            "pipeline-step: 6",
            "## exemplar\nclass: Bird\nlabel: penguin\nproperty: does not fly\nproperty: swims\nrationale: It cannot fly but has feathers and lays eggs.\n\n\
             ## exemplar\nclass: Bird\nlabel: ostrich\nproperty: does not fly\nrationale: Flightless and very large, yet feathered and egg-laying.\n\n\
             ## exemplar\nclass: Nest\nlabel: burrow\nproperty: dug into the ground\nrationale: Puffins nest in burrows rather than built structures.\n",
        )
        .rule(
            "pipeline-step: 7",
            "## exemplar\nclass: Bird\nlabel: bat\nproperty: flies\nrationale: It flies but is a mammal without feathers that does not lay eggs.\n\n\
             ## exemplar\nclass: Nest\nlabel: beehive\nproperty: built by animals\nrationale: Built by insects to house a colony, not to raise bird young.\n\n\
             ## exemplar\nclass: Feather\nlabel: reptile scale\nproperty: keratin covering\nrationale: Made of keratin like a feather but without vanes.\n",
        )
        .rule(
            "pipeline-step: 8",
            "## definition\nclass: Bird\ntext: A feathered, egg-laying animal with wings, typically able to fly.\n\n\
             ## definition\nclass: Nest\ntext: A structure or place made by a bird to lay eggs and raise young.\n\n\
             ## definition\nclass: Feather\ntext: A keratin outgrowth of bird skin forming the plumage.\n",
        )
}

/// The four facts behind the server-outage decision.
pub fn outage_evidence() -> Vec<EvidenceItem> {
    vec![
        EvidenceItem::new(
            "server-003-down",
            "Server 003 is down.",
            SourceRef::new("fact", "monitoring/server-003"),
            0.99,
        ),
        EvidenceItem::new(
            "bay-17-blocked",
            "Server 003 runs LE-DEL, so Dispatching Bay 17 cannot ship.",
            SourceRef::new("model", "sap-landscape"),
            0.95,
        ),
        EvidenceItem::new(
            "exposure",
            "Bay 17 ships high value shipments that can cost $2.4 million in three hours.",
            SourceRef::document("finance/bay-17-exposure"),
            0.8,
        ),
        EvidenceItem::new(
            "id-range-root-cause",
            "Increasing the ID range on server 003 would have prevented the downtime.",
            SourceRef::document("incident/root-cause"),
            0.7,
        ),
    ]
}

pub fn outage_request(risk: RiskTier) -> JustificationRequest {
    JustificationRequest::new("Avoid High-Cost Downtime", "ops-agent")
        .with_steps([
            "Increase the ID range on server 003",
            "Restart the LE-DEL services",
            "Confirm that Dispatching Bay 17 ships again",
        ])
        .with_evidence(outage_evidence())
        .with_risk(risk)
        .with_seed(17)
}

/// The mock generator with a qualifier that scopes the decision to ID-range
/// incidents; every other stage uses the mock's own synthesis.
pub fn outage_generator() -> MockGenerator {
    MockGenerator::new().rule(
        "respond-with: qualifiers",
        "## qualifiers\ntext: Applies only to outages caused by an exhausted ID range on server 003.\nanswers: r1\n",
    )
}
