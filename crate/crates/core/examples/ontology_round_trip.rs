//! Builds a small bird taxonomy, exports it as OWL RDF/XML and a JSON
//! blueprint, and imports both again.

use knowloop::knowledge::{
    EntityClass, Exemplar, KnowledgeModel, Literal, Property, Relationship, SourceRef, ValueType,
};
use knowloop::ontology::{export_blueprint, export_rdfxml, import_blueprint, import_rdfxml};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let source = SourceRef::document("field-guide");
    let bird = EntityClass::new("Bird", "Bird")
        .with_definition("A warm-blooded egg-laying vertebrate with feathers and wings.")
        .with_property(Property::new("wingspan", ValueType::FloatingPoint).with_example("0.25"))
        .with_exemplar(
            Exemplar::archetypical("sparrow", "It flies, has feathers, builds nests in trees, and sings")
                .with_properties(["flies", "feathers", "nests in trees", "sings"]),
        )
        .with_exemplar(Exemplar::atypical("penguin", "A bird that cannot fly but swims"))
        .with_exemplar(Exemplar::exotypical("bat", "Flies, but is a mammal without feathers"));
    let habitat = EntityClass::new("Habitat", "Habitat").with_definition("Where an animal lives.");

    let model = KnowledgeModel::create("Birds", source.clone())?
        .add_entity_class(bird)?
        .add_entity_class(habitat)?
        .add_relationship(Relationship::between("Bird", "livesIn", "Habitat", source.clone()))?
        .add_relationship(Relationship::literal(
            "Bird",
            "typicalClutch",
            Literal::new("4", ValueType::Integer)?,
            source,
        ))?;

    let rdf = export_rdfxml(&model)?;
    println!("{rdf}");
    let imported = import_rdfxml(&rdf)?;
    assert!(imported.skipped.is_empty());
    assert_eq!(imported.model.content_hash(), model.content_hash());
    assert_eq!(export_rdfxml(&imported.model)?, rdf);

    let blueprint = export_blueprint(&model);
    let back = import_blueprint(&blueprint)?;
    assert_eq!(back.content_hash(), model.content_hash());
    println!("version {} hash {}", model.version(), model.content_hash());
    Ok(())
}
