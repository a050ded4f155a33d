use std::path::Path;
use std::process::{Command, Output};

use knowloop::fixtures::{animal_model, outage_request};
use knowloop::justification::RiskTier;
use knowloop::knowledge::{KnowledgeModel, ModelId, SourceRef};
use knowloop::ontology::{export_blueprint, export_rdfxml};

fn knowloop(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_knowloop"))
        .arg("--data")
        .arg(dir.join("data"))
        .args(args)
        .env_remove("KNOWLOOP_PRINCIPAL")
        .env_remove("KNOWLOOP_DATA")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_owned()
}

#[test]
fn evaluate_embedded_prints_the_report() {
    let dir = tempfile::tempdir().unwrap();
    let o = knowloop(dir.path(), &["evaluate", "--ratings", "embedded"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("15/15"));
    assert!(text.contains("6.10e-05"));
    assert!(text.contains("[0.782, 1.000]"));

    let o = knowloop(dir.path(), &["evaluate", "--json"]);
    let json: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(json.is_object());
}

#[test]
fn evaluate_rejects_bad_csv_with_one_line() {
    let dir = tempfile::tempdir().unwrap();
    let csv = write(dir.path(), "bad.csv", "model,cycle\nx,1\n");
    let o = knowloop(dir.path(), &["evaluate", "--ratings", &csv]);
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert_eq!(err.lines().count(), 1, "{err}");
    assert!(err.starts_with("knowloop: "));
}

#[test]
fn export_of_empty_model_is_header_only() {
    let dir = tempfile::tempdir().unwrap();
    let empty = KnowledgeModel::create("Empty", SourceRef::document("none")).unwrap();
    let file = write(dir.path(), "empty.json", &export_blueprint(&empty));
    let o = knowloop(dir.path(), &["export", "--file", &file, "--format", "rdfxml"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let doc = stdout(&o);
    assert_eq!(doc, export_rdfxml(&empty).unwrap());
    assert!(doc.contains("owl:Ontology"));
    assert!(!doc.contains("owl:Class"));
}

#[test]
fn import_check_transition_export() {
    let dir = tempfile::tempdir().unwrap();
    let file = write(dir.path(), "animals.rdf", &export_rdfxml(&animal_model()).unwrap());

    let o = knowloop(dir.path(), &["import", &file]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("--principal"));

    let o = knowloop(dir.path(), &["--principal", "alice;contributor", "import", &file]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(stdout(&o), "imported animals v1 (2 classes)\n");

    let o = knowloop(dir.path(), &["check", "animals"]);
    assert!(o.status.success());
    assert!(stdout(&o).ends_with("consistent\n"));

    let o = knowloop(
        dir.path(),
        &["--principal", "bob;reviewer", "transition", "animals", "in-review", "--rationale", "go"],
    );
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(stderr(&o).lines().count(), 1);

    let o = knowloop(
        dir.path(),
        &["--principal", "alice;contributor", "transition", "animals", "in-review", "--rationale", "go"],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(stdout(&o), "animals v1 is in-review\n");

    let o = knowloop(dir.path(), &["export", "animals"]);
    let model = knowloop::ontology::import_blueprint(&stdout(&o)).unwrap();
    assert_eq!(model.content_hash(), {
        let mut parts = animal_model().into_parts();
        parts.version = 1;
        KnowledgeModel::from_parts(parts).content_hash()
    });
    assert_eq!(model.state().as_str(), "in-review");
}

#[test]
fn merge_with_unresolved_conflicts_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let mut other = animal_model().into_parts();
    other.id = ModelId::new("zoo");
    other.classes[1].definition = Some("An enclosure.".into());
    let a = write(dir.path(), "a.json", &export_blueprint(&animal_model()));
    let b = write(dir.path(), "b.json", &export_blueprint(&KnowledgeModel::from_parts(other)));
    for f in [&a, &b] {
        let o = knowloop(dir.path(), &["--principal", "alice;contributor", "import", f]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let o = knowloop(dir.path(), &["--principal", "alice;contributor", "merge", "animals", "zoo"]);
    assert_eq!(o.status.code(), Some(2));
    let out = stdout(&o);
    assert!(out.starts_with("conflict 0: "), "{out}");
    assert!(out.contains("Habitat"), "{out}");
    assert_eq!(stderr(&o), "knowloop: 1 unresolved conflict(s)\n");

    let res = write(
        dir.path(),
        "res.json",
        r#"[{"conflict": 0, "strategy": "resolve-custom", "value": "Where an organism lives.", "rationale": "both"}]"#,
    );
    let o = knowloop(
        dir.path(),
        &["--principal", "alice;contributor", "merge", "animals", "zoo", "--resolutions", &res],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(stdout(&o), "merged into animals+zoo v1\n");
}

#[test]
fn justify_records_low_risk_and_holds_high_risk() {
    let dir = tempfile::tempdir().unwrap();
    let low = write(
        dir.path(),
        "low.json",
        &serde_json::to_string(&outage_request(RiskTier::Low)).unwrap(),
    );
    let o = knowloop(dir.path(), &["--principal", "ops;operator", "justify", &low]);
    assert!(o.status.success(), "{}", stderr(&o));
    let record: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(record["status"], "recorded");

    let high = write(
        dir.path(),
        "high.json",
        &serde_json::to_string(&outage_request(RiskTier::High)).unwrap(),
    );
    let o = knowloop(dir.path(), &["--principal", "ops;operator", "justify", &high]);
    let record: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(record["status"], "proposed");

    let o = knowloop(
        dir.path(),
        &["--principal", "ops;operator", "justify", &high, "--verdict", "reject", "--rationale", "too risky"],
    );
    let record: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(record["status"], "rejected");
    assert_eq!(record["id"], "j-3");
}
