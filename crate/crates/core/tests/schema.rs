//! Reports conform to the shipped JSON schema.

use canfield::report::{run, RunConfig, Suite};

fn validator() -> jsonschema::Validator {
    let text = include_str!("../schema/report.schema.json");
    let schema: serde_json::Value = serde_json::from_str(text).expect("schema is JSON");
    jsonschema::validator_for(&schema).expect("schema compiles")
}

fn check(input: &str, tweak: impl Fn(&mut RunConfig)) {
    let mut cfg = RunConfig::new(input.parse().unwrap());
    tweak(&mut cfg);
    let (report, _) = run(&cfg).unwrap();
    let value: serde_json::Value = serde_json::from_str(&report.to_json()).unwrap();
    let v = validator();
    let errors: Vec<String> = v.iter_errors(&value).map(|e| format!("{} at {}", e, e.instance_path())).collect();
    assert!(errors.is_empty(), "{input}: {errors:#?}");
}

#[test]
fn full_reports_validate() {
    for input in [
        "catalog:sphere:r=1",
        "catalog:sphere:r=1,center=0.5;0;0",
        "catalog:cylinder:r=1",
        "catalog:plane_offset:c=1",
        "catalog:helix:a=1,b=1",
        "catalog:graph4",
    ] {
        let grid = input.contains("graph4").then(|| vec![3; 4]);
        check(input, |c| c.grid = grid.clone());
    }
}

#[test]
fn partial_and_fd_reports_validate() {
    check("catalog:torus:R=3,r=1", |c| {
        c.suites = vec![Suite::Conformal];
        c.fd_check = true;
        c.grid = Some(vec![6, 6]);
    });
}

#[test]
fn schema_rejects_malformed_reports() {
    let (report, _) = run(&RunConfig::new("catalog:circle:r=1".parse().unwrap())).unwrap();
    let mut value: serde_json::Value = serde_json::from_str(&report.to_json()).unwrap();
    let v = validator();
    assert!(v.is_valid(&value));
    value["schema_version"] = "0.9".into();
    assert!(!v.is_valid(&value));
    value["schema_version"] = "1.0.0".into();
    value.as_object_mut().unwrap().remove("assertions");
    assert!(!v.is_valid(&value));
}
