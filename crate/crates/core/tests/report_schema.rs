use std::path::Path;

use nnlab::harness::{run_experiment, write_reports, AuditReport, ExperimentConfig, Format};
use serde_json::Value;

fn validator() -> jsonschema::Validator {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("schema/audit_report.schema.json");
    let schema: Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    jsonschema::validator_for(&schema).unwrap()
}

fn written(reports: &[AuditReport]) -> Value {
    let dir = tempfile::tempdir().unwrap();
    write_reports(dir.path(), reports, Format::Json).unwrap();
    serde_json::from_str(&std::fs::read_to_string(dir.path().join("reports.json")).unwrap()).unwrap()
}

#[test]
fn emitted_reports_match_the_schema() {
    // Worst-case runs skip the dominated-only audits, so both report shapes appear.
    for process in ["smoothed", "worst-threshold"] {
        let cfg = ExperimentConfig::from_toml_str(&format!(
            "version = 1\nmetric = \"interval\"\nlo = [-1.0]\nhi = [1.0]\nlabel = \"threshold\"\nprocess = \"{process}\"\nsigma = 0.2\nhorizon = 300\ntrials = 2\nseed = 3\nindicator_lo = [0.0]\nindicator_hi = [0.1]\naudits = [\"mlp\", \"packing\", \"delta_tail\", \"decomposition\", \"influence\", \"nn_ergodic\", \"rate_bound\"]\n"
        ))
        .unwrap();
        let exp = run_experiment(&cfg).unwrap();
        assert_eq!(exp.reports.len(), 7);
        let doc = written(&exp.reports);
        let errors: Vec<String> = validator().iter_errors(&doc).map(|e| e.to_string()).collect();
        assert!(errors.is_empty(), "{process}: {errors:?}");
    }
}

#[test]
fn schema_rejects_malformed_reports() {
    let v = validator();
    let ok = serde_json::json!([{"audit": "mlp", "pass": true, "observed": 1.0, "bound": 1.0, "slack": 0.0, "witnesses": []}]);
    assert!(v.is_valid(&ok));
    for bad in [
        serde_json::json!([{"audit": "mlp", "pass": true, "observed": 1.0, "bound": 1.0, "slack": 0.0}]),
        serde_json::json!([{"audit": "other", "pass": true, "observed": 1.0, "bound": 1.0, "slack": 0.0, "witnesses": []}]),
        serde_json::json!([{"audit": "mlp", "pass": "yes", "observed": 1.0, "bound": 1.0, "slack": 0.0, "witnesses": []}]),
        serde_json::json!([{"audit": "mlp", "pass": true, "observed": 1.0, "bound": 1.0, "slack": 0.0, "witnesses": [], "extra": 1}]),
    ] {
        assert!(!v.is_valid(&bad), "{bad}");
    }
}
