use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn path(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join(rel)
}

fn ctxsvc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ctxsvc"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn roadside(cmd: &str, extra: &[&str]) -> Output {
    roadside_with("fixtures/roadside.toml", cmd, extra)
}

fn roadside_with(options: &str, cmd: &str, extra: &[&str]) -> Output {
    let cat = path("fixtures/roadside.svc");
    let expr = format!("@{}", path("fixtures/roadside.expr").display());
    let opts = path(options);
    let mut args = vec![cmd, "--catalog", cat.to_str().unwrap(), "--expr", &expr, "--options", opts.to_str().unwrap()];
    args.extend_from_slice(extra);
    ctxsvc(&args)
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn validate_accepts_fixtures() {
    for f in ["fixtures/roadside.svc", "fixtures/abstract.svc"] {
        let o = ctxsvc(&["validate", "--catalog", path(f).to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0), "{f}: {}", stdout(&o));
        assert!(stdout(&o).ends_with("valid\n"));
    }
}

#[test]
fn validate_reports_conflicting_legal_rules() {
    let o = ctxsvc(&["validate", "--catalog", path("tests/data/conflict.svc").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stdout(&o).contains("legal-conflict"), "{}", stdout(&o));
}

#[test]
fn syntax_errors_exit_with_input_error() {
    let o = ctxsvc(&["validate", "--catalog", path("tests/data/broken.svc").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8(o.stderr).unwrap();
    assert!(err.contains("3:1"), "{err}");
}

#[test]
fn missing_expression_is_an_input_error() {
    let o = ctxsvc(&["flatten", "--catalog", path("fixtures/abstract.svc").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn flatten_prints_one_line_per_flow() {
    let cat = path("fixtures/abstract.svc");
    let expr = format!("@{}", path("fixtures/abstract.expr").display());
    let o = ctxsvc(&["flatten", "--catalog", cat.to_str().unwrap(), "--expr", &expr, "--unroll", "1"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).lines().count(), 8);
}

#[test]
fn verify_exit_codes_follow_verdicts() {
    let o = roadside("verify", &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).ends_with("25/25 queries pass\n"));

    let o = roadside_with("tests/data/roadside_aaa.toml", "verify", &[]);
    assert_eq!(o.status.code(), Some(5));
    assert!(stdout(&o).contains("FAIL"));

    let o = roadside("verify", &["--bound", "1"]);
    assert_eq!(o.status.code(), Some(6));
    assert!(stdout(&o).contains("INCONCLUSIVE"));
}

#[test]
fn machine_format_is_json_lines() {
    let o = roadside("verify", &["--format", "machine"]);
    let text = stdout(&o);
    assert_eq!(text.lines().count(), 25);
    for line in text.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert_eq!(v["verdict"], "PASS");
        assert!(v["states"].as_u64().unwrap() >= 1);
    }
}

#[test]
fn pipeline_output_is_deterministic() {
    let files = ["composite.svc", "flows.txt", "model.xml", "model.q", "report.txt", "report.jsonl"];
    let runs: Vec<Vec<Vec<u8>>> = (0..2)
        .map(|_| {
            let dir = tempfile::tempdir().unwrap();
            let o = roadside("pipeline", &["--out", dir.path().to_str().unwrap()]);
            assert_eq!(o.status.code(), Some(0));
            files.iter().map(|f| std::fs::read(dir.path().join(f)).unwrap()).collect()
        })
        .collect();
    for (i, f) in files.iter().enumerate() {
        assert!(!runs[0][i].is_empty(), "{f} is empty");
        assert_eq!(runs[0][i], runs[1][i], "{f} differs between runs");
    }
}
