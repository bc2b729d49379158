use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_flagmirror"));
    c.env_remove("FLAGMIRROR_CACHE_DIR");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn run_cached(dir: &Path, args: &[&str]) -> Output {
    bin().env("FLAGMIRROR_CACHE_DIR", dir).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn vertex_csv_has_header_and_degree_rows() {
    let o = run(&[
        "compute", "vertex", "--n", "2", "--perm", "1 2", "--degree", "4", "--backend", "exact", "--format", "csv",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 6);
    assert_eq!(lines[0], "d1,coefficient");
    assert!(lines[1].starts_with("0,1"));
}

#[test]
fn verify_all_n2_passes() {
    let o = run(&["verify", "all", "--n", "2", "--seed", "7"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let claims = report["claims"].as_array().unwrap();
    assert!(claims.len() >= 8);
    assert!(claims.iter().all(|c| c["pass"] == true));
    for c in claims {
        for key in ["claim_id", "paper_ref", "residual", "tolerance", "runtime_ms"] {
            assert!(c.get(key).is_some(), "missing {key}");
        }
    }
}

#[test]
fn invalid_input_exits_2_with_error_record() {
    let o = run(&["compute", "vertex", "--n", "3", "--perm", "1 1 2"]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    let rec: serde_json::Value = serde_json::from_str(err.lines().last().unwrap()).unwrap();
    assert!(rec["error"].is_string());

    let o = run(&["verify", "macdonald", "--n", "1"]);
    assert_eq!(o.status.code(), Some(2));

    let o = run(&["verify", "nonsense"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn config_file_overrides_and_rejects_unknown_keys() {
    let dir = tempfile::tempdir().unwrap();
    let good = dir.path().join("good.toml");
    std::fs::write(&good, "degree = 2\nformat = \"csv\"\n").unwrap();
    let o = run(&["compute", "vertex", "--perm", "2 1", "--backend", "exact", "--config", good.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).lines().count(), 4);

    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "degre = 2\n").unwrap();
    let o = run(&["compute", "vertex", "--perm", "2 1", "--config", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn output_file_and_markdown() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("report.md");
    let o = run(&["verify", "triangularity", "--n", "2", "--format", "markdown", "--output", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).is_empty());
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.contains('|'));
}

#[test]
fn cache_reuse_is_bit_identical_and_survives_corruption() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["compute", "vertex", "--n", "3", "--perm", "2 3 1", "--degree", "3", "--format", "csv"];
    let first = run_cached(dir.path(), &args);
    assert_eq!(first.status.code(), Some(0));
    let entries: Vec<_> = std::fs::read_dir(dir.path()).unwrap().map(|e| e.unwrap().path()).collect();
    assert!(!entries.is_empty());

    let second = run_cached(dir.path(), &args);
    assert_eq!(second.stdout, first.stdout);

    for e in &entries {
        std::fs::write(e, b"not a series").unwrap();
    }
    let third = run_cached(dir.path(), &args);
    assert_eq!(third.status.code(), Some(0));
    assert_eq!(third.stdout, first.stdout);
    assert!(String::from_utf8_lossy(&third.stderr).contains("warning"));

    let uncached = run_cached(dir.path(), &[&args[..], &["--no-cache"]].concat());
    assert_eq!(uncached.stdout, first.stdout);
}
