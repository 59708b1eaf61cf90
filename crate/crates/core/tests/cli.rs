use std::path::Path;
use std::process::{Command, Output};

fn rnnsched(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rnnsched")).args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

const HEADER: &str =
    "name,cell,n,layers,T,vocab,schedule,working_set_bytes,mem_read_bytes,mem_write_bytes,dre,ratio_vs_a";

#[test]
fn sweep_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let paths = [dir.path().join("a.csv"), dir.path().join("b.csv")];
    for p in &paths {
        let out = rnnsched(&["sweep", "--filter", "n=64|128,layers=1|2,T=10", "-o", p.to_str().unwrap()]);
        stdout(&out);
    }
    let a = std::fs::read(&paths[0]).unwrap();
    assert_eq!(a, std::fs::read(&paths[1]).unwrap());
    let text = String::from_utf8(a).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some(HEADER));
    assert_eq!(lines.count(), 2 * 2 * 2 * 2 * 2);
}

#[test]
fn weights_only_run_from_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("lstm512.json");
    std::fs::write(&cfg, r#"{"cell_type":"LSTM","hidden_size":512,"num_layers":1,"input_length":100,"vocab_size":0}"#)
        .unwrap();
    let mib = 1u64 << 20;
    for (schedule, want) in [("a", 800 * mib), ("a+", 404 * mib)] {
        let text = stdout(&rnnsched(&[
            "run",
            cfg.to_str().unwrap(),
            "--schedule",
            schedule,
            "--cache-mb",
            "4",
            "--weights-only",
            "--out",
            "json",
        ]));
        let rows: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(rows[0]["name"], "lstm512");
        assert_eq!(rows[0]["mem_read_bytes"].as_u64().unwrap(), want);
    }
}

#[test]
fn compare_expands_application() {
    let text = stdout(&rnnsched(&["compare", "bytener"]));
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows.len(), 8);
    assert!(rows.iter().all(|r| r.starts_with("bytener-t")));
}

#[test]
fn trace_dump_columns() {
    let text = stdout(&rnnsched(&["trace", "grid-gru-n64-l1-t1-v60", "--schedule", "a+"]));
    let first: Vec<&str> = text.lines().next().unwrap().split('\t').collect();
    assert_eq!(first.len(), 5);
    assert!(first[0].starts_with("L0."));
    assert!(matches!(first[2], "R" | "W"));
    assert!(text.lines().any(|l| l.contains(".precompute\t")));
}

#[test]
fn exported_catalog_can_be_loaded() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("catalog.json");
    stdout(&rnnsched(&["catalog", "export", "-o", path.to_str().unwrap()]));
    let mut cat: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    let list = cat["benchmarks"].as_array_mut().unwrap();
    assert_eq!(list.len(), 640 + 16);
    list[0]["name"] = "custom".into();
    std::fs::write(&path, serde_json::to_string(&cat).unwrap()).unwrap();
    let text = stdout(&rnnsched(&["run", "custom", "--catalog", path.to_str().unwrap()]));
    assert!(text.lines().nth(1).unwrap().starts_with("custom,"));
}

#[test]
fn verify_reports_pass() {
    let text = stdout(&rnnsched(&["verify", "--configs", "20", "--traces", "5"]));
    assert_eq!(text.lines().filter(|l| l.starts_with("PASS")).count(), 2);
}

#[test]
fn errors_exit_nonzero() {
    for args in
        [&["sweep", "--filter", "colour=red"][..], &["run", "no-such-benchmark"], &["run", "lm", "--assoc", "x"]]
    {
        let out = rnnsched(args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
    }
    assert!(!Path::new("no-such-benchmark").exists());
}
