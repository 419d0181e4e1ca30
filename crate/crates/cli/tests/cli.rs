use std::process::{Command, Output};

fn fc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fc"))
        .args(args)
        .env("FC_LOG", "error")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn answer_running_example() {
    let o = fc(&["answer", "--question", "the terminuses of Antonio belongs to what railway?", "--trace"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert!(out.contains("(AND railway.railway (JOIN rail.railway.terminuses m.antonio_station))"));
    assert!(out.contains("\"event\":\"result\""));
}

#[test]
fn exit_codes() {
    assert_eq!(fc(&["answer", "--question", "zzz qqq?"]).status.code(), Some(2));
    assert_eq!(fc(&["--scorer", "nope", "answer", "--question", "x"]).status.code(), Some(1));
    assert_eq!(fc(&["--kb", "/nonexistent.tsv", "answer", "--question", "x"]).status.code(), Some(1));
}

#[test]
fn eval_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("report.json");
    let o = fc(&["eval", "--verify-gold", "--report", report.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(v["overall"]["em"], 100.0);
    assert_eq!(v["overall"]["count"], 30);

    let test = dir.path().join("test.jsonl");
    std::fs::write(
        &test,
        "{\"qid\":\"x\",\"question\":\"which railway has terminuses at Central Station?\",\"s_expression\":\"(AND railway.railway (JOIN rail.railway.terminuses m.summit_station))\"}\n",
    )
    .unwrap();
    assert_eq!(fc(&["eval", "--test", test.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn negatives_are_seeded() {
    let a = stdout(&fc(&["export-negatives", "--n", "3", "--seed", "7"]));
    let b = stdout(&fc(&["export-negatives", "--n", "3", "--seed", "7"]));
    assert_eq!(a, b);
    assert_eq!(a.lines().count(), fc_lines());
}

/// One record per distinct gold relation or class of each toy item.
fn fc_lines() -> usize {
    let o = fc(&["export-negatives", "--n", "0"]);
    stdout(&o).lines().count()
}

#[test]
fn pilot_bench_and_pairs_run() {
    let o = fc(&["pilot"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("zero_shot"));
    let o = fc(&["bench"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("candidate_selection"));
    let o = fc(&["dump-pairs", "--question", "which railway has terminuses at Central Station?"]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(!v["pairs"]["class_relation"].as_array().unwrap().is_empty());
}
