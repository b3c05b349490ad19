use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

const MT: &str =
    r#"{"table_id": "mt", "title": "mt", "header": ["team", "points"], "rows": [["a", "3"], ["b", "5"], ["c", "2"]]}"#;

fn loft(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_loft"))
        .args(args)
        .env_remove("LOFT_SEED")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn execute_prints_the_value() {
    let dir = TempDir::new().unwrap();
    let table = write(dir.path(), "mt.json", MT);
    let o = loft(&["execute", "--table", p(&table), "--form", "count { all_rows }"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v: Value = serde_json::from_str(stdout(&o).trim()).unwrap();
    assert_eq!(v, serde_json::json!({"kind": "number", "value": 3}));

    let o = loft(&["execute", "--table", p(&table), "--form", "hop { all_rows ; team }"]);
    assert_eq!(o.status.code(), Some(2));

    let o = loft(&[
        "verify",
        "--table",
        p(&table),
        "--form",
        "eq { sum { all_rows ; points } ; 10 }",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
}

#[test]
fn usage_errors_exit_1_and_help_exits_0() {
    let o = loft(&["frobnicate"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("Usage"), "{}", stderr(&o));
    assert_eq!(loft(&["--help"]).status.code(), Some(0));
    assert_eq!(loft(&["execute", "--help"]).status.code(), Some(0));
}

#[test]
fn missing_corpus_names_the_path() {
    let dir = TempDir::new().unwrap();
    let missing = dir.path().join("nowhere.jsonl");
    let out = dir.path().join("out.jsonl");
    let o = loft(&["pipeline", "--corpus", p(&missing), "--out", p(&out)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains(p(&missing)), "{}", stderr(&o));
}

#[test]
fn demo_runs_are_byte_identical() {
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    for dir in [&a, &b] {
        let o = loft(&["demo", "--out", p(dir.path())]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    }
    let mut names: Vec<_> = fs::read_dir(a.path())
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    names.sort();
    assert!(names.len() >= 5);
    for name in names {
        assert_eq!(
            fs::read(a.path().join(&name)).unwrap(),
            fs::read(b.path().join(&name)).unwrap(),
            "{name:?} differs"
        );
    }
    let metrics: Value = serde_json::from_str(&fs::read_to_string(a.path().join("metrics.json")).unwrap()).unwrap();
    assert_eq!(metrics["execution_faithfulness"], 1.0);
}

#[test]
fn mine_synthesize_and_score() {
    let dir = TempDir::new().unwrap();
    let corpus = write(dir.path(), "corpus.jsonl", &format!("{MT}\n"));
    let forms = write(
        dir.path(),
        "forms.txt",
        "count { all_rows }\neq { count { all_rows } ; 3 }\ngreater { hop { filter_eq { all_rows ; team ; b } ; points } ; 4 }\n",
    );
    let dist = dir.path().join("dist.json");
    let o = loft(&["mine-templates", "--forms", p(&forms), "--out", p(&dist)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));

    let cands = dir.path().join("cands.jsonl");
    let o = loft(&[
        "synthesize",
        "--corpus",
        p(&corpus),
        "--dist",
        p(&dist),
        "--out",
        p(&cands),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let table = write(dir.path(), "mt.json", MT);
    for line in fs::read_to_string(&cands).unwrap().lines() {
        let v: Value = serde_json::from_str(line).unwrap();
        let form = v["logic_form"].as_str().unwrap();
        let o = loft(&["verify", "--table", p(&table), "--form", form]);
        assert_eq!(o.status.code(), Some(0), "{form} did not verify");
    }

    let out = dir.path().join("out.jsonl");
    let o = loft(&["pipeline", "--corpus", p(&corpus), "--dist", p(&dist), "--out", p(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let o = loft(&["score", "--output", p(&out), "--corpus", p(&corpus)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let report: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(report["execution_faithfulness"], 1.0);
}

const ECHO_GENERATOR: &str = r#"
import json, sys
for line in sys.stdin:
    req = json.loads(line)
    print(json.dumps({"id": req["id"], "statement": req["readable"]}), flush=True)
"#;

const MALFORMED_FIRST: &str = r#"
import json, sys
first = True
for line in sys.stdin:
    req = json.loads(line)
    if first:
        first = False
        print("this is not json", flush=True)
        continue
    print(json.dumps({"id": req["id"], "statement": req["readable"]}), flush=True)
"#;

const SLOW_FIRST: &str = r#"
import json, sys, time
first = True
for line in sys.stdin:
    req = json.loads(line)
    if first:
        first = False
        time.sleep(1.2)
    print(json.dumps({"id": req["id"], "statement": req["readable"]}), flush=True)
"#;

const NEVER_ENTAILED: &str = r#"
import json, sys
for line in sys.stdin:
    req = json.loads(line)
    print(json.dumps({"id": req["id"], "entailed": False}), flush=True)
"#;

struct HookRun {
    dir: TempDir,
    output: Output,
}

impl HookRun {
    fn records(&self) -> Vec<Value> {
        fs::read_to_string(self.dir.path().join("out.jsonl"))
            .unwrap()
            .lines()
            .map(|l| serde_json::from_str(l).unwrap())
            .collect()
    }

    fn report(&self) -> Value {
        serde_json::from_str(&fs::read_to_string(self.dir.path().join("report.json")).unwrap()).unwrap()
    }
}

fn run_with_hooks(generator: Option<&str>, verifier: Option<&str>, extra: &[&str]) -> HookRun {
    let dir = TempDir::new().unwrap();
    let corpus = write(dir.path(), "corpus.jsonl", &format!("{MT}\n"));
    let mut args: Vec<String> = ["pipeline", "--corpus", p(&corpus), "--n", "4", "--max-column-sets", "1"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    for (flag, script) in [("--generator", generator), ("--verifier", verifier)] {
        if let Some(script) = script {
            let path = write(dir.path(), &format!("{}.py", &flag[2..]), script);
            args.push(flag.into());
            args.push(format!("cmd:python3 {}", p(&path)));
        }
    }
    args.extend(extra.iter().map(|s| s.to_string()));
    args.extend(["--out".into(), p(&dir.path().join("out.jsonl")).into()]);
    args.extend(["--report".into(), p(&dir.path().join("report.json")).into()]);
    let refs: Vec<&str> = args.iter().map(String::as_str).collect();
    let output = loft(&refs);
    HookRun { dir, output }
}

#[test]
fn echo_generator_reproduces_builtin_statements() {
    let external = run_with_hooks(Some(ECHO_GENERATOR), None, &[]);
    assert_eq!(external.output.status.code(), Some(0), "{}", stderr(&external.output));
    let builtin = run_with_hooks(None, None, &[]);
    assert_eq!(external.records(), builtin.records());
    assert!(!external.records()[0]["statements"].as_array().unwrap().is_empty());
}

#[test]
fn malformed_response_drops_one_candidate() {
    let run = run_with_hooks(Some(MALFORMED_FIRST), None, &[]);
    assert_eq!(run.output.status.code(), Some(0), "{}", stderr(&run.output));
    assert_eq!(run.report()["generation_dropped"], 1);
    assert!(run.report()["generated"].as_u64().unwrap() >= 1);
}

#[test]
fn slow_response_times_out_and_is_discarded() {
    let run = run_with_hooks(Some(SLOW_FIRST), None, &["--timeout", "1.0"]);
    assert_eq!(run.output.status.code(), Some(0), "{}", stderr(&run.output));
    assert_eq!(run.report()["generation_dropped"], 1);
    // the late answer to the first request must not be taken for the second
    let builtin = run_with_hooks(None, None, &[]);
    let texts = |r: &HookRun| -> Vec<(String, String)> {
        r.records()[0]["statements"]
            .as_array()
            .unwrap()
            .iter()
            .map(|s| (s["text"].to_string(), s["logic_form"].to_string()))
            .collect()
    };
    let expected: Vec<_> = texts(&builtin);
    for pair in texts(&run) {
        let form = &pair.1;
        if let Some(b) = expected.iter().find(|e| &e.1 == form) {
            assert_eq!(&pair, b);
        }
    }
}

#[test]
fn rejecting_verifier_empties_the_output() {
    let run = run_with_hooks(None, Some(NEVER_ENTAILED), &[]);
    assert_eq!(run.output.status.code(), Some(0), "{}", stderr(&run.output));
    for record in run.records() {
        assert!(record["statements"].as_array().unwrap().is_empty());
    }
    assert_eq!(run.report()["verified"], 0);
}

#[test]
fn unlaunchable_hook_exits_3() {
    let run = run_with_hooks(None, None, &["--generator", "cmd:/no/such/program"]);
    assert_eq!(run.output.status.code(), Some(3), "{}", stderr(&run.output));
    let run = run_with_hooks(None, None, &["--verifier", "nonsense"]);
    assert_eq!(run.output.status.code(), Some(1), "{}", stderr(&run.output));
}
