// SPDX-License-Identifier: Apache-2.0

mod common;

use std::path::Path;
use std::process::{Command, Output};
use std::sync::OnceLock;

use common::*;
use serde_json::Value;
use tcforge::io::dataset::{self, DatasetRecord, FieldMap, Format};
use tcforge::refine::{LoopTrace, TerminationReason};

const CONFIG: &str = r#"
[loop]
generator_language = "python"
generator_limits = { time_ms = 5000, memory_mib = 512 }
checker_limits = { time_ms = 5000, memory_mib = 512 }

[sandbox]
workers = 4

[provider]
kind = "replay"
dir = "REPLAY"
"#;

/// Replies recorded once per test binary.
fn recordings() -> &'static Path {
    static DIR: OnceLock<tempfile::TempDir> = OnceLock::new();
    DIR.get_or_init(|| {
        let dir = tempfile::tempdir().unwrap();
        let sb = sandbox();
        let cfg = python_loop_config();
        for (p, script) in scripts(cfg.n_max) {
            let t = record(&sb, &cfg, &p, script, dir.path());
            assert!(t.error.is_none(), "{:?}", t.error);
        }
        dir
    })
    .path()
}

struct Fixture {
    dir: tempfile::TempDir,
}

impl Fixture {
    /// Native dataset of the three fixture problems plus recorded replies.
    fn new() -> Fixture {
        let dir = tempfile::tempdir().unwrap();
        let replay = recordings();
        let records: Vec<DatasetRecord> = fixture_problems().into_iter().map(DatasetRecord::ok).collect();
        dataset::export(&dir.path().join("in.jsonl"), &records).unwrap();
        std::fs::write(
            dir.path().join("config.toml"),
            CONFIG.replace("REPLAY", replay.to_str().unwrap()),
        )
        .unwrap();
        Fixture { dir }
    }

    fn path(&self, name: &str) -> std::path::PathBuf {
        self.dir.path().join(name)
    }

    fn run(&self, args: &[&str]) -> Output {
        let out = Command::new(env!("CARGO_BIN_EXE_tcforge"))
            .current_dir(self.dir.path())
            .arg("--config")
            .arg(self.path("config.toml"))
            .args(args)
            .output()
            .unwrap();
        if !out.status.success() {
            eprintln!("{}", String::from_utf8_lossy(&out.stderr));
        }
        out
    }
}

fn summary(out: &Path) -> Value {
    serde_json::from_slice(&std::fs::read(out.join("summary.json")).unwrap()).unwrap()
}

fn traces(out: &Path) -> Vec<LoopTrace> {
    let mut v: Vec<_> = std::fs::read_dir(out.join("traces"))
        .unwrap()
        .map(|e| LoopTrace::load(&e.unwrap().path()).unwrap())
        .collect();
    v.sort_by(|a, b| a.problem_id.cmp(&b.problem_id));
    v
}

#[test]
fn n_max_zero_gives_initial_iteration_only() {
    let f = Fixture::new();
    let out = f.run(&["run", "-i", "in.jsonl", "-o", "out", "--n-max", "0"]);
    assert!(out.status.success());
    let ts = traces(&f.path("out"));
    assert_eq!(ts.len(), 3);
    for t in &ts {
        assert_eq!(t.snapshots.len(), 1, "{}", t.problem_id);
        assert_eq!(t.llm_calls, 1);
    }
    let s = summary(&f.path("out"));
    assert_eq!(s["problems"], 3);
    assert_eq!(s["llm_calls"], 3);
    let ingest = dataset::read_all(&f.path("out/dataset.jsonl"), Format::Native, &FieldMap::default()).unwrap();
    assert_eq!(ingest.records.len(), 3);
}

#[test]
fn full_run_then_resume_does_no_work() {
    let f = Fixture::new();
    assert!(f.run(&["run", "-i", "in.jsonl", "-o", "out", "--workers", "3"]).status.success());
    let first = traces(&f.path("out"));
    let by_id = |id: &str| first.iter().find(|t| t.problem_id == id).unwrap();
    assert_eq!(by_id("sum").termination, TerminationReason::ThresholdsMet);
    assert_eq!(by_id("max").snapshots.len(), 3);
    assert_eq!(by_id("divisor").termination, TerminationReason::IterationCap);
    assert_eq!(by_id("divisor").snapshots.len(), 4);
    let s = summary(&f.path("out"));
    assert!(s["sandbox_runs"].as_u64().unwrap() > 0);

    assert!(f.run(&["run", "-i", "in.jsonl", "-o", "out", "--resume"]).status.success());
    let s = summary(&f.path("out"));
    assert_eq!(s["llm_calls"], 0);
    assert_eq!(s["sandbox_runs"], 0);
    assert_eq!(s["resumed"], 3);
    assert_eq!(traces(&f.path("out")), first);
}

#[test]
fn generate_then_refine_adds_one_iteration() {
    let f = Fixture::new();
    assert!(f.run(&["generate", "-i", "in.jsonl", "-o", "out"]).status.success());
    assert!(traces(&f.path("out")).iter().all(|t| t.snapshots.len() == 1));
    assert!(f.run(&["refine", "-i", "in.jsonl", "-o", "out"]).status.success());
    let ts = traces(&f.path("out"));
    let max = ts.iter().find(|t| t.problem_id == "max").unwrap();
    assert_eq!(max.snapshots.len(), 2, "{:?}", max.error);
}

#[test]
fn analytics_commands_emit_csv() {
    let f = Fixture::new();
    assert!(f.run(&["run", "-i", "in.jsonl", "-o", "out"]).status.success());

    let out = f.run(&["pareto", "--input", "out/traces"]);
    assert!(out.status.success());
    let csv = String::from_utf8(out.stdout).unwrap();
    assert!(csv.starts_with("label,k,tpr,tnr\n"), "{csv}");
    assert!(csv.lines().any(|l| l.starts_with("dataset,")));

    let out = f.run(&["report", "--traces", "out/traces", "-o", "progress.csv"]);
    assert!(out.status.success());
    let csv = std::fs::read_to_string(f.path("progress.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("iteration,tpr,tnr"));
    assert_eq!(csv.lines().count(), 5);

    let out = f.run(&["evaluate", "-i", "out/dataset.jsonl", "-o", "eval.json"]);
    assert!(out.status.success());
    let exports: Value = serde_json::from_slice(&std::fs::read(f.path("eval.json")).unwrap()).unwrap();
    assert_eq!(exports.as_array().unwrap().len(), 3);
    let out = f.run(&["pareto", "--input", "eval.json"]);
    assert!(out.status.success());
}

#[test]
fn usage_and_input_errors_are_categorized() {
    let f = Fixture::new();
    assert_eq!(f.run(&["evaluate"]).status.code(), Some(2));
    assert_eq!(f.run(&["launch"]).status.code(), Some(2));
    assert_eq!(f.run(&["run", "-i", "missing.jsonl", "-o", "out"]).status.code(), Some(4));
    std::fs::write(f.path("bad.toml"), "[loop]\nalpah = 1").unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_tcforge"))
        .args(["--config", f.path("bad.toml").to_str().unwrap(), "report", "--traces", "x"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
}

const CC_LINES: &str = concat!(
    r#"{"name":"good","description":"Print the sum of a and b.\n\nInput\nTwo integers a and b on one line.\n\nOutput\nTheir sum.","public_tests":{"input":["1 2\n"],"output":["3\n"]},"solutions":{"language":[3,3],"solution":["a,b=map(int,input().split())\nprint(a+b)\n","print(sum(map(int,input().split()))\n"]},"incorrect_solutions":{"language":[3,3],"solution":["print(0)\n","raise SystemExit(1)\n"]},"time_limit":{"seconds":2,"nanos":0},"memory_limit_bytes":268435456,"cf_rating":800,"source_meta":{"round": 12, "notes": [1, 2.50, "x"]}}"#,
    "\n",
    r#"{"name":"inter","description":"This is an interactive problem.\n\nInput\nQueries.\n\nOutput\nAnswers after you flush the output.","public_tests":{"input":["1\n"],"output":["1\n"]},"solutions":{"language":[3],"solution":["print(1)\n"]},"incorrect_solutions":{"language":[],"solution":[]}}"#,
    "\n",
    "{\"name\": \"broken\n"
);

#[test]
fn curate_keeps_metadata_byte_for_byte() {
    let f = Fixture::new();
    std::fs::write(f.path("cc.jsonl"), CC_LINES).unwrap();
    let out = f.run(&["curate", "-i", "cc.jsonl", "-o", "curated.jsonl", "--report", "report.json"]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("skipped 1 malformed"));
    let text = std::fs::read_to_string(f.path("curated.jsonl")).unwrap();
    assert!(text.contains(r#""source_meta":{"round": 12, "notes": [1, 2.50, "x"]}"#), "{text}");
    let ingest = dataset::read_all(&f.path("curated.jsonl"), Format::Native, &FieldMap::default()).unwrap();
    let good = ingest.records.iter().find(|r| r.record.problem.id == "good").unwrap();
    assert_eq!(good.record.status, dataset::RecordStatus::Ok);
    assert_eq!(good.record.problem.correct_pool.len(), 1);
    assert!(!good.record.problem.correct_pool[0].alive, "syntax error must be dead");
    assert!(good.record.problem.incorrect_pool[0].alive);
    assert!(!good.record.problem.incorrect_pool[1].alive);
    let inter = ingest.records.iter().find(|r| r.record.problem.id == "inter").unwrap();
    assert_eq!(inter.record.status, dataset::RecordStatus::Rejected);
    assert_eq!(inter.record.error.as_deref(), Some("interactive"));
    let report: Value = serde_json::from_slice(&std::fs::read(f.path("report.json")).unwrap()).unwrap();
    assert_eq!(report["kept"], 1);
    assert_eq!(report["rejected"]["interactive"], 1);
}
