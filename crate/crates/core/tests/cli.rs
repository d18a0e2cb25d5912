use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const THREE_STREAMS: &str = r#"{"switches":4,"streams":[
  {"id":"s1","src_switch":1,"dst_switch":4,"period":2},
  {"id":"s2","src_switch":1,"dst_switch":2,"period":2},
  {"id":"s3","src_switch":2,"dst_switch":4,"period":2,"owner":"car 3"}]}"#;

const OVERLOAD: &str = r#"{"switches":4,"streams":[
  {"id":"s1","src_switch":1,"dst_switch":4,"period":2},
  {"id":"s2","src_switch":1,"dst_switch":3,"period":2},
  {"id":"s3","src_switch":2,"dst_switch":4,"period":1}]}"#;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_chainsched"))
        .args(args)
        .output()
        .unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_owned()
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn check_feasible_and_infeasible() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["check", &write(dir.path(), "three.json", THREE_STREAMS)]);
    assert_eq!(code(&out), 0);
    assert_eq!(stdout_json(&out)["verdict"], "feasible");

    let out = run(&["check", &write(dir.path(), "bad.json", OVERLOAD)]);
    assert_eq!(code(&out), 2);
    let v = stdout_json(&out);
    assert_eq!(v["verdict"], "infeasible");
    assert_eq!(v["witness"]["link"], 2);
    assert_eq!(v["witness"]["load"], 4);
    assert_eq!(v["witness"]["capacity"], 2);
}

#[test]
fn schedule_then_validate() {
    let dir = tempfile::tempdir().unwrap();
    let inst = write(dir.path(), "three.json", THREE_STREAMS);
    let sched = dir.path().join("s.json");
    let out = run(&["schedule", &inst, "--out", sched.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let doc: Value = serde_json::from_str(&fs::read_to_string(&sched).unwrap()).unwrap();
    assert_eq!(doc["format_version"], 1);
    assert_eq!(doc["stream_metadata"]["s3"]["owner"], "car 3");

    let out = run(&["validate", &inst, sched.to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    assert_eq!(stdout_json(&out)["verdict"], "pass");
}

#[test]
fn validate_reports_conflict() {
    let dir = tempfile::tempdir().unwrap();
    let inst = write(dir.path(), "three.json", THREE_STREAMS);
    let bad = r#"{"hyperperiod":2,"direction":"ltr","entries":[
      {"stream":"s1","replication":1,"injection_time":1},
      {"stream":"s2","replication":1,"injection_time":1},
      {"stream":"s3","replication":1,"injection_time":3}]}"#;
    let out = run(&["validate", &inst, &write(dir.path(), "bad.json", bad)]);
    assert_eq!(code(&out), 3);
    let v = stdout_json(&out);
    assert_eq!(v["verdict"], "fail");
    assert_eq!(v["violations"][0]["kind"], "port-conflict");
    assert_eq!(v["violations"][0]["link"], 1);
    assert_eq!(v["violations"][0]["slot"], 1);

    let good = bad.replace(
        r#""s2","replication":1,"injection_time":1"#,
        r#""s2","replication":1,"injection_time":2"#,
    );
    let out = run(&["validate", &inst, &write(dir.path(), "good.json", &good)]);
    assert_eq!(code(&out), 0);
}

#[test]
fn input_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "check",
        &write(dir.path(), "m.json", "{\n  \"switches\": 4,\n  oops\n}"),
    ]);
    assert_eq!(code(&out), 1);
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 3"), "{err}");
    assert!(err.contains("column"), "{err}");

    let zero = THREE_STREAMS.replace(r#""period":2,"owner""#, r#""period":0,"owner""#);
    let out = run(&["check", &write(dir.path(), "z.json", &zero)]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("s3"));

    let odd = THREE_STREAMS.replace(r#""period":2,"owner""#, r#""period":3,"owner""#);
    let path = write(dir.path(), "odd.json", &odd);
    assert_eq!(code(&run(&["check", &path])), 0);
    assert_eq!(
        code(&run(&["--period-policy", "reject", "check", &path])),
        1
    );

    assert_eq!(code(&run(&["check"])), 1);
    assert_eq!(code(&run(&["frobnicate"])), 1);
    assert_eq!(code(&run(&["check", "/nonexistent/x.json"])), 1);
    assert_eq!(code(&run(&["--format-version", "9", "check", &path])), 1);
    assert_eq!(code(&run(&["--help"])), 0);
}

#[test]
fn oracle_subcommand() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["oracle", &write(dir.path(), "three.json", THREE_STREAMS)]);
    assert_eq!(code(&out), 0);
    assert_eq!(stdout_json(&out)["outcome"], "found");
    let bad = write(dir.path(), "bad.json", OVERLOAD);
    let out = run(&["oracle", &bad]);
    assert_eq!(code(&out), 2);
    assert_eq!(stdout_json(&out)["outcome"], "exhausted-infeasible");
    let out = run(&["oracle", &bad, "--budget", "1"]);
    assert_eq!(code(&out), 4);
    assert_eq!(code(&run(&["oracle", &bad, "--budget", "0"])), 1);
}

#[test]
fn schedule_refuses_infeasible() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["schedule", &write(dir.path(), "bad.json", OVERLOAD)]);
    assert_eq!(code(&out), 2);
    assert!(out.stdout.is_empty());
}

#[test]
fn gen_schedule_validate_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    for (seed, model) in [("1", "hub"), ("2", "uniform"), ("3", "hub")] {
        let inst = dir.path().join(format!("g{seed}.json"));
        let inst = inst.to_str().unwrap();
        let out = run(&[
            "gen",
            "--switches",
            "12",
            "--streams",
            "300",
            "--periods",
            "8,9,10",
            "--model",
            model,
            "--feasible-only",
            "--seed",
            seed,
            "--out",
            inst,
        ]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
        let sched = dir.path().join(format!("s{seed}.json"));
        assert_eq!(
            code(&run(&[
                "schedule",
                inst,
                "--with-hops",
                "--out",
                sched.to_str().unwrap()
            ])),
            0
        );
        assert_eq!(code(&run(&["validate", inst, sched.to_str().unwrap()])), 0);
    }
}

#[test]
fn gen_exhaustion_is_an_error() {
    let out = run(&[
        "gen",
        "--switches",
        "2",
        "--streams",
        "5",
        "--periods",
        "0",
        "--feasible-only",
        "--max-attempts",
        "3",
    ]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("attempts"));
}

#[test]
fn gantt_and_gcl_files() {
    let dir = tempfile::tempdir().unwrap();
    let inst = write(dir.path(), "three.json", THREE_STREAMS);
    let svg = dir.path().join("g.svg");
    let gcl = dir.path().join("gcl.json");
    let out = run(&[
        "schedule",
        &inst,
        "--out",
        "-",
        "--gantt",
        svg.to_str().unwrap(),
        "--format",
        "svg",
        "--gcl",
        gcl.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0);
    assert!(fs::read_to_string(&svg).unwrap().starts_with("<svg"));
    let table: Value = serde_json::from_str(&fs::read_to_string(&gcl).unwrap()).unwrap();
    // three links, two directions
    assert_eq!(table["ports"].as_array().unwrap().len(), 6);
    assert_eq!(table["ports"][0]["entries"][0]["gates"], "11111111");
}
