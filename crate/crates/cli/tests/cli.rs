use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn domnet(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_domnet"))
        .args(args)
        .env_remove("DOMNET_LOG")
        .output()
        .unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = domnet(args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

/// Asserts the failure contract: given exit code, one JSON line on stderr.
fn fails(args: &[&str], code: i32) -> serde_json::Value {
    let out = domnet(args);
    assert_eq!(
        out.status.code(),
        Some(code),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert_eq!(stderr.lines().count(), 1, "{stderr}");
    serde_json::from_str(stderr.trim()).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path
}

const TINY_GIN: &str = r#"{
  "data": "er.jsonl",
  "split": {"test_frac": 0.2, "seed": 3},
  "train": {"model": "gin", "hidden": 8, "max_epochs": 4, "patience": 2, "batch_size": 8, "seed": 1}
}"#;

#[test]
fn solve_path_graph() {
    let out = ok(&["solve", "--edges", "0-1,1-2,2-3"]);
    assert!(out.starts_with("gamma 2\n"), "{out}");
    let json: serde_json::Value = serde_json::from_str(&ok(&["solve", "--edges", "0-1,1-2,2-3", "--json"])).unwrap();
    assert_eq!(json["gamma"], 2);
    assert_eq!(json["witness"].as_array().unwrap().len(), 2);
}

#[test]
fn solve_reads_edge_list_files_and_isolated_vertices() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("c5.txt");
    std::fs::write(&file, "# 5-cycle\n0 1\n1 2\n2-3\n3 4\n\n4 0\n").unwrap();
    assert!(ok(&["solve", "--graph", p(&file)]).starts_with("gamma 2\n"));
    assert!(ok(&["solve", "--graph", p(&file), "--n", "7"]).starts_with("gamma 4\n"));
}

#[test]
fn bad_inputs_fail_with_one_line_errors() {
    assert_eq!(fails(&["solve", "--edges", "0-0"], 2)["error"], "usage");
    assert_eq!(fails(&["solve", "--edges", "0-1,a-b"], 3)["error"], "data");
    fails(&["solve", "--edges", "0-5", "--n", "3"], 3);
    fails(&["solve", "--edges", "0-1", "--frobnicate"], 2);
    fails(&["solve"], 2);
    fails(&["solve", "--graph", "/nonexistent/graph.txt"], 3);
    let budget = fails(&["solve", "--edges", "0-1,2-3,4-5,0-2,2-4,1-3,3-5", "--budget", "0"], 4);
    assert_eq!(budget["error"], "resource");
}

#[test]
fn generate_count_zero_leaves_no_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x.jsonl");
    let err = fails(
        &[
            "generate",
            "--family",
            "er",
            "--count",
            "0",
            "--seed",
            "1",
            "--out",
            p(&out),
        ],
        2,
    );
    assert!(err["message"].as_str().unwrap().contains("count"));
    assert!(!out.exists());
    assert_eq!(
        std::fs::read_dir(dir.path()).unwrap().count(),
        0,
        "no temp files left behind"
    );
    fails(
        &[
            "generate",
            "--family",
            "xx",
            "--count",
            "3",
            "--seed",
            "1",
            "--out",
            p(&out),
        ],
        2,
    );
}

#[test]
fn generate_is_byte_identical_across_runs_and_jobs() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.jsonl"), dir.path().join("b.jsonl"));
    let args = |out: &Path, jobs: &str| {
        ok(&[
            "generate",
            "--family",
            "ba",
            "--count",
            "30",
            "--seed",
            "5",
            "--n-max",
            "30",
            "--jobs",
            jobs,
            "--out",
            p(out),
        ])
    };
    args(&a, "1");
    args(&b, "3");
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_eq!(ok(&["verify", "--data", p(&a)]).trim(), {
        let text = std::fs::read_to_string(&a).unwrap();
        let small = text.lines().filter(|l| {
            let v: serde_json::Value = serde_json::from_str(l).unwrap();
            v["n"].as_u64().unwrap() <= 14
        });
        format!("checked {} skipped {}", small.clone().count(), 30 - small.count())
    });
}

#[test]
fn verify_detects_tampering() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("er.jsonl");
    ok(&[
        "generate",
        "--family",
        "er",
        "--count",
        "10",
        "--seed",
        "2",
        "--n-max",
        "12",
        "--out",
        p(&data),
    ]);
    let text = std::fs::read_to_string(&data).unwrap();
    let mut lines: Vec<serde_json::Value> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    let g = lines[4]["gamma"].as_u64().unwrap();
    lines[4]["gamma"] = serde_json::json!(if g > 1 { g - 1 } else { g + 1 });
    let tampered: String = lines.iter().map(|v| format!("{v}\n")).collect();
    std::fs::write(&data, tampered).unwrap();
    assert_eq!(fails(&["verify", "--data", p(&data)], 3)["error"], "data");
    fails(&["verify", "--data", p(&data), "--exact"], 3);

    std::fs::write(&data, "{\"id\":1}\n").unwrap();
    let err = fails(&["verify", "--data", p(&data)], 3);
    assert!(err["message"].as_str().unwrap().contains("line 1"));
}

#[test]
fn train_then_eval_reproduces_validation_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("er.jsonl");
    ok(&[
        "generate",
        "--family",
        "er",
        "--count",
        "80",
        "--seed",
        "4",
        "--n-max",
        "9",
        "--out",
        p(&data),
    ]);
    let cfg = write_config(dir.path(), "exp.json", TINY_GIN);
    let ck = dir.path().join("gin.json");
    let table = ok(&["train", "--config", p(&cfg), "--out", p(&ck)]);
    assert!(table.contains("validation") && table.contains("test"));
    let history = std::fs::read_to_string(dir.path().join("gin.json.history.csv")).unwrap();
    assert!(history.starts_with("epoch,train_loss,val_mae\n"));

    let meta: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&ck).unwrap()).unwrap();
    let recorded = &meta["meta"]["train"]["val"];
    let report: serde_json::Value = serde_json::from_str(&ok(&[
        "eval",
        "--model",
        p(&ck),
        "--data",
        p(&data),
        "--split",
        "val",
        "--json",
    ]))
    .unwrap();
    for key in ["mae", "rmse", "r2"] {
        let (a, b) = (report[key].as_f64().unwrap(), recorded[key].as_f64().unwrap());
        assert!((a - b).abs() < 1e-9, "{key}: {a} vs {b}");
    }
    assert_eq!(report["n_eval"], recorded["n_eval"]);

    let out = dir.path().join("report.json");
    let text = ok(&[
        "eval",
        "--model",
        p(&ck),
        "--data",
        p(&data),
        "--buckets",
        "--out",
        p(&out),
    ]);
    assert!(text.contains("5-20 vertices"), "{text}");
    let all: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(all["n_eval"], 80);
}

#[test]
fn config_files_are_validated() {
    let dir = tempfile::tempdir().unwrap();
    let ck = dir.path().join("m.json");
    for body in [
        r#"{"data": "er.jsonl", "train": {"model": "gin"}, "extra": 1}"#,
        r#"{"data": "er.jsonl", "train": {"model": "gin", "lr_typo": 1}}"#,
        r#"{"train": {"model": "gin"}}"#,
        r#"{"data": "a", "generate": {"family": "er", "count": 3, "seed": 1}, "train": {"model": "gin"}}"#,
        "not json",
    ] {
        let cfg = write_config(dir.path(), "bad.json", body);
        fails(&["train", "--config", p(&cfg), "--out", p(&ck)], 2);
    }
    let cfg = write_config(
        dir.path(),
        "missing.json",
        r#"{"data": "nope.jsonl", "train": {"model": "gin"}}"#,
    );
    fails(&["train", "--config", p(&cfg), "--out", p(&ck)], 3);
    assert!(!ck.exists());
}

#[test]
fn experiment_subcommands_run_on_tiny_data() {
    let dir = tempfile::tempdir().unwrap();
    let (er, ba) = (dir.path().join("er.jsonl"), dir.path().join("ba.jsonl"));
    ok(&[
        "generate",
        "--family",
        "er",
        "--count",
        "60",
        "--seed",
        "6",
        "--n-max",
        "9",
        "--out",
        p(&er),
    ]);
    ok(&[
        "generate",
        "--family",
        "ba",
        "--count",
        "60",
        "--seed",
        "6",
        "--n-max",
        "9",
        "--out",
        p(&ba),
    ]);
    let cfg_er = write_config(dir.path(), "er.json", TINY_GIN);
    let cfg_ba = write_config(dir.path(), "ba.json", &TINY_GIN.replace("er.jsonl", "ba.jsonl"));
    let (ck_er, ck_ba) = (dir.path().join("er_gin.json"), dir.path().join("ba_gin.json"));
    ok(&["train", "--config", p(&cfg_er), "--out", p(&ck_er)]);
    ok(&["train", "--config", p(&cfg_ba), "--out", p(&ck_ba), "--max-epochs", "3"]);

    let grid: serde_json::Value = serde_json::from_str(&ok(&[
        "crossdomain",
        "--model-er",
        p(&ck_er),
        "--model-ba",
        p(&ck_ba),
        "--data-er",
        p(&er),
        "--data-ba",
        p(&ba),
        "--json",
    ]))
    .unwrap();
    assert_eq!(grid["cells"].as_array().unwrap().len(), 2);

    let ablation = ok(&["ablate", "--config", p(&cfg_er)]);
    assert!(ablation.contains("Mean Pooling Only"));
    let sweep = ok(&["grid", "--config", p(&cfg_er), "--widths", "4,8"]);
    assert_eq!(sweep.matches('*').count(), 1, "{sweep}");

    let n64 = dir.path().join("n20.jsonl");
    ok(&[
        "generate",
        "--family",
        "er",
        "--count",
        "3",
        "--seed",
        "1",
        "--n-min",
        "20",
        "--n-max",
        "20",
        "--out",
        p(&n64),
    ]);
    let bench: serde_json::Value = serde_json::from_str(&ok(&[
        "bench",
        "--data",
        p(&n64),
        "--trials",
        "1",
        "--gin",
        p(&ck_er),
        "--json",
    ]))
    .unwrap();
    let methods: Vec<&str> = bench["methods"]
        .as_array()
        .unwrap()
        .iter()
        .map(|m| m["method"].as_str().unwrap())
        .collect();
    assert_eq!(methods, ["exact", "cnn", "gin"]);
    fails(&["bench", "--data", p(&er), "--trials", "1"], 2);
}

#[test]
fn every_subcommand_documents_its_flags() {
    let cases: [(&str, &[&str]); 9] = [
        (
            "generate",
            &[
                "--family", "--count", "--seed", "--out", "--jobs", "--n-min", "--n-max", "--budget",
            ],
        ),
        ("solve", &["--graph", "--edges", "--n", "--budget", "--json"]),
        ("train", &["--config", "--out", "--history", "--seed", "--max-epochs"]),
        (
            "eval",
            &["--model", "--data", "--split", "--buckets", "--out", "--json"],
        ),
        ("ablate", &["--config", "--out"]),
        ("grid", &["--config", "--widths"]),
        ("bench", &["--data", "--trials", "--cnn", "--gin"]),
        (
            "crossdomain",
            &["--model-er", "--model-ba", "--data-er", "--data-ba", "--split"],
        ),
        ("verify", &["--data", "--max-n", "--exact"]),
    ];
    for (cmd, flags) in cases {
        let help = ok(&[cmd, "--help"]);
        for flag in flags {
            assert!(help.contains(flag), "{cmd} --help lacks {flag}");
        }
    }
}
