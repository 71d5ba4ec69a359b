use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

const BIN: &str = env!("CARGO_BIN_EXE_shapefuzz");

fn run(out: &Path, args: &[&str]) -> Output {
    Command::new(BIN)
        .arg("--out")
        .arg(out)
        .args(args)
        .env_remove("SHAPEFUZZ_OUT")
        .output()
        .expect("spawn shapefuzz")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn files(dir: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push(p.strip_prefix(dir).unwrap().to_path_buf());
            }
        }
    }
    out.sort();
    out
}

#[test]
fn usage_errors_exit_1() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(code(&run(tmp.path(), &["gen", "--bogus"])), 1);
    assert_eq!(code(&run(tmp.path(), &["--ops", "conv9d", "gen", "--n", "10"])), 1);
    assert_eq!(code(&run(tmp.path(), &["gen", "--strategy", "grid"])), 1);
    assert_eq!(code(&run(tmp.path(), &["train", "--split", "1.5"])), 1);
    let cfg = tmp.path().join("bad.toml");
    fs::write(&cfg, "unknown_key = 3\n").unwrap();
    assert_eq!(code(&run(tmp.path(), &["--config", cfg.to_str().unwrap(), "ops"])), 1);
    assert_eq!(code(&run(tmp.path(), &["--config", "/nonexistent/x.toml", "ops"])), 1);
}

#[test]
fn help_and_version_exit_0() {
    let tmp = tempfile::tempdir().unwrap();
    let help = run(tmp.path(), &["--help"]);
    assert_eq!(code(&help), 0);
    assert!(stdout(&help).contains("xcheck"));
    assert_eq!(code(&run(tmp.path(), &["--version"])), 0);
}

#[test]
fn missing_bridge_is_a_runtime_error() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(tmp.path(), &["xcheck", "--bridge", "/nonexistent/bridge", "--n", "3"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn ops_json_lists_every_operator() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(tmp.path(), &["ops", "--json"]);
    assert_eq!(code(&o), 0);
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    let names: Vec<&str> = v.as_array().unwrap().iter().map(|e| e["name"].as_str().unwrap()).collect();
    for want in ["bmm", "dot", "split", "max_pool2d", "addr", "top_k"] {
        assert!(names.contains(&want), "{want} missing from {names:?}");
    }
}

#[test]
fn gen_is_byte_identical_across_runs_and_output_dirs() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["--seed", "11", "--ops", "split,addr", "gen", "--n", "400"];
    assert_eq!(code(&run(a.path(), &args)), 0);
    assert_eq!(code(&run(b.path(), &args)), 0);
    let listing = files(a.path());
    assert_eq!(listing, files(b.path()));
    assert_eq!(listing.len(), 4);
    for f in &listing {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap(), "{}", f.display());
    }
    let c = tempfile::tempdir().unwrap();
    assert_eq!(code(&run(c.path(), &["--seed", "12", "--ops", "split,addr", "gen", "--n", "400"])), 0);
    let f = Path::new("datasets/split.pairwise.jsonl");
    assert_ne!(fs::read(a.path().join(f)).unwrap(), fs::read(c.path().join(f)).unwrap());
}

#[test]
fn dataset_header_and_rows_follow_the_documented_format() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(tmp.path(), &["--seed", "3", "--ops", "dot", "gen", "--strategy", "random", "--n", "5"]);
    assert_eq!(code(&o), 0);
    let text = fs::read_to_string(tmp.path().join("datasets/dot.random.jsonl")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 6);
    let header: Value = serde_json::from_str(lines[0]).unwrap();
    assert_eq!(header["format"], "shapefuzz-tuples");
    assert_eq!(header["version"], 1);
    assert_eq!(header["operator"], "dot");
    assert_eq!(header["strategy"], "random");
    assert_eq!(header["provenance"]["command"], "gen");
    assert_eq!(header["provenance"]["seed"], 3);
    assert_eq!(header["provenance"]["config_hash"].as_str().unwrap().len(), 16);
    for line in &lines[1..] {
        let row: Value = serde_json::from_str(line).unwrap();
        assert_eq!(row["op"], "dot");
        assert_eq!(row["args"].as_array().unwrap().len(), 2);
        let label = row["label"].as_str().unwrap();
        assert!(label == "valid" || label == "invalid");
        assert_eq!(row["args"][0]["kind"], "tensor");
    }
    let csv = fs::read_to_string(tmp.path().join("datasets/dot.random.csv")).unwrap();
    let mut csv_lines = csv.lines();
    assert!(csv_lines.next().unwrap().starts_with("# command=gen config_hash="));
    assert!(csv_lines.next().unwrap().ends_with(",label"));
    assert_eq!(csv_lines.count(), 5);
}

/// Drops wall-clock fields so reports can be compared byte for byte.
fn strip_timing(v: &mut Value) {
    match v {
        Value::Object(m) => {
            m.retain(|k, _| !(k.contains("seconds") || k.ends_with("time_s") || k.contains("per_second")));
            m.values_mut().for_each(strip_timing);
        }
        Value::Array(a) => a.iter_mut().for_each(strip_timing),
        _ => {}
    }
}

fn normalized_jsonl(path: &Path) -> Vec<Value> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| {
            let mut v: Value = serde_json::from_str(l).unwrap();
            strip_timing(&mut v);
            v
        })
        .collect()
}

#[test]
fn train_models_are_byte_identical_and_reports_match_without_timings() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["--seed", "5", "--ops", "top_k,dot", "train", "--n-train", "600", "--reps", "2"];
    let ra = run(a.path(), &args);
    assert_eq!(code(&ra), 0, "{}", String::from_utf8_lossy(&ra.stderr));
    assert_eq!(code(&run(b.path(), &args)), 0);
    for m in ["models/top_k.pairwise.json", "models/dot.pairwise.json", "reports/train.pairwise.csv"] {
        assert_eq!(fs::read(a.path().join(m)).unwrap(), fs::read(b.path().join(m)).unwrap(), "{m}");
    }
    let report = Path::new("reports/train.pairwise.jsonl");
    assert_eq!(normalized_jsonl(&a.path().join(report)), normalized_jsonl(&b.path().join(report)));
}

#[test]
fn low_support_operators_are_flagged() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(tmp.path(), &["--ops", "dot,top_k", "train", "--n-train", "500", "--reps", "1"]);
    assert_eq!(code(&o), 0);
    let out = stdout(&o);
    let dot = out.lines().find(|l| l.starts_with("dot")).unwrap();
    assert!(dot.contains("LOW_SUPPORT"), "{dot}");
    let csv = fs::read_to_string(tmp.path().join("reports/train.pairwise.csv")).unwrap();
    let row = csv.lines().find(|l| l.starts_with("dot,")).unwrap();
    assert!(row.ends_with(",LOW_SUPPORT"), "{row}");
    let top_k = csv.lines().find(|l| l.starts_with("top_k,")).unwrap();
    assert!(top_k.ends_with(','), "{top_k}");
}

#[test]
fn unmet_training_threshold_exits_3_after_writing_reports() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(
        tmp.path(),
        &["--ops", "top_k", "train", "--n-train", "300", "--reps", "1", "--min-precision", "1.01"],
    );
    assert_eq!(code(&o), 3);
    assert!(tmp.path().join("reports/train.pairwise.csv").exists());
    assert!(tmp.path().join("models/top_k.pairwise.json").exists());
}

#[test]
fn eval_scores_a_saved_model_on_a_dataset_file() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(code(&run(tmp.path(), &["--ops", "top_k", "gen", "--n", "800"])), 0);
    let ds = tmp.path().join("datasets/top_k.pairwise.jsonl");
    let o = run(tmp.path(), &["train", "--dataset", ds.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let model = tmp.path().join("models/top_k.pairwise.json");
    let o = run(tmp.path(), &["eval", "--model", model.to_str().unwrap(), "--dataset", ds.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let v: Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("reports/eval.top_k.json")).unwrap()).unwrap();
    assert_eq!(v["provenance"]["command"], "eval");
    assert!(v["eval"]["precision"].as_f64().unwrap() > 0.8);
    let o = run(tmp.path(), &["eval", "--model", "/nonexistent.json", "--dataset", ds.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
}

#[test]
fn fuzz_and_compare_write_reports() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(
        tmp.path(),
        &["--ops", "top_k,split,max_pool2d", "compare", "--n-train", "800", "--n", "300", "--no-cost"],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("wilcoxon"));
    let csv = fs::read_to_string(tmp.path().join("reports/compare.weak-partial.csv")).unwrap();
    assert!(csv.starts_with("# command=compare"));
    let o = run(tmp.path(), &["--ops", "top_k", "fuzz", "--n", "200", "--no-cost", "--mode", "filtered"]);
    assert_eq!(code(&o), 0);
    let lines = normalized_jsonl(&tmp.path().join("reports/fuzz.weak-partial.jsonl"));
    assert_eq!(lines.len(), 2);
}

#[test]
fn xcheck_against_the_stub_bridge() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(tmp.path(), &["xcheck", "--bridge", BIN, "--bridge-arg", "bridge-stub", "--n", "40", "--min-agreement", "1.0"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v: Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("reports/xcheck.json")).unwrap()).unwrap();
    assert_eq!(v["agreement"], 1.0);
    assert!(v["per_operator"].as_array().unwrap().len() >= 6);

    let o = run(
        tmp.path(),
        &[
            "--ops", "dot,split,top_k", "xcheck", "--bridge", BIN, "--bridge-arg", "bridge-stub",
            "--bridge-arg", "--flip", "--bridge-arg", "dot", "--bridge-arg", "--unsupported", "--bridge-arg", "split",
            "--n", "30", "--min-agreement", "0.9",
        ],
    );
    assert_eq!(code(&o), 3);
    let v: Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("reports/xcheck.json")).unwrap()).unwrap();
    let ops = v["per_operator"].as_array().unwrap();
    let get = |name: &str| ops.iter().find(|o| o["operator"] == name).unwrap();
    assert_eq!(get("dot")["agree"], 0);
    assert_eq!(get("dot")["disagreements"].as_array().unwrap().len(), 30);
    assert_eq!(get("split")["unsupported"], true);
    assert_eq!(get("split")["agreement"], Value::Null);
    assert_eq!(get("top_k")["agreement"], 1.0);
    assert_eq!(v["agreement"], 0.5);
}

#[test]
fn out_dir_falls_back_to_the_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let o = Command::new(BIN)
        .args(["--ops", "dot", "gen", "--n", "5", "--no-features"])
        .env("SHAPEFUZZ_OUT", tmp.path())
        .output()
        .unwrap();
    assert_eq!(code(&o), 0);
    assert!(tmp.path().join("datasets/dot.pairwise.jsonl").exists());
    assert!(!tmp.path().join("datasets/dot.pairwise.csv").exists());
}

#[test]
fn documented_dataset_example_is_current() {
    let docs = fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("../../docs/formats.md")).unwrap();
    let tmp = tempfile::tempdir().unwrap();
    let o = run(tmp.path(), &["--seed", "3", "--ops", "dot", "gen", "--strategy", "random", "--n", "3"]);
    assert_eq!(code(&o), 0);
    for f in ["datasets/dot.random.jsonl", "datasets/dot.random.csv"] {
        for line in fs::read_to_string(tmp.path().join(f)).unwrap().lines() {
            assert!(docs.contains(line), "docs/formats.md is missing `{line}`");
        }
    }
}
