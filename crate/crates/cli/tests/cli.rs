use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const DATA: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/../../data");

fn netprune(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_netprune")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn gradcheck_passes_and_reports_error() {
    let out = netprune(&["gradcheck", "--seed", "42"]);
    assert!(out.status.success());
    assert!(stdout(&out).starts_with("max relative error"));
}

#[test]
fn gradcheck_fails_with_a_coarse_step() {
    let out = netprune(&["gradcheck", "--seed", "42", "--step", "0.5"]);
    assert!(!out.status.success());
}

#[test]
fn usage_errors_exit_nonzero() {
    assert!(!netprune(&["run", "--bogus"]).status.success());
    assert!(!netprune(&["export-dot", "--net", "/nonexistent/net.json"]).status.success());
    let out = netprune(&["run", "--config", "/nonexistent/cfg.toml"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));
}

#[test]
fn export_dot_prints_digraph() {
    let dir = tempfile::tempdir().unwrap();
    let net = dir.path().join("net.json");
    fs::write(
        &net,
        r#"{"n":2,"h":1,"o":1,"w":[0.5,0.0],"v":[1.0],
            "w_mask":[true,false],"v_mask":[true],
            "input_active":[true,true],"hidden_active":[true]}"#,
    )
    .unwrap();
    let out = netprune(&["export-dot", "--net", path(&net)]);
    assert!(out.status.success());
    let dot = stdout(&out);
    assert!(dot.starts_with("digraph"));
    assert_eq!(dot.matches(" -> ").count(), 3);
    assert_eq!(dot.matches("dashed").count(), 1);
}

#[test]
fn train_eval_prune_chain() {
    let dir = tempfile::tempdir().unwrap();
    let data = format!("{DATA}/breast-cancer-wisconsin.data");
    let full = dir.path().join("full.json");
    let telemetry = dir.path().join("train.csv");
    let common = ["--dataset", "cancer1", "--data", &data, "--split-seed", "3"];

    let mut args = vec!["train"];
    args.extend(common);
    args.extend(["--hidden", "3", "--epochs", "20", "--out", path(&full), "--trace", path(&telemetry)]);
    let out = netprune(&args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(fs::read_to_string(&telemetry).unwrap().lines().count(), 21);

    let mut args = vec!["eval"];
    args.extend(common);
    args.extend(["--net", path(&full)]);
    let out = netprune(&args);
    assert!(out.status.success());
    assert!(stdout(&out).contains("test"));

    let small = dir.path().join("small.json");
    let trace = dir.path().join("trace.jsonl");
    let mut args = vec!["prune"];
    args.extend(common);
    args.extend(["--net", path(&full), "--out", path(&small), "--trace", path(&trace)]);
    let out = netprune(&args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let log = fs::read_to_string(&trace).unwrap();
    assert!(log.lines().count() >= 1);
    assert!(log.lines().all(|l| l.starts_with('{')));

    let out = netprune(&["export-dot", "--net", path(&small)]);
    assert!(out.status.success());
    assert!(stdout(&out).contains("label=\"bias\""));
}

#[test]
fn run_is_byte_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.toml");
    fs::write(
        &cfg,
        format!(
            "dataset = \"glass\"\ndata_path = \"{DATA}/glass.data\"\nsplit_seeds = [2, 1]\n\
             [network]\nhidden = 4\n[train]\nepochs = 15\n[prune]\nmax_restarts = 0\n"
        ),
    )
    .unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let ra = netprune(&["run", "--config", path(&cfg), "--out", path(&a), "--jobs", "2", "--trace"]);
    let rb = netprune(&["run", "--config", path(&cfg), "--out", path(&b)]);
    assert!(ra.status.success(), "{}", String::from_utf8_lossy(&ra.stderr));
    assert!(rb.status.success());
    assert_eq!(fs::read_to_string(a.join("report.json")).unwrap(), fs::read_to_string(b.join("report.json")).unwrap());
    assert!(a.join("seed-1/telemetry.csv").exists());
    assert!(!b.join("seed-1/telemetry.csv").exists());
    for f in ["full.json", "simplified.json", "trace.jsonl", "simplified.dot"] {
        assert!(b.join("seed-2").join(f).exists(), "{f}");
    }
    // Seeds are reported in ascending order whatever the config order.
    let report = fs::read_to_string(a.join("report.json")).unwrap();
    assert!(report.find("\"split_seed\": 1").unwrap() < report.find("\"split_seed\": 2").unwrap());
    assert!(stdout(&ra).contains("dataset: glass"));
}
