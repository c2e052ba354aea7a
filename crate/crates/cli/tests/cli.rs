use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn cgegnn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cgegnn"))
        .args(args)
        .env_remove(cgegnn_cli::SEED_ENV)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = cgegnn(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn code(args: &[&str]) -> i32 {
    cgegnn(args).status.code().expect("exit code")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn gen_hull(dir: &Path, seed: &str) {
    ok(&["gen", "hull3d", "--samples", "30", "--seed", seed, "--out", path(dir)]);
}

#[test]
fn gen_writes_splits_and_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("hull");
    let line = ok(&["gen", "hull3d", "--nodes", "6", "--samples", "12", "--seed", "7", "--out", path(&dir)]);
    let json: serde_json::Value = serde_json::from_str(line.trim()).unwrap();
    assert_eq!(json["count"], 12);
    for split in ["train", "val", "test"] {
        let text = fs::read_to_string(dir.join(format!("{split}.jsonl"))).unwrap();
        assert_eq!(text.lines().count(), 4);
    }
    assert!(dir.join("manifest.json").exists());
}

#[test]
fn gen_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for dir in [&a, &b] {
        ok(&["gen", "nbody", "--samples", "9", "--seed", "3", "--out", path(dir)]);
    }
    for file in ["train.jsonl", "val.jsonl", "test.jsonl", "manifest.json"] {
        assert_eq!(fs::read(a.join(file)).unwrap(), fs::read(b.join(file)).unwrap(), "{file}");
    }
}

#[test]
fn usage_errors_exit_with_2() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(code(&["gen", "hull3d"]), 2);
    assert_eq!(code(&["gen", "cubes", "--out", path(tmp.path())]), 2);
    assert_eq!(code(&["gen", "hull3d", "--particles", "3", "--out", path(tmp.path())]), 2);
    let data = tmp.path().join("data");
    gen_hull(&data, "1");
    let ckpt = tmp.path().join("m.ckpt");
    let train = |extra: &[&str]| {
        let mut args = vec!["train", "--data", path(&data), "--out", path(&ckpt), "--max-iters", "2"];
        args.extend_from_slice(extra);
        code(&args)
    };
    assert_eq!(train(&["--orders", "0"]), 2);
    assert_eq!(train(&["--layers", "0"]), 2);
    assert_eq!(train(&["--lr", "-1"]), 2);
    let cfg = tmp.path().join("bad.cfg");
    fs::write(&cfg, "learning_rate = 0.1\n").unwrap();
    assert_eq!(train(&["--config", path(&cfg)]), 2);
    assert_eq!(code(&["check", "algebra", "--ckpt", path(&ckpt)]), 2);
}

#[test]
fn missing_files_exit_with_3() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    gen_hull(&data, "2");
    let missing = tmp.path().join("missing.ckpt");
    assert_eq!(code(&["eval", "--ckpt", path(&missing), "--data", path(&data)]), 3);
    let garbage = tmp.path().join("garbage.ckpt");
    fs::write(&garbage, b"not a checkpoint").unwrap();
    assert_eq!(code(&["eval", "--ckpt", path(&garbage), "--data", path(&data)]), 3);
    let ckpt = tmp.path().join("m.ckpt");
    let nowhere = tmp.path().join("nowhere");
    assert_eq!(
        code(&["train", "--data", path(&nowhere), "--out", path(&ckpt)]),
        3
    );
}

#[test]
fn train_eval_and_report() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    gen_hull(&data, "4");
    let runs = tmp.path().join("runs");
    let cfg = tmp.path().join("small.cfg");
    fs::write(
        &cfg,
        "# tiny model\nchannels = 2\nlayers = 1\nmlp_blocks = 1\nmax_iters = 4\neval_interval = 2\nbatch_size = 4\n",
    )
    .unwrap();
    for (model, orders) in [("cgegnn", "1,2"), ("gnn", "1")] {
        for seed in ["0", "1"] {
            let ckpt = runs.join(format!("{model}-{seed}.ckpt"));
            let line = ok(&[
                "train", "--config", path(&cfg), "--data", path(&data), "--out", path(&ckpt),
                "--model", model, "--orders", orders, "--max-order", "2", "--seed", seed,
            ]);
            let json: serde_json::Value = serde_json::from_str(line.trim()).unwrap();
            let label = if model == "gnn" { "GNN" } else { "CG-EGNN-1-2" };
            assert_eq!(json["model"], label);
            assert!(runs.join(format!("{model}-{seed}.ckpt.metrics.csv")).exists());
            let eval = ok(&["eval", "--ckpt", path(&ckpt), "--data", path(&data), "--split", "train"]);
            let json: serde_json::Value = serde_json::from_str(eval.trim()).unwrap();
            assert_eq!(json["samples"], 10);
            assert!(json["mse"].as_f64().unwrap().is_finite());
        }
    }
    let table = tmp.path().join("table.csv");
    ok(&["report", "--runs", path(&runs), "--out", path(&table)]);
    let text = fs::read_to_string(&table).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("model,mean_mse,std_mse,seeds"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 2);
    assert!(rows.iter().all(|r| r.ends_with(",2")));
}

#[test]
fn seed_falls_back_to_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let run = |dir: &Path, env_seed: Option<&str>| {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_cgegnn"));
        cmd.args(["gen", "hull3d", "--samples", "6", "--out", path(dir)]);
        match env_seed {
            Some(s) => cmd.env(cgegnn_cli::SEED_ENV, s),
            None => cmd.env_remove(cgegnn_cli::SEED_ENV),
        };
        assert!(cmd.output().unwrap().status.success());
        fs::read(dir.join("train.jsonl")).unwrap()
    };
    let from_env = run(&tmp.path().join("a"), Some("5"));
    let explicit_dir = tmp.path().join("b");
    ok(&["gen", "hull3d", "--samples", "6", "--seed", "5", "--out", path(&explicit_dir)]);
    assert_eq!(from_env, fs::read(explicit_dir.join("train.jsonl")).unwrap());
    assert_ne!(from_env, run(&tmp.path().join("c"), None));
}

#[test]
fn quick_property_checks_pass() {
    let out = ok(&["check", "algebra", "--trials", "50"]);
    assert!(out.starts_with("PASS"));
    let out = ok(&["check", "universality", "--K", "2", "--M", "2", "--d", "1", "--trials", "10"]);
    assert!(out.starts_with("PASS"));
    let out = ok(&["check", "equivariance", "--model", "cgegnn", "--trials", "4"]);
    assert!(out.lines().filter(|l| l.starts_with("PASS")).count() == 2);
}

#[test]
fn gnn_fails_the_equivariance_suite() {
    let out = cgegnn(&["check", "equivariance", "--model", "gnn", "--head", "vector", "--trials", "5"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("FAIL"));
}
