use std::path::Path;
use std::process::{Command, Output};

fn statemerge(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_statemerge"))
        .args(args)
        .env("RUST_LOG", "warn")
        .env_remove("STATEMERGE_SEED")
        .env_remove("STATEMERGE_THREADS")
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn ok(out: &Output) -> String {
    assert!(
        out.status.success(),
        "stdout:\n{}\nstderr:\n{}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).unwrap()
}

/// A config small enough to train in well under a second.
fn write_tiny_config(dir: &Path) -> String {
    let config = serde_json::json!({
        "languages": [2],
        "seed": 0,
        "data_seeds": [0, 1],
        "training": {
            "embed_dim": 4, "hidden_dim": 8, "train_count": 200, "train_length": 8,
            "dev_count": 40, "dev_length": 16, "epochs": 2, "batch_size": 32,
            "optimizer": {"lr": 0.001, "beta1": 0.9, "beta2": 0.999, "eps": 1e-8, "weight_decay": 0.01}
        },
        "extraction": {
            "kappa": 0.01, "data_count": 20, "string_length": 10,
            "eval_count": 50, "eval_max_length": 12, "eval_seed": 1000
        },
        "sweeps": {
            "data_counts": [4, 8], "data_string_length": 15, "kappa_language": 2,
            "kappas": [0.5, 0.01], "epochs": [], "early_epoch": 1, "late_epoch": 2,
            "epoch_data_counts": [4, 8], "epoch_seeds": [0]
        },
        "baseline": {"k": 4},
        "out_dir": "out",
        "threads": 1
    });
    let path = dir.join("tiny.json");
    std::fs::write(&path, serde_json::to_string_pretty(&config).unwrap()).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn full_workflow() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let config = write_tiny_config(dir);
    let c = config.as_str();

    let train = ok(&statemerge(
        dir,
        &["--config", c, "--language", "2", "--seed", "0", "train"],
    ));
    assert!(train.contains("tomita2: best epoch"));
    let model = dir.join("out/models/tomita2/seed0");
    for f in ["epoch01.ckpt", "epoch02.ckpt", "metrics.csv", "config.json"] {
        assert!(model.join(f).exists(), "{f}");
    }

    let extract = ok(&statemerge(
        dir,
        &[
            "--config",
            c,
            "--language",
            "2",
            "extract",
            "--data",
            "12",
            "--kappa",
            "0.05",
        ],
    ));
    assert!(extract.lines().nth(1).unwrap().starts_with("2,merge,0,"));
    let ex = dir.join("out/extract/tomita2-seed0-n12-kappa0.05-epoch2");
    for f in [
        "merged.nfa",
        "merged.dot",
        "minimized.dfa",
        "minimized.dot",
        "result.csv",
        "config.json",
    ] {
        assert!(ex.join(f).exists(), "{f}");
    }
    let resolved: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(ex.join("config.json")).unwrap()).unwrap();
    assert_eq!(
        resolved["extraction"]["cosine_threshold"],
        serde_json::json!(0.95)
    );

    let again = ok(&statemerge(
        dir,
        &[
            "--config",
            c,
            "--language",
            "2",
            "extract",
            "--data",
            "12",
            "--kappa",
            "0.05",
        ],
    ));
    assert_eq!(again, extract);

    let dfa = ex.join("minimized.dfa");
    let dfa = dfa.to_str().unwrap();
    let eval = ok(&statemerge(
        dir,
        &["--config", c, "--language", "2", "eval", "--dfa", dfa],
    ));
    assert!(eval.starts_with("acc_rnn,acc_gold,prefix_acc_rnn\n"));

    let dot = ok(&statemerge(dir, &["export-dot", "--dfa", dfa]));
    assert!(dot.starts_with("digraph dfa {"));
    let nfa = ex.join("merged.nfa");
    let dot = ok(&statemerge(
        dir,
        &["export-dot", "--dfa", nfa.to_str().unwrap(), "-o", "m.dot"],
    ));
    assert!(dot.is_empty());
    assert!(std::fs::read_to_string(dir.join("m.dot"))
        .unwrap()
        .starts_with("digraph nfa {"));

    let base = ok(&statemerge(
        dir,
        &["--config", c, "--language", "2", "baseline", "--k", "3"],
    ));
    assert!(base.lines().nth(1).unwrap().starts_with("2,kmeans,0,"));

    let table = ok(&statemerge(dir, &["--config", c, "table2"]));
    assert!(table.contains("2,merge,2,"));
    assert!(dir.join("out/table2/summary.csv").exists());
    assert!(dir.join("out/table2/config.json").exists());

    for kind in ["data", "kappa", "epochs"] {
        ok(&statemerge(dir, &["--config", c, "sweep", kind]));
        assert!(dir.join(format!("out/sweep-{kind}/results.csv")).exists());
    }
}

#[test]
fn environment_seed_is_used() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let config = write_tiny_config(dir);
    let out = Command::new(env!("CARGO_BIN_EXE_statemerge"))
        .args(["--config", &config, "--language", "2", "train"])
        .env("STATEMERGE_SEED", "7")
        .current_dir(dir)
        .output()
        .unwrap();
    ok(&out);
    assert!(dir.join("out/models/tomita2/seed7/metrics.csv").exists());
}

#[test]
fn errors_exit_nonzero_with_usage() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let out = statemerge(dir, &["frobnicate"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));

    let out = statemerge(dir, &["train", "--bogus"]);
    assert!(!out.status.success());

    let out = statemerge(dir, &["--language", "9", "train"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("invalid Tomita language id 9"));

    let out = statemerge(dir, &["--language", "3", "--out", "o", "extract"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing checkpoint"));

    let out = statemerge(dir, &["extract", "--kappa", "1.5"]);
    assert!(!out.status.success());
}
