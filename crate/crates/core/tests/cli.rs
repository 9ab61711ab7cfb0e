mod common;

use std::path::Path;
use std::process::Command;

use metaplastic::experiment::{load_params, ExperimentConfig, RunMode};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_metaplastic"));
    c.env("RUST_LOG", "warn");
    c
}

fn run_ok(c: &mut Command) -> String {
    let out = c.output().unwrap();
    assert!(
        out.status.success(),
        "status {:?}\nstdout {}\nstderr {}",
        out.status,
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

/// metrics.csv without the wall-time column.
fn metrics_without_time(dir: &Path) -> Vec<String> {
    std::fs::read_to_string(dir.join("metrics.csv"))
        .unwrap()
        .lines()
        .map(|l| {
            l.rsplit_once(',')
                .map(|(head, _)| head.to_string())
                .unwrap_or_else(|| l.to_string())
        })
        .collect()
}

fn train_args(c: &mut Command, data: &Path, out: &Path) {
    c.args(["train", "--data"])
        .arg(data)
        .arg("--output")
        .arg(out)
        .args([
            "--hidden",
            "16",
            "--epochs",
            "2",
            "--tasks",
            "2",
            "--batch-size",
            "20",
            "--seeds",
            "3",
            "--histogram-bins",
            "12",
        ]);
}

#[test]
fn train_writes_hashed_artifacts_and_is_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    common::write_fake_mnist(&data, 200, 60, 6, 0);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for out in [&a, &b] {
        let mut c = bin();
        train_args(&mut c, &data, out);
        run_ok(&mut c);
    }

    let lines = metrics_without_time(&a);
    assert!(lines[0].starts_with("# config_hash="));
    assert_eq!(lines[1], "run_id,task,epoch,acc_task_0,acc_task_1,loss");
    assert_eq!(lines.len(), 2 + 4);
    assert_eq!(lines, metrics_without_time(&b));
    for f in [
        "seed-3/params.bin",
        "seed-3/histograms/task-0.csv",
        "seed-3/histograms/task-1.csv",
        "run.json",
    ] {
        assert_eq!(
            std::fs::read(a.join(f)).unwrap(),
            std::fs::read(b.join(f)).unwrap(),
            "{f}"
        );
    }

    let cfg = ExperimentConfig::load(a.join("config.toml")).unwrap();
    assert_eq!(cfg.mode, RunMode::Multitask);
    assert_eq!(cfg.network.hidden, vec![16]);
    let (net, hash) = load_params(a.join("seed-3/params.bin")).unwrap();
    assert_eq!(hash, cfg.hash());
    assert_eq!(net.widths(), vec![36, 16, 10]);

    let run: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(a.join("run.json")).unwrap()).unwrap();
    assert_eq!(run["status"], "complete");
    assert_eq!(
        run["results"][0]["final_accuracies"]
            .as_array()
            .unwrap()
            .len(),
        2
    );

    let report = run_ok(bin().arg("verify").arg(&a));
    assert!(report.contains("status complete"));
    assert!(!report.contains("MISMATCH"));
}

#[test]
fn verify_detects_tampering() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    common::write_fake_mnist(&data, 100, 30, 5, 1);
    let out = tmp.path().join("run");
    let mut c = bin();
    train_args(&mut c, &data, &out);
    run_ok(&mut c);

    let cfg_path = out.join("config.toml");
    let text = std::fs::read_to_string(&cfg_path).unwrap();
    std::fs::write(&cfg_path, text.replace("m = 0.9", "m = 1.0")).unwrap();
    let res = bin().arg("verify").arg(&out).output().unwrap();
    assert!(!res.status.success());
    assert!(String::from_utf8_lossy(&res.stdout).contains("MISMATCH"));
}

#[test]
fn config_file_values_are_overridden_by_flags() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg_path = tmp.path().join("q.toml");
    std::fs::write(
        &cfg_path,
        "mode = \"quadratic\"\nseeds = [5]\n[quadratic]\ndim = 8\ntrials = 2\nsteps = 3000\ndiagonal_dims = [2]\n",
    )
    .unwrap();
    let out = tmp.path().join("q");
    run_ok(
        bin()
            .args(["quadratic", "--config"])
            .arg(&cfg_path)
            .arg("--output")
            .arg(&out)
            .args(["--dim", "12"]),
    );
    let cfg = ExperimentConfig::load(out.join("config.toml")).unwrap();
    assert_eq!(cfg.quadratic.dim, 12);
    assert_eq!(cfg.quadratic.trials, 2);
    assert_eq!(cfg.seeds, vec![5]);
    let curve = std::fs::read_to_string(out.join("seed-5/quadratic/nondiagonal.csv")).unwrap();
    assert_eq!(
        curve.lines().nth(1),
        Some("bin_center,mean_delta_l,std,count")
    );
    run_ok(bin().arg("verify").arg(&out));
}

#[test]
fn invalid_config_reports_every_violation() {
    let tmp = tempfile::tempdir().unwrap();
    let res = bin()
        .args(["train", "--data"])
        .arg(tmp.path().join("missing"))
        .arg("--output")
        .arg(tmp.path().join("o"))
        .args(["--m=-1", "--hidden", "0"])
        .output()
        .unwrap();
    assert!(!res.status.success());
    let err = String::from_utf8_lossy(&res.stderr);
    assert!(err.contains("training.m"), "{err}");
    assert!(err.contains("network.hidden"), "{err}");
    assert!(err.contains("data.dir"), "{err}");
}

#[test]
fn stream_and_probe_modes_produce_their_files() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    common::write_fake_mnist(&data, 300, 100, 6, 2);
    let s = tmp.path().join("s");
    run_ok(
        bin()
            .args(["stream", "--data"])
            .arg(&data)
            .arg("--output")
            .arg(&s)
            .args([
                "--hidden",
                "16",
                "--epochs",
                "1",
                "--shards",
                "3",
                "--batch-size",
                "20",
            ]),
    );
    let lines = metrics_without_time(&s);
    assert_eq!(lines[1], "run_id,task,epoch,acc_task_0,loss");
    // three shards plus one reference epoch
    assert_eq!(lines.len(), 2 + 3 + 1);
    assert!(s.join("seed-0/reference-params.bin").is_file());

    let p = tmp.path().join("p");
    run_ok(
        bin()
            .args(["probe", "--data"])
            .arg(&data)
            .arg("--output")
            .arg(&p)
            .args([
                "--hidden",
                "16",
                "--epochs",
                "2",
                "--batch-size",
                "20",
                "--samples",
                "50",
                "--realizations",
                "3",
            ]),
    );
    for l in 0..2 {
        let text = std::fs::read_to_string(p.join(format!("seed-0/probe/layer-{l}.csv"))).unwrap();
        assert!(text.starts_with("# config_hash="));
        assert!(text.contains("bin,mean,std,k,realizations"));
    }
    // The probe data carry the permutation of the task the net learned.
    let run: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(p.join("run.json")).unwrap()).unwrap();
    let acc = run["results"][0]["probe_accuracy"].as_f64().unwrap();
    assert!(acc > 0.8, "probe accuracy {acc}");
    run_ok(bin().arg("verify").arg(&p));
}
