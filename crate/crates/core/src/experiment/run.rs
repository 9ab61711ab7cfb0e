//! Config-driven runs: artifacts on disk and their verification.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};

use super::config::{ExperimentConfig, RunMode};
use super::params::{load_params, save_params};
use super::runs::{
    run_full_reference, run_interleaved, run_multitask, run_stream, task_permutation,
    MultitaskSpec, NetSpec, StreamSpec,
};
use super::{MetricsRecord, MetricsWriter};
use crate::bnn::Network;
use crate::error::{Error, Result};
use crate::metaplastic::TrainConfig;
use crate::numerics::SeededRng;
use crate::probe::{
    default_k_per_layer, export_histogram, sign_switch_probe, write_histograms_csv, ProbeConfig,
};
use crate::quadratic::{verify_diagonal, verify_nondiagonal, DiagonalReport};
use crate::tasks::{load_split, make_permuted_task, LabeledDataset, Split};

pub const CONFIG_FILE: &str = "config.toml";
pub const RUN_FILE: &str = "run.json";
pub const METRICS_FILE: &str = "metrics.csv";

const HASH_PREFIX: &str = "config_hash=";
const PROBE_STREAM: u64 = 5;

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub dir: PathBuf,
    pub config_hash: String,
    /// Per-seed results, as stored in `run.json`.
    pub results: Vec<Value>,
}

struct RunDir {
    root: PathBuf,
    hash: [u8; 32],
    hex: String,
}

impl RunDir {
    fn comment(&self) -> String {
        format!("{HASH_PREFIX}{}", self.hex)
    }

    fn mkdir(&self, rel: impl AsRef<Path>) -> Result<PathBuf> {
        let p = self.root.join(rel);
        fs::create_dir_all(&p).map_err(|e| Error::io(&p, e))?;
        Ok(p)
    }

    fn write_status(
        &self,
        cfg: &ExperimentConfig,
        status: &str,
        results: &[Value],
        error: Option<String>,
    ) -> Result<()> {
        let mut doc = json!({
            "config_hash": self.hex,
            "mode": cfg.mode,
            "seeds": cfg.seeds,
            "status": status,
            "results": results,
        });
        if let Some(e) = error {
            doc["error"] = Value::String(e);
        }
        let p = self.root.join(RUN_FILE);
        let text = serde_json::to_string_pretty(&doc).expect("json serializes");
        fs::write(&p, text + "\n").map_err(|e| Error::io(&p, e))
    }

    fn histograms(&self, net: &Network, bins: usize, rel: &str) -> Result<()> {
        if bins == 0 {
            return Ok(());
        }
        let path = self.root.join(rel);
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        write_histograms_csv(&export_histogram(net, bins)?, path, Some(&self.comment()))
    }
}

fn load_data(cfg: &ExperimentConfig) -> Result<(LabeledDataset, LabeledDataset)> {
    let mut train = load_split(&cfg.data.dir, Split::Train)?;
    if let Some(n) = cfg.data.limit {
        train = train.head(n);
    }
    let test = load_split(&cfg.data.dir, Split::Test)?;
    let (train, test) = (
        train.with_pixel_range(cfg.data.pixels),
        test.with_pixel_range(cfg.data.pixels),
    );
    Ok((train, test))
}

fn net_spec(cfg: &ExperimentConfig) -> NetSpec {
    NetSpec {
        hidden: cfg.network.hidden.clone(),
        init_sigma: cfg.network.init_sigma,
    }
}

fn train_config(cfg: &ExperimentConfig) -> Result<TrainConfig> {
    TrainConfig::new(cfg.training.m, cfg.training.eta, cfg.training.batch_size)
}

fn multitask_spec(cfg: &ExperimentConfig, seed: u64, tasks: usize) -> Result<MultitaskSpec> {
    Ok(MultitaskSpec {
        run_id: format!("{}-s{seed}", mode_name(cfg.mode)),
        net: net_spec(cfg),
        train: train_config(cfg)?,
        tasks,
        epochs: cfg.training.epochs,
        baseline: cfg.training.baseline,
        fisher_samples: cfg.training.fisher_samples,
        seed,
    })
}

fn mode_name(mode: RunMode) -> &'static str {
    match mode {
        RunMode::Multitask => "multitask",
        RunMode::Stream => "stream",
        RunMode::Interleaved => "interleaved",
        RunMode::Quadratic => "quadratic",
        RunMode::Probe => "probe",
    }
}

/// Validates `cfg`, runs every seed and writes the artifacts under
/// `cfg.output_dir`. `run.json` says `incomplete` until the last seed
/// finishes; on error it records the message and stays `incomplete`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunSummary> {
    cfg.validate()?;
    let root = cfg.output_dir.clone();
    fs::create_dir_all(&root).map_err(|e| Error::io(&root, e))?;
    let dir = RunDir {
        root,
        hash: cfg.hash(),
        hex: cfg.hash_hex(),
    };
    let cfg_path = dir.root.join(CONFIG_FILE);
    fs::write(
        &cfg_path,
        format!("# {}\n{}", dir.comment(), cfg.to_toml_string()),
    )
    .map_err(|e| Error::io(&cfg_path, e))?;
    dir.write_status(cfg, "incomplete", &[], None)?;

    let mut results = Vec::new();
    let outcome = run_seeds(cfg, &dir, &mut results);
    match outcome {
        Ok(()) => {
            dir.write_status(cfg, "complete", &results, None)?;
            Ok(RunSummary {
                dir: dir.root,
                config_hash: dir.hex,
                results,
            })
        }
        Err(e) => {
            dir.write_status(cfg, "incomplete", &results, Some(e.to_string()))?;
            Err(e)
        }
    }
}

fn run_seeds(cfg: &ExperimentConfig, dir: &RunDir, results: &mut Vec<Value>) -> Result<()> {
    if cfg.mode == RunMode::Quadratic {
        for &seed in &cfg.seeds {
            results.push(quadratic_seed(cfg, dir, seed)?);
        }
        return Ok(());
    }

    let (train, test) = load_data(cfg)?;
    let columns = match cfg.mode {
        RunMode::Multitask | RunMode::Interleaved => cfg.training.tasks,
        _ => 1,
    };
    let mut metrics = MetricsWriter::create(dir.root.join(METRICS_FILE), &dir.hex, columns)?;
    for &seed in &cfg.seeds {
        let seed_dir = format!("seed-{seed}");
        dir.mkdir(&seed_dir)?;
        let hist_bins = cfg.histograms.bins;
        let epochs = cfg.training.epochs;
        let result = match cfg.mode {
            RunMode::Multitask => {
                let mut sink = |rec: &MetricsRecord, net: &Network| {
                    metrics.write(rec)?;
                    if rec.epoch + 1 == epochs {
                        dir.histograms(
                            net,
                            hist_bins,
                            &format!("{seed_dir}/histograms/task-{}.csv", rec.task),
                        )?;
                    }
                    Ok(())
                };
                let out = run_multitask(
                    &multitask_spec(cfg, seed, cfg.training.tasks)?,
                    &train,
                    &test,
                    &mut sink,
                )?;
                save_params(
                    &out.network,
                    &dir.hash,
                    dir.root.join(&seed_dir).join("params.bin"),
                )?;
                json!({ "seed": seed, "final_accuracies": out.final_accuracies })
            }
            RunMode::Interleaved => {
                let mut sink = |rec: &MetricsRecord, _: &Network| metrics.write(rec);
                let out = run_interleaved(
                    &multitask_spec(cfg, seed, cfg.training.tasks)?,
                    &train,
                    &test,
                    &mut sink,
                )?;
                save_params(
                    &out.network,
                    &dir.hash,
                    dir.root.join(&seed_dir).join("params.bin"),
                )?;
                dir.histograms(
                    &out.network,
                    hist_bins,
                    &format!("{seed_dir}/histograms/final.csv"),
                )?;
                json!({ "seed": seed, "final_accuracies": out.final_accuracies })
            }
            RunMode::Stream => {
                let mut spec = StreamSpec {
                    run_id: format!("stream-s{seed}"),
                    net: net_spec(cfg),
                    train: train_config(cfg)?,
                    shards: cfg.stream.shards,
                    epochs,
                    seed,
                };
                let mut sink = |rec: &MetricsRecord, _: &Network| metrics.write(rec);
                let out = run_stream(&spec, &train, &test, &mut sink)?;
                save_params(
                    &out.network,
                    &dir.hash,
                    dir.root.join(&seed_dir).join("params.bin"),
                )?;
                dir.histograms(
                    &out.network,
                    hist_bins,
                    &format!("{seed_dir}/histograms/final.csv"),
                )?;
                let mut r = json!({ "seed": seed, "stream_accuracy": out.final_accuracy });
                if cfg.stream.reference {
                    spec.run_id = format!("reference-s{seed}");
                    let reference = run_full_reference(&spec, &train, &test, &mut sink)?;
                    save_params(
                        &reference.network,
                        &dir.hash,
                        dir.root.join(&seed_dir).join("reference-params.bin"),
                    )?;
                    r["reference_accuracy"] = json!(reference.final_accuracy);
                }
                r
            }
            RunMode::Probe => probe_seed(cfg, dir, seed, &train, &test, &mut metrics)?,
            RunMode::Quadratic => unreachable!(),
        };
        log::info!("seed {seed}: {result}");
        results.push(result);
    }
    Ok(())
}

fn probe_seed(
    cfg: &ExperimentConfig,
    dir: &RunDir,
    seed: u64,
    train: &LabeledDataset,
    test: &LabeledDataset,
    metrics: &mut MetricsWriter,
) -> Result<Value> {
    let seed_dir = format!("seed-{seed}");
    let mut net = match &cfg.probe.params {
        Some(p) => load_params(p)?.0,
        None => {
            let mut sink = |rec: &MetricsRecord, _: &Network| metrics.write(rec);
            let out = run_multitask(&multitask_spec(cfg, seed, 1)?, train, test, &mut sink)?;
            save_params(
                &out.network,
                &dir.hash,
                dir.root.join(&seed_dir).join("params.bin"),
            )?;
            out.network
        }
    };
    dir.histograms(
        &net,
        cfg.histograms.bins,
        &format!("{seed_dir}/histograms/final.csv"),
    )?;
    let perm = task_permutation(test.pixels(), seed, cfg.probe.task);
    let data = make_permuted_task(
        &test.head(cfg.probe.samples.min(test.len())),
        &perm,
        format!("permuted-{}/probe", cfg.probe.task),
    )?;
    let base = net.evaluate(&data.images, &data.labels)?;
    let ks = if cfg.probe.k.is_empty() {
        default_k_per_layer(&net)
    } else {
        cfg.probe.k.clone()
    };
    let probe_dir = dir.mkdir(format!("{seed_dir}/probe"))?;
    let mut rng = SeededRng::new(seed).fork(PROBE_STREAM);
    let mut spearmans = Vec::new();
    for (layer, &k) in ks.iter().enumerate().take(net.num_layers()) {
        let pc = ProbeConfig {
            bins: cfg.probe.bins,
            k,
            realizations: cfg.probe.realizations,
        };
        let curve = sign_switch_probe(&mut net, &data, layer, pc, &mut rng)?;
        curve.write_csv(
            probe_dir.join(format!("layer-{layer}.csv")),
            Some(&dir.comment()),
        )?;
        spearmans.push(curve.spearman());
    }
    Ok(json!({
        "seed": seed,
        "probe_accuracy": base.accuracy(),
        "probe_loss": base.loss,
        "probe_spearman": spearmans,
    }))
}

fn write_diagonal_csv(report: &DiagonalReport, path: &Path, comment: &str) -> Result<()> {
    let write = || -> std::io::Result<()> {
        let mut f = std::io::BufWriter::new(fs::File::create(path)?);
        writeln!(f, "# {comment}")?;
        writeln!(
            f,
            "trial,dim,coord,lambda,w_star,slope,delta_l,asymptote,closed_form"
        )?;
        for r in &report.rows {
            writeln!(
                f,
                "{},{},{},{:.10},{:.10},{:.10e},{:.10},{:.10},{:.10}",
                r.trial,
                r.dim,
                r.coord,
                r.lambda,
                r.w_star,
                r.slope,
                r.delta_l,
                r.asymptote,
                r.closed_form
            )?;
        }
        f.flush()
    };
    write().map_err(|e| Error::io(path, e))
}

fn quadratic_seed(cfg: &ExperimentConfig, dir: &RunDir, seed: u64) -> Result<Value> {
    let q = &cfg.quadratic;
    let out = dir.mkdir(format!("seed-{seed}/quadratic"))?;
    let diag = verify_diagonal(&q.diagonal_dims, q.trials, q.steps, q.eta, q.spectrum, seed)?;
    write_diagonal_csv(&diag, &out.join("diagonal.csv"), &dir.comment())?;
    let dense = verify_nondiagonal(q.dim, q.steps, q.eta, q.w_max, q.spectrum, q.bins, seed)?;
    dense
        .curve
        .write_csv(out.join("nondiagonal.csv"), Some(&dir.comment()))?;
    Ok(json!({
        "seed": seed,
        "diagonal_max_rel_err_asymptote": diag.max_rel_err_asymptote,
        "diagonal_max_rel_err_closed_form": diag.max_rel_err_closed_form,
        "nondiagonal_spearman": dense.spearman,
        "nondiagonal_leftmost_is_min": dense.leftmost_is_min,
    }))
}

/// Outcome of [`verify_run`].
#[derive(Debug, Clone, PartialEq)]
pub struct VerifyReport {
    pub config_hash: String,
    pub status: String,
    /// Files whose embedded hash matches.
    pub checked: Vec<PathBuf>,
    /// Files with a missing or different hash, with the reason.
    pub mismatched: Vec<(PathBuf, String)>,
}

impl VerifyReport {
    pub fn ok(&self) -> bool {
        self.mismatched.is_empty() && self.status == "complete"
    }
}

fn files_under(dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    let mut entries = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .map(|e| e.map(|e| e.path()).map_err(|e| Error::io(dir, e)))
        .collect::<Result<Vec<_>>>()?;
    entries.sort();
    for p in entries {
        if p.is_dir() {
            files_under(&p, out)?;
        } else {
            out.push(p);
        }
    }
    Ok(())
}

/// Re-hashes `config.toml` in `dir` and checks that every CSV, parameter
/// file and `run.json` carries the same hash.
pub fn verify_run(dir: impl AsRef<Path>) -> Result<VerifyReport> {
    let dir = dir.as_ref();
    let cfg = ExperimentConfig::load(dir.join(CONFIG_FILE))?;
    let hex = cfg.hash_hex();
    let mut files = Vec::new();
    files_under(dir, &mut files)?;
    let mut report = VerifyReport {
        config_hash: hex.clone(),
        status: String::from("missing"),
        checked: Vec::new(),
        mismatched: Vec::new(),
    };
    for path in files {
        let rel = path.strip_prefix(dir).unwrap_or(&path).to_path_buf();
        let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("");
        let found: std::result::Result<String, String> = match ext {
            "csv" | "toml" => {
                let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
                text.lines()
                    .next()
                    .and_then(|l| l.strip_prefix("# "))
                    .and_then(|l| l.strip_prefix(HASH_PREFIX))
                    .map(str::to_string)
                    .ok_or_else(|| "no hash comment on the first line".to_string())
            }
            "bin" => load_params(&path)
                .map(|(_, h)| hex::encode(h))
                .map_err(|e| e.to_string()),
            "json" if rel == Path::new(RUN_FILE) => {
                let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
                let doc: Value =
                    serde_json::from_str(&text).map_err(|e| Error::BadParamFile(e.to_string()))?;
                report.status = doc["status"].as_str().unwrap_or("unknown").to_string();
                doc["config_hash"]
                    .as_str()
                    .map(str::to_string)
                    .ok_or_else(|| "no config_hash field".to_string())
            }
            _ => continue,
        };
        match found {
            Ok(h) if h == hex => report.checked.push(rel),
            Ok(h) => report
                .mismatched
                .push((rel, format!("hash {h} differs from {hex}"))),
            Err(why) => report.mismatched.push((rel, why)),
        }
    }
    Ok(report)
}
