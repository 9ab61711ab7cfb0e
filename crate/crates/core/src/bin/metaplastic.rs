use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use metaplastic::experiment::{run_experiment, verify_run, Baseline, ExperimentConfig, RunMode};

#[derive(Parser)]
#[command(
    version,
    about = "Metaplastic binarized networks: training runs and quadratic-task checks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sequential permuted-MNIST tasks.
    Train(Common),
    /// One dataset learned as a stream of shards, plus the full-data reference.
    Stream {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        shards: Option<usize>,
        /// Skip the full-data reference run.
        #[arg(long)]
        no_reference: bool,
    },
    /// All permuted tasks learned at once.
    Interleaved(Common),
    /// Flip-loss checks on random quadratic binary tasks.
    Quadratic {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        dim: Option<usize>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        steps: Option<usize>,
    },
    /// Sign-switch probe of a trained (or freshly trained) network.
    Probe {
        #[command(flatten)]
        common: Common,
        /// Existing params.bin to probe instead of training.
        #[arg(long)]
        params: Option<PathBuf>,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        realizations: Option<usize>,
    },
    /// Check that every artifact of a run carries its config hash.
    Verify { dir: PathBuf },
}

#[derive(Clone, Copy, ValueEnum)]
enum BaselineArg {
    None,
    Ewc,
    Random,
    LrDecay,
    FullPrecision,
}

/// Flags shared by the run subcommands; each overrides the config file.
#[derive(Args)]
struct Common {
    /// TOML config; built-in defaults when absent.
    #[arg(long, short)]
    config: Option<PathBuf>,
    #[arg(long, short)]
    output: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    limit: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    hidden: Option<Vec<usize>>,
    #[arg(long)]
    init_sigma: Option<f64>,
    #[arg(long)]
    m: Option<f64>,
    /// Learning rate (the quadratic step size for `quadratic`).
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    tasks: Option<usize>,
    #[arg(long, value_enum)]
    baseline: Option<BaselineArg>,
    /// Consolidation strength for `ewc` and `random`.
    #[arg(long, default_value_t = 5000.0)]
    lambda: f64,
    /// Hidden-weight histogram bins (0 disables).
    #[arg(long)]
    histogram_bins: Option<usize>,
}

macro_rules! set {
    ($dst:expr, $src:expr) => {
        if let Some(v) = $src {
            $dst = v;
        }
    };
}

impl Common {
    fn config(self, mode: RunMode) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => {
                let c = ExperimentConfig::load(p)
                    .with_context(|| format!("loading {}", p.display()))?;
                if c.mode != mode {
                    log::warn!(
                        "config mode {:?} replaced by the subcommand's {:?}",
                        c.mode,
                        mode
                    );
                }
                c
            }
            None => ExperimentConfig::new(mode),
        };
        cfg.mode = mode;
        set!(cfg.output_dir, self.output);
        set!(cfg.seeds, self.seeds);
        set!(cfg.data.dir, self.data);
        if self.limit.is_some() {
            cfg.data.limit = self.limit;
        }
        set!(cfg.network.hidden, self.hidden);
        set!(cfg.network.init_sigma, self.init_sigma);
        set!(cfg.training.m, self.m);
        if mode == RunMode::Quadratic {
            set!(cfg.quadratic.eta, self.eta);
        } else {
            set!(cfg.training.eta, self.eta);
        }
        set!(cfg.training.batch_size, self.batch_size);
        set!(cfg.training.epochs, self.epochs);
        set!(cfg.training.tasks, self.tasks);
        set!(cfg.histograms.bins, self.histogram_bins);
        if let Some(b) = self.baseline {
            cfg.training.baseline = match b {
                BaselineArg::None => Baseline::None,
                BaselineArg::Ewc => Baseline::Ewc {
                    lambda: self.lambda,
                },
                BaselineArg::Random => Baseline::Random {
                    lambda: self.lambda,
                },
                BaselineArg::LrDecay => Baseline::LrDecay,
                BaselineArg::FullPrecision => Baseline::FullPrecision,
            };
        }
        Ok(cfg)
    }
}

fn run(cfg: ExperimentConfig) -> Result<ExitCode> {
    let summary = run_experiment(&cfg)?;
    println!("config_hash {}", summary.config_hash);
    for r in &summary.results {
        println!("{r}");
    }
    println!("artifacts in {}", summary.dir.display());
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match dispatch(Cli::parse().command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(cmd: Command) -> Result<ExitCode> {
    match cmd {
        Command::Train(c) => run(c.config(RunMode::Multitask)?),
        Command::Interleaved(c) => run(c.config(RunMode::Interleaved)?),
        Command::Stream {
            common,
            shards,
            no_reference,
        } => {
            let mut cfg = common.config(RunMode::Stream)?;
            set!(cfg.stream.shards, shards);
            if no_reference {
                cfg.stream.reference = false;
            }
            run(cfg)
        }
        Command::Quadratic {
            common,
            dim,
            trials,
            steps,
        } => {
            let mut cfg = common.config(RunMode::Quadratic)?;
            set!(cfg.quadratic.dim, dim);
            set!(cfg.quadratic.trials, trials);
            set!(cfg.quadratic.steps, steps);
            run(cfg)
        }
        Command::Probe {
            common,
            params,
            samples,
            realizations,
        } => {
            let mut cfg = common.config(RunMode::Probe)?;
            if params.is_some() {
                cfg.probe.params = params;
            }
            set!(cfg.probe.samples, samples);
            set!(cfg.probe.realizations, realizations);
            run(cfg)
        }
        Command::Verify { dir } => {
            let report = verify_run(&dir)?;
            println!("config_hash {}", report.config_hash);
            println!("status {}", report.status);
            for p in &report.checked {
                println!("ok       {}", p.display());
            }
            for (p, why) in &report.mismatched {
                println!("MISMATCH {}: {why}", p.display());
            }
            if report.checked.is_empty() {
                bail!("no artifacts found in {}", dir.display());
            }
            Ok(if report.ok() {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            })
        }
    }
}
