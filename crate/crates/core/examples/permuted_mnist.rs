//! Sequential permuted-MNIST learning with a chosen consolidation method.
//!
//! ```text
//! cargo run --release --example permuted_mnist -- --m 0.9 --tasks 3 --epochs 10
//! cargo run --release --example permuted_mnist -- --baseline ewc --lambda 5000
//! ```

use clap::{Parser, ValueEnum};
use metaplastic::experiment::{run_multitask, Baseline, MultitaskSpec, NetSpec};
use metaplastic::metaplastic::TrainConfig;
use metaplastic::tasks::{load_split, PixelRange, Split};

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    None,
    Ewc,
    Random,
    LrDecay,
    FullPrecision,
}

#[derive(Parser)]
struct Args {
    #[arg(long, default_value = "data/mnist")]
    data: String,
    #[arg(long, default_value_t = 0.9)]
    m: f64,
    #[arg(long, default_value_t = 0.01)]
    eta: f64,
    #[arg(long, default_value_t = 0.1)]
    sigma: f64,
    #[arg(long, default_value_t = 100)]
    batch: usize,
    #[arg(long, default_value_t = 3)]
    tasks: usize,
    #[arg(long, default_value_t = 10)]
    epochs: usize,
    #[arg(long, value_delimiter = ',', default_value = "512,512")]
    hidden: Vec<usize>,
    #[arg(long, value_enum, default_value_t = Method::None)]
    baseline: Method,
    #[arg(long, default_value_t = 5000.0)]
    lambda: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Use only the first N training images.
    #[arg(long)]
    limit: Option<usize>,
}

fn main() -> anyhow::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let a = Args::parse();
    let mut train = load_split(&a.data, Split::Train)?.with_pixel_range(PixelRange::Unit);
    if let Some(n) = a.limit {
        train = train.head(n);
    }
    let test = load_split(&a.data, Split::Test)?.with_pixel_range(PixelRange::Unit);
    let baseline = match a.baseline {
        Method::None => Baseline::None,
        Method::Ewc => Baseline::Ewc { lambda: a.lambda },
        Method::Random => Baseline::Random { lambda: a.lambda },
        Method::LrDecay => Baseline::LrDecay,
        Method::FullPrecision => Baseline::FullPrecision,
    };
    let spec = MultitaskSpec {
        run_id: format!("m{}-s{}", a.m, a.seed),
        net: NetSpec {
            hidden: a.hidden,
            init_sigma: a.sigma,
        },
        train: TrainConfig::new(a.m, a.eta, a.batch)?,
        tasks: a.tasks,
        epochs: a.epochs,
        baseline,
        fisher_samples: 1000,
        seed: a.seed,
    };
    let out = run_multitask(&spec, &train, &test, &mut |_, _| Ok(()))?;
    for (t, acc) in out.final_accuracies.iter().enumerate() {
        println!("task {t}: {:.2}%", 100.0 * acc);
    }
    Ok(())
}
