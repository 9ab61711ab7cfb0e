//! The metaplastic rule applied to a full-precision network (real weights,
//! tanh activations): without binarization it does not prevent forgetting.
//!
//! ```text
//! cargo run --release --example full_precision_control -- --tasks 2 --epochs 5
//! ```

use clap::Parser;
use metaplastic::experiment::{run_multitask, Baseline, MultitaskSpec, NetSpec};
use metaplastic::metaplastic::TrainConfig;
use metaplastic::tasks::{load_split, PixelRange, Split};

#[derive(Parser)]
struct Args {
    #[arg(long, default_value = "data/mnist")]
    data: String,
    #[arg(long, default_value_t = 0.9)]
    m: f64,
    #[arg(long, default_value_t = 0.01)]
    eta: f64,
    #[arg(long, default_value_t = 2)]
    tasks: usize,
    #[arg(long, default_value_t = 5)]
    epochs: usize,
    #[arg(long)]
    limit: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn main() -> anyhow::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let a = Args::parse();
    let mut train = load_split(&a.data, Split::Train)?.with_pixel_range(PixelRange::Unit);
    if let Some(n) = a.limit {
        train = train.head(n);
    }
    let test = load_split(&a.data, Split::Test)?.with_pixel_range(PixelRange::Unit);
    for (label, baseline) in [
        ("binarized", Baseline::None),
        ("full precision", Baseline::FullPrecision),
    ] {
        let spec = MultitaskSpec {
            run_id: label.replace(' ', "-"),
            net: NetSpec {
                hidden: vec![512, 512],
                init_sigma: 0.1,
            },
            train: TrainConfig::new(a.m, a.eta, 100)?,
            tasks: a.tasks,
            epochs: a.epochs,
            baseline,
            fisher_samples: 1,
            seed: a.seed,
        };
        let out = run_multitask(&spec, &train, &test, &mut |_, _| Ok(()))?;
        let accs: Vec<String> = out
            .final_accuracies
            .iter()
            .map(|x| format!("{:.2}%", 100.0 * x))
            .collect();
        println!("{label:>15}, m = {}: {}", a.m, accs.join("  "));
    }
    Ok(())
}
