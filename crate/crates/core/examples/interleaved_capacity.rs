//! Non-sequential control: every permuted task is learned at once from a
//! shuffled union, for an increasing number of tasks.
//!
//! ```text
//! cargo run --release --example interleaved_capacity -- --max-tasks 3 --epochs 5
//! ```

use clap::Parser;
use metaplastic::experiment::{run_interleaved, Baseline, MultitaskSpec, NetSpec};
use metaplastic::metaplastic::TrainConfig;
use metaplastic::tasks::{load_split, PixelRange, Split};

#[derive(Parser)]
struct Args {
    #[arg(long, default_value = "data/mnist")]
    data: String,
    #[arg(long, default_value_t = 0.0)]
    m: f64,
    #[arg(long, default_value_t = 0.01)]
    eta: f64,
    #[arg(long, default_value_t = 3)]
    max_tasks: usize,
    #[arg(long, default_value_t = 5)]
    epochs: usize,
    #[arg(long, value_delimiter = ',', default_value = "512,512")]
    hidden: Vec<usize>,
    #[arg(long)]
    limit: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn main() -> anyhow::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let a = Args::parse();
    let mut train = load_split(&a.data, Split::Train)?.with_pixel_range(PixelRange::Unit);
    if let Some(n) = a.limit {
        train = train.head(n);
    }
    let test = load_split(&a.data, Split::Test)?.with_pixel_range(PixelRange::Unit);
    println!("{:>5}  {:>10}", "tasks", "mean acc");
    for tasks in 1..=a.max_tasks {
        let spec = MultitaskSpec {
            run_id: format!("interleaved-{tasks}"),
            net: NetSpec {
                hidden: a.hidden.clone(),
                init_sigma: 0.1,
            },
            train: TrainConfig::new(a.m, a.eta, 100)?,
            tasks,
            epochs: a.epochs,
            baseline: Baseline::None,
            fisher_samples: 1,
            seed: a.seed,
        };
        let out = run_interleaved(&spec, &train, &test, &mut |_, _| Ok(()))?;
        let mean = out.final_accuracies.iter().sum::<f64>() / tasks as f64;
        println!("{tasks:>5}  {:>9.2}%", 100.0 * mean);
    }
    Ok(())
}
