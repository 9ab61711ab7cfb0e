//! Hidden-weight distributions after each permuted task: with
//! metaplasticity the tails keep growing as tasks accumulate.
//!
//! ```text
//! cargo run --release --example hidden_weight_histograms -- --tasks 2 --epochs 5 --csv-dir out
//! ```

use clap::Parser;
use metaplastic::experiment::{run_multitask, Baseline, MultitaskSpec, NetSpec};
use metaplastic::metaplastic::TrainConfig;
use metaplastic::probe::{network_histogram, write_histograms_csv, Histogram};
use metaplastic::tasks::{load_split, PixelRange, Split};

#[derive(Parser)]
struct Args {
    #[arg(long, default_value = "data/mnist")]
    data: String,
    #[arg(long, default_value_t = 0.9)]
    m: f64,
    #[arg(long, default_value_t = 2)]
    tasks: usize,
    #[arg(long, default_value_t = 5)]
    epochs: usize,
    #[arg(long, default_value_t = 40)]
    bins: usize,
    #[arg(long)]
    limit: Option<usize>,
    #[arg(long)]
    csv_dir: Option<String>,
}

fn show(h: &Histogram) {
    let peak = *h.counts.iter().max().unwrap_or(&1) as f64;
    for (b, &c) in h.counts.iter().enumerate() {
        let bar = "#".repeat((50.0 * (c as f64 / peak).sqrt()).round() as usize);
        println!("{:>8.3} {:>8} {bar}", h.center(b), c);
    }
}

fn main() -> anyhow::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let a = Args::parse();
    let mut train = load_split(&a.data, Split::Train)?.with_pixel_range(PixelRange::Unit);
    if let Some(n) = a.limit {
        train = train.head(n);
    }
    let test = load_split(&a.data, Split::Test)?.with_pixel_range(PixelRange::Unit);
    let spec = MultitaskSpec {
        run_id: "histograms".into(),
        net: NetSpec {
            hidden: vec![512, 512],
            init_sigma: 0.1,
        },
        train: TrainConfig::new(a.m, 0.01, 100)?,
        tasks: a.tasks,
        epochs: a.epochs,
        baseline: Baseline::None,
        fisher_samples: 1,
        seed: 0,
    };
    if let Some(d) = &a.csv_dir {
        std::fs::create_dir_all(d)?;
    }
    let mut after_task = Vec::new();
    run_multitask(&spec, &train, &test, &mut |rec, net| {
        if rec.epoch + 1 == a.epochs {
            let h = network_histogram(net, a.bins)?;
            if let Some(d) = &a.csv_dir {
                write_histograms_csv(
                    std::slice::from_ref(&h),
                    format!("{d}/task-{}.csv", rec.task),
                    None,
                )?;
            }
            after_task.push(h);
        }
        Ok(())
    })?;
    for (t, h) in after_task.iter().enumerate() {
        println!(
            "\nafter task {t}: |W^h| > 2 for {} weights",
            h.mass_beyond(2.0)
        );
        show(h);
    }
    Ok(())
}
