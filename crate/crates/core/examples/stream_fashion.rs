//! Stream learning: Fashion-MNIST cut into shards learned one after the
//! other, compared with the same network trained on all the data for the
//! same number of steps.
//!
//! ```text
//! cargo run --release --example stream_fashion -- --shards 12 --epochs 5
//! ```

use clap::Parser;
use metaplastic::experiment::{run_full_reference, run_stream, NetSpec, StreamSpec};
use metaplastic::metaplastic::TrainConfig;
use metaplastic::tasks::{load_split, PixelRange, Split};

#[derive(Parser)]
struct Args {
    #[arg(long, default_value = "data/fashion")]
    data: String,
    #[arg(long, default_value_t = 0.9)]
    m: f64,
    #[arg(long, default_value_t = 0.01)]
    eta: f64,
    #[arg(long, default_value_t = 12)]
    shards: usize,
    /// Epochs per shard, and for the reference over the full set.
    #[arg(long, default_value_t = 5)]
    epochs: usize,
    #[arg(long, value_delimiter = ',', default_value = "512,512")]
    hidden: Vec<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Skip the full-data reference.
    #[arg(long)]
    no_reference: bool,
}

fn main() -> anyhow::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let a = Args::parse();
    let train = load_split(&a.data, Split::Train)?.with_pixel_range(PixelRange::Unit);
    let test = load_split(&a.data, Split::Test)?.with_pixel_range(PixelRange::Unit);
    let spec = StreamSpec {
        run_id: format!("stream-m{}", a.m),
        net: NetSpec {
            hidden: a.hidden,
            init_sigma: 0.1,
        },
        train: TrainConfig::new(a.m, a.eta, 100)?,
        shards: a.shards,
        epochs: a.epochs,
        seed: a.seed,
    };
    let streamed = run_stream(&spec, &train, &test, &mut |_, _| Ok(()))?;
    println!(
        "streamed over {} shards: {:.2}%",
        a.shards,
        100.0 * streamed.final_accuracy
    );
    if !a.no_reference {
        let full = run_full_reference(&spec, &train, &test, &mut |_, _| Ok(()))?;
        println!(
            "full data, same steps:  {:.2}%",
            100.0 * full.final_accuracy
        );
    }
    Ok(())
}
