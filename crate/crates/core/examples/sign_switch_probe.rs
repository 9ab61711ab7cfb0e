//! Sign-switch probe on a freshly trained binarized network: flipping
//! weights with larger hidden magnitude costs more loss.
//!
//! ```text
//! cargo run --release --example sign_switch_probe -- --epochs 3
//! ```

use clap::Parser;
use metaplastic::experiment::{
    load_params, run_multitask, task_permutation, Baseline, MultitaskSpec, NetSpec,
};
use metaplastic::metaplastic::TrainConfig;
use metaplastic::numerics::SeededRng;
use metaplastic::probe::{default_k_per_layer, sign_switch_probe, ProbeConfig};
use metaplastic::tasks::{load_split, make_permuted_task, PixelRange, Split};

#[derive(Parser)]
struct Args {
    #[arg(long, default_value = "data/mnist")]
    data: String,
    /// Probe this params.bin instead of training.
    #[arg(long)]
    params: Option<String>,
    #[arg(long, default_value_t = 0.0)]
    m: f64,
    #[arg(long, default_value_t = 3)]
    epochs: usize,
    #[arg(long, default_value_t = 2000)]
    samples: usize,
    #[arg(long, default_value_t = 10)]
    bins: usize,
    #[arg(long, default_value_t = 100)]
    realizations: usize,
    /// Permuted task (seed 0) the network last learned; a freshly trained
    /// network learns task 0.
    #[arg(long, default_value_t = 0)]
    task: usize,
    /// Measure the loss on training samples instead of test samples.
    #[arg(long)]
    on_train: bool,
}

fn main() -> anyhow::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let a = Args::parse();
    let test = load_split(&a.data, Split::Test)?.with_pixel_range(PixelRange::Unit);
    let train = load_split(&a.data, Split::Train)?.with_pixel_range(PixelRange::Unit);
    let mut net = match &a.params {
        Some(p) => load_params(p)?.0,
        None => {
            let spec = MultitaskSpec {
                run_id: "probe".into(),
                net: NetSpec {
                    hidden: vec![512, 512],
                    init_sigma: 0.1,
                },
                train: TrainConfig::new(a.m, 0.01, 100)?,
                tasks: 1,
                epochs: a.epochs,
                baseline: Baseline::None,
                fisher_samples: 1,
                seed: 0,
            };
            run_multitask(&spec, &train, &test, &mut |_, _| Ok(()))?.network
        }
    };
    let source = if a.on_train {
        train.head(a.samples)
    } else {
        test.head(a.samples)
    };
    let data = make_permuted_task(
        &source,
        &task_permutation(source.pixels(), 0, a.task),
        "probe",
    )?;
    let mut rng = SeededRng::new(1);
    for (layer, k) in default_k_per_layer(&net).into_iter().enumerate() {
        let cfg = ProbeConfig {
            bins: a.bins,
            k,
            realizations: a.realizations,
        };
        let curve = sign_switch_probe(&mut net, &data, layer, cfg, &mut rng)?;
        println!("\nlayer {layer}, k = {k}, spearman {:.3}", curve.spearman());
        for b in &curve.bins {
            println!(
                "  {:.2}  {:>8}  ΔL/k {:+.3e} ± {:.1e}",
                b.center, b.population, b.mean, b.std
            );
        }
    }
    Ok(())
}
