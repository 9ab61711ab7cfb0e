//! Measured flip loss on random diagonal quadratic tasks against the
//! asymptote from the slope and the closed form `2λ|W*|`.
//!
//! ```text
//! cargo run --release --example diagonal_flip_loss -- --trials 100
//! ```

use clap::Parser;
use metaplastic::quadratic::{verify_diagonal, EigenSpectrum};

#[derive(Parser)]
struct Args {
    #[arg(long, value_delimiter = ',', default_value = "1,10")]
    dims: Vec<usize>,
    #[arg(long, default_value_t = 100)]
    trials: usize,
    #[arg(long, default_value_t = 100_000)]
    steps: usize,
    #[arg(long, default_value_t = 0.01)]
    eta: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn main() -> anyhow::Result<()> {
    let a = Args::parse();
    let r = verify_diagonal(
        &a.dims,
        a.trials,
        a.steps,
        a.eta,
        EigenSpectrum::default(),
        a.seed,
    )?;
    println!(
        "{:>5} {:>4} {:>8} {:>8} {:>10} {:>10} {:>10}",
        "trial", "dim", "λ", "W*", "ΔL", "2λ+2|s|/η", "2λ|W*|"
    );
    for row in r.rows.iter().take(12) {
        println!(
            "{:>5} {:>4} {:>8.4} {:>8.4} {:>10.5} {:>10.5} {:>10.5}",
            row.trial, row.dim, row.lambda, row.w_star, row.delta_l, row.asymptote, row.closed_form
        );
    }
    println!("... {} coordinates in total", r.rows.len());
    println!(
        "max relative error vs asymptote:   {:.3e}",
        r.max_rel_err_asymptote
    );
    println!(
        "max relative error vs closed form: {:.3e}",
        r.max_rel_err_closed_form
    );
    Ok(())
}
