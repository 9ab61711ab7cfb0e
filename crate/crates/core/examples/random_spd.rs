//! Random symmetric positive-definite matrices with a prescribed spectrum,
//! built from a rotation drawn with the subgroup algorithm.
//!
//! ```text
//! cargo run --release --example random_spd -- --dim 200
//! ```

use clap::Parser;
use metaplastic::numerics::SeededRng;
use metaplastic::quadratic::{orthogonality_residual, random_spd, EigenSpectrum};

#[derive(Parser)]
struct Args {
    #[arg(long, default_value_t = 100)]
    dim: usize,
    #[arg(long, default_value_t = 1.0)]
    mean: f64,
    #[arg(long, default_value_t = 0.2)]
    std: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn main() -> anyhow::Result<()> {
    let a = Args::parse();
    let mut rng = SeededRng::new(a.seed);
    let s = random_spd(
        a.dim,
        EigenSpectrum::Normal {
            mean: a.mean,
            std: a.std,
        },
        &mut rng,
    )?;
    let trace: f64 = (0..a.dim).map(|i| s.h.get(i, i)).sum();
    let eig_sum: f64 = s.eigenvalues.iter().sum();
    let (lo, hi) = s
        .eigenvalues
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| {
            (l.min(v), h.max(v))
        });
    println!("dim {}  eigenvalues in [{lo:.4}, {hi:.4}]", a.dim);
    println!("trace(H) {trace:.10}  Σλ {eig_sum:.10}");
    println!("‖RᵀR − I‖_max {:.3e}", orthogonality_residual(&s.rotation));
    Ok(())
}
