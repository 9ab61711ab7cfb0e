//! Hidden-weight trajectories on two-dimensional quadratic binary tasks: a
//! coordinate whose optimum lies outside [-1, 1] diverges linearly, the
//! other stays bounded.
//!
//! ```text
//! cargo run --release --example quadratic_divergence -- --steps 100000
//! ```

use clap::Parser;
use metaplastic::quadratic::{simulate, theoretical_slope, QuadraticTask};

#[derive(Parser)]
struct Args {
    #[arg(long, default_value_t = 100_000)]
    steps: usize,
    #[arg(long, default_value_t = 0.01)]
    eta: f64,
    /// Optimum of the first coordinate; the second is fixed at 0.5.
    #[arg(long, default_value_t = 1.8)]
    w_star: f64,
}

fn main() -> anyhow::Result<()> {
    let a = Args::parse();
    let lambda = [1.0, 0.7];
    let task = QuadraticTask::diagonal(&lambda, vec![a.w_star, 0.5], a.eta)?;
    let traj = simulate(&task, &[0.003, -0.002], a.steps, (a.steps / 10).max(1))?;
    println!("{:>9}  {:>12}  {:>12}", "step", "W^h_0", "W^h_1");
    for (k, s) in traj.samples.iter().enumerate() {
        println!("{:>9}  {:>12.4}  {:>12.4}", k * traj.stride, s[0], s[1]);
    }
    let last = traj.last();
    println!(
        "\nmeasured slope of W^h_0 {:.6e}, predicted {:.6e}",
        last[0] / a.steps as f64,
        theoretical_slope(lambda[0], a.w_star, a.eta)
    );
    println!(
        "bound on |W^h_1|: {:.4} (10·η·λ = {:.4})",
        last[1].abs(),
        10.0 * a.eta * lambda[1]
    );
    Ok(())
}
