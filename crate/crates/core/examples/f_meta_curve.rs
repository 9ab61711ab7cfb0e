//! Shape of the metaplasticity function and its effect on a single update.
//!
//! ```text
//! cargo run --release --example f_meta_curve
//! ```

use metaplastic::metaplastic::{f_meta, metaplastic_step, MetaConfig};
use metaplastic::numerics::Matrix;

fn main() -> anyhow::Result<()> {
    let ms = [0.0, 0.5, 1.0, 1.35, 2.0];
    print!("{:>6}", "x");
    for m in ms {
        print!("  m={m:<5}");
    }
    println!();
    for i in 0..=12 {
        let x = 0.25 * i as f64;
        print!("{x:>6.2}");
        for m in ms {
            print!("  {:<7.4}", f_meta(m, x));
        }
        println!();
    }

    // The same Adam update applied to a weight at 2.0, once pushing it toward
    // zero and once pushing it away.
    let cfg = MetaConfig::new(0.9, 0.01)?;
    let mut toward = Matrix::row_vector(vec![2.0]);
    let mut away = toward.clone();
    metaplastic_step(&mut toward, &Matrix::row_vector(vec![1.0]), cfg)?;
    metaplastic_step(&mut away, &Matrix::row_vector(vec![-1.0]), cfg)?;
    println!(
        "\nfrom 2.0 with m=0.9, eta=0.01: toward zero -> {:.6}, away -> {:.6}",
        toward.get(0, 0),
        away.get(0, 0)
    );
    Ok(())
}
