//! A config-driven run written to disk and verified afterwards, as the
//! command-line tool does it.
//!
//! ```text
//! cargo run --release --example config_run -- path/to/config.toml
//! ```

use metaplastic::experiment::{run_experiment, verify_run, ExperimentConfig, RunMode};

fn main() -> anyhow::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cfg = match std::env::args().nth(1) {
        Some(p) => ExperimentConfig::load(p)?,
        None => {
            let mut c = ExperimentConfig::new(RunMode::Quadratic);
            c.output_dir = std::env::temp_dir().join("metaplastic-config-run");
            c.quadratic.dim = 50;
            c.quadratic.trials = 5;
            c.quadratic.steps = 20_000;
            c
        }
    };
    println!("{}", cfg.to_toml_string());
    let summary = run_experiment(&cfg)?;
    let report = verify_run(&summary.dir)?;
    println!(
        "{}: {} files carry hash {}, {} mismatched, status {}",
        summary.dir.display(),
        report.checked.len(),
        report.config_hash,
        report.mismatched.len(),
        report.status
    );
    Ok(())
}
