use std::path::PathBuf;

use metaplastic::experiment::{ExperimentConfig, RunMode};

fn configs_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

#[test]
fn shipped_configs_parse_and_roundtrip() {
    let mut seen = Vec::new();
    for entry in std::fs::read_dir(configs_dir()).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().and_then(|e| e.to_str()) != Some("toml") {
            continue;
        }
        let cfg =
            ExperimentConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        let back = ExperimentConfig::from_toml_str(&cfg.to_toml_string()).unwrap();
        assert_eq!(back.hash(), cfg.hash(), "{}", path.display());
        seen.push(cfg.mode);
    }
    for mode in [
        RunMode::Multitask,
        RunMode::Stream,
        RunMode::Interleaved,
        RunMode::Quadratic,
        RunMode::Probe,
    ] {
        assert!(seen.contains(&mode), "no config for {mode:?}");
    }
}

#[test]
fn quadratic_config_validates_without_data() {
    ExperimentConfig::load(configs_dir().join("quadratic.toml"))
        .unwrap()
        .validate()
        .unwrap();
}
