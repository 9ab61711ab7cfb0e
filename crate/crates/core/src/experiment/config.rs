use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::runs::Baseline;
use crate::error::{Error, Result};
use crate::quadratic::EigenSpectrum;
use crate::tasks::PixelRange;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunMode {
    Multitask,
    Stream,
    Interleaved,
    Quadratic,
    Probe,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NetworkSection {
    pub hidden: Vec<usize>,
    pub init_sigma: f64,
}

impl Default for NetworkSection {
    fn default() -> Self {
        Self {
            hidden: vec![512, 512],
            init_sigma: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainingSection {
    pub m: f64,
    pub eta: f64,
    pub batch_size: usize,
    /// Epochs per task (multitask, probe), per shard (stream) or in total
    /// (interleaved).
    pub epochs: usize,
    pub tasks: usize,
    pub baseline: Baseline,
    pub fisher_samples: usize,
}

impl Default for TrainingSection {
    fn default() -> Self {
        Self {
            m: 0.9,
            eta: 0.01,
            batch_size: 100,
            epochs: 10,
            tasks: 3,
            baseline: Baseline::None,
            fisher_samples: 1000,
        }
    }
}

/// A directory holding `train-*` and `t10k-*` IDX files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataSection {
    pub dir: PathBuf,
    /// Use only the first `limit` training samples.
    pub limit: Option<usize>,
    pub pixels: PixelRange,
}

impl Default for DataSection {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("data/mnist"),
            limit: None,
            pixels: PixelRange::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StreamSection {
    pub shards: usize,
    /// Also train the full-data reference with the same step count.
    pub reference: bool,
}

impl Default for StreamSection {
    fn default() -> Self {
        Self {
            shards: 12,
            reference: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QuadraticSection {
    /// Dimensions of the diagonal tasks.
    pub diagonal_dims: Vec<usize>,
    pub trials: usize,
    /// Dimension of the dense task.
    pub dim: usize,
    pub steps: usize,
    pub eta: f64,
    /// Dense-task optimum drawn uniformly from `[-w_max, w_max]`.
    pub w_max: f64,
    pub spectrum: EigenSpectrum,
    pub bins: usize,
}

impl Default for QuadraticSection {
    fn default() -> Self {
        Self {
            diagonal_dims: vec![1, 10],
            trials: 100,
            dim: 500,
            steps: 100_000,
            eta: 0.01,
            w_max: 2.0,
            spectrum: EigenSpectrum::default(),
            bins: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProbeSection {
    pub bins: usize,
    pub realizations: usize,
    /// Test samples the loss is measured on.
    pub samples: usize,
    /// Flips per bin for each layer; empty selects the scaled defaults.
    pub k: Vec<usize>,
    /// Probe a saved network instead of training one.
    pub params: Option<PathBuf>,
    /// Permuted task (of the run seed) whose test data the loss is measured
    /// on. A saved network holds the batch-norm statistics of the last task it
    /// learned, so this should name that task. Freshly trained probe networks
    /// learn task 0 only.
    pub task: usize,
}

impl Default for ProbeSection {
    fn default() -> Self {
        Self {
            bins: 10,
            realizations: 100,
            samples: 2000,
            k: Vec::new(),
            params: None,
            task: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HistogramSection {
    /// Bins per histogram; zero disables the export.
    pub bins: usize,
}

impl Default for HistogramSection {
    fn default() -> Self {
        Self { bins: 0 }
    }
}

/// Everything that defines a run. Loaded from TOML; missing keys take the
/// defaults shown by `ExperimentConfig::default()`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub mode: RunMode,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub network: NetworkSection,
    #[serde(default)]
    pub training: TrainingSection,
    #[serde(default)]
    pub data: DataSection,
    #[serde(default)]
    pub stream: StreamSection,
    #[serde(default)]
    pub quadratic: QuadraticSection,
    #[serde(default)]
    pub probe: ProbeSection,
    #[serde(default)]
    pub histograms: HistogramSection,
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

fn default_output() -> PathBuf {
    PathBuf::from("runs/latest")
}

impl ExperimentConfig {
    pub fn new(mode: RunMode) -> Self {
        Self {
            mode,
            seeds: default_seeds(),
            output_dir: default_output(),
            network: NetworkSection::default(),
            training: TrainingSection::default(),
            data: DataSection::default(),
            stream: StreamSection::default(),
            quadratic: QuadraticSection::default(),
            probe: ProbeSection::default(),
            histograms: HistogramSection::default(),
        }
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::Config(vec![e.to_string()]))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&s)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// SHA-256 of the canonical JSON form with `output_dir` blanked, so the
    /// same run written to two places hashes the same. Formatting and key
    /// order in the TOML source do not affect it.
    pub fn hash(&self) -> [u8; 32] {
        let mut c = self.clone();
        c.output_dir = PathBuf::new();
        let json = serde_json::to_vec(&c).expect("config serializes");
        Sha256::digest(&json).into()
    }

    pub fn hash_hex(&self) -> String {
        hex::encode(self.hash())
    }

    /// Checks every constraint and reports all violations at once.
    pub fn validate(&self) -> Result<()> {
        let mut v = Vec::new();
        let t = &self.training;
        if self.seeds.is_empty() {
            v.push("seeds: at least one seed is required".to_string());
        }
        if !(t.m >= 0.0 && t.m.is_finite()) {
            v.push(format!("training.m: must be >= 0, got {}", t.m));
        }
        if !(t.eta > 0.0 && t.eta.is_finite()) {
            v.push(format!("training.eta: must be > 0, got {}", t.eta));
        }
        if t.batch_size < 2 {
            v.push(format!(
                "training.batch_size: must be >= 2, got {}",
                t.batch_size
            ));
        }
        if t.epochs == 0 {
            v.push("training.epochs: must be >= 1".into());
        }
        if t.tasks == 0 {
            v.push("training.tasks: must be >= 1".into());
        }
        if t.fisher_samples == 0 {
            v.push("training.fisher_samples: must be >= 1".into());
        }
        if let Baseline::Ewc { lambda } | Baseline::Random { lambda } = t.baseline {
            if !(lambda >= 0.0 && lambda.is_finite()) {
                v.push(format!(
                    "training.baseline.lambda: must be >= 0, got {lambda}"
                ));
            }
        }
        if self.network.hidden.is_empty() {
            v.push("network.hidden: at least one hidden layer is required".into());
        }
        if self.network.hidden.contains(&0) {
            v.push(format!(
                "network.hidden: widths must be >= 1, got {:?}",
                self.network.hidden
            ));
        }
        if !(self.network.init_sigma > 0.0) {
            v.push(format!(
                "network.init_sigma: must be > 0, got {}",
                self.network.init_sigma
            ));
        }
        if self.histograms.bins != 0 && self.histograms.bins < 10 {
            v.push(format!(
                "histograms.bins: must be 0 or >= 10, got {}",
                self.histograms.bins
            ));
        }

        let needs_data = self.mode != RunMode::Quadratic;
        if needs_data {
            for f in [
                "train-images-idx3-ubyte",
                "train-labels-idx1-ubyte",
                "t10k-images-idx3-ubyte",
                "t10k-labels-idx1-ubyte",
            ] {
                let p = self.data.dir.join(f);
                if !p.is_file() {
                    v.push(format!("data.dir: missing {}", p.display()));
                }
            }
        }
        match self.mode {
            RunMode::Stream if self.stream.shards == 0 => {
                v.push("stream.shards: must be >= 1".into())
            }
            RunMode::Quadratic => {
                let q = &self.quadratic;
                if q.dim < 2 {
                    v.push(format!("quadratic.dim: must be >= 2, got {}", q.dim));
                }
                if q.diagonal_dims.contains(&0) {
                    v.push("quadratic.diagonal_dims: dimensions must be >= 1".into());
                }
                if q.steps < 2 {
                    v.push("quadratic.steps: must be >= 2".into());
                }
                if !(q.eta > 0.0) {
                    v.push(format!("quadratic.eta: must be > 0, got {}", q.eta));
                }
                if q.bins == 0 {
                    v.push("quadratic.bins: must be >= 1".into());
                }
            }
            RunMode::Probe => {
                let p = &self.probe;
                if p.bins == 0 || p.realizations == 0 || p.samples == 0 {
                    v.push("probe: bins, realizations and samples must be >= 1".into());
                }
                match &p.params {
                    Some(path) if !path.is_file() => {
                        v.push(format!("probe.params: {} does not exist", path.display()));
                    }
                    None if p.task != 0 => {
                        v.push(format!("probe.task: a freshly trained probe network only learns task 0, got {}", p.task));
                    }
                    _ => {}
                }
            }
            _ => {}
        }
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(v))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_roundtrip_keeps_hash() {
        let mut c = ExperimentConfig::new(RunMode::Multitask);
        c.training.baseline = Baseline::Ewc { lambda: 5000.0 };
        let s = c.to_toml_string();
        let back = ExperimentConfig::from_toml_str(&s).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.hash(), c.hash());
        c.training.m = 1.0;
        assert_ne!(back.hash(), c.hash());
        c.training.m = back.training.m;
        c.output_dir = PathBuf::from("elsewhere");
        assert_eq!(back.hash(), c.hash());
    }

    #[test]
    fn partial_toml_uses_defaults() {
        let c =
            ExperimentConfig::from_toml_str("mode = \"quadratic\"\n[training]\nm = 0.5\n").unwrap();
        assert_eq!(c.training.m, 0.5);
        assert_eq!(c.training.eta, TrainingSection::default().eta);
        assert!(ExperimentConfig::from_toml_str("mode = \"quadratic\"\nbogus = 1\n").is_err());
    }

    #[test]
    fn validation_lists_every_violation() {
        let mut c = ExperimentConfig::new(RunMode::Multitask);
        c.training.m = -1.0;
        c.network.hidden = vec![0];
        c.data.dir = PathBuf::from("/nonexistent");
        let Err(Error::Config(v)) = c.validate() else {
            panic!("expected config error")
        };
        assert!(v.iter().any(|s| s.starts_with("training.m")));
        assert!(v.iter().any(|s| s.starts_with("network.hidden")));
        assert_eq!(v.iter().filter(|s| s.starts_with("data.dir")).count(), 4);
    }
}
