//! Sign-switch probe: how much the loss rises when binary weights of a
//! given hidden-weight magnitude are flipped. Also exports hidden-weight
//! histograms.

use std::io::Write;
use std::path::Path;

use crate::bnn::Network;
use crate::error::{Error, Result};
use crate::numerics::stats::{bin_index, mean_std, spearman};
use crate::numerics::SeededRng;
use crate::tasks::LabeledDataset;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeConfig {
    pub bins: usize,
    pub k: usize,
    pub realizations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeBin {
    /// Bin center in units of the layer's largest `|W^h|`.
    pub center: f64,
    pub population: usize,
    /// Mean over realizations of `ΔL / k`.
    pub mean: f64,
    pub std: f64,
    pub k: usize,
    pub realizations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeCurve {
    pub layer: usize,
    pub bins: Vec<ProbeBin>,
    pub warnings: Vec<String>,
}

impl ProbeCurve {
    pub fn spearman(&self) -> f64 {
        let (x, y): (Vec<f64>, Vec<f64>) = self.bins.iter().map(|b| (b.center, b.mean)).unzip();
        spearman(&x, &y)
    }

    pub fn write_csv(&self, path: impl AsRef<Path>, header_comment: Option<&str>) -> Result<()> {
        let path = path.as_ref();
        let write = || -> std::io::Result<()> {
            let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
            if let Some(c) = header_comment {
                writeln!(f, "# {c}")?;
            }
            for w in &self.warnings {
                writeln!(f, "# warning: {w}")?;
            }
            writeln!(f, "bin,mean,std,k,realizations")?;
            for b in &self.bins {
                writeln!(
                    f,
                    "{:.6},{:.8},{:.8},{},{}",
                    b.center, b.mean, b.std, b.k, b.realizations
                )?;
            }
            f.flush()
        };
        write().map_err(|e| Error::io(path, e))
    }
}

/// Flip counts per layer: 1000, 2000 and 100 flips for layers of
/// 784×4096, 4096×4096 and 4096×10 weights, scaled by each layer's weight
/// count (rounded down, at least 10). Layers past the third use the last
/// ratio.
pub fn default_k_per_layer(net: &Network) -> Vec<usize> {
    const REFERENCE: [(f64, f64); 3] = [
        (1000.0, 784.0 * 4096.0),
        (2000.0, 4096.0 * 4096.0),
        (100.0, 4096.0 * 10.0),
    ];
    let n = net.num_layers();
    net.layers()
        .iter()
        .enumerate()
        .map(|(l, layer)| {
            // The output layer always takes the output-layer ratio.
            let r = if l + 1 == n { 2 } else { l.min(1) };
            let (k, size) = REFERENCE[r];
            ((k * layer.hidden.len() as f64 / size) as usize).max(10)
        })
        .collect()
}

fn flip(w: f64) -> f64 {
    if w == 0.0 {
        // sign(0) = +1, so a zero weight needs an explicit negative value.
        -f64::MIN_POSITIVE
    } else {
        -w
    }
}

/// Probes one layer. Weights are binned by `|W^h| / max|W^h|` into
/// `cfg.bins` uniform bins; in every bin holding at least `k` weights, `k`
/// distinct weights are drawn, their binary signs flipped, the mean loss on
/// `data` measured and the weights restored. Each realization reports
/// `(L_flipped − L) / k`. Bins with fewer than `k` weights are skipped and
/// listed in `warnings`. The network is bitwise unchanged afterwards.
pub fn sign_switch_probe(
    net: &mut Network,
    data: &LabeledDataset,
    layer: usize,
    cfg: ProbeConfig,
    rng: &mut SeededRng,
) -> Result<ProbeCurve> {
    if layer >= net.num_layers() {
        return Err(Error::InvalidArgument(format!(
            "layer {layer} out of range for {} layers",
            net.num_layers()
        )));
    }
    if data.is_empty() {
        return Err(Error::EmptyDataset(data.name.clone()));
    }
    if cfg.bins == 0 {
        return Err(Error::InvalidArgument("need at least one bin".into()));
    }
    let inputs = net.activations_into(&data.images, layer)?;
    let base = net.evaluate_from(layer, &inputs, &data.labels)?.loss;

    let hidden: Vec<f64> = net.layers()[layer].hidden.data().to_vec();
    let hi = hidden.iter().fold(0.0f64, |m, w| m.max(w.abs()));
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); cfg.bins];
    for (i, w) in hidden.iter().enumerate() {
        members[bin_index(w.abs(), hi, cfg.bins)].push(i);
    }

    let width = 1.0 / cfg.bins as f64;
    let mut bins = Vec::new();
    let mut warnings = Vec::new();
    for (b, idx) in members.iter().enumerate() {
        let center = (b as f64 + 0.5) * width;
        if cfg.k == 0 {
            bins.push(ProbeBin {
                center,
                population: idx.len(),
                mean: 0.0,
                std: 0.0,
                k: 0,
                realizations: cfg.realizations,
            });
            continue;
        }
        if idx.len() < cfg.k {
            let msg = format!(
                "layer {layer} bin {b} (center {center:.3}) holds {} weights, fewer than k = {}; skipped",
                idx.len(),
                cfg.k
            );
            log::warn!("{msg}");
            warnings.push(msg);
            continue;
        }
        let mut deltas = Vec::with_capacity(cfg.realizations);
        for _ in 0..cfg.realizations {
            let chosen: Vec<usize> = rng
                .sample_indices(idx.len(), cfg.k)
                .into_iter()
                .map(|j| idx[j])
                .collect();
            let w = net.layers_mut()[layer].hidden.data_mut();
            for &i in &chosen {
                w[i] = flip(hidden[i]);
            }
            let flipped = net.evaluate_from(layer, &inputs, &data.labels);
            let w = net.layers_mut()[layer].hidden.data_mut();
            for &i in &chosen {
                w[i] = hidden[i];
            }
            deltas.push((flipped?.loss - base) / cfg.k as f64);
        }
        let (mean, std) = mean_std(&deltas);
        bins.push(ProbeBin {
            center,
            population: idx.len(),
            mean,
            std,
            k: cfg.k,
            realizations: cfg.realizations,
        });
    }
    Ok(ProbeCurve {
        layer,
        bins,
        warnings,
    })
}

/// Counts of hidden-weight values of one layer over uniform bins spanning
/// the observed range.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub layer: usize,
    pub lo: f64,
    pub hi: f64,
    pub counts: Vec<usize>,
}

impl Histogram {
    pub fn bin_width(&self) -> f64 {
        (self.hi - self.lo) / self.counts.len() as f64
    }

    pub fn center(&self, b: usize) -> f64 {
        self.lo + (b as f64 + 0.5) * self.bin_width()
    }

    /// Bin holding the value 0 (clamped to the range).
    pub fn zero_bin(&self) -> usize {
        self.index(0.0)
    }

    fn index(&self, v: f64) -> usize {
        let n = self.counts.len();
        if self.hi <= self.lo {
            return 0;
        }
        let x = ((v - self.lo) / (self.hi - self.lo) * n as f64).floor();
        (x.max(0.0) as usize).min(n - 1)
    }

    pub fn modal_bin(&self) -> usize {
        let mut best = 0;
        for (b, &c) in self.counts.iter().enumerate() {
            if c > self.counts[best] {
                best = b;
            }
        }
        best
    }

    /// Number of values with `|W^h| > threshold`, counted from the bins
    /// whose centers lie beyond it.
    pub fn mass_beyond(&self, threshold: f64) -> usize {
        (0..self.counts.len())
            .filter(|&b| self.center(b).abs() > threshold)
            .map(|b| self.counts[b])
            .sum()
    }
}

fn histogram_of(layer: usize, values: &[f64], bins: usize) -> Histogram {
    let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut h = Histogram {
        layer,
        lo,
        hi,
        counts: vec![0; bins],
    };
    for &v in values {
        let b = h.index(v);
        h.counts[b] += 1;
    }
    h
}

/// One histogram per layer with `bins` uniform bins between the smallest and
/// largest hidden weight of that layer.
pub fn export_histogram(net: &Network, bins: usize) -> Result<Vec<Histogram>> {
    if bins < 10 {
        return Err(Error::InvalidArgument(format!(
            "need at least 10 bins, got {bins}"
        )));
    }
    Ok(net
        .layers()
        .iter()
        .enumerate()
        .map(|(l, layer)| histogram_of(l, layer.hidden.data(), bins))
        .collect())
}

/// Histogram over every hidden weight of the network.
pub fn network_histogram(net: &Network, bins: usize) -> Result<Histogram> {
    if bins < 10 {
        return Err(Error::InvalidArgument(format!(
            "need at least 10 bins, got {bins}"
        )));
    }
    let all: Vec<f64> = net
        .layers()
        .iter()
        .flat_map(|l| l.hidden.data().iter().copied())
        .collect();
    Ok(histogram_of(usize::MAX, &all, bins))
}

/// Writes `layer,bin_lo,bin_hi,count` rows for every histogram.
pub fn write_histograms_csv(
    hists: &[Histogram],
    path: impl AsRef<Path>,
    header_comment: Option<&str>,
) -> Result<()> {
    let path = path.as_ref();
    let write = || -> std::io::Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        if let Some(c) = header_comment {
            writeln!(f, "# {c}")?;
        }
        writeln!(f, "layer,bin_lo,bin_hi,count")?;
        for h in hists {
            let w = h.bin_width();
            for (b, c) in h.counts.iter().enumerate() {
                let lo = h.lo + b as f64 * w;
                writeln!(f, "{},{:.6},{:.6},{}", h.layer, lo, lo + w, c)?;
            }
        }
        f.flush()
    };
    write().map_err(|e| Error::io(path, e))
}
