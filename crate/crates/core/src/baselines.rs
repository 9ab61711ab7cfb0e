//! Comparison methods: elastic weight consolidation on binary weights, its
//! randomly-shuffled control, and the full-precision network step.

use crate::bnn::{binarize, Mode, Network, WeightMode};
use crate::error::{Error, Result};
use crate::metaplastic::{metaplastic_step, GradientHook, MetaConfig};
use crate::numerics::{Matrix, SeededRng};
use crate::tasks::LabeledDataset;

const FISHER_CHUNK: usize = 250;

/// Diagonal empirical Fisher information per layer, plus the weights the
/// network held when it was estimated.
#[derive(Debug, Clone, PartialEq)]
pub struct FisherDiag {
    pub values: Vec<Matrix>,
    pub anchor: Vec<Matrix>,
}

impl FisherDiag {
    pub fn total(&self) -> f64 {
        self.values.iter().flat_map(|m| m.data()).sum()
    }
}

/// The weights the forward pass uses: signs for a binary net, the hidden
/// values for a full-precision one.
fn forward_weights(net: &Network) -> Vec<Matrix> {
    net.layers()
        .iter()
        .map(|l| match net.weight_mode() {
            WeightMode::Binary => binarize(&l.hidden),
            WeightMode::Real => l.hidden.clone(),
        })
        .collect()
}

/// Mean over `samples` training examples of the squared gradient of
/// `log p(y|x)` with respect to the forward-pass weights, at the observed
/// label. Batch norm runs in eval mode so every sample is independent.
pub fn estimate_fisher(
    net: &Network,
    data: &LabeledDataset,
    samples: usize,
    rng: &mut SeededRng,
) -> Result<FisherDiag> {
    if data.is_empty() {
        return Err(Error::EmptyDataset(data.name.clone()));
    }
    if samples == 0 {
        return Err(Error::InvalidArgument(
            "Fisher estimate needs at least one sample".into(),
        ));
    }
    let idx = if samples >= data.len() {
        (0..data.len()).collect()
    } else {
        rng.sample_indices(data.len(), samples)
    };
    let mut values: Vec<Matrix> = net
        .layers()
        .iter()
        .map(|l| Matrix::zeros(l.width(), l.fan_in()))
        .collect();

    for chunk in idx.chunks(FISHER_CHUNK) {
        let x = data.images.select_rows(chunk);
        let (logits, cache) = net.forward_pure(&x, Mode::Eval)?;
        // Per-sample gradient of the NLL: softmax − onehot, no batch mean.
        let mut dlogits = logits.clone();
        for (r, &i) in chunk.iter().enumerate() {
            let row = dlogits.row_mut(r);
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut sum = 0.0;
            for v in row.iter_mut() {
                *v = (*v - max).exp();
                sum += *v;
            }
            for v in row.iter_mut() {
                *v /= sum;
            }
            row[data.labels[i]] -= 1.0;
        }
        let deltas = net.deltas(&cache, &dlogits)?;
        // Σ_s (dz_s,o · a_s,i)² = ((dz²)ᵀ · a²)_oi
        for (l, f) in values.iter_mut().enumerate() {
            let dz2 = deltas.dz[l].map(|v| v * v);
            let a2 = cache.input(l).map(|v| v * v);
            let part = dz2.matmul_tn(&a2)?;
            for (acc, p) in f.data_mut().iter_mut().zip(part.data()) {
                *acc += p;
            }
        }
    }
    let n = idx.len() as f64;
    for f in &mut values {
        f.data_mut().iter_mut().for_each(|v| *v /= n);
    }
    Ok(FisherDiag {
        values,
        anchor: forward_weights(net),
    })
}

/// Gradient of `(λ/2) Σ_tasks Σ_i F_i (W_i − anchor_i)²` with respect to the
/// forward-pass weights: `λ Σ_tasks F_i (W_i − anchor_i)`.
pub fn ewc_penalty_grad(
    net: &Network,
    consolidated: &[FisherDiag],
    lambda: f64,
) -> Result<Vec<Matrix>> {
    if !(lambda >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "lambda must be >= 0, got {lambda}"
        )));
    }
    let w = forward_weights(net);
    let mut out: Vec<Matrix> = w
        .iter()
        .map(|m| Matrix::zeros(m.rows(), m.cols()))
        .collect();
    for fd in consolidated {
        if fd.values.len() != w.len() || fd.anchor.len() != w.len() {
            return Err(Error::InvalidArgument(format!(
                "Fisher estimate has {} layers, network has {}",
                fd.values.len(),
                w.len()
            )));
        }
        for l in 0..w.len() {
            fd.values[l].ensure_shape("ewc_penalty_grad", w[l].shape())?;
            fd.anchor[l].ensure_shape("ewc_penalty_grad", w[l].shape())?;
            let g = out[l].data_mut();
            for (k, gk) in g.iter_mut().enumerate() {
                *gk += lambda * fd.values[l].data()[k] * (w[l].data()[k] - fd.anchor[l].data()[k]);
            }
        }
    }
    Ok(out)
}

/// Same multiset of importance values, permuted uniformly across every
/// synapse of the network. Anchors are kept.
pub fn shuffle_importance(fisher: &FisherDiag, rng: &mut SeededRng) -> FisherDiag {
    let mut flat: Vec<f64> = fisher
        .values
        .iter()
        .flat_map(|m| m.data().iter().copied())
        .collect();
    rng.shuffle(&mut flat);
    let mut rest = flat.as_slice();
    let values = fisher
        .values
        .iter()
        .map(|m| {
            let (head, tail) = rest.split_at(m.len());
            rest = tail;
            Matrix::new(m.rows(), m.cols(), head.to_vec()).expect("shape preserved")
        })
        .collect();
    FisherDiag {
        values,
        anchor: fisher.anchor.clone(),
    }
}

/// Consolidation penalty hooked into the trainer.
#[derive(Debug, Clone)]
pub struct EwcPenalty {
    pub consolidated: Vec<FisherDiag>,
    pub lambda: f64,
}

impl GradientHook for EwcPenalty {
    fn adjust(&self, net: &Network, grads: &mut crate::bnn::Gradients) -> Result<()> {
        if self.lambda == 0.0 || self.consolidated.is_empty() {
            return Ok(());
        }
        let pen = ewc_penalty_grad(net, &self.consolidated, self.lambda)?;
        for (g, p) in grads.weights.iter_mut().zip(pen) {
            for (a, b) in g.data_mut().iter_mut().zip(p.data()) {
                *a += b;
            }
        }
        Ok(())
    }
}

/// The metaplastic update applied to real-valued weights, modulated on the
/// sign of the weight itself.
pub fn full_precision_step(weights: &mut Matrix, update: &Matrix, cfg: MetaConfig) -> Result<()> {
    metaplastic_step(weights, update, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bnn::{cross_entropy, Activation};
    use crate::metaplastic::plain_step;

    fn toy_data(n: usize, seed: u64) -> LabeledDataset {
        let mut rng = SeededRng::new(seed);
        let images = Matrix::from_fn(n, 6, |_, _| rng.uniform(-1.0, 1.0));
        LabeledDataset::new(images, (0..n).map(|i| i % 3).collect(), 3, "toy").unwrap()
    }

    fn toy_net(seed: u64) -> Network {
        Network::binarized(&[6, 8, 3], 0.1, &mut SeededRng::new(seed)).unwrap()
    }

    #[test]
    fn fisher_matches_per_sample_gradients() {
        let net = toy_net(1);
        let data = toy_data(7, 2);
        let fd = estimate_fisher(&net, &data, 7, &mut SeededRng::new(0)).unwrap();
        let mut want: Vec<Matrix> = fd
            .values
            .iter()
            .map(|m| Matrix::zeros(m.rows(), m.cols()))
            .collect();
        for i in 0..7 {
            let x = data.images.select_rows(&[i]);
            let (logits, cache) = net.forward_pure(&x, Mode::Eval).unwrap();
            let (_, g) = cross_entropy(&logits, &[data.labels[i]]).unwrap();
            let grads = net.backward(&cache, &g).unwrap();
            for (w, g) in want.iter_mut().zip(&grads.weights) {
                for (a, b) in w.data_mut().iter_mut().zip(g.data()) {
                    *a += b * b / 7.0;
                }
            }
        }
        for (a, b) in fd.values.iter().zip(&want) {
            assert!(a.max_abs_diff(b) < 1e-12);
        }
        assert!(fd.values.iter().all(|m| m.data().iter().all(|&v| v >= 0.0)));
        assert_eq!(fd.anchor[0], binarize(&net.layers()[0].hidden));
    }

    #[test]
    fn disconnected_unit_has_zero_fisher() {
        let mut net = toy_net(3);
        // Zero gamma on hidden unit 2: its output is constant, so nothing
        // reaches its incoming weights.
        net.layers_mut()[0].bn.gamma[2] = 0.0;
        let fd = estimate_fisher(&net, &toy_data(20, 4), 20, &mut SeededRng::new(0)).unwrap();
        assert!(fd.values[0].row(2).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn fisher_does_not_mutate_and_rejects_empty() {
        let net = toy_net(5);
        let before = net.clone();
        estimate_fisher(&net, &toy_data(10, 1), 5, &mut SeededRng::new(0)).unwrap();
        assert_eq!(net, before);
        let empty = toy_data(10, 1).subset(&[], "empty");
        assert!(estimate_fisher(&net, &empty, 5, &mut SeededRng::new(0)).is_err());
    }

    #[test]
    fn fisher_converges_with_samples() {
        let net = toy_net(6);
        let data = toy_data(4000, 7);
        let a = estimate_fisher(&net, &data, 1000, &mut SeededRng::new(1)).unwrap();
        let b = estimate_fisher(&net, &data, 2000, &mut SeededRng::new(2)).unwrap();
        let (ta, tb) = (a.total(), b.total());
        assert!(
            (ta - tb).abs() / tb < 3.0 / (1000f64).sqrt(),
            "{ta} vs {tb}"
        );
    }

    #[test]
    fn penalty_closed_form() {
        let hidden = Matrix::row_vector(vec![0.3]);
        let layers = vec![crate::bnn::LayerParams {
            hidden,
            bn: crate::bnn::BatchNormParams::new(1),
        }];
        let net = Network::from_layers(layers, Activation::Sign, WeightMode::Binary).unwrap();
        let fd = FisherDiag {
            values: vec![Matrix::row_vector(vec![1.0])],
            anchor: vec![Matrix::row_vector(vec![-1.0])],
        };
        // λ·F·(W^b − anchor) = 5000·1·(1 − (−1))
        let g = ewc_penalty_grad(&net, &[fd.clone()], 5000.0).unwrap();
        assert_eq!(g[0].get(0, 0), 1e4);
        let at_anchor = FisherDiag {
            anchor: vec![Matrix::row_vector(vec![1.0])],
            ..fd.clone()
        };
        assert_eq!(
            ewc_penalty_grad(&net, &[at_anchor], 5000.0).unwrap()[0].get(0, 0),
            0.0
        );
        let no_f = FisherDiag {
            values: vec![Matrix::row_vector(vec![0.0])],
            ..fd.clone()
        };
        assert_eq!(
            ewc_penalty_grad(&net, &[no_f], 5000.0).unwrap()[0].get(0, 0),
            0.0
        );
        assert!(ewc_penalty_grad(&net, &[fd.clone(), fd], 1.0).unwrap()[0].get(0, 0) == 4.0);
    }

    #[test]
    fn penalty_shape_mismatch() {
        let net = toy_net(1);
        let fd = FisherDiag {
            values: vec![Matrix::zeros(1, 1), Matrix::zeros(3, 8)],
            anchor: vec![Matrix::zeros(1, 1), Matrix::zeros(3, 8)],
        };
        assert!(ewc_penalty_grad(&net, &[fd], 1.0).is_err());
    }

    #[test]
    fn shuffle_preserves_multiset_and_sum() {
        let net = toy_net(8);
        let fd = estimate_fisher(&net, &toy_data(50, 9), 50, &mut SeededRng::new(0)).unwrap();
        let s1 = shuffle_importance(&fd, &mut SeededRng::new(11));
        let s2 = shuffle_importance(&fd, &mut SeededRng::new(11));
        assert_eq!(s1, s2);
        assert_eq!(s1.anchor, fd.anchor);
        let sorted = |f: &FisherDiag| {
            let mut v: Vec<f64> = f
                .values
                .iter()
                .flat_map(|m| m.data().iter().copied())
                .collect();
            v.sort_by(f64::total_cmp);
            v
        };
        assert_eq!(sorted(&s1), sorted(&fd));
        assert_ne!(s1.values, fd.values);
    }

    #[test]
    fn full_precision_step_at_zero_m_is_plain() {
        let mut a = Matrix::row_vector(vec![0.5, -0.2, 1.5]);
        let mut b = a.clone();
        let u = Matrix::row_vector(vec![0.1, 0.3, -0.4]);
        full_precision_step(&mut a, &u, MetaConfig { m: 0.0, eta: 0.01 }).unwrap();
        plain_step(&mut b, &u, 0.01).unwrap();
        assert_eq!(a, b);
    }
}
