use serde::{Deserialize, Serialize};

use super::batchnorm::{self, BatchNormParams, BatchStats, BnCache};
use super::loss::{argmax_rows, cross_entropy, per_sample_nll};
use crate::error::{Error, Result};
use crate::numerics::{gaussian_init, Matrix, SeededRng};

/// Sign with the tie at zero sent to `+1`.
#[inline]
pub fn sign(x: f64) -> f64 {
    if x >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

/// Elementwise sign of the hidden weights.
pub fn binarize(hidden: &Matrix) -> Matrix {
    hidden.map(sign)
}

/// Hidden-layer nonlinearity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    /// `sign`, trained through the hard-tanh straight-through estimator.
    Sign,
    /// `clamp(y, -1, 1)`: the continuous relaxation of `Sign`, sharing its
    /// backward pass exactly.
    HardTanh,
    /// `tanh`, used by the full-precision control network.
    Tanh,
}

impl Activation {
    #[inline]
    fn apply(self, y: f64) -> f64 {
        match self {
            Activation::Sign => sign(y),
            Activation::HardTanh => y.clamp(-1.0, 1.0),
            Activation::Tanh => y.tanh(),
        }
    }

    /// Derivative used by backward, given the pre-activation `y` and the
    /// activation output `a`.
    #[inline]
    fn derivative(self, y: f64, a: f64) -> f64 {
        match self {
            Activation::Sign | Activation::HardTanh => {
                if y.abs() <= 1.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - a * a,
        }
    }
}

/// Whether the forward pass sees `sign(W^h)` or `W^h` itself.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightMode {
    Binary,
    Real,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Batch statistics in batch norm; running statistics are updated.
    Train,
    /// Running statistics in batch norm; samples are independent.
    Eval,
}

/// Hidden weights (`out × in`) and the batch-norm parameters of one layer.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams {
    pub hidden: Matrix,
    pub bn: BatchNormParams,
}

impl LayerParams {
    pub fn fan_in(&self) -> usize {
        self.hidden.cols()
    }

    pub fn width(&self) -> usize {
        self.hidden.rows()
    }

    pub fn binary(&self) -> Matrix {
        binarize(&self.hidden)
    }
}

/// Intermediate values of one forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    mode: Mode,
    generation: u64,
    inputs: Vec<Matrix>,
    weights: Vec<Matrix>,
    bn: Vec<BnCache>,
    pre_activations: Vec<Matrix>,
}

impl ForwardCache {
    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn batch_size(&self) -> usize {
        self.inputs[0].rows()
    }

    /// Input fed to `layer` (pixels for layer 0, activations afterwards).
    pub fn input(&self, layer: usize) -> &Matrix {
        &self.inputs[layer]
    }

    /// Weights actually used by `layer` in this pass.
    pub fn weights(&self, layer: usize) -> &Matrix {
        &self.weights[layer]
    }

    /// Batch-norm output of hidden `layer`, before the nonlinearity.
    pub fn pre_activation(&self, layer: usize) -> &Matrix {
        &self.pre_activations[layer]
    }

    /// Normalized (pre-affine) batch-norm values of `layer`.
    pub fn normalized(&self, layer: usize) -> &Matrix {
        &self.bn[layer].xhat
    }
}

/// Gradients of the loss with respect to the weights used in the forward
/// pass (binary weights for a binarized network) and batch-norm parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Matrix>,
    pub gamma: Vec<Vec<f64>>,
    pub beta: Vec<Vec<f64>>,
}

/// Per-layer error signals at the linear outputs.
pub(crate) struct Deltas {
    pub dz: Vec<Matrix>,
    pub dgamma: Vec<Vec<f64>>,
    pub dbeta: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub correct: usize,
    pub total: usize,
    pub loss: f64,
}

impl Evaluation {
    pub fn accuracy(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.correct as f64 / self.total as f64
        }
    }
}

const EVAL_BATCH: usize = 1000;

/// Fully connected network: every layer is linear → batch norm; hidden
/// layers then apply the activation, the last layer emits real logits.
#[derive(Debug, Clone)]
pub struct Network {
    layers: Vec<LayerParams>,
    activation: Activation,
    weight_mode: WeightMode,
    generation: u64,
}

impl PartialEq for Network {
    fn eq(&self, other: &Self) -> bool {
        self.layers == other.layers
            && self.activation == other.activation
            && self.weight_mode == other.weight_mode
    }
}

impl Network {
    /// `widths` lists the input size, every hidden width and the class count.
    pub fn new(
        widths: &[usize],
        init_sigma: f64,
        activation: Activation,
        weight_mode: WeightMode,
        rng: &mut SeededRng,
    ) -> Result<Self> {
        if widths.len() < 2 || widths.contains(&0) {
            return Err(Error::InvalidArgument(format!(
                "network widths must have at least two positive entries, got {widths:?}"
            )));
        }
        let layers = widths
            .windows(2)
            .map(|w| {
                Ok(LayerParams {
                    hidden: gaussian_init(w[1], w[0], init_sigma, rng)?,
                    bn: BatchNormParams::new(w[1]),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_layers(layers, activation, weight_mode)
    }

    /// Binarized network: sign weights and sign activations.
    pub fn binarized(widths: &[usize], init_sigma: f64, rng: &mut SeededRng) -> Result<Self> {
        Self::new(
            widths,
            init_sigma,
            Activation::Sign,
            WeightMode::Binary,
            rng,
        )
    }

    /// Full-precision control: real weights and tanh activations.
    pub fn full_precision(widths: &[usize], init_sigma: f64, rng: &mut SeededRng) -> Result<Self> {
        Self::new(widths, init_sigma, Activation::Tanh, WeightMode::Real, rng)
    }

    pub fn from_layers(
        layers: Vec<LayerParams>,
        activation: Activation,
        weight_mode: WeightMode,
    ) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidArgument(
                "network needs at least one layer".into(),
            ));
        }
        for pair in layers.windows(2) {
            if pair[1].fan_in() != pair[0].width() {
                return Err(Error::ShapeMismatch {
                    op: "Network::from_layers",
                    expected: (pair[1].width(), pair[0].width()),
                    got: (pair[1].width(), pair[1].fan_in()),
                });
            }
        }
        for layer in &layers {
            if layer.bn.width() != layer.width() {
                return Err(Error::ShapeMismatch {
                    op: "Network::from_layers (batch norm)",
                    expected: (layer.width(), 1),
                    got: (layer.bn.width(), 1),
                });
            }
        }
        Ok(Self {
            layers,
            activation,
            weight_mode,
            generation: 0,
        })
    }

    pub fn layers(&self) -> &[LayerParams] {
        &self.layers
    }

    /// Mutable access to the parameters. Any cache produced before this call
    /// is rejected by [`Network::backward`].
    pub fn layers_mut(&mut self) -> &mut [LayerParams] {
        self.generation += 1;
        &mut self.layers
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn weight_mode(&self) -> WeightMode {
        self.weight_mode
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn input_width(&self) -> usize {
        self.layers[0].fan_in()
    }

    pub fn output_width(&self) -> usize {
        self.layers[self.layers.len() - 1].width()
    }

    pub fn widths(&self) -> Vec<usize> {
        std::iter::once(self.input_width())
            .chain(self.layers.iter().map(|l| l.width()))
            .collect()
    }

    /// Snapshot of every layer's batch-norm parameters.
    pub fn bn_snapshot(&self) -> Vec<BatchNormParams> {
        self.layers.iter().map(|l| l.bn.clone()).collect()
    }

    /// Replaces the batch-norm parameters, returning the previous ones.
    pub fn swap_bn(&mut self, bn: Vec<BatchNormParams>) -> Result<Vec<BatchNormParams>> {
        if bn.len() != self.layers.len()
            || bn
                .iter()
                .zip(&self.layers)
                .any(|(b, l)| b.width() != l.width())
        {
            return Err(Error::InvalidArgument(
                "batch-norm snapshot does not match the network".into(),
            ));
        }
        Ok(self
            .layers
            .iter_mut()
            .zip(bn)
            .map(|(l, b)| std::mem::replace(&mut l.bn, b))
            .collect())
    }

    fn effective_weights(&self, layer: usize) -> Matrix {
        match self.weight_mode {
            WeightMode::Binary => self.layers[layer].binary(),
            WeightMode::Real => self.layers[layer].hidden.clone(),
        }
    }

    fn check_input(&self, x: &Matrix, layer: usize) -> Result<()> {
        let fan_in = self.layers[layer].fan_in();
        if x.cols() != fan_in {
            return Err(Error::ShapeMismatch {
                op: "forward",
                expected: (x.rows(), fan_in),
                got: x.shape(),
            });
        }
        Ok(())
    }

    fn forward_impl(
        &self,
        x: &Matrix,
        mode: Mode,
    ) -> Result<(Matrix, ForwardCache, Vec<Option<BatchStats>>)> {
        self.check_input(x, 0)?;
        let batch_stats = mode == Mode::Train;
        if batch_stats && x.rows() < 2 {
            return Err(Error::InvalidArgument(
                "train-mode forward needs a batch of at least 2".into(),
            ));
        }
        let n = self.layers.len();
        let mut inputs = Vec::with_capacity(n);
        let mut weights = Vec::with_capacity(n);
        let mut bn_caches = Vec::with_capacity(n);
        let mut pre = Vec::with_capacity(n - 1);
        let mut stats = Vec::with_capacity(n);

        let mut a = x.clone();
        for (l, layer) in self.layers.iter().enumerate() {
            let w = self.effective_weights(l);
            let z = a.matmul_nt(&w)?;
            let (y, bc, st) = batchnorm::forward(&z, &layer.bn, batch_stats);
            inputs.push(a);
            weights.push(w);
            bn_caches.push(bc);
            stats.push(st);
            if l + 1 < n {
                a = y.map(|v| self.activation.apply(v));
                pre.push(y);
            } else {
                a = y;
            }
        }
        let cache = ForwardCache {
            mode,
            generation: self.generation,
            inputs,
            weights,
            bn: bn_caches,
            pre_activations: pre,
        };
        Ok((a, cache, stats))
    }

    /// Forward pass; in train mode the running batch-norm statistics are
    /// updated.
    pub fn forward(&mut self, x: &Matrix, mode: Mode) -> Result<(Matrix, ForwardCache)> {
        let (logits, cache, stats) = self.forward_impl(x, mode)?;
        if mode == Mode::Train {
            let batch = x.rows();
            for (layer, st) in self.layers.iter_mut().zip(stats) {
                if let Some(st) = st {
                    batchnorm::update_running(&mut layer.bn, &st, batch);
                }
            }
        }
        Ok((logits, cache))
    }

    /// Forward pass that leaves every parameter, including running
    /// statistics, untouched.
    pub fn forward_pure(&self, x: &Matrix, mode: Mode) -> Result<(Matrix, ForwardCache)> {
        let (logits, cache, _) = self.forward_impl(x, mode)?;
        Ok((logits, cache))
    }

    /// Eval-mode activations that feed `layer` (`layer = 0` returns `x`).
    pub fn activations_into(&self, x: &Matrix, layer: usize) -> Result<Matrix> {
        self.check_input(x, 0)?;
        let mut a = x.clone();
        for l in 0..layer {
            a = self.eval_layer(l, &a)?;
        }
        Ok(a)
    }

    /// Eval-mode logits starting from the input of `layer`.
    pub fn predict_from(&self, layer: usize, input: &Matrix) -> Result<Matrix> {
        self.check_input(input, layer)?;
        let mut a = input.clone();
        for l in layer..self.layers.len() {
            a = self.eval_layer(l, &a)?;
        }
        Ok(a)
    }

    fn eval_layer(&self, l: usize, a: &Matrix) -> Result<Matrix> {
        let z = a.matmul_nt(&self.effective_weights(l))?;
        let (y, _, _) = batchnorm::forward(&z, &self.layers[l].bn, false);
        Ok(if l + 1 < self.layers.len() {
            y.map(|v| self.activation.apply(v))
        } else {
            y
        })
    }

    /// Eval-mode logits.
    pub fn predict(&self, x: &Matrix) -> Result<Matrix> {
        self.predict_from(0, x)
    }

    /// Top-1 accuracy and mean cross-entropy in eval mode.
    pub fn evaluate(&self, images: &Matrix, labels: &[usize]) -> Result<Evaluation> {
        self.evaluate_from(0, images, labels)
    }

    /// Like [`Network::evaluate`], with `inputs` already being the eval-mode
    /// activations feeding `layer`.
    pub fn evaluate_from(
        &self,
        layer: usize,
        inputs: &Matrix,
        labels: &[usize],
    ) -> Result<Evaluation> {
        if inputs.rows() != labels.len() {
            return Err(Error::ShapeMismatch {
                op: "evaluate",
                expected: (labels.len(), inputs.cols()),
                got: inputs.shape(),
            });
        }
        let mut correct = 0;
        let mut loss = 0.0;
        let idx: Vec<usize> = (0..labels.len()).collect();
        for chunk in idx.chunks(EVAL_BATCH) {
            let logits = self.predict_from(layer, &inputs.select_rows(chunk))?;
            let ys: Vec<usize> = chunk.iter().map(|&i| labels[i]).collect();
            correct += argmax_rows(&logits)
                .iter()
                .zip(&ys)
                .filter(|(p, y)| p == y)
                .count();
            loss += per_sample_nll(&logits, &ys).iter().sum::<f64>();
        }
        Ok(Evaluation {
            correct,
            total: labels.len(),
            loss: if labels.is_empty() {
                0.0
            } else {
                loss / labels.len() as f64
            },
        })
    }

    /// Mean cross-entropy of a batch in train mode, without touching the
    /// running statistics.
    pub fn train_loss(&self, x: &Matrix, labels: &[usize]) -> Result<f64> {
        let (logits, _) = self.forward_pure(x, Mode::Train)?;
        Ok(cross_entropy(&logits, labels)?.0)
    }

    fn check_cache(&self, cache: &ForwardCache, dlogits: &Matrix) -> Result<()> {
        if cache.generation != self.generation {
            return Err(Error::StaleCache(format!(
                "cache from parameter generation {}, network is at {}",
                cache.generation, self.generation
            )));
        }
        if cache.inputs.len() != self.layers.len() {
            return Err(Error::StaleCache(format!(
                "cache has {} layers, network has {}",
                cache.inputs.len(),
                self.layers.len()
            )));
        }
        dlogits.ensure_shape("backward", (cache.batch_size(), self.output_width()))
    }

    pub(crate) fn deltas(&self, cache: &ForwardCache, dlogits: &Matrix) -> Result<Deltas> {
        self.check_cache(cache, dlogits)?;
        let n = self.layers.len();
        let mut dz_all = vec![Matrix::zeros(0, 0); n];
        let mut dgamma = vec![Vec::new(); n];
        let mut dbeta = vec![Vec::new(); n];

        let mut dy = dlogits.clone();
        for l in (0..n).rev() {
            let (dz, dg, db) = batchnorm::backward(&dy, &cache.bn[l], &self.layers[l].bn);
            if l > 0 {
                let da = dz.matmul(&cache.weights[l])?;
                let y = &cache.pre_activations[l - 1];
                let a = &cache.inputs[l];
                let mut next = da;
                for ((g, &yv), &av) in next.data_mut().iter_mut().zip(y.data()).zip(a.data()) {
                    *g *= self.activation.derivative(yv, av);
                }
                dy = next;
            }
            dz_all[l] = dz;
            dgamma[l] = dg;
            dbeta[l] = db;
        }
        Ok(Deltas {
            dz: dz_all,
            dgamma,
            dbeta,
        })
    }

    /// Gradients for upstream logit gradient `dlogits`. Weight gradients are
    /// taken with respect to the weights used in the forward pass.
    pub fn backward(&self, cache: &ForwardCache, dlogits: &Matrix) -> Result<Gradients> {
        let d = self.deltas(cache, dlogits)?;
        let weights =
            d.dz.iter()
                .zip(&cache.inputs)
                .map(|(dz, a)| dz.matmul_tn(a))
                .collect::<Result<Vec<_>>>()?;
        Ok(Gradients {
            weights,
            gamma: d.dgamma,
            beta: d.dbeta,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn toy(widths: &[usize], seed: u64) -> Network {
        Network::binarized(widths, 0.1, &mut SeededRng::new(seed)).unwrap()
    }

    #[test]
    fn binarize_examples() {
        let m = Matrix::row_vector(vec![-0.3, 0.0, 2.7]);
        assert_eq!(binarize(&m).data(), &[-1.0, 1.0, 1.0]);
        let b = Matrix::row_vector(vec![1.0, -1.0, -1.0, 1.0]);
        assert_eq!(binarize(&b), b);
        assert_eq!(binarize(&m.map(|x| x * 7.5)), binarize(&m));
    }

    #[test]
    fn positive_weights_sum_fan_in() {
        // One layer, all hidden weights positive, all-ones input: the linear
        // output of every unit is the fan-in.
        let mut rng = SeededRng::new(1);
        let mut net = Network::binarized(&[5, 3], 0.1, &mut rng).unwrap();
        for w in net.layers_mut()[0].hidden.data_mut() {
            *w = w.abs() + 0.01;
        }
        let x = Matrix::filled(4, 5, 1.0);
        let (_, cache) = net.forward_pure(&x, Mode::Eval).unwrap();
        let z = x.matmul_nt(cache.weights(0)).unwrap();
        assert!(z.data().iter().all(|&v| v == 5.0));
    }

    #[test]
    fn zero_final_gamma_gives_constant_logits() {
        let mut net = toy(&[6, 4, 3], 2);
        net.layers_mut()[1].bn.gamma = vec![0.0; 3];
        net.layers_mut()[1].bn.beta = vec![0.5, -0.5, 2.0];
        let x = Matrix::from_fn(5, 6, |i, j| ((i * 7 + j * 3) % 11) as f64 / 5.0 - 1.0);
        for mode in [Mode::Train, Mode::Eval] {
            let (logits, _) = net.forward_pure(&x, mode).unwrap();
            for i in 0..5 {
                assert_eq!(logits.row(i), &[0.5, -0.5, 2.0]);
            }
        }
    }

    #[test]
    fn train_mode_needs_two_samples() {
        let mut net = toy(&[3, 2], 3);
        assert!(net.forward(&Matrix::zeros(1, 3), Mode::Train).is_err());
        assert!(net.forward(&Matrix::zeros(1, 3), Mode::Eval).is_ok());
        assert!(matches!(
            net.forward(&Matrix::zeros(2, 4), Mode::Eval),
            Err(Error::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn zero_upstream_gradient_gives_zero_gradients() {
        let mut net = toy(&[4, 5, 3], 4);
        let x = Matrix::from_fn(6, 4, |i, j| (i as f64 - j as f64) / 3.0);
        let (_, cache) = net.forward(&x, Mode::Train).unwrap();
        let g = net.backward(&cache, &Matrix::zeros(6, 3)).unwrap();
        assert!(g.weights.iter().all(|w| w.data().iter().all(|&v| v == 0.0)));
        assert!(g
            .gamma
            .iter()
            .chain(&g.beta)
            .all(|v| v.iter().all(|&x| x == 0.0)));
    }

    #[test]
    fn stale_cache_is_rejected() {
        let mut net = toy(&[4, 3, 2], 5);
        let x = Matrix::from_fn(3, 4, |i, j| (i * j) as f64 / 4.0 - 0.5);
        let (_, cache) = net.forward(&x, Mode::Train).unwrap();
        net.layers_mut()[0].hidden.data_mut()[0] += 1.0;
        assert!(matches!(
            net.backward(&cache, &Matrix::zeros(3, 2)),
            Err(Error::StaleCache(_))
        ));
        let (_, cache) = net.forward(&x, Mode::Train).unwrap();
        assert!(net.backward(&cache, &Matrix::zeros(4, 2)).is_err());
    }

    #[test]
    fn closed_gate_blocks_gradient() {
        // Hidden unit 0 sits at |y| = 2, outside the STE window.
        let mut net = toy(&[2, 2, 2], 6);
        {
            let layers = net.layers_mut();
            layers[0].bn.gamma = vec![0.0, 1.0];
            layers[0].bn.beta = vec![2.0, 0.0];
        }
        let x = Matrix::from_fn(4, 2, |i, j| (i as f64) - (j as f64) * 0.3);
        let (_, cache) = net.forward_pure(&x, Mode::Train).unwrap();
        assert!(cache
            .pre_activation(0)
            .data()
            .chunks(2)
            .all(|r| r[0] == 2.0));
        let dlogits = Matrix::from_fn(4, 2, |i, j| if (i + j) % 2 == 0 { 0.3 } else { -0.2 });
        let d = net.deltas(&cache, &dlogits).unwrap();
        for i in 0..4 {
            assert_eq!(d.dz[0].get(i, 0), 0.0);
        }
        let g = net.backward(&cache, &dlogits).unwrap();
        assert!(g.weights[0].row(0).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn eval_is_batch_size_independent() {
        let mut net = toy(&[5, 8, 3], 7);
        let x = Matrix::from_fn(10, 5, |i, j| ((i * 5 + j) as f64).sin());
        // Move running statistics away from their initial values.
        net.forward(&x, Mode::Train).unwrap();
        let full = net.predict(&x).unwrap();
        for i in 0..10 {
            let one = net.predict(&x.select_rows(&[i])).unwrap();
            assert_eq!(one.row(0), full.row(i));
        }
    }

    #[test]
    fn bn_swap_roundtrip() {
        let mut net = toy(&[3, 4, 2], 8);
        let original = net.clone();
        let mut other = net.bn_snapshot();
        other[0].beta[1] = 3.0;
        let prev = net.swap_bn(other).unwrap();
        assert_eq!(net.layers()[0].bn.beta[1], 3.0);
        net.swap_bn(prev).unwrap();
        assert_eq!(net, original);
    }

    proptest! {
        #[test]
        fn logits_depend_only_on_signs(scale in 1.0f64..100.0, seed in 0u64..50) {
            let net = toy(&[6, 5, 3], seed);
            let mut scaled = net.clone();
            for layer in scaled.layers_mut() {
                for w in layer.hidden.data_mut() {
                    // sign-preserving, magnitude-changing perturbation
                    *w = *w * scale + sign(*w) * 0.5;
                }
            }
            let x = Matrix::from_fn(4, 6, |i, j| ((i + 1) as f64 * (j as f64 - 2.5)).cos());
            prop_assert_eq!(net.predict(&x).unwrap(), scaled.predict(&x).unwrap());
            prop_assert_eq!(
                net.forward_pure(&x, Mode::Train).unwrap().0,
                scaled.forward_pure(&x, Mode::Train).unwrap().0
            );
        }
    }
}
