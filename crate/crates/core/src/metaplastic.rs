//! The metaplastic hidden-weight update and the task trainer.
//!
//! For each hidden weight `W^h` with binary weight `W^b = sign(W^h)` and Adam
//! update `U`:
//!
//! ```text
//! if U · W^b > 0:  W^h ← W^h − η · U · f_meta(m, W^h)   (toward zero: attenuated)
//! else:            W^h ← W^h − η · U
//! ```
//!
//! Batch-norm parameters always take the plain step. With `m = 0` the
//! modulation is exactly one and training reduces to ordinary BNN training.

use serde::{Deserialize, Serialize};

use crate::bnn::{cross_entropy, sign, Gradients, Mode, Network};
use crate::error::{Error, Result};
use crate::numerics::{adam_update, AdamConfig, AdamState, Matrix, SeededRng};
use crate::tasks::LabeledDataset;

/// `1 − tanh²(m·x)`: one near zero, decaying to zero as `|x|` grows.
#[inline]
pub fn f_meta(m: f64, x: f64) -> f64 {
    let t = (m * x).tanh();
    1.0 - t * t
}

/// Metaplasticity strength and learning rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetaConfig {
    pub m: f64,
    pub eta: f64,
}

impl MetaConfig {
    pub fn new(m: f64, eta: f64) -> Result<Self> {
        let cfg = Self { m, eta };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.m >= 0.0 && self.m.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "m must be >= 0, got {}",
                self.m
            )));
        }
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "eta must be > 0, got {}",
                self.eta
            )));
        }
        Ok(())
    }
}

/// Applies the metaplastic update to `hidden` in place.
pub fn metaplastic_step(hidden: &mut Matrix, update: &Matrix, cfg: MetaConfig) -> Result<()> {
    update.ensure_shape("metaplastic_step", hidden.shape())?;
    let MetaConfig { m, eta } = cfg;
    for (w, &u) in hidden.data_mut().iter_mut().zip(update.data()) {
        if u * sign(*w) > 0.0 {
            *w -= eta * u * f_meta(m, *w);
        } else {
            *w -= eta * u;
        }
    }
    Ok(())
}

/// `W^h ← W^h − η·U` with no metaplastic branch at all.
pub fn plain_step(hidden: &mut Matrix, update: &Matrix, eta: f64) -> Result<()> {
    update.ensure_shape("plain_step", hidden.shape())?;
    for (w, &u) in hidden.data_mut().iter_mut().zip(update.data()) {
        *w -= eta * u;
    }
    Ok(())
}

/// Learning-rate multiplier of the task-wise decay control: `10^(−task)`.
pub fn lr_decay_schedule(task_index: usize) -> f64 {
    10f64.powi(-(task_index as i32))
}

/// Which hidden-weight update the trainer applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepRule {
    /// The conditional, `f_meta`-modulated update.
    #[default]
    Metaplastic,
    /// Branch-free `W^h − η·U`; `m` is ignored. Reference path for the
    /// `m = 0` equivalence check.
    Plain,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub meta: MetaConfig,
    pub batch_size: usize,
    #[serde(default)]
    pub adam: AdamConfig,
    #[serde(default)]
    pub rule: StepRule,
}

impl TrainConfig {
    pub fn new(m: f64, eta: f64, batch_size: usize) -> Result<Self> {
        let cfg = Self {
            meta: MetaConfig::new(m, eta)?,
            batch_size,
            adam: AdamConfig::default(),
            rule: StepRule::Metaplastic,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.meta.validate()?;
        if self.batch_size < 2 {
            return Err(Error::InvalidArgument(format!(
                "batch size must be at least 2, got {}",
                self.batch_size
            )));
        }
        Ok(())
    }
}

/// Extra gradient applied before the Adam step (e.g. a consolidation
/// penalty). Receives gradients with respect to the forward-pass weights.
pub trait GradientHook {
    fn adjust(&self, net: &Network, grads: &mut Gradients) -> Result<()>;
}

/// Adam state for every trainable tensor of a network.
#[derive(Debug, Clone)]
struct NetworkAdam {
    weights: Vec<AdamState>,
    gamma: Vec<AdamState>,
    beta: Vec<AdamState>,
}

impl NetworkAdam {
    fn new(net: &Network, cfg: AdamConfig) -> Self {
        let per_unit = |l: &crate::bnn::LayerParams| AdamState::new(1, l.width(), cfg);
        Self {
            weights: net
                .layers()
                .iter()
                .map(|l| AdamState::for_param(&l.hidden, cfg))
                .collect(),
            gamma: net.layers().iter().map(per_unit).collect(),
            beta: net.layers().iter().map(per_unit).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub steps: usize,
}

/// Per-epoch record emitted by [`Trainer::train_task`].
#[derive(Debug, Clone, PartialEq)]
pub struct EpochMetrics {
    pub stats: EpochStats,
    /// Accuracy on each registered test set, in registration order.
    pub test_accuracies: Vec<f64>,
}

/// Owns a network and its optimizer state and runs the minibatch loop:
/// binarize → forward → loss → backward → Adam → hidden-weight update.
pub struct Trainer {
    net: Network,
    adam: NetworkAdam,
    cfg: TrainConfig,
    hook: Option<Box<dyn GradientHook>>,
}

impl Trainer {
    pub fn new(net: Network, cfg: TrainConfig) -> Result<Self> {
        cfg.validate()?;
        let adam = NetworkAdam::new(&net, cfg.adam);
        Ok(Self {
            net,
            adam,
            cfg,
            hook: None,
        })
    }

    pub fn network(&self) -> &Network {
        &self.net
    }

    pub fn network_mut(&mut self) -> &mut Network {
        &mut self.net
    }

    pub fn into_network(self) -> Network {
        self.net
    }

    pub fn config(&self) -> &TrainConfig {
        &self.cfg
    }

    pub fn set_eta(&mut self, eta: f64) -> Result<()> {
        MetaConfig::new(self.cfg.meta.m, eta)?;
        self.cfg.meta.eta = eta;
        Ok(())
    }

    pub fn set_hook(&mut self, hook: Option<Box<dyn GradientHook>>) {
        self.hook = hook;
    }

    /// Discards the Adam moments.
    pub fn reset_optimizer(&mut self) {
        self.adam = NetworkAdam::new(&self.net, self.cfg.adam);
    }

    /// One optimization step on a batch. Returns the batch loss and the
    /// number of correct train-mode predictions.
    pub fn step(&mut self, x: &Matrix, labels: &[usize]) -> Result<(f64, usize)> {
        let (logits, cache) = self.net.forward(x, Mode::Train)?;
        let (loss, dlogits) = cross_entropy(&logits, labels)?;
        let correct = crate::bnn::argmax_rows(&logits)
            .iter()
            .zip(labels)
            .filter(|(p, y)| p == y)
            .count();
        let mut grads = self.net.backward(&cache, &dlogits)?;
        if let Some(hook) = &self.hook {
            hook.adjust(&self.net, &mut grads)?;
        }

        let eta = self.cfg.meta.eta;
        let rule = self.cfg.rule;
        let meta = self.cfg.meta;
        let adam = &mut self.adam;
        for (l, layer) in self.net.layers_mut().iter_mut().enumerate() {
            let u = adam_update(&grads.weights[l], &mut adam.weights[l])?;
            match rule {
                StepRule::Metaplastic => metaplastic_step(&mut layer.hidden, &u, meta)?,
                StepRule::Plain => plain_step(&mut layer.hidden, &u, eta)?,
            }
            let ug = adam_update(
                &Matrix::row_vector(std::mem::take(&mut grads.gamma[l])),
                &mut adam.gamma[l],
            )?;
            let ub = adam_update(
                &Matrix::row_vector(std::mem::take(&mut grads.beta[l])),
                &mut adam.beta[l],
            )?;
            for (g, u) in layer.bn.gamma.iter_mut().zip(ug.data()) {
                *g -= eta * u;
            }
            for (b, u) in layer.bn.beta.iter_mut().zip(ub.data()) {
                *b -= eta * u;
            }
        }
        Ok((loss, correct))
    }

    /// One pass over `data` in a freshly shuffled order. A trailing batch
    /// smaller than two samples is skipped.
    pub fn train_epoch(
        &mut self,
        data: &LabeledDataset,
        epoch: usize,
        rng: &mut SeededRng,
    ) -> Result<EpochStats> {
        if data.is_empty() {
            return Err(Error::EmptyDataset(data.name.clone()));
        }
        let mut order: Vec<usize> = (0..data.len()).collect();
        rng.shuffle(&mut order);
        let mut loss_sum = 0.0;
        let mut correct = 0;
        let mut seen = 0;
        let mut steps = 0;
        for chunk in order.chunks(self.cfg.batch_size) {
            if chunk.len() < 2 {
                continue;
            }
            let x = data.images.select_rows(chunk);
            let y: Vec<usize> = chunk.iter().map(|&i| data.labels[i]).collect();
            let (loss, c) = self.step(&x, &y)?;
            loss_sum += loss * chunk.len() as f64;
            correct += c;
            seen += chunk.len();
            steps += 1;
        }
        Ok(EpochStats {
            epoch,
            train_loss: loss_sum / seen.max(1) as f64,
            train_accuracy: correct as f64 / seen.max(1) as f64,
            steps,
        })
    }

    /// Trains for `epochs` passes over `data`, calling `evaluate` after every
    /// epoch to score the registered test sets.
    pub fn train_task<F>(
        &mut self,
        data: &LabeledDataset,
        epochs: usize,
        rng: &mut SeededRng,
        mut evaluate: F,
    ) -> Result<Vec<EpochMetrics>>
    where
        F: FnMut(&Network) -> Result<Vec<f64>>,
    {
        if epochs == 0 {
            return Err(Error::InvalidArgument("epochs must be at least 1".into()));
        }
        if data.is_empty() {
            return Err(Error::EmptyDataset(data.name.clone()));
        }
        let mut out = Vec::with_capacity(epochs);
        for epoch in 0..epochs {
            let stats = self.train_epoch(data, epoch, rng)?;
            let test_accuracies = evaluate(&self.net)?;
            log::debug!(
                "{} epoch {epoch}: loss {:.4} train acc {:.4} test {:?}",
                data.name,
                stats.train_loss,
                stats.train_accuracy,
                test_accuracies
            );
            out.push(EpochMetrics {
                stats,
                test_accuracies,
            });
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn f_meta_reference_values() {
        assert_eq!(f_meta(0.0, 5.0), 1.0);
        assert_eq!(f_meta(1.35, 0.0), 1.0);
        assert!((f_meta(1.0, 1.0) - 0.419974).abs() < 1e-6);
    }

    #[test]
    fn f_meta_conditions_numerically() {
        for m in [0.5, 1.0, 1.35, 3.0] {
            assert_eq!(f_meta(m, 0.0) - 1.0, 0.0);
            assert!(f_meta(m, 20.0 / m).abs() < 1e-8);
            assert!(f_meta(m, -20.0 / m).abs() < 1e-8);
            let h = 1e-6;
            let d = (f_meta(m, h) - f_meta(m, -h)) / (2.0 * h);
            assert!(d.abs() < 1e-8);
        }
    }

    #[test]
    fn modulated_branch_example() {
        let mut w = Matrix::row_vector(vec![2.0]);
        metaplastic_step(
            &mut w,
            &Matrix::row_vector(vec![0.1]),
            MetaConfig { m: 1.0, eta: 1.0 },
        )
        .unwrap();
        let t = 2f64.tanh();
        let expected = 2.0 - 0.1 * (1.0 - t * t);
        assert_eq!(w.get(0, 0), expected);
        assert!((w.get(0, 0) - 1.992935).abs() < 1e-6);
    }

    #[test]
    fn growing_branch_is_unmodulated() {
        let mut w = Matrix::row_vector(vec![2.0]);
        metaplastic_step(
            &mut w,
            &Matrix::row_vector(vec![-0.1]),
            MetaConfig { m: 1.0, eta: 1.0 },
        )
        .unwrap();
        assert_eq!(w.get(0, 0), 2.1);
        let mut n = Matrix::row_vector(vec![-2.0]);
        metaplastic_step(
            &mut n,
            &Matrix::row_vector(vec![0.1]),
            MetaConfig { m: 1.0, eta: 1.0 },
        )
        .unwrap();
        assert_eq!(n.get(0, 0), -2.1);
    }

    #[test]
    fn step_rejects_shape_mismatch() {
        let mut w = Matrix::zeros(2, 2);
        assert!(metaplastic_step(
            &mut w,
            &Matrix::zeros(1, 4),
            MetaConfig { m: 1.0, eta: 0.1 }
        )
        .is_err());
        assert!(plain_step(&mut w, &Matrix::zeros(4, 1), 0.1).is_err());
    }

    #[test]
    fn lr_decay_values() {
        assert_eq!(lr_decay_schedule(0), 1.0);
        assert!((lr_decay_schedule(2) - 0.01).abs() < 1e-15);
        for t in 0..8 {
            assert!(lr_decay_schedule(t + 1) < lr_decay_schedule(t));
        }
    }

    #[test]
    fn config_validation() {
        assert!(MetaConfig::new(-0.1, 0.01).is_err());
        assert!(MetaConfig::new(1.0, 0.0).is_err());
        assert!(TrainConfig::new(1.0, 0.01, 1).is_err());
        assert!(TrainConfig::new(0.0, 0.01, 2).is_ok());
    }

    proptest! {
        #[test]
        fn zero_m_equals_plain_step(
            ws in proptest::collection::vec(-5.0f64..5.0, 1..20),
            us in proptest::collection::vec(-1.0f64..1.0, 20),
            eta in 1e-4f64..1.0,
        ) {
            let n = ws.len();
            let mut a = Matrix::row_vector(ws.clone());
            let mut b = Matrix::row_vector(ws);
            let u = Matrix::row_vector(us[..n].to_vec());
            metaplastic_step(&mut a, &u, MetaConfig { m: 0.0, eta }).unwrap();
            plain_step(&mut b, &u, eta).unwrap();
            prop_assert_eq!(a, b);
        }

        #[test]
        fn toward_zero_moves_no_more_than_away(
            w in prop::num::f64::NORMAL.prop_filter("finite range", |w| w.abs() < 10.0 && *w != 0.0),
            mag in 1e-4f64..1.0,
            m in 0.0f64..3.0,
        ) {
            let cfg = MetaConfig { m, eta: 0.1 };
            // toward zero: U has the sign of W^b
            let mut toward = Matrix::row_vector(vec![w]);
            metaplastic_step(&mut toward, &Matrix::row_vector(vec![mag * sign(w)]), cfg).unwrap();
            let mut away = Matrix::row_vector(vec![w]);
            metaplastic_step(&mut away, &Matrix::row_vector(vec![-mag * sign(w)]), cfg).unwrap();
            let dt = (toward.get(0, 0) - w).abs();
            let da = (away.get(0, 0) - w).abs();
            prop_assert!(dt <= da * (1.0 + 1e-12));
            if m > 0.0 && (m * w).abs() > 1e-3 {
                prop_assert!(dt < da);
            }
        }

        #[test]
        fn f_meta_even_and_decreasing(m in 0.01f64..3.0, a in 0.0f64..5.0, b in 0.0f64..5.0) {
            prop_assert_eq!(f_meta(m, a), f_meta(m, -a));
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            if (hi - lo) * m > 1e-6 && hi * m < 15.0 {
                prop_assert!(f_meta(m, hi) < f_meta(m, lo));
            }
        }
    }
}
