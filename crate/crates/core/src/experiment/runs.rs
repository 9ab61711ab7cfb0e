//! Training sequences: permuted multitask, stream shards, full-data
//! reference and interleaved training.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::MetricsRecord;
use crate::baselines::{estimate_fisher, shuffle_importance, EwcPenalty, FisherDiag};
use crate::bnn::Network;
use crate::error::{Error, Result};
use crate::metaplastic::{lr_decay_schedule, TrainConfig, Trainer};
use crate::numerics::{Matrix, SeededRng};
use crate::tasks::{
    eval_with_task_bn, make_permuted_task, split_stream, LabeledDataset, Permutation, TaskStream,
};

// Independent RNG streams of one run.
const STREAM_INIT: u64 = 0;
const STREAM_SHUFFLE: u64 = 1;
const STREAM_FISHER: u64 = 2;
const STREAM_CONSOLIDATION: u64 = 3;
const STREAM_SHARDS: u64 = 4;

/// Consolidation method or control used in a multitask run.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Baseline {
    #[default]
    None,
    Ewc {
        lambda: f64,
    },
    /// EWC with the importance values shuffled across synapses.
    Random {
        lambda: f64,
    },
    /// Learning rate divided by ten at each new task.
    LrDecay,
    /// Real weights and tanh activations, same update rule.
    FullPrecision,
}

/// Network shape and initialization shared by every run kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetSpec {
    pub hidden: Vec<usize>,
    pub init_sigma: f64,
}

impl NetSpec {
    pub fn build(
        &self,
        inputs: usize,
        classes: usize,
        full_precision: bool,
        rng: &mut SeededRng,
    ) -> Result<Network> {
        let mut widths = vec![inputs];
        widths.extend_from_slice(&self.hidden);
        widths.push(classes);
        if full_precision {
            Network::full_precision(&widths, self.init_sigma, rng)
        } else {
            Network::binarized(&widths, self.init_sigma, rng)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultitaskSpec {
    pub run_id: String,
    pub net: NetSpec,
    pub train: TrainConfig,
    pub tasks: usize,
    pub epochs: usize,
    pub baseline: Baseline,
    pub fisher_samples: usize,
    pub seed: u64,
}

/// Pixel permutation of task `task` in a run seeded with `seed`.
pub fn task_permutation(pixels: usize, seed: u64, task: usize) -> Permutation {
    Permutation::from_seed(
        pixels,
        seed ^ 0x9E37_79B9_7F4A_7C15u64.wrapping_mul(task as u64 + 1),
    )
}

pub struct MultitaskOutcome {
    pub records: Vec<MetricsRecord>,
    pub network: Network,
    pub stream: TaskStream,
    /// Test accuracy of every task, each with its own batch-norm snapshot,
    /// after the last task.
    pub final_accuracies: Vec<f64>,
}

fn check_epochs(epochs: usize) -> Result<()> {
    if epochs == 0 {
        return Err(Error::InvalidArgument("epochs must be at least 1".into()));
    }
    Ok(())
}

/// Learns `spec.tasks` permuted versions of `train` one after the other.
/// After every epoch all tasks seen so far are scored on their permuted test
/// sets, earlier ones with their stored batch-norm parameters. `sink`
/// receives each record together with the live network.
pub fn run_multitask(
    spec: &MultitaskSpec,
    train: &LabeledDataset,
    test: &LabeledDataset,
    sink: &mut dyn FnMut(&MetricsRecord, &Network) -> Result<()>,
) -> Result<MultitaskOutcome> {
    check_epochs(spec.epochs)?;
    if spec.tasks == 0 {
        return Err(Error::InvalidArgument(
            "task count must be at least 1".into(),
        ));
    }
    let root = SeededRng::new(spec.seed);
    let fp = spec.baseline == Baseline::FullPrecision;
    let net = spec.net.build(
        train.pixels(),
        train.classes,
        fp,
        &mut root.fork(STREAM_INIT),
    )?;
    let mut trainer = Trainer::new(net, spec.train)?;
    let mut shuffle_rng = root.fork(STREAM_SHUFFLE);
    let mut fisher_rng = root.fork(STREAM_FISHER);
    let mut consolidation_rng = root.fork(STREAM_CONSOLIDATION);

    let mut stream = TaskStream::new();
    for t in 0..spec.tasks {
        stream.push(format!("permuted-{t}"), spec.epochs)?;
    }
    let mut tests: Vec<LabeledDataset> = Vec::with_capacity(spec.tasks);
    let mut consolidated: Vec<FisherDiag> = Vec::new();
    let mut records = Vec::new();
    let start = Instant::now();

    for t in 0..spec.tasks {
        let perm = task_permutation(train.pixels(), spec.seed, t);
        let task_train = make_permuted_task(train, &perm, format!("permuted-{t}/train"))?;
        tests.push(make_permuted_task(
            test,
            &perm,
            format!("permuted-{t}/test"),
        )?);

        if spec.baseline == Baseline::LrDecay {
            trainer.set_eta(spec.train.meta.eta * lr_decay_schedule(t))?;
        }
        if let Baseline::Ewc { lambda } | Baseline::Random { lambda } = spec.baseline {
            trainer.set_hook(Some(Box::new(EwcPenalty {
                consolidated: consolidated.clone(),
                lambda,
            })));
        }

        for epoch in 0..spec.epochs {
            let stats = trainer.train_epoch(&task_train, epoch, &mut shuffle_rng)?;
            let net = trainer.network_mut();
            let mut accuracies = vec![None; spec.tasks];
            for (j, ts) in tests.iter().enumerate() {
                accuracies[j] = Some(if j == t {
                    net.evaluate(&ts.images, &ts.labels)?.accuracy()
                } else {
                    eval_with_task_bn(net, &stream, j, ts)?
                });
            }
            let rec = MetricsRecord {
                run_id: spec.run_id.clone(),
                task: t,
                epoch,
                accuracies,
                loss: stats.train_loss,
                seconds: start.elapsed().as_secs_f64(),
            };
            log::info!("{}", rec.summary());
            sink(&rec, trainer.network())?;
            records.push(rec);
        }
        stream.record_snapshot(t, trainer.network())?;

        if let Baseline::Ewc { .. } | Baseline::Random { .. } = spec.baseline {
            let fd = estimate_fisher(
                trainer.network(),
                &task_train,
                spec.fisher_samples,
                &mut fisher_rng,
            )?;
            consolidated.push(match spec.baseline {
                Baseline::Random { .. } => shuffle_importance(&fd, &mut consolidation_rng),
                _ => fd,
            });
        }
    }

    let mut network = trainer.into_network();
    let final_accuracies = tests
        .iter()
        .enumerate()
        .map(|(j, ts)| eval_with_task_bn(&mut network, &stream, j, ts))
        .collect::<Result<Vec<_>>>()?;
    Ok(MultitaskOutcome {
        records,
        network,
        stream,
        final_accuracies,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct StreamSpec {
    pub run_id: String,
    pub net: NetSpec,
    pub train: TrainConfig,
    pub shards: usize,
    /// Epochs per shard; the full-data reference runs this many epochs over
    /// the whole set, which gives the same number of optimization steps.
    pub epochs: usize,
    pub seed: u64,
}

pub struct SingleTaskOutcome {
    pub records: Vec<MetricsRecord>,
    pub network: Network,
    pub final_accuracy: f64,
}

/// Learns `train` as a stream of disjoint class-stratified shards, each for
/// `spec.epochs` epochs, never revisiting earlier shards. Records use the
/// shard index as the task.
pub fn run_stream(
    spec: &StreamSpec,
    train: &LabeledDataset,
    test: &LabeledDataset,
    sink: &mut dyn FnMut(&MetricsRecord, &Network) -> Result<()>,
) -> Result<SingleTaskOutcome> {
    let shards = split_stream(
        train,
        spec.shards,
        &mut SeededRng::new(spec.seed).fork(STREAM_SHARDS),
    )?;
    single_task(spec, &shards, test, sink)
}

/// The stream's control: the same network trained on all of `train` for
/// `spec.epochs` epochs.
pub fn run_full_reference(
    spec: &StreamSpec,
    train: &LabeledDataset,
    test: &LabeledDataset,
    sink: &mut dyn FnMut(&MetricsRecord, &Network) -> Result<()>,
) -> Result<SingleTaskOutcome> {
    single_task(spec, std::slice::from_ref(train), test, sink)
}

fn single_task(
    spec: &StreamSpec,
    parts: &[LabeledDataset],
    test: &LabeledDataset,
    sink: &mut dyn FnMut(&MetricsRecord, &Network) -> Result<()>,
) -> Result<SingleTaskOutcome> {
    check_epochs(spec.epochs)?;
    let root = SeededRng::new(spec.seed);
    let first = parts
        .first()
        .ok_or_else(|| Error::EmptyDataset("no training data".into()))?;
    let net = spec.net.build(
        first.pixels(),
        first.classes,
        false,
        &mut root.fork(STREAM_INIT),
    )?;
    let mut trainer = Trainer::new(net, spec.train)?;
    let mut shuffle_rng = root.fork(STREAM_SHUFFLE);
    let mut records = Vec::new();
    let start = Instant::now();
    for (s, part) in parts.iter().enumerate() {
        for epoch in 0..spec.epochs {
            let stats = trainer.train_epoch(part, epoch, &mut shuffle_rng)?;
            let acc = trainer
                .network()
                .evaluate(&test.images, &test.labels)?
                .accuracy();
            let rec = MetricsRecord {
                run_id: spec.run_id.clone(),
                task: s,
                epoch,
                accuracies: vec![Some(acc)],
                loss: stats.train_loss,
                seconds: start.elapsed().as_secs_f64(),
            };
            log::info!("{}", rec.summary());
            sink(&rec, trainer.network())?;
            records.push(rec);
        }
    }
    let network = trainer.into_network();
    let final_accuracy = network.evaluate(&test.images, &test.labels)?.accuracy();
    Ok(SingleTaskOutcome {
        records,
        network,
        final_accuracy,
    })
}

/// Trains on all `spec.tasks` permuted tasks at once: each epoch is one
/// shuffled pass over the union of the permuted training sets. Permuted rows
/// are built per batch, so memory stays at one copy of `train`.
pub fn run_interleaved(
    spec: &MultitaskSpec,
    train: &LabeledDataset,
    test: &LabeledDataset,
    sink: &mut dyn FnMut(&MetricsRecord, &Network) -> Result<()>,
) -> Result<MultitaskOutcome> {
    check_epochs(spec.epochs)?;
    if spec.tasks == 0 {
        return Err(Error::InvalidArgument(
            "task count must be at least 1".into(),
        ));
    }
    if train.is_empty() {
        return Err(Error::EmptyDataset(train.name.clone()));
    }
    let root = SeededRng::new(spec.seed);
    let fp = spec.baseline == Baseline::FullPrecision;
    let net = spec.net.build(
        train.pixels(),
        train.classes,
        fp,
        &mut root.fork(STREAM_INIT),
    )?;
    let mut trainer = Trainer::new(net, spec.train)?;
    let mut shuffle_rng = root.fork(STREAM_SHUFFLE);

    let perms: Vec<Permutation> = (0..spec.tasks)
        .map(|t| task_permutation(train.pixels(), spec.seed, t))
        .collect();
    let tests = perms
        .iter()
        .enumerate()
        .map(|(t, p)| make_permuted_task(test, p, format!("permuted-{t}/test")))
        .collect::<Result<Vec<_>>>()?;

    let n = train.len();
    let pixels = train.pixels();
    let batch = spec.train.batch_size;
    let mut order: Vec<usize> = (0..n * spec.tasks).collect();
    let mut records = Vec::new();
    let start = Instant::now();
    for epoch in 0..spec.epochs {
        shuffle_rng.shuffle(&mut order);
        let (mut loss_sum, mut seen) = (0.0, 0usize);
        for chunk in order.chunks(batch).filter(|c| c.len() >= 2) {
            let mut x = Matrix::zeros(chunk.len(), pixels);
            let mut y = Vec::with_capacity(chunk.len());
            for (r, &k) in chunk.iter().enumerate() {
                let (t, i) = (k / n, k % n);
                perms[t].apply(train.images.row(i), x.row_mut(r));
                y.push(train.labels[i]);
            }
            let (loss, _) = trainer.step(&x, &y)?;
            loss_sum += loss * chunk.len() as f64;
            seen += chunk.len();
        }
        let accuracies = tests
            .iter()
            .map(|ts| {
                Ok(Some(
                    trainer
                        .network()
                        .evaluate(&ts.images, &ts.labels)?
                        .accuracy(),
                ))
            })
            .collect::<Result<Vec<_>>>()?;
        let rec = MetricsRecord {
            run_id: spec.run_id.clone(),
            task: 0,
            epoch,
            accuracies,
            loss: loss_sum / seen.max(1) as f64,
            seconds: start.elapsed().as_secs_f64(),
        };
        log::info!("{}", rec.summary());
        sink(&rec, trainer.network())?;
        records.push(rec);
    }
    let network = trainer.into_network();
    let final_accuracies = tests
        .iter()
        .map(|ts| Ok(network.evaluate(&ts.images, &ts.labels)?.accuracy()))
        .collect::<Result<Vec<_>>>()?;
    Ok(MultitaskOutcome {
        records,
        network,
        stream: TaskStream::new(),
        final_accuracies,
    })
}
