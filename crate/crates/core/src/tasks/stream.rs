use super::LabeledDataset;
use crate::bnn::{BatchNormParams, Network};
use crate::error::{Error, Result};
use crate::numerics::SeededRng;

/// Splits `base` into `shards` disjoint, class-stratified subsets.
///
/// Each class is shuffled and dealt out in contiguous blocks, so every
/// shard receives `⌊count/shards⌋` samples of the class; the final shard
/// also takes the remainder. Samples inside a shard are shuffled.
pub fn split_stream(
    base: &LabeledDataset,
    shards: usize,
    rng: &mut SeededRng,
) -> Result<Vec<LabeledDataset>> {
    if base.is_empty() {
        return Err(Error::EmptyDataset(base.name.clone()));
    }
    if shards == 0 || shards > base.len() {
        return Err(Error::InvalidArgument(format!(
            "cannot split {} samples into {shards} shards",
            base.len()
        )));
    }
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); base.classes];
    for (i, &l) in base.labels.iter().enumerate() {
        by_class[l].push(i);
    }
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); shards];
    for mut idx in by_class.into_iter().filter(|c| !c.is_empty()) {
        if idx.len() < shards {
            return Err(Error::InvalidArgument(format!(
                "{}: a class has {} samples, fewer than {shards} shards",
                base.name,
                idx.len()
            )));
        }
        rng.shuffle(&mut idx);
        let per = idx.len() / shards;
        for (s, shard) in members.iter_mut().enumerate() {
            let end = if s + 1 == shards {
                idx.len()
            } else {
                (s + 1) * per
            };
            shard.extend_from_slice(&idx[s * per..end]);
        }
    }
    Ok(members
        .into_iter()
        .enumerate()
        .map(|(s, mut idx)| {
            rng.shuffle(&mut idx);
            base.subset(&idx, format!("{}#{s}", base.name))
        })
        .collect())
}

/// Task order plus the batch-norm parameters captured at the end of each
/// task.
#[derive(Debug, Clone, Default)]
pub struct TaskStream {
    tasks: Vec<(String, usize)>,
    snapshots: Vec<Option<Vec<BatchNormParams>>>,
    started: bool,
}

impl TaskStream {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends a task. Fails once any snapshot has been recorded.
    pub fn push(&mut self, name: impl Into<String>, epochs: usize) -> Result<usize> {
        if self.started {
            return Err(Error::InvalidArgument(
                "task order is fixed once training starts".into(),
            ));
        }
        self.tasks.push((name.into(), epochs));
        self.snapshots.push(None);
        Ok(self.tasks.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.tasks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tasks.is_empty()
    }

    pub fn name(&self, task: usize) -> &str {
        &self.tasks[task].0
    }

    pub fn epochs(&self, task: usize) -> usize {
        self.tasks[task].1
    }

    /// Stores the network's current batch-norm parameters for `task`.
    pub fn record_snapshot(&mut self, task: usize, net: &Network) -> Result<()> {
        let slot = self
            .snapshots
            .get_mut(task)
            .ok_or_else(|| Error::InvalidArgument(format!("no task {task} in stream")))?;
        *slot = Some(net.bn_snapshot());
        self.started = true;
        Ok(())
    }

    pub fn snapshot(&self, task: usize) -> Result<&[BatchNormParams]> {
        self.snapshots
            .get(task)
            .and_then(|s| s.as_deref())
            .ok_or(Error::MissingSnapshot(task))
    }

    pub fn completed(&self) -> usize {
        self.snapshots.iter().filter(|s| s.is_some()).count()
    }
}

/// Top-1 accuracy on `testset` with the batch-norm parameters stored for
/// `task` swapped in. The network is restored before returning.
pub fn eval_with_task_bn(
    net: &mut Network,
    stream: &TaskStream,
    task: usize,
    testset: &LabeledDataset,
) -> Result<f64> {
    let bn = stream.snapshot(task)?.to_vec();
    let saved = net.swap_bn(bn)?;
    let result = net.evaluate(&testset.images, &testset.labels);
    net.swap_bn(saved)?;
    Ok(result?.accuracy())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bnn::{Activation, WeightMode};
    use crate::numerics::Matrix;

    fn toy(n: usize, classes: usize) -> LabeledDataset {
        let images = Matrix::from_fn(n, 6, |i, j| ((i + j) % 5) as f64 / 2.0 - 1.0);
        LabeledDataset::new(
            images,
            (0..n).map(|i| (i * 7) % classes).collect(),
            classes,
            "toy",
        )
        .unwrap()
    }

    #[test]
    fn shards_partition_and_stratify() {
        let base = toy(1003, 10);
        let shards = split_stream(&base, 10, &mut SeededRng::new(1)).unwrap();
        assert_eq!(shards.len(), 10);
        let mut all: Vec<Vec<u64>> = Vec::new();
        for s in &shards {
            assert!(s.class_counts().iter().all(|&c| c >= 1));
            for i in 0..s.len() {
                let mut key: Vec<u64> = s.images.row(i).iter().map(|x| x.to_bits()).collect();
                key.push(s.labels[i] as u64);
                all.push(key);
            }
        }
        let mut want: Vec<Vec<u64>> = (0..base.len())
            .map(|i| {
                let mut k: Vec<u64> = base.images.row(i).iter().map(|x| x.to_bits()).collect();
                k.push(base.labels[i] as u64);
                k
            })
            .collect();
        all.sort();
        want.sort();
        assert_eq!(all, want);
        assert_eq!(
            shards[..9].iter().map(|s| s.len()).sum::<usize>() + shards[9].len(),
            1003
        );
    }

    #[test]
    fn too_many_shards_rejected() {
        assert!(split_stream(&toy(5, 2), 6, &mut SeededRng::new(0)).is_err());
        assert!(split_stream(&toy(5, 2), 0, &mut SeededRng::new(0)).is_err());
    }

    #[test]
    fn missing_snapshot_and_restore() {
        let mut rng = SeededRng::new(3);
        let mut net = Network::new(
            &[6, 8, 3],
            0.1,
            Activation::Sign,
            WeightMode::Binary,
            &mut rng,
        )
        .unwrap();
        let data = toy(20, 3);
        let mut stream = TaskStream::new();
        stream.push("a", 1).unwrap();
        assert!(matches!(
            eval_with_task_bn(&mut net, &stream, 0, &data),
            Err(Error::MissingSnapshot(0))
        ));
        stream.record_snapshot(0, &net).unwrap();
        assert!(stream.push("b", 1).is_err());
        let plain = net.evaluate(&data.images, &data.labels).unwrap().accuracy();
        let before = net.clone();
        net.layers_mut()[0].bn.beta[0] = 5.0;
        let changed = net.clone();
        let acc = eval_with_task_bn(&mut net, &stream, 0, &data).unwrap();
        assert_eq!(acc, plain);
        assert_eq!(net, changed);
        assert_ne!(net, before);
    }
}
