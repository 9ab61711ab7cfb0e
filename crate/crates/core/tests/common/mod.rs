#![allow(dead_code)]

use std::path::Path;

use metaplastic::bnn::{binarize, Activation, Mode, Network, WeightMode};
use metaplastic::numerics::{Matrix, SeededRng};
use metaplastic::tasks::LabeledDataset;

/// `classes` binary prototype patterns in `pixels` dimensions (fixed by
/// `pixels` and `classes`); each sample is a prototype plus small noise
/// drawn from `seed`, so a linear read-out separates them.
pub fn toy_separable(n: usize, pixels: usize, classes: usize, seed: u64) -> LabeledDataset {
    let mut proto_rng = SeededRng::new(1000 + (pixels * 31 + classes) as u64);
    let protos: Vec<Vec<f64>> = (0..classes)
        .map(|_| {
            (0..pixels)
                .map(|_| {
                    if proto_rng.uniform(0.0, 1.0) < 0.5 {
                        0.0
                    } else {
                        1.0
                    }
                })
                .collect()
        })
        .collect();
    let mut rng = SeededRng::new(seed);
    let labels: Vec<usize> = (0..n).map(|i| i % classes).collect();
    let images = Matrix::from_fn(n, pixels, |i, j| {
        (protos[labels[i]][j] + 0.2 * rng.normal()).clamp(0.0, 1.0)
    });
    LabeledDataset::new(images, labels, classes, "toy").unwrap()
}

fn idx_bytes(pixels: &[u8], n: usize, side: usize, labels: &[u8]) -> (Vec<u8>, Vec<u8>) {
    let mut img = 0x0000_0803u32.to_be_bytes().to_vec();
    for d in [n, side, side] {
        img.extend_from_slice(&(d as u32).to_be_bytes());
    }
    img.extend_from_slice(pixels);
    let mut lab = 0x0000_0801u32.to_be_bytes().to_vec();
    lab.extend_from_slice(&(n as u32).to_be_bytes());
    lab.extend_from_slice(labels);
    (img, lab)
}

/// Writes a small MNIST-shaped dataset (`side × side` images, 10 classes)
/// in the IDX layout expected by `load_split`.
pub fn write_fake_mnist(dir: &Path, n_train: usize, n_test: usize, side: usize, seed: u64) {
    let mut rng = SeededRng::new(seed);
    let px = side * side;
    let protos: Vec<Vec<bool>> = (0..10)
        .map(|_| (0..px).map(|_| rng.uniform(0.0, 1.0) < 0.3).collect())
        .collect();
    let mut make = |n: usize| {
        let labels: Vec<u8> = (0..n).map(|i| (i % 10) as u8).collect();
        let mut pixels = Vec::with_capacity(n * px);
        for &l in &labels {
            for &on in &protos[l as usize] {
                let flip = rng.uniform(0.0, 1.0) < 0.05;
                pixels.push(if on != flip {
                    200 + rng.below(56) as u8
                } else {
                    0
                });
            }
        }
        idx_bytes(&pixels, n, side, &labels)
    };
    std::fs::create_dir_all(dir).unwrap();
    for (prefix, n) in [("train", n_train), ("t10k", n_test)] {
        let (img, lab) = make(n);
        std::fs::write(dir.join(format!("{prefix}-images-idx3-ubyte")), img).unwrap();
        std::fs::write(dir.join(format!("{prefix}-labels-idx1-ubyte")), lab).unwrap();
    }
}

pub struct FdReport {
    pub checked: usize,
    pub max_rel_err: f64,
}

/// Central-difference check of `backward` on the continuous relaxation: a
/// hard-tanh network whose real weights are the ±1 values of a binarized
/// net. Compares `coords` random weight coordinates whose analytic
/// gradient is nonzero (the gate of the unit is open for some sample).
pub fn fd_gradient_check(
    widths: &[usize],
    batch: usize,
    coords: usize,
    delta: f64,
    seed: u64,
) -> FdReport {
    let mut rng = SeededRng::new(seed ^ 0xFD);
    let x = Matrix::from_fn(batch, widths[0], |_, _| rng.uniform(0.0, 1.0));
    let labels: Vec<usize> = (0..batch)
        .map(|_| rng.below(*widths.last().unwrap()))
        .collect();
    fd_gradient_check_on(widths, &x, &labels, coords, delta, seed)
}

/// [`fd_gradient_check`] on a given batch.
pub fn fd_gradient_check_on(
    widths: &[usize],
    x: &Matrix,
    labels: &[usize],
    coords: usize,
    delta: f64,
    seed: u64,
) -> FdReport {
    let mut rng = SeededRng::new(seed);
    let base = Network::binarized(widths, 0.1, &mut rng).unwrap();
    let layers = base
        .layers()
        .iter()
        .map(|l| {
            let mut l = l.clone();
            l.hidden = binarize(&l.hidden);
            l
        })
        .collect();
    let mut net = Network::from_layers(layers, Activation::HardTanh, WeightMode::Real).unwrap();

    let (logits, cache) = net.forward_pure(x, Mode::Train).unwrap();
    let (_, dlogits) = metaplastic::bnn::cross_entropy(&logits, labels).unwrap();
    let grads = net.backward(&cache, &dlogits).unwrap();

    let mut candidates = Vec::new();
    for (l, g) in grads.weights.iter().enumerate() {
        for (k, v) in g.data().iter().enumerate() {
            if v.abs() > 1e-7 {
                candidates.push((l, k));
            }
        }
    }
    rng.shuffle(&mut candidates);
    let mut max_rel_err = 0.0f64;
    let mut checked = 0;
    for &(l, k) in candidates.iter().take(coords) {
        let w0 = net.layers()[l].hidden.data()[k];
        net.layers_mut()[l].hidden.data_mut()[k] = w0 + delta;
        let up = net.train_loss(x, labels).unwrap();
        net.layers_mut()[l].hidden.data_mut()[k] = w0 - delta;
        let down = net.train_loss(x, labels).unwrap();
        net.layers_mut()[l].hidden.data_mut()[k] = w0;
        let numeric = (up - down) / (2.0 * delta);
        let analytic = grads.weights[l].data()[k];
        let rel = (numeric - analytic).abs() / analytic.abs().max(numeric.abs());
        max_rel_err = max_rel_err.max(rel);
        checked += 1;
    }
    FdReport {
        checked,
        max_rel_err,
    }
}
