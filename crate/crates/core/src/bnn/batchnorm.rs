use serde::{Deserialize, Serialize};

use crate::numerics::Matrix;

pub const DEFAULT_MOMENTUM: f64 = 0.1;
pub const DEFAULT_EPS: f64 = 1e-5;

/// Per-unit batch-normalization parameters and inference statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchNormParams {
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
    pub running_mean: Vec<f64>,
    pub running_var: Vec<f64>,
    pub momentum: f64,
    pub eps: f64,
}

impl BatchNormParams {
    pub fn new(width: usize) -> Self {
        Self {
            gamma: vec![1.0; width],
            beta: vec![0.0; width],
            running_mean: vec![0.0; width],
            running_var: vec![1.0; width],
            momentum: DEFAULT_MOMENTUM,
            eps: DEFAULT_EPS,
        }
    }

    pub fn width(&self) -> usize {
        self.gamma.len()
    }
}

/// What the backward pass needs from a batch-norm forward.
#[derive(Debug, Clone)]
pub(crate) struct BnCache {
    pub xhat: Matrix,
    pub inv_std: Vec<f64>,
    pub batch_stats: bool,
}

/// Batch mean and biased variance of each column.
pub(crate) struct BatchStats {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
}

pub(crate) fn forward(
    z: &Matrix,
    bn: &BatchNormParams,
    use_batch_stats: bool,
) -> (Matrix, BnCache, Option<BatchStats>) {
    let (b, n) = z.shape();
    let (mean, var, stats) = if use_batch_stats {
        let mean = z.column_means();
        let mut var = vec![0.0; n];
        for i in 0..b {
            for ((v, x), mu) in var.iter_mut().zip(z.row(i)).zip(&mean) {
                let d = x - mu;
                *v += d * d;
            }
        }
        var.iter_mut().for_each(|v| *v /= b as f64);
        (mean.clone(), var.clone(), Some(BatchStats { mean, var }))
    } else {
        (bn.running_mean.clone(), bn.running_var.clone(), None)
    };
    let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + bn.eps).sqrt()).collect();

    let mut xhat = Matrix::zeros(b, n);
    let mut y = Matrix::zeros(b, n);
    for i in 0..b {
        let zr = z.row(i);
        let xr = xhat.row_mut(i);
        for j in 0..n {
            xr[j] = (zr[j] - mean[j]) * inv_std[j];
        }
        let xr = xhat.row(i).to_vec();
        let yr = y.row_mut(i);
        for j in 0..n {
            yr[j] = bn.gamma[j] * xr[j] + bn.beta[j];
        }
    }
    (
        y,
        BnCache {
            xhat,
            inv_std,
            batch_stats: use_batch_stats,
        },
        stats,
    )
}

/// Exponential moving average of the batch statistics; the variance is
/// stored unbiased.
pub(crate) fn update_running(bn: &mut BatchNormParams, stats: &BatchStats, batch: usize) {
    let mom = bn.momentum;
    let unbias = if batch > 1 {
        batch as f64 / (batch - 1) as f64
    } else {
        1.0
    };
    for j in 0..bn.width() {
        bn.running_mean[j] = (1.0 - mom) * bn.running_mean[j] + mom * stats.mean[j];
        bn.running_var[j] = (1.0 - mom) * bn.running_var[j] + mom * stats.var[j] * unbias;
    }
}

/// Returns `(dz, dgamma, dbeta)` for upstream gradient `dy`.
pub(crate) fn backward(
    dy: &Matrix,
    cache: &BnCache,
    bn: &BatchNormParams,
) -> (Matrix, Vec<f64>, Vec<f64>) {
    let (b, n) = dy.shape();
    let mut dgamma = vec![0.0; n];
    let mut dbeta = vec![0.0; n];
    for i in 0..b {
        let dr = dy.row(i);
        let xr = cache.xhat.row(i);
        for j in 0..n {
            dgamma[j] += dr[j] * xr[j];
            dbeta[j] += dr[j];
        }
    }

    let mut dz = Matrix::zeros(b, n);
    if cache.batch_stats {
        // dxhat = dy·γ; dz = inv_std/B · (B·dxhat − Σdxhat − x̂·Σ(dxhat·x̂))
        let bf = b as f64;
        let sum_dxhat: Vec<f64> = (0..n).map(|j| dbeta[j] * bn.gamma[j]).collect();
        let sum_dxhat_xhat: Vec<f64> = (0..n).map(|j| dgamma[j] * bn.gamma[j]).collect();
        for i in 0..b {
            let dr = dy.row(i);
            let xr = cache.xhat.row(i).to_vec();
            let out = dz.row_mut(i);
            for j in 0..n {
                let dxhat = dr[j] * bn.gamma[j];
                out[j] =
                    cache.inv_std[j] / bf * (bf * dxhat - sum_dxhat[j] - xr[j] * sum_dxhat_xhat[j]);
            }
        }
    } else {
        for i in 0..b {
            let dr = dy.row(i);
            let out = dz.row_mut(i);
            for j in 0..n {
                out[j] = dr[j] * bn.gamma[j] * cache.inv_std[j];
            }
        }
    }
    (dz, dgamma, dbeta)
}
