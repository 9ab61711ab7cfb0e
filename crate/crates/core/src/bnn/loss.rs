use crate::error::{Error, Result};
use crate::numerics::Matrix;

/// Mean softmax cross-entropy over the batch and its gradient with respect to
/// the logits, `(softmax − onehot) / batch`.
pub fn cross_entropy(logits: &Matrix, labels: &[usize]) -> Result<(f64, Matrix)> {
    let (b, c) = logits.shape();
    if labels.len() != b {
        return Err(Error::ShapeMismatch {
            op: "cross_entropy",
            expected: (b, 1),
            got: (labels.len(), 1),
        });
    }
    if let Some(&bad) = labels.iter().find(|&&y| y >= c) {
        return Err(Error::InvalidArgument(format!(
            "label {bad} out of range for {c} classes"
        )));
    }
    let mut grad = Matrix::zeros(b, c);
    let mut total = 0.0;
    for (i, &y) in labels.iter().enumerate() {
        let (nll, probs) = softmax_nll(logits.row(i), y);
        total += nll;
        let g = grad.row_mut(i);
        for j in 0..c {
            g[j] = (probs[j] - if j == y { 1.0 } else { 0.0 }) / b as f64;
        }
    }
    Ok((total / b as f64, grad))
}

/// Per-sample negative log-likelihoods, without the gradient.
pub fn per_sample_nll(logits: &Matrix, labels: &[usize]) -> Vec<f64> {
    labels
        .iter()
        .enumerate()
        .map(|(i, &y)| softmax_nll(logits.row(i), y).0)
        .collect()
}

fn softmax_nll(row: &[f64], label: usize) -> (f64, Vec<f64>) {
    let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = row.iter().map(|x| (x - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    let nll = sum.ln() - (row[label] - max);
    (nll, exps.into_iter().map(|e| e / sum).collect())
}

/// Index of the largest logit in each row; the first wins ties.
pub fn argmax_rows(logits: &Matrix) -> Vec<usize> {
    (0..logits.rows())
        .map(|i| {
            let row = logits.row(i);
            let mut best = 0;
            for j in 1..row.len() {
                if row[j] > row[best] {
                    best = j;
                }
            }
            best
        })
        .collect()
}
