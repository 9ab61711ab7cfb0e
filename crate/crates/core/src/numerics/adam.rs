use serde::{Deserialize, Serialize};

use super::Matrix;
use crate::error::{Error, Result};

/// Adam moment-decay constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First/second moment accumulators for one parameter tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    m: Matrix,
    v: Matrix,
    t: u64,
    cfg: AdamConfig,
}

impl AdamState {
    pub fn new(rows: usize, cols: usize, cfg: AdamConfig) -> Self {
        Self {
            m: Matrix::zeros(rows, cols),
            v: Matrix::zeros(rows, cols),
            t: 0,
            cfg,
        }
    }

    pub fn for_param(param: &Matrix, cfg: AdamConfig) -> Self {
        Self::new(param.rows(), param.cols(), cfg)
    }

    pub fn step_count(&self) -> u64 {
        self.t
    }

    pub fn first_moment(&self) -> &Matrix {
        &self.m
    }

    pub fn second_moment(&self) -> &Matrix {
        &self.v
    }

    pub fn config(&self) -> AdamConfig {
        self.cfg
    }
}

/// Advances `state` by one step and returns the bias-corrected update
/// `m̂ / (√v̂ + ε)`. The caller scales it by the learning rate.
pub fn adam_update(grad: &Matrix, state: &mut AdamState) -> Result<Matrix> {
    grad.ensure_shape("adam_update", state.m.shape())?;
    if !grad.all_finite() {
        return Err(Error::NonFinite("adam_update gradient"));
    }
    let AdamConfig { beta1, beta2, eps } = state.cfg;
    state.t += 1;
    let t = state.t as i32;
    let r1 = 1.0 / (1.0 - beta1.powi(t));
    let r2 = 1.0 / (1.0 - beta2.powi(t));

    let mut update = Matrix::zeros(grad.rows(), grad.cols());
    let m = state.m.data_mut();
    let v = state.v.data_mut();
    for (((u, &g), mi), vi) in update.data_mut().iter_mut().zip(grad.data()).zip(m).zip(v) {
        *mi = beta1 * *mi + (1.0 - beta1) * g;
        *vi = beta2 * *vi + (1.0 - beta2) * g * g;
        let m_hat = *mi * r1;
        let v_hat = *vi * r2;
        *u = m_hat / (v_hat.sqrt() + eps);
    }
    Ok(update)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn scalar(x: f64) -> Matrix {
        Matrix::row_vector(vec![x])
    }

    #[test]
    fn zero_gradient_gives_zero_update() {
        let mut st = AdamState::new(2, 3, AdamConfig::default());
        let u = adam_update(&Matrix::zeros(2, 3), &mut st).unwrap();
        assert!(u.data().iter().all(|&x| x == 0.0));
        assert_eq!(st.step_count(), 1);
    }

    #[test]
    fn first_step_closed_form() {
        // m̂ = g, v̂ = g², so U = 1 / (1 + ε) for g = 1.
        let mut st = AdamState::new(1, 1, AdamConfig::default());
        let u = adam_update(&scalar(1.0), &mut st).unwrap();
        assert!((u.get(0, 0) - 1.0 / (1.0 + 1e-8)).abs() < 1e-15);
    }

    #[test]
    fn constant_gradient_stays_near_one() {
        let mut st = AdamState::new(1, 1, AdamConfig::default());
        for _ in 0..2 {
            let u = adam_update(&scalar(1.0), &mut st).unwrap();
            assert!((u.get(0, 0) - 1.0).abs() < 1e-6);
        }
        assert_eq!(st.step_count(), 2);
    }

    #[test]
    fn tiny_gradient_never_divides_by_zero() {
        let mut st = AdamState::new(1, 1, AdamConfig::default());
        let u = adam_update(&scalar(1e-300), &mut st).unwrap();
        assert!(u.get(0, 0).is_finite());
    }

    #[test]
    fn rejects_shape_mismatch_and_nan() {
        let mut st = AdamState::new(1, 2, AdamConfig::default());
        assert!(matches!(
            adam_update(&Matrix::zeros(2, 1), &mut st),
            Err(Error::ShapeMismatch { .. })
        ));
        let mut bad = Matrix::zeros(1, 2);
        bad.data_mut()[1] = f64::NAN;
        assert!(matches!(
            adam_update(&bad, &mut st),
            Err(Error::NonFinite(_))
        ));
        assert_eq!(st.step_count(), 0);
    }

    proptest! {
        #[test]
        fn permutation_equivariant(
            g1 in proptest::collection::vec(-10.0f64..10.0, 6),
            g2 in proptest::collection::vec(-10.0f64..10.0, 6),
            rot in 0usize..6,
        ) {
            let perm = |v: &[f64]| {
                let mut w = v.to_vec();
                w.rotate_left(rot);
                w.reverse();
                w
            };
            let mut a = AdamState::new(1, 6, AdamConfig::default());
            let mut b = AdamState::new(1, 6, AdamConfig::default());
            adam_update(&Matrix::row_vector(g1.clone()), &mut a).unwrap();
            adam_update(&Matrix::row_vector(perm(&g1)), &mut b).unwrap();
            let ua = adam_update(&Matrix::row_vector(g2.clone()), &mut a).unwrap();
            let ub = adam_update(&Matrix::row_vector(perm(&g2)), &mut b).unwrap();
            prop_assert_eq!(perm(ua.data()), ub.data().to_vec());
            prop_assert!(a.second_moment().data().iter().all(|&v| v >= 0.0));
        }
    }
}
