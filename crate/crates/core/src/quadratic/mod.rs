//! The quadratic binary task: a positive-definite quadratic loss evaluated
//! at the sign of the hidden weights,
//!
//! ```text
//! L(W^h) = ½ (sign(W^h) − W*)ᵀ H (sign(W^h) − W*)
//! W^h ← W^h − η H (sign(W^h) − W*)
//! ```
//!
//! Coordinates whose optimum lies outside `[-1, 1]` can never reach it, so
//! their hidden weight grows linearly forever; for diagonal `H` the slope is
//! `η λ_i (|W*_i| − 1) sign(W*_i)` and flipping such a weight costs
//! `2λ_i + 2|slope_i|/η = 2λ_i|W*_i|`.

mod spd;
mod verify;

pub use spd::{orthogonality_residual, random_rotation, random_spd, EigenSpectrum, SpdSample};
pub use verify::{
    bin_flip_losses, verify_diagonal, verify_flip_loss_limit, verify_nondiagonal, BinnedCurve,
    CurveBin, DiagonalReport, DiagonalRow, FlipLossLimitReport, NonDiagonalReport,
};

use crate::bnn::sign;
use crate::error::{Error, Result};
use crate::numerics::{dot, Matrix, SeededRng};

/// Curvature `H`, optimum `W*` and learning rate `η`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticTask {
    h: Matrix,
    w_star: Vec<f64>,
    eta: f64,
    diagonal: bool,
}

impl QuadraticTask {
    /// Validates that `H` is square, symmetric within 1e-12 and positive
    /// definite (Cholesky), and that the dimensions agree.
    pub fn new(h: Matrix, w_star: Vec<f64>, eta: f64) -> Result<Self> {
        let d = w_star.len();
        h.ensure_shape("QuadraticTask::new", (d, d))?;
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "eta must be > 0, got {eta}"
            )));
        }
        if w_star.iter().any(|w| !w.is_finite()) {
            return Err(Error::NonFinite("QuadraticTask optimum"));
        }
        let mut diagonal = true;
        for i in 0..d {
            for j in 0..i {
                if (h.get(i, j) - h.get(j, i)).abs() > 1e-12 {
                    return Err(Error::InvalidArgument(format!(
                        "H is not symmetric at ({i}, {j})"
                    )));
                }
                diagonal &= h.get(i, j) == 0.0 && h.get(j, i) == 0.0;
            }
        }
        if !is_positive_definite(&h) {
            return Err(Error::InvalidArgument("H is not positive definite".into()));
        }
        Ok(Self {
            h,
            w_star,
            eta,
            diagonal,
        })
    }

    pub fn diagonal(eigen: &[f64], w_star: Vec<f64>, eta: f64) -> Result<Self> {
        let d = eigen.len();
        Self::new(
            Matrix::from_fn(d, d, |i, j| if i == j { eigen[i] } else { 0.0 }),
            w_star,
            eta,
        )
    }

    pub fn dim(&self) -> usize {
        self.w_star.len()
    }

    pub fn h(&self) -> &Matrix {
        &self.h
    }

    pub fn w_star(&self) -> &[f64] {
        &self.w_star
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn is_diagonal(&self) -> bool {
        self.diagonal
    }

    fn check(&self, wh: &[f64]) -> Result<()> {
        if wh.len() != self.dim() {
            return Err(Error::ShapeMismatch {
                op: "quadratic task",
                expected: (self.dim(), 1),
                got: (wh.len(), 1),
            });
        }
        Ok(())
    }

    /// `sign(wh) − W*`
    fn residual(&self, wh: &[f64]) -> Vec<f64> {
        wh.iter()
            .zip(&self.w_star)
            .map(|(&w, s)| sign(w) - s)
            .collect()
    }
}

fn is_positive_definite(h: &Matrix) -> bool {
    let d = h.rows();
    let mut l = vec![0.0; d * d];
    for j in 0..d {
        let s = h.get(j, j) - dot(&l[j * d..j * d + j], &l[j * d..j * d + j]);
        if !(s > 0.0) {
            return false;
        }
        let ljj = s.sqrt();
        l[j * d + j] = ljj;
        for i in j + 1..d {
            let v = (h.get(i, j) - dot(&l[i * d..i * d + j], &l[j * d..j * d + j])) / ljj;
            l[i * d + j] = v;
        }
    }
    true
}

/// `½ (sign(wh) − W*)ᵀ H (sign(wh) − W*)`
pub fn qbt_loss(task: &QuadraticTask, wh: &[f64]) -> Result<f64> {
    task.check(wh)?;
    let r = task.residual(wh);
    Ok(0.5 * dot(&r, &task.h.matvec(&r)?))
}

/// One step `wh − η H (sign(wh) − W*)`.
pub fn qbt_step(task: &QuadraticTask, wh: &[f64]) -> Result<Vec<f64>> {
    task.check(wh)?;
    let hr = task.h.matvec(&task.residual(wh))?;
    Ok(wh.iter().zip(&hr).map(|(w, g)| w - task.eta * g).collect())
}

/// Iterates [`qbt_step`]. `H (sign − W*)` depends only on the sign pattern,
/// so it is recomputed (with the same product) only when a sign changes;
/// every state is bitwise what repeated `qbt_step` calls would give.
struct Stepper<'a> {
    task: &'a QuadraticTask,
    wh: Vec<f64>,
    signs: Vec<f64>,
    hr: Vec<f64>,
}

impl<'a> Stepper<'a> {
    fn new(task: &'a QuadraticTask, wh: Vec<f64>) -> Result<Self> {
        task.check(&wh)?;
        let signs: Vec<f64> = wh.iter().map(|&w| sign(w)).collect();
        let hr = task.h.matvec(&task.residual(&wh))?;
        Ok(Self {
            task,
            wh,
            signs,
            hr,
        })
    }

    fn step(&mut self) {
        let eta = self.task.eta;
        let mut changed = false;
        for ((w, g), s) in self.wh.iter_mut().zip(&self.hr).zip(&mut self.signs) {
            *w -= eta * g;
            let ns = sign(*w);
            changed |= ns != *s;
            *s = ns;
        }
        if changed {
            let r = self.task.residual(&self.wh);
            self.hr = self.task.h.matvec(&r).expect("shape checked");
        }
    }
}

/// Hidden-weight time series: the state after `t·stride` steps for
/// `t = 0, 1, ...`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub start: Vec<f64>,
    pub steps: usize,
    pub stride: usize,
    pub samples: Vec<Vec<f64>>,
}

impl Trajectory {
    pub fn last(&self) -> &[f64] {
        self.samples
            .last()
            .map(|v| v.as_slice())
            .unwrap_or(&self.start)
    }
}

/// Runs `steps` steps from `wh0`, recording every `stride`-th state.
pub fn simulate(
    task: &QuadraticTask,
    wh0: &[f64],
    steps: usize,
    stride: usize,
) -> Result<Trajectory> {
    if stride == 0 {
        return Err(Error::InvalidArgument("stride must be at least 1".into()));
    }
    let mut st = Stepper::new(task, wh0.to_vec())?;
    let mut samples = vec![wh0.to_vec()];
    for t in 1..=steps {
        st.step();
        if t % stride == 0 || t == steps {
            samples.push(st.wh.clone());
        }
    }
    Ok(Trajectory {
        start: wh0.to_vec(),
        steps,
        stride,
        samples,
    })
}

/// Per-coordinate slope estimate and the state reached.
#[derive(Debug, Clone, PartialEq)]
pub struct SlopeEstimate {
    pub slopes: Vec<f64>,
    pub final_wh: Vec<f64>,
    /// Largest `|W^h_i|` seen at any step, per coordinate.
    pub max_abs: Vec<f64>,
}

/// Runs `steps` steps and fits a least-squares line to each coordinate over
/// the last half of the trajectory. Works for any `H` but the slope theory
/// only covers the diagonal case, which [`measure_slope`] enforces.
pub fn fit_slopes(task: &QuadraticTask, wh0: &[f64], steps: usize) -> Result<SlopeEstimate> {
    if steps < 2 {
        return Err(Error::InvalidArgument(
            "slope fit needs at least 2 steps".into(),
        ));
    }
    let d = task.dim();
    let mut st = Stepper::new(task, wh0.to_vec())?;
    let first = steps / 2;
    let n = (steps - first + 1) as f64;
    let t_mean = (first + steps) as f64 / 2.0;
    let mut s_tw = vec![0.0; d];
    let mut s_tt = 0.0;
    let mut max_abs: Vec<f64> = wh0.iter().map(|w| w.abs()).collect();
    for t in 0..=steps {
        if t > 0 {
            st.step();
        }
        for (m, w) in max_abs.iter_mut().zip(&st.wh) {
            *m = m.max(w.abs());
        }
        if t >= first {
            // Centered time, so Σ tc = 0 and the intercept drops out.
            let tc = t as f64 - t_mean;
            s_tt += tc * tc;
            for (a, w) in s_tw.iter_mut().zip(&st.wh) {
                *a += tc * w;
            }
        }
    }
    debug_assert!(n >= 2.0);
    Ok(SlopeEstimate {
        slopes: s_tw.iter().map(|a| a / s_tt).collect(),
        final_wh: st.wh,
        max_abs,
    })
}

/// [`fit_slopes`] restricted to diagonal `H`, where the slope has a closed
/// form to compare against.
pub fn measure_slope(task: &QuadraticTask, wh0: &[f64], steps: usize) -> Result<SlopeEstimate> {
    if !task.is_diagonal() {
        return Err(Error::InvalidArgument(
            "slope measurement is only defined for diagonal curvature".into(),
        ));
    }
    fit_slopes(task, wh0, steps)
}

/// `η λ (|W*| − 1) sign(W*)` for `|W*| > 1`, zero otherwise.
pub fn theoretical_slope(lambda: f64, w_star: f64, eta: f64) -> f64 {
    if w_star.abs() > 1.0 {
        eta * lambda * (w_star.abs() - 1.0) * w_star.signum()
    } else {
        0.0
    }
}

/// `2λ + 2|slope|/η`, the asymptotic loss increase from flipping a
/// diverging coordinate.
pub fn flip_loss_asymptote(lambda: f64, slope: f64, eta: f64) -> f64 {
    2.0 * lambda + 2.0 * slope.abs() / eta
}

/// Loss change from flipping the sign of coordinate `i`, by two loss
/// evaluations.
pub fn flip_loss_delta(task: &QuadraticTask, wh: &[f64], i: usize) -> Result<f64> {
    task.check(wh)?;
    if i >= wh.len() {
        return Err(Error::InvalidArgument(format!(
            "coordinate {i} out of range for dimension {}",
            wh.len()
        )));
    }
    let mut flipped = wh.to_vec();
    flipped[i] = if sign(wh[i]) > 0.0 { -1.0 } else { 1.0 };
    Ok(qbt_loss(task, &flipped)? - qbt_loss(task, wh)?)
}

/// Uniform draw in `[-a, a)` per coordinate.
pub fn uniform_init(dim: usize, a: f64, rng: &mut SeededRng) -> Vec<f64> {
    (0..dim).map(|_| rng.uniform(-a, a)).collect()
}
