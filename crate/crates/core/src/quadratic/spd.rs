//! Random symmetric positive-definite matrices `H = Rᵀ D R` with a random
//! orthogonal `R` built by the subgroup algorithm.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{Matrix, SeededRng};

const MAX_REJECTIONS: usize = 1000;

/// Eigenvalue distribution. Normal draws that are not positive are redrawn.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EigenSpectrum {
    Uniform { lo: f64, hi: f64 },
    Normal { mean: f64, std: f64 },
}

impl Default for EigenSpectrum {
    fn default() -> Self {
        EigenSpectrum::Uniform { lo: 0.5, hi: 1.5 }
    }
}

impl EigenSpectrum {
    fn sample(&self, rng: &mut SeededRng) -> Result<f64> {
        match *self {
            EigenSpectrum::Uniform { lo, hi } => {
                if !(lo > 0.0 && hi > lo) {
                    return Err(Error::InvalidArgument(format!(
                        "uniform eigenvalue range [{lo}, {hi}] must be positive and nonempty"
                    )));
                }
                Ok(rng.uniform(lo, hi))
            }
            EigenSpectrum::Normal { mean, std } => {
                for _ in 0..MAX_REJECTIONS {
                    let v = mean + std * rng.normal();
                    if v > 0.0 {
                        return Ok(v);
                    }
                }
                Err(Error::InvalidArgument(format!(
                    "normal eigenvalues (mean {mean}, std {std}): no positive draw in {MAX_REJECTIONS} tries"
                )))
            }
        }
    }

    /// `n` independent eigenvalue draws.
    pub fn sample_many(&self, n: usize, rng: &mut SeededRng) -> Result<Vec<f64>> {
        (0..n).map(|_| self.sample(rng)).collect()
    }
}

#[derive(Debug, Clone)]
pub struct SpdSample {
    pub h: Matrix,
    pub rotation: Matrix,
    pub eigenvalues: Vec<f64>,
}

/// Uniform point on the unit sphere in `R^n`.
fn unit_vector(n: usize, rng: &mut SeededRng) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..n).map(|_| rng.normal()).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

/// Random `dim × dim` orthogonal matrix. Starts from a uniform 2-D rotation
/// and grows one dimension at a time: embed `R_n` as the lower-right block
/// of `R̂_n` (with `R̂_n[0][0] = 1`), draw a unit `v`, set
/// `x = (e₁ − v)/‖e₁ − v‖` and `R_{n+1} = (I − 2xxᵀ) R̂_n`.
pub fn random_rotation(dim: usize, rng: &mut SeededRng) -> Result<Matrix> {
    if dim == 0 {
        return Err(Error::InvalidArgument(
            "dimension must be at least 1".into(),
        ));
    }
    if dim == 1 {
        return Ok(Matrix::identity(1));
    }
    let theta = rng.uniform(0.0, std::f64::consts::TAU);
    let (s, c) = theta.sin_cos();
    let mut r = Matrix::new(2, 2, vec![c, -s, s, c])?;
    for n in 2..dim {
        let m = n + 1;
        let mut hat = Matrix::zeros(m, m);
        hat.set(0, 0, 1.0);
        for i in 0..n {
            hat.row_mut(i + 1)[1..].copy_from_slice(r.row(i));
        }
        let x = loop {
            let v = unit_vector(m, rng);
            let mut x: Vec<f64> = v.iter().map(|t| -t).collect();
            x[0] += 1.0;
            let norm = x.iter().map(|t| t * t).sum::<f64>().sqrt();
            if norm > 1e-8 {
                break x.into_iter().map(|t| t / norm).collect::<Vec<_>>();
            }
        };
        // (I − 2xxᵀ) R̂ = R̂ − 2 x (xᵀ R̂)
        let mut xt_r = vec![0.0; m];
        for (i, &xi) in x.iter().enumerate() {
            for (acc, h) in xt_r.iter_mut().zip(hat.row(i)) {
                *acc += xi * h;
            }
        }
        for (i, &xi) in x.iter().enumerate() {
            for (h, a) in hat.row_mut(i).iter_mut().zip(&xt_r) {
                *h -= 2.0 * xi * a;
            }
        }
        r = hat;
    }
    Ok(r)
}

/// `Rᵀ D R` with `D` drawn from `spectrum` and `R` from
/// [`random_rotation`]. The upper triangle is computed and mirrored, so the
/// result is exactly symmetric.
pub fn random_spd(dim: usize, spectrum: EigenSpectrum, rng: &mut SeededRng) -> Result<SpdSample> {
    if dim == 0 {
        return Err(Error::InvalidArgument(
            "dimension must be at least 1".into(),
        ));
    }
    let eigenvalues = spectrum.sample_many(dim, rng)?;
    let rotation = random_rotation(dim, rng)?;
    let mut dr = rotation.clone();
    for (k, &l) in eigenvalues.iter().enumerate() {
        dr.row_mut(k).iter_mut().for_each(|v| *v *= l);
    }
    let mut h = rotation.matmul_tn(&dr)?;
    for i in 0..dim {
        for j in 0..i {
            let v = h.get(j, i);
            h.set(i, j, v);
        }
    }
    Ok(SpdSample {
        h,
        rotation,
        eigenvalues,
    })
}

/// `max |RᵀR − I|`.
pub fn orthogonality_residual(r: &Matrix) -> f64 {
    let rtr = r.matmul_tn(r).expect("square");
    rtr.max_abs_diff(&Matrix::identity(r.rows()))
}
