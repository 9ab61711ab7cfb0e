//! Numerical checks of the flip-loss asymptote on random tasks.

use std::io::Write;
use std::path::Path;

use super::{
    fit_slopes, flip_loss_asymptote, flip_loss_delta, measure_slope, random_spd, uniform_init,
    EigenSpectrum, QuadraticTask,
};
use crate::error::{Error, Result};
use crate::numerics::stats::{bin_index, mean_std, spearman};
use crate::numerics::SeededRng;

const INIT_HALF_WIDTH: f64 = 0.005;

#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalRow {
    pub trial: usize,
    pub dim: usize,
    pub coord: usize,
    pub lambda: f64,
    pub w_star: f64,
    pub slope: f64,
    pub delta_l: f64,
    /// `2λ + 2|slope|/η` with the measured slope.
    pub asymptote: f64,
    /// `2λ|W*|`.
    pub closed_form: f64,
}

impl DiagonalRow {
    pub fn rel_err_asymptote(&self) -> f64 {
        (self.delta_l - self.asymptote).abs() / self.asymptote.abs()
    }

    pub fn rel_err_closed_form(&self) -> f64 {
        (self.delta_l - self.closed_form).abs() / self.closed_form.abs()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalReport {
    pub rows: Vec<DiagonalRow>,
    pub max_rel_err_asymptote: f64,
    pub max_rel_err_closed_form: f64,
}

/// `trials` diagonal tasks per entry of `dims`, every `|W*_i|` drawn from
/// `(1, 3]` with a random sign and `λ_i` from `spectrum`. Each trial runs
/// `steps` steps from a small uniform start and compares the measured flip
/// loss of every coordinate with both asymptote forms.
pub fn verify_diagonal(
    dims: &[usize],
    trials: usize,
    steps: usize,
    eta: f64,
    spectrum: EigenSpectrum,
    seed: u64,
) -> Result<DiagonalReport> {
    let root = SeededRng::new(seed);
    let mut rows = Vec::new();
    let mut trial_id = 0;
    for &dim in dims {
        for _ in 0..trials {
            let mut rng = root.fork(trial_id as u64);
            let lambdas = spectrum.sample_many(dim, &mut rng)?;
            let w_star: Vec<f64> = (0..dim)
                .map(|_| {
                    // (1, 3]: reflect the half-open [1, 3) draw.
                    let mag = 4.0 - rng.uniform(1.0, 3.0);
                    if rng.below(2) == 0 {
                        mag
                    } else {
                        -mag
                    }
                })
                .collect();
            let task = QuadraticTask::diagonal(&lambdas, w_star.clone(), eta)?;
            let wh0 = uniform_init(dim, INIT_HALF_WIDTH, &mut rng);
            let est = measure_slope(&task, &wh0, steps)?;
            for i in 0..dim {
                let delta_l = flip_loss_delta(&task, &est.final_wh, i)?;
                rows.push(DiagonalRow {
                    trial: trial_id,
                    dim,
                    coord: i,
                    lambda: lambdas[i],
                    w_star: w_star[i],
                    slope: est.slopes[i],
                    delta_l,
                    asymptote: flip_loss_asymptote(lambdas[i], est.slopes[i], eta),
                    closed_form: 2.0 * lambdas[i] * w_star[i].abs(),
                });
            }
            trial_id += 1;
        }
    }
    let max_rel_err_asymptote = rows
        .iter()
        .map(DiagonalRow::rel_err_asymptote)
        .fold(0.0, f64::max);
    let max_rel_err_closed_form = rows
        .iter()
        .map(DiagonalRow::rel_err_closed_form)
        .fold(0.0, f64::max);
    Ok(DiagonalReport {
        rows,
        max_rel_err_asymptote,
        max_rel_err_closed_form,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurveBin {
    pub center: f64,
    pub mean: f64,
    pub std: f64,
    pub count: usize,
}

/// Mean loss increase per bin of normalized hidden-weight magnitude.
#[derive(Debug, Clone, PartialEq)]
pub struct BinnedCurve {
    pub bins: Vec<CurveBin>,
}

impl BinnedCurve {
    /// Spearman correlation between bin centers and bin means over the
    /// non-empty bins.
    pub fn spearman(&self) -> f64 {
        let (x, y): (Vec<f64>, Vec<f64>) = self.bins.iter().map(|b| (b.center, b.mean)).unzip();
        spearman(&x, &y)
    }

    /// Whether the lowest-magnitude non-empty bin has the smallest mean.
    pub fn leftmost_is_min(&self) -> bool {
        match self.bins.first() {
            Some(first) => self.bins.iter().all(|b| b.mean >= first.mean),
            None => false,
        }
    }

    pub fn write_csv(&self, path: impl AsRef<Path>, header_comment: Option<&str>) -> Result<()> {
        let path = path.as_ref();
        let write = || -> std::io::Result<()> {
            let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
            if let Some(c) = header_comment {
                writeln!(f, "# {c}")?;
            }
            writeln!(f, "bin_center,mean_delta_l,std,count")?;
            for b in &self.bins {
                writeln!(f, "{:.6},{:.6},{:.6},{}", b.center, b.mean, b.std, b.count)?;
            }
            f.flush()
        };
        write().map_err(|e| Error::io(path, e))
    }
}

/// Groups `(magnitude, delta)` pairs into `bins` uniform bins over
/// `[0, max magnitude]`; empty bins are dropped.
pub fn bin_flip_losses(points: &[(f64, f64)], bins: usize) -> Result<BinnedCurve> {
    if bins == 0 {
        return Err(Error::InvalidArgument("need at least one bin".into()));
    }
    let hi = points.iter().map(|p| p.0).fold(0.0, f64::max);
    let width = if hi > 0.0 { hi / bins as f64 } else { 1.0 };
    let mut groups: Vec<Vec<f64>> = vec![Vec::new(); bins];
    for &(x, d) in points {
        groups[bin_index(x, hi, bins)].push(d);
    }
    Ok(BinnedCurve {
        bins: groups
            .iter()
            .enumerate()
            .filter(|(_, g)| !g.is_empty())
            .map(|(b, g)| {
                let (mean, std) = mean_std(g);
                CurveBin {
                    center: (b as f64 + 0.5) * width,
                    mean,
                    std,
                    count: g.len(),
                }
            })
            .collect(),
    })
}

#[derive(Debug, Clone)]
pub struct NonDiagonalReport {
    pub curve: BinnedCurve,
    /// `(|W^h_i| / (steps·η), ΔL_i)` for every coordinate.
    pub points: Vec<(f64, f64)>,
    pub spearman: f64,
    pub leftmost_is_min: bool,
}

/// One `dim`-dimensional task with dense `H` from [`random_spd`] and `W*`
/// uniform in `[-w_max, w_max]`: run `steps` steps, then bin every
/// coordinate's flip loss by its normalized magnitude `|W^h|/(steps·η)`.
pub fn verify_nondiagonal(
    dim: usize,
    steps: usize,
    eta: f64,
    w_max: f64,
    spectrum: EigenSpectrum,
    bins: usize,
    seed: u64,
) -> Result<NonDiagonalReport> {
    let mut rng = SeededRng::new(seed);
    let spd = random_spd(dim, spectrum, &mut rng)?;
    let w_star: Vec<f64> = (0..dim).map(|_| rng.uniform(-w_max, w_max)).collect();
    let task = QuadraticTask::new(spd.h, w_star, eta)?;
    let wh0 = uniform_init(dim, INIT_HALF_WIDTH, &mut rng);
    let est = fit_slopes(&task, &wh0, steps)?;
    let scale = steps as f64 * eta;
    let points = (0..dim)
        .map(|i| {
            Ok((
                est.final_wh[i].abs() / scale,
                flip_loss_delta(&task, &est.final_wh, i)?,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    let curve = bin_flip_losses(&points, bins)?;
    Ok(NonDiagonalReport {
        spearman: curve.spearman(),
        leftmost_is_min: curve.leftmost_is_min(),
        curve,
        points,
    })
}

#[derive(Debug, Clone)]
pub struct FlipLossLimitReport {
    pub diagonal: DiagonalReport,
    pub nondiagonal: NonDiagonalReport,
}

/// Both checks with default settings: diagonal tasks of dimension 1 and
/// `dim`, and one dense task of dimension `dim`.
pub fn verify_flip_loss_limit(
    dim: usize,
    trials: usize,
    steps: usize,
    seed: u64,
) -> Result<FlipLossLimitReport> {
    if dim < 2 {
        return Err(Error::InvalidArgument(
            "dimension must be at least 2".into(),
        ));
    }
    let spectrum = EigenSpectrum::default();
    Ok(FlipLossLimitReport {
        diagonal: verify_diagonal(&[1, dim], trials, steps, 0.01, spectrum, seed)?,
        nondiagonal: verify_nondiagonal(dim, steps, 0.01, 2.0, spectrum, 10, seed)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binning_groups_and_drops_empty() {
        let pts = [(0.0, 1.0), (0.1, 3.0), (1.0, 10.0)];
        let c = bin_flip_losses(&pts, 4).unwrap();
        assert_eq!(c.bins.len(), 2);
        assert_eq!(c.bins[0].count, 2);
        assert_eq!(c.bins[0].mean, 2.0);
        assert_eq!(c.bins[1].mean, 10.0);
        assert!(c.leftmost_is_min());
        assert!((c.spearman() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn small_diagonal_check_passes() {
        let r = verify_diagonal(&[1, 3], 3, 20_000, 0.01, EigenSpectrum::default(), 1).unwrap();
        assert_eq!(r.rows.len(), 3 + 9);
        assert!(
            r.max_rel_err_asymptote < 0.02,
            "{}",
            r.max_rel_err_asymptote
        );
        assert!(r.max_rel_err_closed_form < 1e-9);
    }
}
