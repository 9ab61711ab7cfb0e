use super::LabeledDataset;
use crate::error::{Error, Result};
use crate::numerics::SeededRng;

/// A fixed bijection over pixel indices: output pixel `i` takes input pixel
/// `map[i]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Permutation {
    map: Vec<usize>,
    seed: Option<u64>,
}

impl Permutation {
    pub fn identity(n: usize) -> Self {
        Self {
            map: (0..n).collect(),
            seed: None,
        }
    }

    /// Uniformly random permutation fully determined by `seed`.
    pub fn from_seed(n: usize, seed: u64) -> Self {
        let mut map: Vec<usize> = (0..n).collect();
        SeededRng::new(seed).shuffle(&mut map);
        Self {
            map,
            seed: Some(seed),
        }
    }

    pub fn from_map(map: Vec<usize>) -> Result<Self> {
        let mut seen = vec![false; map.len()];
        for &i in &map {
            if i >= map.len() || std::mem::replace(&mut seen[i], true) {
                return Err(Error::InvalidArgument(format!(
                    "not a permutation: index {i}"
                )));
            }
        }
        Ok(Self { map, seed: None })
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.map
    }

    pub fn inverse(&self) -> Self {
        let mut inv = vec![0; self.map.len()];
        for (i, &j) in self.map.iter().enumerate() {
            inv[j] = i;
        }
        Self {
            map: inv,
            seed: None,
        }
    }

    pub fn apply(&self, row: &[f64], out: &mut [f64]) {
        for (o, &j) in out.iter_mut().zip(&self.map) {
            *o = row[j];
        }
    }
}

/// Reorders every image's pixels by `perm`; labels are kept.
pub fn make_permuted_task(
    base: &LabeledDataset,
    perm: &Permutation,
    name: impl Into<String>,
) -> Result<LabeledDataset> {
    if perm.len() != base.pixels() {
        return Err(Error::DimMismatch(format!(
            "permutation over {} pixels applied to {} with {} pixels",
            perm.len(),
            base.name,
            base.pixels()
        )));
    }
    let mut out = base.clone();
    out.name = name.into();
    for i in 0..base.len() {
        perm.apply(base.images.row(i), out.images.row_mut(i));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Matrix;
    use proptest::prelude::*;

    fn toy(n: usize, pixels: usize) -> LabeledDataset {
        let images = Matrix::from_fn(n, pixels, |i, j| ((i * 31 + j * 7) % 13) as f64 / 6.0 - 1.0);
        LabeledDataset::new(images, (0..n).map(|i| i % 3).collect(), 3, "toy").unwrap()
    }

    #[test]
    fn identity_is_noop() {
        let base = toy(5, 9);
        let p = make_permuted_task(&base, &Permutation::identity(9), "toy").unwrap();
        assert_eq!(p, base);
    }

    #[test]
    fn size_mismatch_rejected() {
        assert!(make_permuted_task(&toy(2, 9), &Permutation::identity(8), "x").is_err());
    }

    #[test]
    fn from_map_rejects_non_bijection() {
        assert!(Permutation::from_map(vec![0, 0, 1]).is_err());
        assert!(Permutation::from_map(vec![0, 3, 1]).is_err());
        assert!(Permutation::from_map(vec![2, 0, 1]).is_ok());
    }

    proptest! {
        #[test]
        fn seeded_perm_is_bijective_and_invertible(seed in any::<u64>(), n in 1usize..200) {
            let p = Permutation::from_seed(n, seed);
            let mut sorted = p.as_slice().to_vec();
            sorted.sort_unstable();
            prop_assert_eq!(sorted, (0..n).collect::<Vec<_>>());
            prop_assert_eq!(Permutation::from_seed(n, seed), p.clone());

            let base = toy(4, n);
            let fwd = make_permuted_task(&base, &p, "p").unwrap();
            let back = make_permuted_task(&fwd, &p.inverse(), "toy").unwrap();
            prop_assert_eq!(&back, &base);
            for i in 0..base.len() {
                let mut a = base.images.row(i).to_vec();
                let mut b = fwd.images.row(i).to_vec();
                a.sort_by(f64::total_cmp);
                b.sort_by(f64::total_cmp);
                prop_assert_eq!(a, b);
            }
        }
    }
}
