//! Datasets and continual-learning task construction.
//!
//! Images are decoded as `samples × pixels` matrices scaled to `[-1, 1]`;
//! [`PixelRange::Unit`] remaps them to `[0, 1]` so that blank pixels feed
//! exactly zero into the first layer.
//! A [`TaskStream`] records the task order and the batch-norm parameters
//! captured at the end of each task; the datasets themselves are built on
//! demand (a permuted copy of MNIST is ~375 MB in `f64`).

mod idx;
mod permutation;
mod stream;

pub use idx::{decode_idx, load_idx, load_split, scale_pixel, Split, IMAGE_MAGIC, LABEL_MAGIC};
pub use permutation::{make_permuted_task, Permutation};
pub use stream::{eval_with_task_bn, split_stream, TaskStream};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::Matrix;

/// Range pixels are presented to a network in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PixelRange {
    /// `[-1, 1]`, as decoded.
    Symmetric,
    /// `[0, 1]`: background pixels are 0.
    #[default]
    Unit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub images: Matrix,
    pub labels: Vec<usize>,
    pub classes: usize,
    pub name: String,
}

impl LabeledDataset {
    pub fn new(
        images: Matrix,
        labels: Vec<usize>,
        classes: usize,
        name: impl Into<String>,
    ) -> Result<Self> {
        let name = name.into();
        if images.rows() != labels.len() {
            return Err(Error::DimMismatch(format!(
                "{name}: {} images but {} labels",
                images.rows(),
                labels.len()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= classes) {
            return Err(Error::InvalidArgument(format!(
                "{name}: label {bad} outside {classes} classes"
            )));
        }
        Ok(Self {
            images,
            labels,
            classes,
            name,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn pixels(&self) -> usize {
        self.images.cols()
    }

    /// Samples at the given indices, in order.
    pub fn subset(&self, idx: &[usize], name: impl Into<String>) -> Self {
        Self {
            images: self.images.select_rows(idx),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            classes: self.classes,
            name: name.into(),
        }
    }

    /// Remaps decoded `[-1, 1]` pixels to `range`.
    pub fn with_pixel_range(mut self, range: PixelRange) -> Self {
        if range == PixelRange::Unit {
            self.images
                .data_mut()
                .iter_mut()
                .for_each(|x| *x = 0.5 * (*x + 1.0));
        }
        self
    }

    /// The first `n` samples (or all of them).
    pub fn head(&self, n: usize) -> Self {
        let idx: Vec<usize> = (0..n.min(self.len())).collect();
        self.subset(&idx, self.name.clone())
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.classes];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    /// Concatenates datasets with equal pixel and class counts.
    pub fn concat(parts: &[&LabeledDataset], name: impl Into<String>) -> Result<Self> {
        let first = parts
            .first()
            .ok_or_else(|| Error::EmptyDataset("concat of zero datasets".into()))?;
        if let Some(p) = parts.iter().find(|p| p.classes != first.classes) {
            return Err(Error::DimMismatch(format!(
                "{} has {} classes, {} has {}",
                first.name, first.classes, p.name, p.classes
            )));
        }
        let images: Vec<&Matrix> = parts.iter().map(|p| &p.images).collect();
        Ok(Self {
            images: Matrix::vstack(&images)?,
            labels: parts
                .iter()
                .flat_map(|p| p.labels.iter().copied())
                .collect(),
            classes: first.classes,
            name: name.into(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_range_maps_endpoints() {
        let images = Matrix::row_vector(vec![scale_pixel(0), scale_pixel(255), scale_pixel(51)]);
        let d = LabeledDataset::new(images, vec![0], 1, "px").unwrap();
        let sym = d.clone().with_pixel_range(PixelRange::Symmetric);
        assert_eq!(sym, d);
        let unit = d.with_pixel_range(PixelRange::Unit);
        assert_eq!(unit.images.row(0)[0], 0.0);
        assert_eq!(unit.images.row(0)[1], 1.0);
        assert!((unit.images.row(0)[2] - 0.2).abs() < 1e-15);
    }
}
