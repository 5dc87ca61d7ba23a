//! Lightweight classifiers over standardized descriptors: multinomial
//! logistic regression and k-nearest neighbours.

mod knn;
mod softmax;

pub use knn::knn_evaluate;
pub use softmax::{
    gradient_check, loss_and_gradient, train_softmax, SoftmaxModel, TrainConfig, TrainOutcome,
};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gist::DescriptorSet;

/// Dense row-major double-precision features.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub rows: usize,
    pub dim: usize,
    pub data: Vec<f64>,
    pub params_hash: u64,
}

impl FeatureMatrix {
    pub fn new(rows: usize, dim: usize, data: Vec<f64>, params_hash: u64) -> Result<Self> {
        if data.len() != rows * dim {
            return Err(Error::SizeMismatch {
                expected: rows * dim,
                actual: data.len(),
            });
        }
        Ok(FeatureMatrix {
            rows,
            dim,
            data,
            params_hash,
        })
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }
}

/// Per-dimension z-scoring statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

pub const STD_FLOOR: f64 = 1e-8;

impl Standardizer {
    pub fn fit(set: &DescriptorSet) -> Self {
        let (n, dim) = (set.len().max(1) as f64, set.dim);
        let mut mean = vec![0.0; dim];
        for i in 0..set.len() {
            for (m, &v) in mean.iter_mut().zip(set.row(i)) {
                *m += v as f64;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; dim];
        for i in 0..set.len() {
            for ((s, &v), m) in var.iter_mut().zip(set.row(i)).zip(&mean) {
                *s += (v as f64 - m).powi(2);
            }
        }
        let std = var.iter().map(|s| (s / n).sqrt().max(STD_FLOOR)).collect();
        Standardizer { mean, std }
    }

    pub fn apply(&self, set: &DescriptorSet) -> Result<FeatureMatrix> {
        if set.dim != self.mean.len() {
            return Err(Error::SizeMismatch {
                expected: self.mean.len(),
                actual: set.dim,
            });
        }
        let mut data = Vec::with_capacity(set.data.len());
        for i in 0..set.len() {
            data.extend(
                set.row(i)
                    .iter()
                    .zip(self.mean.iter().zip(&self.std))
                    .map(|(&v, (m, s))| (v as f64 - m) / s),
            );
        }
        FeatureMatrix::new(set.len(), set.dim, data, set.params_hash)
    }
}

/// Z-scores `train` with its own statistics and applies the same transform to `others`.
pub fn standardize(
    train: &DescriptorSet,
    others: &[&DescriptorSet],
) -> Result<(FeatureMatrix, Vec<FeatureMatrix>, Standardizer)> {
    if let Some(o) = others.iter().find(|o| o.params_hash != train.params_hash) {
        return Err(Error::ParamsMismatch(train.params_hash, o.params_hash));
    }
    let st = Standardizer::fit(train);
    let x = st.apply(train)?;
    let rest = others.iter().map(|o| st.apply(o)).collect::<Result<Vec<_>>>()?;
    Ok((x, rest, st))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub top1_accuracy: f64,
    /// Recall per class; classes absent from the test labels are omitted.
    pub per_class_accuracy: BTreeMap<String, f64>,
    /// `confusion[true][predicted]`
    pub confusion: Vec<Vec<u64>>,
}

impl EvalResult {
    pub(crate) fn from_predictions(classes: &[String], truth: &[usize], pred: &[usize]) -> Self {
        let c = classes.len();
        let mut confusion = vec![vec![0u64; c]; c];
        for (&t, &p) in truth.iter().zip(pred) {
            confusion[t][p] += 1;
        }
        let total: u64 = confusion.iter().flatten().sum();
        let correct: u64 = (0..c).map(|i| confusion[i][i]).sum();
        let per_class_accuracy = classes
            .iter()
            .enumerate()
            .filter_map(|(i, name)| {
                let support: u64 = confusion[i].iter().sum();
                (support > 0).then(|| (name.clone(), confusion[i][i] as f64 / support as f64))
            })
            .collect();
        EvalResult {
            top1_accuracy: if total > 0 {
                correct as f64 / total as f64
            } else {
                0.0
            },
            per_class_accuracy,
            confusion,
        }
    }
}

pub(crate) fn label_indices(classes: &[String], labels: &[String]) -> Result<Vec<usize>> {
    labels
        .iter()
        .map(|l| {
            classes
                .iter()
                .position(|c| c == l)
                .ok_or_else(|| Error::Validation(format!("unknown label `{l}`")))
        })
        .collect()
}
