use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{label_indices, EvalResult, FeatureMatrix, Standardizer};
use crate::error::{Error, Result};
use crate::rng;

fn default_lr() -> f64 {
    0.1
}
fn default_epochs() -> usize {
    200
}
fn default_batch() -> usize {
    32
}
fn default_l2() -> f64 {
    1e-4
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    #[serde(default = "default_lr")]
    pub learning_rate: f64,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    #[serde(default = "default_l2")]
    pub l2: f64,
    #[serde(default)]
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: default_lr(),
            epochs: default_epochs(),
            batch_size: default_batch(),
            l2: default_l2(),
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) || self.batch_size == 0 || !(self.l2 >= 0.0) {
            return Err(Error::Validation(format!("invalid train config {self:?}")));
        }
        Ok(())
    }
}

/// Linear softmax classifier. `weights` is `classes × (dim + 1)`, bias last.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SoftmaxModel {
    pub classes: Vec<String>,
    pub params_hash: u64,
    pub dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub standardization: Option<Standardizer>,
    pub weights: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: SoftmaxModel,
    /// Full-data objective before training and after every epoch.
    pub loss_history: Vec<f64>,
}

fn logits_into(weights: &[f64], x: &[f64], out: &mut [f64]) {
    let stride = x.len() + 1;
    for (c, o) in out.iter_mut().enumerate() {
        let w = &weights[c * stride..(c + 1) * stride];
        *o = w[..x.len()].iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + w[x.len()];
    }
}

/// In-place softmax; returns log-sum-exp of the input.
fn softmax_in_place(z: &mut [f64]) -> f64 {
    let max = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in z.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    z.iter_mut().for_each(|v| *v /= sum);
    max + sum.ln()
}

fn l2_penalty(weights: &[f64], dim: usize, l2: f64) -> f64 {
    let norm2: f64 = weights
        .chunks_exact(dim + 1)
        .map(|w| w[..dim].iter().map(|v| v * v).sum::<f64>())
        .sum();
    0.5 * l2 * norm2
}

/// Data term over `rows`: mean cross-entropy and its gradient (no regularizer).
fn data_loss_grad(
    weights: &[f64],
    x: &FeatureMatrix,
    labels: &[usize],
    n_classes: usize,
    rows: &[usize],
    grad: Option<&mut [f64]>,
) -> f64 {
    let stride = x.dim + 1;
    let mut z = vec![0.0; n_classes];
    let mut loss = 0.0;
    let inv = 1.0 / rows.len() as f64;
    let mut grad = grad;
    if let Some(g) = grad.as_deref_mut() {
        g.iter_mut().for_each(|v| *v = 0.0);
    }
    for &i in rows {
        let xi = x.row(i);
        logits_into(weights, xi, &mut z);
        let y = labels[i];
        let lse = {
            let zy = z[y];
            let lse = softmax_in_place(&mut z);
            loss += lse - zy;
            lse
        };
        let _ = lse;
        if let Some(g) = grad.as_deref_mut() {
            for c in 0..n_classes {
                let coef = (z[c] - if c == y { 1.0 } else { 0.0 }) * inv;
                if coef == 0.0 {
                    continue;
                }
                let gc = &mut g[c * stride..(c + 1) * stride];
                for (gv, xv) in gc[..x.dim].iter_mut().zip(xi) {
                    *gv += coef * xv;
                }
                gc[x.dim] += coef;
            }
        }
    }
    loss * inv
}

/// Regularized objective `mean CE + (l2/2)·‖W‖²` (bias excluded) and its
/// analytic gradient over all rows.
pub fn loss_and_gradient(
    weights: &[f64],
    x: &FeatureMatrix,
    labels: &[usize],
    n_classes: usize,
    l2: f64,
) -> (f64, Vec<f64>) {
    let rows: Vec<usize> = (0..x.rows).collect();
    let mut grad = vec![0.0; weights.len()];
    let loss = data_loss_grad(weights, x, labels, n_classes, &rows, Some(&mut grad));
    let stride = x.dim + 1;
    for (j, g) in grad.iter_mut().enumerate() {
        if j % stride != x.dim {
            *g += l2 * weights[j];
        }
    }
    (loss + l2_penalty(weights, x.dim, l2), grad)
}

fn objective(weights: &[f64], x: &FeatureMatrix, labels: &[usize], n_classes: usize, l2: f64) -> f64 {
    let rows: Vec<usize> = (0..x.rows).collect();
    data_loss_grad(weights, x, labels, n_classes, &rows, None) + l2_penalty(weights, x.dim, l2)
}

/// Mini-batch gradient descent from zero weights.
///
/// The L2 term is applied as an exact proximal shrink `W ← W / (1 + lr·l2)`
/// after each data-gradient step, which keeps very large penalties stable.
pub fn train_softmax(
    x: &FeatureMatrix,
    labels: &[String],
    classes: &[String],
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if classes.len() < 2 {
        return Err(Error::Validation("training needs at least 2 classes".into()));
    }
    if labels.len() != x.rows {
        return Err(Error::SizeMismatch {
            expected: x.rows,
            actual: labels.len(),
        });
    }
    let y = label_indices(classes, labels)?;
    for (ci, c) in classes.iter().enumerate() {
        if !y.contains(&ci) {
            return Err(Error::Validation(format!("class `{c}` has no training rows")));
        }
    }
    let n_classes = classes.len();
    let stride = x.dim + 1;
    let mut w = vec![0.0; n_classes * stride];
    let mut grad = vec![0.0; w.len()];
    let shrink = 1.0 / (1.0 + cfg.learning_rate * cfg.l2);
    let mut history = vec![objective(&w, x, &y, n_classes, cfg.l2)];
    let mut order: Vec<usize> = (0..x.rows).collect();
    for epoch in 0..cfg.epochs {
        order.sort_unstable();
        order.shuffle(&mut rng::stream(cfg.seed, &[rng::TAG_EPOCH, epoch as u64]));
        for batch in order.chunks(cfg.batch_size) {
            data_loss_grad(&w, x, &y, n_classes, batch, Some(&mut grad));
            for (j, (wv, g)) in w.iter_mut().zip(&grad).enumerate() {
                *wv -= cfg.learning_rate * g;
                if j % stride != x.dim {
                    *wv *= shrink;
                }
            }
        }
        let loss = objective(&w, x, &y, n_classes, cfg.l2);
        if !loss.is_finite() {
            return Err(Error::Diverged { epoch });
        }
        history.push(loss);
    }
    Ok(TrainOutcome {
        model: SoftmaxModel {
            classes: classes.to_vec(),
            params_hash: x.params_hash,
            dim: x.dim,
            standardization: None,
            weights: w,
        },
        loss_history: history,
    })
}

impl SoftmaxModel {
    /// Argmax class index per row; ties go to the lowest index.
    pub fn predict(&self, x: &FeatureMatrix) -> Result<Vec<usize>> {
        if x.params_hash != self.params_hash || x.dim != self.dim {
            return Err(Error::ParamsMismatch(self.params_hash, x.params_hash));
        }
        let mut z = vec![0.0; self.classes.len()];
        Ok((0..x.rows)
            .map(|i| {
                logits_into(&self.weights, x.row(i), &mut z);
                let mut best = 0;
                for c in 1..z.len() {
                    if z[c] > z[best] {
                        best = c;
                    }
                }
                best
            })
            .collect())
    }

    pub fn evaluate(&self, x: &FeatureMatrix, labels: &[String]) -> Result<EvalResult> {
        let truth = label_indices(&self.classes, labels)?;
        let pred = self.predict(x)?;
        Ok(EvalResult::from_predictions(&self.classes, &truth, &pred))
    }
}

/// Largest relative difference between the analytic gradient and central
/// finite differences (h = 1e-5) over 100 random weight coordinates, at
/// random weights drawn from `cfg.seed`.
pub fn gradient_check(
    x: &FeatureMatrix,
    labels: &[String],
    classes: &[String],
    cfg: &TrainConfig,
) -> Result<f64> {
    let y = label_indices(classes, labels)?;
    let n_classes = classes.len();
    let mut r = rng::stream(cfg.seed, &[rng::TAG_INIT]);
    let w: Vec<f64> = (0..n_classes * (x.dim + 1))
        .map(|_| r.random_range(-0.5..0.5))
        .collect();
    let (_, grad) = loss_and_gradient(&w, x, &y, n_classes, cfg.l2);
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    let mut probe = w.clone();
    for _ in 0..100 {
        let j = r.random_range(0..w.len());
        probe[j] = w[j] + h;
        let up = objective(&probe, x, &y, n_classes, cfg.l2);
        probe[j] = w[j] - h;
        let down = objective(&probe, x, &y, n_classes, cfg.l2);
        probe[j] = w[j];
        let numeric = (up - down) / (2.0 * h);
        let denom = grad[j].abs().max(numeric.abs()).max(1e-8);
        worst = worst.max((grad[j] - numeric).abs() / denom);
    }
    Ok(worst)
}
