use std::io::Write;

use log::info;
use ndarray::linalg::general_mat_mul;
use ndarray::{Array1, Array2, Axis, Zip};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{
    adamw_step, sigmoid, AdamWConfig, AdamWState, Checkpoint, CheckpointMeta, Parameters, RnnModel,
};
use crate::error::{Error, Result};
use crate::languages::LabeledSample;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub optimizer: AdamWConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 22,
            batch_size: 64,
            optimizer: AdamWConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    /// Mean over training strings of the loss summed over prefixes.
    pub train_loss: f64,
    /// Fraction of dev prefixes whose decision matches the label.
    pub dev_accuracy: f64,
    /// Fraction of dev strings with every prefix decided correctly.
    pub dev_string_accuracy: f64,
    pub param_norm: f64,
}

#[derive(Clone, Debug)]
pub struct TrainingRun {
    pub checkpoints: Vec<Checkpoint>,
    pub metrics: Vec<EpochMetrics>,
}

impl TrainingRun {
    pub fn best(&self) -> Option<&Checkpoint> {
        let epoch = select_best_epoch(&self.metrics)?;
        self.checkpoints.iter().find(|c| c.meta.epoch == epoch)
    }
}

/// Highest epoch among those with the best dev accuracy.
pub fn select_best_epoch(metrics: &[EpochMetrics]) -> Option<usize> {
    let best = metrics
        .iter()
        .map(|m| m.dev_accuracy)
        .fold(f64::NEG_INFINITY, f64::max);
    metrics
        .iter()
        .filter(|m| m.dev_accuracy == best)
        .map(|m| m.epoch)
        .max()
}

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Cross-entropy of one position given the logit margin `z = l_accept - l_reject`.
fn position_loss(z: f64, label: bool) -> f64 {
    if label {
        softplus(-z)
    } else {
        softplus(z)
    }
}

/// Loss of one sample summed over all its prefixes, through the plain
/// single-string forward pass.
pub fn sequence_loss(model: &RnnModel, sample: &LabeledSample) -> Result<f64> {
    let f = model.forward(&sample.x)?;
    let p = &model.params;
    let wdiff = &p.head_weight.row(1) - &p.head_weight.row(0);
    let bdiff = p.head_bias[1] - p.head_bias[0];
    Ok(f.hidden
        .axis_iter(Axis(0))
        .zip(&sample.y)
        .map(|(h, &y)| position_loss(h.dot(&wdiff) + bdiff, y))
        .sum())
}

/// Backpropagation through time for equal-length sequences, batched so the
/// recurrence runs as matrix products. Adds the gradient of the summed loss
/// into `grads` and returns that summed loss.
fn accumulate_group(
    params: &Parameters,
    bos: usize,
    tokens: &[Vec<usize>],
    labels: &[&[bool]],
    grads: &mut Parameters,
) -> f64 {
    let b = tokens.len();
    let n = tokens[0].len();
    let d = params.recurrence.nrows();
    let wdiff: Array1<f64> = &params.head_weight.row(1) - &params.head_weight.row(0);
    let bdiff = params.head_bias[1] - params.head_bias[0];

    let mut ids: Vec<Vec<usize>> = Vec::with_capacity(n + 1);
    let mut xs: Vec<Array2<f64>> = Vec::with_capacity(n + 1);
    let mut hs: Vec<Array2<f64>> = Vec::with_capacity(n + 1);
    let mut dzs: Vec<Array1<f64>> = Vec::with_capacity(n + 1);
    let mut loss = 0.0;

    for step in 0..=n {
        let step_ids: Vec<usize> = if step == 0 {
            vec![bos; b]
        } else {
            tokens.iter().map(|t| t[step - 1]).collect()
        };
        let x = params.embedding.select(Axis(0), &step_ids);
        let mut h = x.dot(&params.input.t());
        if step > 0 {
            general_mat_mul(1.0, &hs[step - 1], &params.recurrence.t(), 1.0, &mut h);
        }
        h.mapv_inplace(f64::tanh);
        let margins = h.dot(&wdiff) + bdiff;
        let mut dz = Array1::zeros(b);
        for r in 0..b {
            let y = labels[r][step];
            loss += position_loss(margins[r], y);
            dz[r] = sigmoid(margins[r]) - if y { 1.0 } else { 0.0 };
        }
        ids.push(step_ids);
        xs.push(x);
        hs.push(h);
        dzs.push(dz);
    }

    let mut dh_next: Array2<f64> = Array2::zeros((b, d));
    for step in (0..=n).rev() {
        let h = &hs[step];
        let dz = &dzs[step];
        let head_grad = dz.dot(h);
        let dz_sum = dz.sum();
        {
            let mut accept_row = grads.head_weight.row_mut(1);
            accept_row += &head_grad;
        }
        {
            let mut reject_row = grads.head_weight.row_mut(0);
            reject_row -= &head_grad;
        }
        grads.head_bias[1] += dz_sum;
        grads.head_bias[0] -= dz_sum;

        let mut dpre = dh_next;
        for (mut row, &dzr) in dpre.axis_iter_mut(Axis(0)).zip(dz.iter()) {
            row.scaled_add(dzr, &wdiff);
        }
        Zip::from(&mut dpre)
            .and(h)
            .for_each(|g, &hv| *g *= 1.0 - hv * hv);

        if step > 0 {
            general_mat_mul(1.0, &dpre.t(), &hs[step - 1], 1.0, &mut grads.recurrence);
        }
        general_mat_mul(1.0, &dpre.t(), &xs[step], 1.0, &mut grads.input);
        let dx = dpre.dot(&params.input);
        for (r, &tok) in ids[step].iter().enumerate() {
            let mut row = grads.embedding.row_mut(tok);
            row += &dx.row(r);
        }
        dh_next = if step > 0 {
            dpre.dot(&params.recurrence)
        } else {
            Array2::zeros((0, 0))
        };
    }
    loss
}

/// Gradient of the summed loss over `samples` (not averaged), plus that loss.
pub fn batch_gradients(model: &RnnModel, samples: &[&LabeledSample]) -> Result<(f64, Parameters)> {
    let mut grads = Parameters::zeros_like(&model.params);
    let mut encoded: Vec<(Vec<usize>, &[bool])> = samples
        .iter()
        .map(|s| Ok((model.alphabet().encode(&s.x)?, s.y.as_slice())))
        .collect::<Result<_>>()?;
    encoded.sort_by_key(|(t, _)| t.len());
    let mut loss = 0.0;
    for group in encoded.chunk_by(|a, b| a.0.len() == b.0.len()) {
        let tokens: Vec<Vec<usize>> = group.iter().map(|g| g.0.clone()).collect();
        let labels: Vec<&[bool]> = group.iter().map(|g| g.1).collect();
        loss += accumulate_group(
            &model.params,
            model.bos_index(),
            &tokens,
            &labels,
            &mut grads,
        );
    }
    Ok((loss, grads))
}

/// Per-prefix and per-string accuracy of the model's decisions against labels.
pub fn evaluate(model: &RnnModel, samples: &[LabeledSample]) -> Result<(f64, f64)> {
    let mut prefixes = 0usize;
    let mut correct_prefixes = 0usize;
    let mut correct_strings = 0usize;
    for s in samples {
        let decisions = model.decisions(&s.x)?;
        let hits = decisions.iter().zip(&s.y).filter(|(a, b)| a == b).count();
        prefixes += s.y.len();
        correct_prefixes += hits;
        if hits == s.y.len() {
            correct_strings += 1;
        }
    }
    Ok((
        correct_prefixes as f64 / prefixes.max(1) as f64,
        correct_strings as f64 / samples.len().max(1) as f64,
    ))
}

/// Minibatch AdamW training with one checkpoint per epoch.
///
/// `meta` supplies the language and seed recorded in each checkpoint;
/// `on_epoch` sees every checkpoint as soon as it exists.
pub fn train<R: Rng + ?Sized>(
    mut model: RnnModel,
    train_set: &[LabeledSample],
    dev_set: &[LabeledSample],
    config: &TrainConfig,
    meta: &CheckpointMeta,
    rng: &mut R,
    mut on_epoch: impl FnMut(&Checkpoint, &EpochMetrics) -> Result<()>,
) -> Result<TrainingRun> {
    if train_set.is_empty() || dev_set.is_empty() {
        return Err(Error::InvalidArgument(
            "training and dev sets must be nonempty".into(),
        ));
    }
    if config.batch_size == 0 {
        return Err(Error::InvalidArgument("batch size must be positive".into()));
    }
    let mut state = AdamWState::new(&model.params);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut run = TrainingRun {
        checkpoints: Vec::with_capacity(config.epochs),
        metrics: Vec::with_capacity(config.epochs),
    };

    for epoch in 1..=config.epochs {
        order.shuffle(rng);
        let mut epoch_loss = 0.0;
        for (batch, chunk) in order.chunks(config.batch_size).enumerate() {
            let samples: Vec<&LabeledSample> = chunk.iter().map(|&i| &train_set[i]).collect();
            let (loss, mut grads) = batch_gradients(&model, &samples)?;
            if !loss.is_finite() {
                return Err(Error::Divergence {
                    epoch,
                    batch,
                    reason: format!("loss is {loss}"),
                });
            }
            epoch_loss += loss;
            grads.scale(1.0 / samples.len() as f64);
            adamw_step(&mut model.params, &grads, &mut state, &config.optimizer).map_err(|e| {
                match e {
                    Error::Divergence { reason, .. } => Error::Divergence {
                        epoch,
                        batch,
                        reason,
                    },
                    other => other,
                }
            })?;
        }

        let (dev_accuracy, dev_string_accuracy) = evaluate(&model, dev_set)?;
        let metrics = EpochMetrics {
            epoch,
            train_loss: epoch_loss / train_set.len() as f64,
            dev_accuracy,
            dev_string_accuracy,
            param_norm: model.params.l2_norm(),
        };
        info!(
            "epoch {epoch}: loss {:.6} dev {:.6} (strings {:.4}) |θ| {:.3}",
            metrics.train_loss,
            metrics.dev_accuracy,
            metrics.dev_string_accuracy,
            metrics.param_norm
        );
        let checkpoint = Checkpoint {
            model: model.clone(),
            meta: CheckpointMeta {
                epoch,
                dev_accuracy,
                param_norm: metrics.param_norm,
                ..meta.clone()
            },
        };
        on_epoch(&checkpoint, &metrics)?;
        run.checkpoints.push(checkpoint);
        run.metrics.push(metrics);
    }
    Ok(run)
}

/// `epoch,train_loss,dev_accuracy,dev_string_accuracy,param_norm`, one row per epoch.
pub fn write_metrics_csv<W: Write>(out: W, metrics: &[EpochMetrics]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for m in metrics {
        w.serialize(m)?;
    }
    w.flush()?;
    Ok(())
}
