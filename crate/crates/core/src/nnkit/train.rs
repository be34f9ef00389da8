use log::{debug, info};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::adadelta::{AdadeltaParams, AdadeltaState};
use super::network::{DropoutMode, Network};
use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Frame differences paired with scalar labels.
///
/// Inputs are kept in `f32` to bound memory; every computation upcasts.
#[derive(Clone, Debug, Default)]
pub struct Dataset {
    pub shape: [usize; 3],
    pub inputs: Vec<Vec<f32>>,
    pub labels: Vec<f64>,
    /// `(clip index, frame index)` provenance of each pair.
    pub tags: Vec<(usize, usize)>,
}

impl Dataset {
    pub fn new(shape: [usize; 3]) -> Self {
        Self {
            shape,
            ..Self::default()
        }
    }

    pub fn push(&mut self, input: Vec<f32>, label: f64, tag: (usize, usize)) -> Result<()> {
        let n = self.shape.iter().product::<usize>();
        if input.len() != n {
            return Err(Error::shape(
                "Dataset::push",
                "input length",
                n,
                input.len(),
            ));
        }
        self.inputs.push(input);
        self.labels.push(label);
        self.tags.push(tag);
        Ok(())
    }

    pub fn extend(&mut self, other: Dataset) -> Result<()> {
        if other.shape != self.shape && !other.is_empty() {
            return Err(Error::shape(
                "Dataset::extend",
                "frame shape",
                format!("{:?}", self.shape),
                format!("{:?}", other.shape),
            ));
        }
        self.inputs.extend(other.inputs);
        self.labels.extend(other.labels);
        self.tags.extend(other.tags);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn input(&self, i: usize) -> Tensor {
        Tensor::from_f32(&self.shape, &self.inputs[i]).expect("dataset shape is validated on push")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainOptions {
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub adadelta: AdadeltaParams,
    /// Stop after this many epochs without `min_delta` improvement.
    pub patience: Option<usize>,
    pub min_delta: f64,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self {
            epochs: 8,
            batch_size: 32,
            seed: 0,
            adadelta: AdadeltaParams::default(),
            patience: Some(2),
            min_delta: 1e-4,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Mean per-sample loss of each completed epoch.
    pub epoch_losses: Vec<f64>,
    pub steps: usize,
    pub stopped_early: bool,
}

/// Sample order used for `epoch`; exposed so callers can inspect shuffling.
pub fn epoch_order(len: usize, seed: u64, epoch: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..len).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(crate::mix_seed(seed, 0xE90C, epoch as u64));
    order.shuffle(&mut rng);
    order
}

/// Mini-batch Adadelta training on the Euclidean loss.
///
/// Per-sample gradients within a batch may be computed in parallel; they are
/// always reduced in batch order, so results do not depend on thread count.
pub fn train(net: &mut Network, data: &Dataset, opts: &TrainOptions) -> Result<TrainReport> {
    if data.is_empty() {
        return Err(Error::invalid("training set is empty"));
    }
    if opts.batch_size == 0 {
        return Err(Error::invalid("batch size must be >= 1"));
    }
    let expected = net.config().input_shape();
    if data.shape != expected {
        return Err(Error::shape(
            "train",
            "input shape",
            format!("{expected:?}"),
            format!("{:?}", data.shape),
        ));
    }

    let mut state = AdadeltaState::new(net.params(), opts.adadelta);
    let mut report = TrainReport::default();
    let mut best = f64::INFINITY;
    let mut stale = 0;

    for epoch in 0..opts.epochs {
        let order = epoch_order(data.len(), opts.seed, epoch);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(opts.batch_size) {
            let per_sample: Vec<Result<(f64, Vec<Tensor>)>> = batch
                .par_iter()
                .map(|&idx| {
                    let mut rng = ChaCha8Rng::seed_from_u64(crate::mix_seed(
                        opts.seed,
                        epoch as u64,
                        idx as u64,
                    ));
                    net.loss_and_grads(
                        &data.input(idx),
                        data.labels[idx],
                        DropoutMode::Sample(&mut rng),
                    )
                })
                .collect();

            let scale = 1.0 / batch.len() as f64;
            let mut total: Option<Vec<Tensor>> = None;
            let mut batch_loss = 0.0;
            for item in per_sample {
                let (loss, grads) = item?;
                batch_loss += loss;
                match total.as_mut() {
                    None => total = Some(grads),
                    Some(acc) => {
                        for (a, g) in acc.iter_mut().zip(&grads) {
                            a.axpy(1.0, g)?;
                        }
                    }
                }
            }
            if !batch_loss.is_finite() {
                return Err(Error::NonFinite {
                    op: "train",
                    detail: format!("loss {batch_loss} at epoch {epoch}, step {}", report.steps),
                });
            }
            let mut grads = total.expect("batches are non-empty");
            grads.iter_mut().for_each(|g| g.scale(scale));
            state.step(net.params_mut(), &grads)?;
            epoch_loss += batch_loss;
            report.steps += 1;
        }
        let mean = epoch_loss / data.len() as f64;
        info!("epoch {epoch}: mean loss {mean:.6}");
        report.epoch_losses.push(mean);

        if let Some(patience) = opts.patience {
            if mean < best - opts.min_delta {
                best = mean;
                stale = 0;
            } else {
                stale += 1;
                if stale >= patience {
                    debug!("early stop after epoch {epoch}");
                    report.stopped_early = true;
                    break;
                }
            }
        }
    }
    Ok(report)
}
