use crate::error::{Error, Result};
use crate::numerics::{Adam, AdamConfig, Parameters, Rng};

use super::TrainConfig;

/// A task's training data and loss, batch by batch.
pub trait Objective<M> {
    /// Prepares an epoch (shuffling, sampling) and returns its batch count.
    fn begin_epoch(&mut self, epoch: usize, rng: &mut Rng) -> Result<usize>;

    /// Loss of batch `index`, with gradients accumulated into `grads`
    /// (zeroed by the caller).
    fn batch(&mut self, index: usize, model: &M, grads: &mut M, rng: &mut Rng) -> Result<f64>;
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    /// Mean batch loss.
    pub train_loss: f64,
    pub dev_metric: f64,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome<M> {
    pub best: M,
    pub best_epoch: usize,
    pub best_metric: f64,
    pub history: Vec<EpochLog>,
}

fn clip(grads: &mut impl Parameters, max_norm: f64) {
    let total: f64 = grads
        .tensors()
        .iter()
        .flat_map(|t| t.data.iter())
        .map(|g| g * g)
        .sum::<f64>()
        .sqrt();
    if total > max_norm {
        let s = max_norm / total;
        for (_, t) in grads.tensors_mut() {
            t.iter_mut().for_each(|g| *g *= s);
        }
    }
}

/// Trains `model` with Adam, evaluating `dev_metric` (higher is better)
/// after every epoch. Stops after `patience` epochs without improvement or
/// at `max_epochs`, and returns the best snapshot.
pub fn run_epochs<M, O>(
    config: &TrainConfig,
    mut model: M,
    objective: &mut O,
    mut dev_metric: impl FnMut(&M) -> Result<f64>,
    mut on_epoch: impl FnMut(&EpochLog),
) -> Result<TrainOutcome<M>>
where
    M: Parameters + Clone,
    O: Objective<M>,
{
    config.validate()?;
    let mut rng = Rng::new(config.seed).fork(1);
    let mut adam = Adam::new(&model, AdamConfig::new(config.lr));
    let mut grads = model.zeroed();

    let mut best: Option<(M, usize, f64)> = None;
    let mut history = Vec::new();
    let mut stale = 0;
    for epoch in 1..=config.max_epochs {
        let n_batches = objective.begin_epoch(epoch, &mut rng)?;
        let mut total = 0.0;
        for b in 0..n_batches {
            grads.zero();
            let loss = objective.batch(b, &model, &mut grads, &mut rng)?;
            if !loss.is_finite() {
                return Err(Error::numeric(format!(
                    "non-finite loss at epoch {epoch}, batch {b}"
                )));
            }
            if let Some(c) = config.grad_clip {
                clip(&mut grads, c);
            }
            adam.step(&mut model, &grads)
                .map_err(|e| Error::numeric(format!("epoch {epoch}, batch {b}: {e}")))?;
            total += loss;
        }
        let metric = dev_metric(&model)?;
        if !metric.is_finite() {
            return Err(Error::numeric(format!("non-finite dev metric at epoch {epoch}")));
        }
        let log = EpochLog {
            epoch,
            train_loss: total / n_batches.max(1) as f64,
            dev_metric: metric,
        };
        on_epoch(&log);
        history.push(log);

        if best.as_ref().is_none_or(|(_, _, m)| metric > *m) {
            best = Some((model.clone(), epoch, metric));
            stale = 0;
        } else {
            stale += 1;
            if stale >= config.patience {
                break;
            }
        }
    }
    let (best, best_epoch, best_metric) = best.expect("at least one epoch");
    Ok(TrainOutcome {
        best,
        best_epoch,
        best_metric,
        history,
    })
}
