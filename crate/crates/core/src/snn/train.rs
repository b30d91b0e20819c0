use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{backward, cross_entropy, evaluate, Network, SurrogateConfig};
use crate::dataset::Sample;
use crate::{seed, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub surrogate: SurrogateConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 10,
            batch_size: 4,
            learning_rate: 0.01,
            seed: 0,
            surrogate: SurrogateConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub loss: f64,
    pub train_accuracy: f64,
    pub test_accuracy: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochStats>,
}

/// Mini-batch SGD on the count-softmax cross-entropy.
///
/// Per-sample gradients inside a batch may be computed in parallel; they are
/// summed in sample order, so results only depend on the seed.
pub fn train(
    net: &Network,
    train_set: &[Sample],
    test_set: Option<&[Sample]>,
    cfg: &TrainConfig,
) -> Result<(Network, TrainHistory)> {
    if train_set.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if cfg.batch_size == 0 || !cfg.learning_rate.is_finite() || cfg.learning_rate <= 0.0 {
        return Err(Error::InvalidParameter(
            "batch size and learning rate must be positive".into(),
        ));
    }
    cfg.surrogate.validate()?;
    for s in train_set {
        if s.label as usize >= net.num_classes() {
            return Err(Error::InvalidParameter(format!(
                "label {} outside {} classes",
                s.label,
                net.num_classes()
            )));
        }
        net.check_input(&s.frames)?;
    }

    let mut net = net.clone();
    let mut history = TrainHistory::default();
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    for epoch in 0..cfg.epochs {
        let mut rng = seed::rng(seed::derive_indexed(cfg.seed, "train-epoch", epoch as u64));
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut correct = 0;
        for batch in order.chunks(cfg.batch_size) {
            let results: Vec<(f64, bool, Vec<Vec<f64>>)> = batch
                .par_iter()
                .map(|&i| {
                    let s = &train_set[i];
                    let pass = net.forward(&s.frames)?;
                    let (loss, grad) = cross_entropy(&pass, s.label as usize);
                    let g = backward(&net, &pass, &grad, cfg.surrogate, false, true);
                    Ok((loss, pass.predicted_class() == s.label, g.weights))
                })
                .collect::<Result<_>>()?;
            let scale = cfg.learning_rate / batch.len() as f64;
            for (loss, ok, grads) in &results {
                loss_sum += loss;
                correct += usize::from(*ok);
                for (layer, g) in net.layers_mut().iter_mut().zip(grads) {
                    for (w, d) in layer.weights.iter_mut().zip(g) {
                        *w -= scale * d;
                    }
                }
            }
        }
        let test_accuracy = match test_set {
            Some(t) if !t.is_empty() => Some(evaluate(&net, t, None, None)?.accuracy),
            _ => None,
        };
        history.epochs.push(EpochStats {
            epoch,
            loss: loss_sum / train_set.len() as f64,
            train_accuracy: correct as f64 / train_set.len() as f64,
            test_accuracy,
        });
    }
    Ok((net, history))
}
