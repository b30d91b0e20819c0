use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::Network;
use crate::attack::Perturbation;
use crate::dataset::Sample;
use crate::filter::{filter_frames, FilterParams};
use crate::{Error, Result};

/// Classification results over a set of samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub accuracy: f64,
    pub correct: usize,
    pub total: usize,
    /// `confusion[true][predicted]`.
    pub confusion: Vec<Vec<u64>>,
    /// `spike_histogram[true][output class]`: output spikes summed over the
    /// samples of each true class.
    pub spike_histogram: Vec<Vec<u64>>,
    pub predictions: Vec<u32>,
}

/// Classifies every sample, optionally after adding a perturbation and then
/// running the noise filter on the (perturbed) frames.
pub fn evaluate(
    net: &Network,
    samples: &[Sample],
    filter: Option<FilterParams>,
    perturbations: Option<&[Perturbation]>,
) -> Result<Evaluation> {
    if let Some(p) = perturbations {
        if p.len() != samples.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} perturbations for {} samples",
                p.len(),
                samples.len()
            )));
        }
    }
    let k = net.num_classes();
    let outputs: Vec<(u32, Vec<u64>)> = samples
        .par_iter()
        .enumerate()
        .map(|(i, s)| {
            let perturbed;
            let mut input = &s.frames;
            if let Some(p) = perturbations {
                perturbed = p[i].apply(&s.frames)?;
                input = &perturbed;
            }
            let pass = match filter {
                Some(fp) => net.forward(&filter_frames(input, fp))?,
                None => net.forward(input)?,
            };
            Ok((pass.predicted_class(), pass.spike_counts()))
        })
        .collect::<Result<_>>()?;

    let mut confusion = vec![vec![0u64; k]; k];
    let mut spike_histogram = vec![vec![0u64; k]; k];
    let mut correct = 0;
    for (s, (pred, counts)) in samples.iter().zip(&outputs) {
        let t = s.label as usize;
        if t >= k {
            return Err(Error::InvalidParameter(format!(
                "label {t} outside {k} classes"
            )));
        }
        confusion[t][*pred as usize] += 1;
        for (h, c) in spike_histogram[t].iter_mut().zip(counts) {
            *h += c;
        }
        correct += usize::from(*pred == s.label);
    }
    let total = samples.len();
    Ok(Evaluation {
        accuracy: if total == 0 {
            0.0
        } else {
            correct as f64 / total as f64
        },
        correct,
        total,
        confusion,
        spike_histogram,
        predictions: outputs.into_iter().map(|(p, _)| p).collect(),
    })
}
