use super::{Network, SurrogateConfig};
use crate::events::FrameTensor;
use crate::Result;

/// How a unit turns its membrane potential into output.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Activation {
    /// Binary spike when the potential exceeds the threshold.
    Spike,
    /// The surrogate's antiderivative; a smooth stand-in for the spike.
    Smooth(SurrogateConfig),
}

#[derive(Debug, Clone)]
struct LayerTrace {
    /// Layer input per bin.
    inputs: Vec<Vec<f64>>,
    /// Membrane potential per bin, before reset.
    potentials: Vec<Vec<f64>>,
}

/// Result of simulating one input, with everything [`backward`] needs.
#[derive(Debug, Clone)]
pub struct ForwardPass {
    /// Total output activity per class, summed over bins.
    pub counts: Vec<f64>,
    /// Softmax of `counts`.
    pub probabilities: Vec<f64>,
    traces: Vec<LayerTrace>,
    /// Output spikes of the last layer per bin.
    output_spikes: Vec<Vec<f64>>,
}

impl ForwardPass {
    /// Spike counts as integers. Only meaningful for the spiking activation.
    pub fn spike_counts(&self) -> Vec<u64> {
        self.counts.iter().map(|&c| c.round() as u64).collect()
    }

    /// Index of the largest count; ties go to the lowest class index.
    pub fn predicted_class(&self) -> u32 {
        let mut best = 0;
        for (i, &c) in self.counts.iter().enumerate() {
            if c > self.counts[best] {
                best = i;
            }
        }
        best as u32
    }

    pub fn output_spikes(&self) -> &[Vec<f64>] {
        &self.output_spikes
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    /// `dL/dinput`, laid out like the input frame tensor.
    pub input: Option<Vec<f64>>,
    /// `dL/dW` per layer, or empty when not requested.
    pub weights: Vec<Vec<f64>>,
}

pub(super) fn forward(net: &Network, frames: &FrameTensor, act: Activation) -> Result<ForwardPass> {
    net.check_input(frames)?;
    let bins = frames.num_bins();
    let mut traces = Vec::with_capacity(net.layers.len());
    let mut layer_input: Vec<Vec<f64>> = (0..bins).map(|b| frames.bin(b).to_vec()).collect();

    for layer in &net.layers {
        let n = layer.output_len();
        let (theta, leak) = (layer.neuron.threshold, layer.neuron.leak);
        let mut membrane = vec![0.0; n];
        let mut current = vec![0.0; n];
        let mut potentials = Vec::with_capacity(bins);
        let mut outputs = Vec::with_capacity(bins);
        for input in &layer_input {
            layer.current(input, &mut current);
            let mut u = vec![0.0; n];
            let mut s = vec![0.0; n];
            for k in 0..n {
                u[k] = leak * membrane[k] + current[k];
                s[k] = match act {
                    Activation::Spike => f64::from(u8::from(u[k] > theta)),
                    Activation::Smooth(sg) => sg.soft_spike(u[k] - theta),
                };
                membrane[k] = u[k] - theta * s[k];
            }
            potentials.push(u);
            outputs.push(s);
        }
        traces.push(LayerTrace {
            inputs: std::mem::replace(&mut layer_input, outputs),
            potentials,
        });
    }

    let mut counts = vec![0.0; net.num_classes];
    for s in &layer_input {
        for (c, v) in counts.iter_mut().zip(s) {
            *c += v;
        }
    }
    let probabilities = softmax(&counts);
    Ok(ForwardPass {
        counts,
        probabilities,
        traces,
        output_spikes: layer_input,
    })
}

/// Backpropagation through time from `dL/dcounts`.
///
/// The spike nonlinearity's derivative is replaced by the surrogate, both on
/// the output path and on the reset path (`v = u - threshold * s`). For a
/// pass produced by [`Network::forward_smooth`] this is the exact gradient.
pub fn backward(
    net: &Network,
    pass: &ForwardPass,
    grad_counts: &[f64],
    surrogate: SurrogateConfig,
    want_input: bool,
    want_weights: bool,
) -> Gradients {
    let bins = pass.output_spikes.len();
    let nl = net.layers.len();
    let mut weight_grads: Vec<Vec<f64>> = if want_weights {
        net.layers
            .iter()
            .map(|l| vec![0.0; l.weights.len()])
            .collect()
    } else {
        Vec::new()
    };
    // dL/d(output of the current layer) per bin.
    let mut grad_out: Vec<Vec<f64>> = vec![grad_counts.to_vec(); bins];

    for li in (0..nl).rev() {
        let layer = &net.layers[li];
        let trace = &pass.traces[li];
        let n = layer.output_len();
        let (theta, leak) = (layer.neuron.threshold, layer.neuron.leak);
        let need_input_grad = li > 0 || want_input;
        let mut grad_in: Vec<Vec<f64>> = if need_input_grad {
            vec![vec![0.0; layer.input_len()]; bins]
        } else {
            Vec::new()
        };
        let mut grad_membrane = vec![0.0; n];
        let mut grad_current = vec![0.0; n];
        for b in (0..bins).rev() {
            let u = &trace.potentials[b];
            let gs = &grad_out[b];
            for k in 0..n {
                let fp = surrogate.derivative(u[k] - theta);
                let gu = gs[k] * fp + grad_membrane[k] * (1.0 - theta * fp);
                grad_current[k] = gu;
                grad_membrane[k] = leak * gu;
            }
            layer.backprop(
                &trace.inputs[b],
                &grad_current,
                weight_grads.get_mut(li).map(|g| g.as_mut_slice()),
                grad_in.get_mut(b).map(|g| g.as_mut_slice()),
            );
        }
        grad_out = grad_in;
    }

    Gradients {
        input: want_input.then(|| grad_out.concat()),
        weights: weight_grads,
    }
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|&z| (z - m).exp()).collect();
    let total: f64 = e.iter().sum();
    e.into_iter().map(|v| v / total).collect()
}

/// Cross-entropy of the count softmax against `target`, with its gradient
/// with respect to the counts.
pub fn cross_entropy(pass: &ForwardPass, target: usize) -> (f64, Vec<f64>) {
    let p = &pass.probabilities;
    let loss = -p[target].max(f64::MIN_POSITIVE).ln();
    let mut grad = p.clone();
    grad[target] -= 1.0;
    (loss, grad)
}

#[cfg(test)]
mod tests {
    use super::super::{InputGeometry, Layer, LayerKind, NeuronParams};
    use super::*;

    fn single_dense(w: f64) -> Network {
        let g = InputGeometry {
            bins: 4,
            height: 1,
            width: 1,
        };
        let l = Layer {
            kind: LayerKind::Dense {
                inputs: 2,
                outputs: 2,
            },
            weights: vec![w, 0.0, 0.0, w],
            neuron: NeuronParams::default(),
        };
        Network::new(g, vec![l], 2).unwrap()
    }

    #[test]
    fn zero_input_gives_no_spikes_and_uniform_probabilities() {
        let net = single_dense(5.0);
        let pass = net.forward(&FrameTensor::zeros(4, 1, 1, 10)).unwrap();
        assert_eq!(pass.spike_counts(), vec![0, 0]);
        assert_eq!(pass.probabilities, vec![0.5, 0.5]);
    }

    #[test]
    fn one_strong_input_spike_gives_one_output_spike() {
        // w = 2 * threshold: u jumps to 2, fires, keeps a residue of 1 that
        // then leaks below threshold.
        let net = single_dense(2.0);
        let mut f = FrameTensor::zeros(4, 1, 1, 10);
        f.set(1, 1, 0, 0, 1.0);
        let pass = net.forward(&f).unwrap();
        assert_eq!(pass.spike_counts(), vec![0, 1]);
        assert_eq!(pass.output_spikes()[1], vec![0.0, 1.0]);
    }

    #[test]
    fn prediction_ties_go_low() {
        let net = single_dense(0.0);
        assert_eq!(net.predict(&FrameTensor::zeros(4, 1, 1, 10)).unwrap(), 0);
    }

    #[test]
    fn softmax_is_stable() {
        let p = softmax(&[1000.0, 1000.0, -1000.0]);
        assert!((p[0] - 0.5).abs() < 1e-12 && p[2] == 0.0);
    }

    #[test]
    fn zero_input_gradient_is_finite() {
        let net = single_dense(1.0);
        let f = FrameTensor::zeros(4, 1, 1, 10);
        let pass = net.forward(&f).unwrap();
        let (_, g) = cross_entropy(&pass, 0);
        let grads = backward(&net, &pass, &g, SurrogateConfig::default(), true, true);
        assert!(grads.input.unwrap().iter().all(|v| v.is_finite()));
        assert!(grads.weights.iter().flatten().all(|v| v.is_finite()));
    }

    #[test]
    fn shape_mismatch() {
        let net = single_dense(1.0);
        assert!(net.forward(&FrameTensor::zeros(3, 1, 1, 10)).is_err());
    }
}
