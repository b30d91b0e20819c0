//! Desk-scale spiking network: leaky integrate-and-fire layers simulated over
//! the time bins of a frame tensor, surrogate-gradient backpropagation through
//! time, SGD training and evaluation.

mod checkpoint;
mod eval;
mod layer;
mod sim;
mod train;

pub use checkpoint::{
    load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, CHECKPOINT_VERSION,
};
pub use eval::{evaluate, Evaluation};
pub use layer::{Layer, LayerKind};
pub use sim::{backward, cross_entropy, softmax, Activation, ForwardPass, Gradients};
pub use train::{train, EpochStats, TrainConfig, TrainHistory};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::events::FrameTensor;
use crate::{seed, Error, Result};

/// Membrane threshold and per-bin leak of a LIF population. Spiking units
/// are reset by subtracting the threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NeuronParams {
    pub threshold: f64,
    pub leak: f64,
}

impl Default for NeuronParams {
    fn default() -> Self {
        Self {
            threshold: 1.0,
            leak: 0.9,
        }
    }
}

impl NeuronParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.threshold > 0.0 && self.threshold.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "threshold must be positive, got {}",
                self.threshold
            )));
        }
        if !(self.leak > 0.0 && self.leak <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "leak must lie in (0, 1], got {}",
                self.leak
            )));
        }
        Ok(())
    }
}

/// Fast-sigmoid surrogate: the spike derivative is replaced by
/// `1 / (1 + slope * |u - threshold|)^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurrogateConfig {
    pub slope: f64,
}

impl Default for SurrogateConfig {
    fn default() -> Self {
        Self { slope: 10.0 }
    }
}

impl SurrogateConfig {
    pub fn validate(&self) -> Result<()> {
        if self.slope > 0.0 && self.slope.is_finite() {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!(
                "surrogate slope must be positive, got {}",
                self.slope
            )))
        }
    }

    #[inline]
    pub fn derivative(&self, x: f64) -> f64 {
        let d = 1.0 + self.slope * x.abs();
        1.0 / (d * d)
    }

    /// Antiderivative of [`derivative`](Self::derivative), shifted so it is
    /// zero at minus infinity.
    #[inline]
    pub fn soft_spike(&self, x: f64) -> f64 {
        x / (1.0 + self.slope * x.abs()) + 1.0 / self.slope
    }
}

/// Shape of the network input: `[bins][2][height][width]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputGeometry {
    pub bins: usize,
    pub height: usize,
    pub width: usize,
}

impl InputGeometry {
    pub fn per_bin(&self) -> usize {
        2 * self.height * self.width
    }

    pub fn of(frames: &FrameTensor) -> Self {
        Self {
            bins: frames.num_bins(),
            height: frames.height(),
            width: frames.width(),
        }
    }
}

/// Architecture presets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Architecture {
    /// Fully connected layers with the given hidden widths.
    Mlp { hidden: Vec<usize> },
    /// Two stride-2 3x3 convolutions followed by two dense layers.
    Conv {
        channels: (usize, usize),
        hidden: usize,
    },
}

impl Architecture {
    pub fn default_mlp() -> Self {
        Architecture::Mlp { hidden: vec![128] }
    }

    pub fn default_conv() -> Self {
        Architecture::Conv {
            channels: (8, 16),
            hidden: 64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    input: InputGeometry,
    layers: Vec<Layer>,
    num_classes: usize,
}

impl Network {
    pub fn new(input: InputGeometry, layers: Vec<Layer>, num_classes: usize) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidParameter("network has no layers".into()));
        }
        let mut width = input.per_bin();
        for (i, l) in layers.iter().enumerate() {
            l.validate()?;
            if l.input_len() != width {
                return Err(Error::ShapeMismatch(format!(
                    "layer {i} expects {} inputs but receives {width}",
                    l.input_len()
                )));
            }
            width = l.output_len();
        }
        if width != num_classes {
            return Err(Error::ShapeMismatch(format!(
                "final layer has {width} units for {num_classes} classes"
            )));
        }
        Ok(Self {
            input,
            layers,
            num_classes,
        })
    }

    /// Builds a network with weights drawn uniformly from
    /// `[-a, a]`, `a = init_gain * sqrt(3 / fan_in)`.
    pub fn build(
        arch: &Architecture,
        input: InputGeometry,
        num_classes: usize,
        neuron: NeuronParams,
        init_gain: f64,
        seed_value: u64,
    ) -> Result<Self> {
        neuron.validate()?;
        let mut kinds = Vec::new();
        match arch {
            Architecture::Mlp { hidden } => {
                let mut width = input.per_bin();
                for &h in hidden {
                    kinds.push(LayerKind::Dense {
                        inputs: width,
                        outputs: h,
                    });
                    width = h;
                }
                kinds.push(LayerKind::Dense {
                    inputs: width,
                    outputs: num_classes,
                });
            }
            Architecture::Conv {
                channels: (c1, c2),
                hidden,
            } => {
                let conv1 = LayerKind::conv(2, *c1, 3, 2, 1, input.height, input.width);
                let (h1, w1) = conv1.conv_output_dims().unwrap_or((0, 0));
                let conv2 = LayerKind::conv(*c1, *c2, 3, 2, 1, h1, w1);
                let flat = conv2.output_len();
                kinds.push(conv1);
                kinds.push(conv2);
                kinds.push(LayerKind::Dense {
                    inputs: flat,
                    outputs: *hidden,
                });
                kinds.push(LayerKind::Dense {
                    inputs: *hidden,
                    outputs: num_classes,
                });
            }
        }
        let mut rng = seed::rng(seed::derive(seed_value, "network-init"));
        let layers = kinds
            .into_iter()
            .map(|kind| {
                let a = init_gain * (3.0 / kind.fan_in() as f64).sqrt();
                let weights = (0..kind.weight_len())
                    .map(|_| rng.random_range(-a..=a))
                    .collect();
                Layer {
                    kind,
                    weights,
                    neuron,
                }
            })
            .collect();
        Self::new(input, layers, num_classes)
    }

    pub fn input(&self) -> InputGeometry {
        self.input
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn check_input(&self, frames: &FrameTensor) -> Result<()> {
        let g = InputGeometry::of(frames);
        if g != self.input {
            return Err(Error::ShapeMismatch(format!(
                "input is {}x2x{}x{}, network expects {}x2x{}x{}",
                g.bins, g.height, g.width, self.input.bins, self.input.height, self.input.width
            )));
        }
        Ok(())
    }

    /// Simulates the network with hard threshold spikes.
    pub fn forward(&self, frames: &FrameTensor) -> Result<ForwardPass> {
        sim::forward(self, frames, Activation::Spike)
    }

    /// Simulates the smoothed variant, where each spike is replaced by the
    /// surrogate's antiderivative. Its exact gradient is what [`backward`]
    /// computes for the spiking network.
    pub fn forward_smooth(
        &self,
        frames: &FrameTensor,
        surrogate: SurrogateConfig,
    ) -> Result<ForwardPass> {
        sim::forward(self, frames, Activation::Smooth(surrogate))
    }

    pub fn predict(&self, frames: &FrameTensor) -> Result<u32> {
        Ok(self.forward(frames)?.predicted_class())
    }

    pub(crate) fn validate(&self) -> Result<()> {
        Self::new(self.input, self.layers.clone(), self.num_classes).map(|_| ())
    }
}
