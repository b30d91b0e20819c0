use serde::{Deserialize, Serialize};

use super::NeuronParams;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum LayerKind {
    /// Weights are `[outputs][inputs]`.
    Dense { inputs: usize, outputs: usize },
    /// Weights are `[out_channels][in_channels][kernel][kernel]`; input and
    /// output maps are channel-major.
    Conv2d {
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
        in_height: usize,
        in_width: usize,
    },
}

impl LayerKind {
    pub fn conv(
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
        in_height: usize,
        in_width: usize,
    ) -> Self {
        LayerKind::Conv2d {
            in_channels,
            out_channels,
            kernel,
            stride,
            padding,
            in_height,
            in_width,
        }
    }

    pub fn conv_output_dims(&self) -> Option<(usize, usize)> {
        match *self {
            LayerKind::Dense { .. } => None,
            LayerKind::Conv2d {
                kernel,
                stride,
                padding,
                in_height,
                in_width,
                ..
            } => {
                let span = |n: usize| {
                    (n + 2 * padding)
                        .checked_sub(kernel)
                        .filter(|_| stride > 0)
                        .map(|d| d / stride + 1)
                };
                Some((span(in_height)?, span(in_width)?))
            }
        }
    }

    pub fn input_len(&self) -> usize {
        match *self {
            LayerKind::Dense { inputs, .. } => inputs,
            LayerKind::Conv2d {
                in_channels,
                in_height,
                in_width,
                ..
            } => in_channels * in_height * in_width,
        }
    }

    pub fn output_len(&self) -> usize {
        match *self {
            LayerKind::Dense { outputs, .. } => outputs,
            LayerKind::Conv2d { out_channels, .. } => {
                let (h, w) = self.conv_output_dims().unwrap_or((0, 0));
                out_channels * h * w
            }
        }
    }

    pub fn weight_len(&self) -> usize {
        match *self {
            LayerKind::Dense { inputs, outputs } => inputs * outputs,
            LayerKind::Conv2d {
                in_channels,
                out_channels,
                kernel,
                ..
            } => out_channels * in_channels * kernel * kernel,
        }
    }

    pub fn fan_in(&self) -> usize {
        match *self {
            LayerKind::Dense { inputs, .. } => inputs.max(1),
            LayerKind::Conv2d {
                in_channels,
                kernel,
                ..
            } => (in_channels * kernel * kernel).max(1),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub kind: LayerKind,
    pub weights: Vec<f64>,
    pub neuron: NeuronParams,
}

impl Layer {
    pub fn input_len(&self) -> usize {
        self.kind.input_len()
    }

    pub fn output_len(&self) -> usize {
        self.kind.output_len()
    }

    pub(crate) fn validate(&self) -> Result<()> {
        self.neuron.validate()?;
        if let LayerKind::Conv2d { stride, kernel, .. } = self.kind {
            if stride == 0 || kernel == 0 || self.kind.conv_output_dims().is_none() {
                return Err(Error::ShapeMismatch(format!(
                    "convolution {:?} has no valid output geometry",
                    self.kind
                )));
            }
        }
        if self.output_len() == 0 {
            return Err(Error::ShapeMismatch("layer has no outputs".into()));
        }
        if self.weights.len() != self.kind.weight_len() {
            return Err(Error::ShapeMismatch(format!(
                "layer carries {} weights, expected {}",
                self.weights.len(),
                self.kind.weight_len()
            )));
        }
        if self.weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::InvalidParameter("non-finite weight".into()));
        }
        Ok(())
    }

    /// Synaptic current `W x` for one time bin. Zero inputs are skipped.
    pub(crate) fn current(&self, input: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        match self.kind {
            LayerKind::Dense { inputs, .. } => {
                let nz: Vec<(usize, f64)> = input
                    .iter()
                    .enumerate()
                    .filter(|(_, &v)| v != 0.0)
                    .map(|(j, &v)| (j, v))
                    .collect();
                if nz.is_empty() {
                    return;
                }
                for (o, row) in out.iter_mut().zip(self.weights.chunks_exact(inputs)) {
                    *o = nz.iter().map(|&(j, v)| row[j] * v).sum();
                }
            }
            LayerKind::Conv2d { .. } => {
                self.conv_visit(|w_idx, in_idx, out_idx| {
                    let v = input[in_idx];
                    if v != 0.0 {
                        out[out_idx] += self.weights[w_idx] * v;
                    }
                });
            }
        }
    }

    /// Given `dL/dcurrent`, accumulates `dL/dW` and `dL/dinput` for one bin.
    pub(crate) fn backprop(
        &self,
        input: &[f64],
        grad_current: &[f64],
        grad_weights: Option<&mut [f64]>,
        grad_input: Option<&mut [f64]>,
    ) {
        match self.kind {
            LayerKind::Dense { inputs, .. } => {
                let active: Vec<usize> = (0..grad_current.len())
                    .filter(|&i| grad_current[i] != 0.0)
                    .collect();
                if let Some(gw) = grad_weights {
                    let nz: Vec<(usize, f64)> = input
                        .iter()
                        .enumerate()
                        .filter(|(_, &v)| v != 0.0)
                        .map(|(j, &v)| (j, v))
                        .collect();
                    for &i in &active {
                        let g = grad_current[i];
                        let row = &mut gw[i * inputs..(i + 1) * inputs];
                        for &(j, v) in &nz {
                            row[j] += g * v;
                        }
                    }
                }
                if let Some(gi) = grad_input {
                    for &i in &active {
                        let g = grad_current[i];
                        let row = &self.weights[i * inputs..(i + 1) * inputs];
                        for (d, &w) in gi.iter_mut().zip(row) {
                            *d += g * w;
                        }
                    }
                }
            }
            LayerKind::Conv2d { .. } => {
                if let Some(gw) = grad_weights {
                    self.conv_visit(|w_idx, in_idx, out_idx| {
                        let v = input[in_idx];
                        if v != 0.0 {
                            gw[w_idx] += grad_current[out_idx] * v;
                        }
                    });
                }
                if let Some(gi) = grad_input {
                    self.conv_visit(|w_idx, in_idx, out_idx| {
                        gi[in_idx] += self.weights[w_idx] * grad_current[out_idx];
                    });
                }
            }
        }
    }

    /// Calls `f(weight, input, output)` for every connection of a
    /// convolution.
    fn conv_visit(&self, mut f: impl FnMut(usize, usize, usize)) {
        let LayerKind::Conv2d {
            in_channels,
            out_channels,
            kernel,
            stride,
            padding,
            in_height,
            in_width,
        } = self.kind
        else {
            unreachable!("conv_visit on a dense layer")
        };
        let (oh, ow) = self.kind.conv_output_dims().unwrap_or((0, 0));
        for co in 0..out_channels {
            for ci in 0..in_channels {
                for ky in 0..kernel {
                    for kx in 0..kernel {
                        let w_idx = ((co * in_channels + ci) * kernel + ky) * kernel + kx;
                        for oy in 0..oh {
                            let iy = (oy * stride + ky) as isize - padding as isize;
                            if iy < 0 || iy >= in_height as isize {
                                continue;
                            }
                            for ox in 0..ow {
                                let ix = (ox * stride + kx) as isize - padding as isize;
                                if ix < 0 || ix >= in_width as isize {
                                    continue;
                                }
                                let in_idx =
                                    (ci * in_height + iy as usize) * in_width + ix as usize;
                                f(w_idx, in_idx, (co * oh + oy) * ow + ox);
                            }
                        }
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn layer(kind: LayerKind, weights: Vec<f64>) -> Layer {
        Layer {
            kind,
            weights,
            neuron: NeuronParams::default(),
        }
    }

    #[test]
    fn dense_current() {
        let l = layer(
            LayerKind::Dense {
                inputs: 3,
                outputs: 2,
            },
            vec![1.0, 2.0, 3.0, -1.0, 0.5, 0.0],
        );
        let mut out = vec![0.0; 2];
        l.current(&[1.0, 0.0, 2.0], &mut out);
        assert_eq!(out, vec![7.0, -1.0]);
    }

    #[test]
    fn conv_current_matches_direct_sum() {
        // 1 -> 1 channel, 3x3 kernel, stride 2, padding 1, on a 4x4 map.
        let kind = LayerKind::conv(1, 1, 3, 2, 1, 4, 4);
        assert_eq!(kind.conv_output_dims(), Some((2, 2)));
        let w: Vec<f64> = (0..9).map(f64::from).collect();
        let l = layer(kind, w.clone());
        let input: Vec<f64> = (0..16).map(|v| f64::from(v) * 0.5).collect();
        let mut out = vec![0.0; 4];
        l.current(&input, &mut out);
        for oy in 0..2 {
            for ox in 0..2 {
                let mut acc = 0.0;
                for ky in 0..3 {
                    for kx in 0..3 {
                        let iy = (oy * 2 + ky) as i32 - 1;
                        let ix = (ox * 2 + kx) as i32 - 1;
                        if (0..4).contains(&iy) && (0..4).contains(&ix) {
                            acc += w[ky * 3 + kx] * input[(iy * 4 + ix) as usize];
                        }
                    }
                }
                assert_eq!(out[oy * 2 + ox], acc);
            }
        }
    }

    #[test]
    fn dense_backprop_is_transpose() {
        let l = layer(
            LayerKind::Dense {
                inputs: 2,
                outputs: 2,
            },
            vec![1.0, 2.0, 3.0, 4.0],
        );
        let mut gw = vec![0.0; 4];
        let mut gi = vec![0.0; 2];
        l.backprop(&[1.0, -1.0], &[0.5, 2.0], Some(&mut gw), Some(&mut gi));
        assert_eq!(gi, vec![0.5 + 6.0, 1.0 + 8.0]);
        assert_eq!(gw, vec![0.5, -0.5, 2.0, -2.0]);
    }
}
