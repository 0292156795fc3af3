//! The detector network: base stack, anchor convolutions and prediction heads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::anchors::{anchor_grid, decode_anchor, AnchorGeometry, PredictionInstance, RawPrediction};
use super::config::{Activation, LayerKind, NetworkConfig};
use crate::error::{Error, Result};
use crate::seed::derive_seed;
use crate::tensor::{
    conv1d, conv1d_backward_accumulate, maxpool1d_backward, maxpool1d_with_indices, relu_backward, xavier_uniform,
    Padding, Parameter, Tensor,
};

#[derive(Debug, Clone, Copy)]
struct Conv {
    /// Index of the kernel parameter; the bias follows it.
    param: usize,
    stride: usize,
    relu: bool,
}

#[derive(Debug, Clone, Copy)]
enum BaseOp {
    Conv(Conv),
    Pool { window: usize, stride: usize },
}

enum Step {
    Conv { input: Tensor, output: Tensor },
    Pool { input_len: usize, indices: Vec<usize> },
}

/// Intermediate activations kept for the backward pass.
pub struct ForwardTrace {
    base: Vec<Step>,
    base_output: Tensor,
    anchor_outputs: Vec<Tensor>,
}

/// Per-anchor-layer prediction maps, each reshaped to `(M_f·D_f) × (K'+3)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SsadOutput {
    maps: Vec<Tensor>,
}

impl SsadOutput {
    pub fn maps(&self) -> &[Tensor] {
        &self.maps
    }

    pub fn num_anchors(&self) -> usize {
        self.maps.iter().map(|m| m.rows()).sum()
    }

    /// Raw prediction rows for every anchor, layer by layer.
    pub fn rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.maps.iter().flat_map(|m| (0..m.rows()).map(move |r| m.row(r)))
    }

    /// Stacks all layers into one `N × (K'+3)` matrix.
    pub fn to_flat(&self) -> Tensor {
        let width = self.maps[0].cols();
        let data: Vec<f64> = self.maps.iter().flat_map(|m| m.data().iter().copied()).collect();
        Tensor::matrix(data.len() / width, width, data).expect("non-empty prediction maps")
    }

    /// Inverse of [`SsadOutput::to_flat`] given per-layer anchor counts.
    pub fn from_flat(flat: &Tensor, counts: &[usize]) -> Result<Self> {
        let width = flat.cols();
        if counts.iter().sum::<usize>() != flat.rows() {
            return Err(Error::usage("anchor counts do not match the flat prediction matrix"));
        }
        let mut offset = 0;
        let mut maps = Vec::with_capacity(counts.len());
        for &n in counts {
            maps.push(Tensor::matrix(n, width, flat.data()[offset * width..(offset + n) * width].to_vec())?);
            offset += n;
        }
        Ok(Self { maps })
    }
}

#[derive(Debug, Clone)]
pub struct Network {
    config: NetworkConfig,
    params: Vec<Parameter>,
    base: Vec<BaseOp>,
    anchor_convs: Vec<Conv>,
    heads: Vec<Conv>,
    map_lengths: Vec<usize>,
    anchors: Vec<AnchorGeometry>,
}

impl Network {
    /// Builds the network with Xavier-initialized kernels and zero biases.
    pub fn build(config: NetworkConfig, seed: u64) -> Result<Self> {
        let mut net = Self::with_zero_parameters(config)?;
        for (i, p) in net.params.iter_mut().enumerate() {
            if p.value().shape().len() == 3 {
                *p.value_mut() = xavier_uniform(p.value().shape(), derive_seed(seed, i as u64))?;
            }
        }
        Ok(net)
    }

    /// Same layout as [`Network::build`] with every parameter set to zero.
    pub fn with_zero_parameters(config: NetworkConfig) -> Result<Self> {
        config.validate()?;
        let (_, map_lengths) = config.map_lengths()?;
        let mut params = Vec::new();
        let mut add_conv = |name: String, kernel: usize, c_in: usize, c_out: usize, stride: usize, relu: bool| {
            let param = params.len();
            params.push(Parameter::new(format!("{name}.kernel"), Tensor::zeros(&[kernel, c_in, c_out])));
            params.push(Parameter::new(format!("{name}.bias"), Tensor::zeros(&[c_out])));
            Conv { param, stride, relu }
        };

        let mut channels = config.input_dim;
        let mut base = Vec::new();
        for (i, spec) in config.base_layers().iter().enumerate() {
            match spec.kind {
                LayerKind::Conv => {
                    let relu = spec.activation == Activation::Relu;
                    base.push(BaseOp::Conv(add_conv(
                        format!("base.{i}"),
                        spec.kernel,
                        channels,
                        spec.filters,
                        spec.stride,
                        relu,
                    )));
                    channels = spec.filters;
                }
                LayerKind::MaxPool => base.push(BaseOp::Pool {
                    window: spec.kernel,
                    stride: spec.stride,
                }),
            }
        }
        let mut anchor_convs = Vec::new();
        let mut heads = Vec::new();
        let mut anchor_in = channels;
        for (i, ratios) in config.ratios.iter().enumerate() {
            anchor_convs.push(add_conv(
                format!("anchor.{i}"),
                config.anchor_kernel,
                anchor_in,
                config.anchor_filters,
                2,
                true,
            ));
            anchor_in = config.anchor_filters;
            heads.push(add_conv(
                format!("head.{i}"),
                config.prediction_kernel,
                config.anchor_filters,
                ratios.len() * config.prediction_width(),
                1,
                false,
            ));
        }
        let anchors = map_lengths
            .iter()
            .zip(&config.ratios)
            .enumerate()
            .flat_map(|(layer, (&m, ratios))| anchor_grid(layer, m, ratios))
            .collect();
        Ok(Self {
            config,
            params,
            base,
            anchor_convs,
            heads,
            map_lengths,
            anchors,
        })
    }

    pub fn config(&self) -> &NetworkConfig {
        &self.config
    }

    pub fn parameters(&self) -> &[Parameter] {
        &self.params
    }

    pub fn parameters_mut(&mut self) -> &mut [Parameter] {
        &mut self.params
    }

    pub fn num_parameters(&self) -> usize {
        self.params.iter().map(|p| p.value().len()).sum()
    }

    pub fn map_lengths(&self) -> &[usize] {
        &self.map_lengths
    }

    /// Anchors in the same order as [`SsadOutput::rows`].
    pub fn anchors(&self) -> &[AnchorGeometry] {
        &self.anchors
    }

    pub fn anchor_counts(&self) -> Vec<usize> {
        self.map_lengths
            .iter()
            .zip(&self.config.ratios)
            .map(|(m, r)| m * r.len())
            .collect()
    }

    pub fn zero_grad(&mut self) {
        self.params.iter_mut().for_each(Parameter::zero_grad);
    }

    /// Sets every bias to a seeded uniform value in `[-amplitude, amplitude)`,
    /// moving zero-input positions off the ReLU kink before gradient checks.
    pub fn jitter_biases(&mut self, amplitude: f64, seed: u64) {
        for (i, p) in self.params.iter_mut().enumerate().filter(|(_, p)| p.name().ends_with(".bias")) {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, i as u64));
            p.value_mut()
                .data_mut()
                .iter_mut()
                .for_each(|v| *v = rng.gen_range(-amplitude..amplitude));
        }
    }

    fn conv_forward(&self, conv: &Conv, x: &Tensor) -> Result<Tensor> {
        let mut y = conv1d(
            x,
            self.params[conv.param].value(),
            self.params[conv.param + 1].value(),
            conv.stride,
            Padding::Same,
        )?;
        if conv.relu {
            y.data_mut().iter_mut().for_each(|v| *v = v.max(0.0));
        }
        Ok(y)
    }

    fn check_input(&self, input: &Tensor) -> Result<()> {
        let expected = [self.config.window_len, self.config.input_dim];
        if input.shape() != expected {
            return Err(Error::usage(format!(
                "network expects input {expected:?}, got {:?}",
                input.shape()
            )));
        }
        input.ensure_finite("network input")
    }

    pub fn forward(&self, input: &Tensor) -> Result<SsadOutput> {
        Ok(self.forward_traced(input)?.0)
    }

    pub fn forward_traced(&self, input: &Tensor) -> Result<(SsadOutput, ForwardTrace)> {
        self.check_input(input)?;
        let mut x = input.clone();
        let mut steps = Vec::with_capacity(self.base.len());
        for op in &self.base {
            match op {
                BaseOp::Conv(c) => {
                    let y = self.conv_forward(c, &x)?;
                    steps.push(Step::Conv {
                        input: std::mem::replace(&mut x, y.clone()),
                        output: y,
                    });
                }
                BaseOp::Pool { window, stride } => {
                    let (y, indices) = maxpool1d_with_indices(&x, *window, *stride)?;
                    steps.push(Step::Pool {
                        input_len: x.rows(),
                        indices,
                    });
                    x = y;
                }
            }
        }
        let base_output = x;
        let mut anchor_outputs: Vec<Tensor> = Vec::with_capacity(self.anchor_convs.len());
        let mut maps = Vec::with_capacity(self.heads.len());
        for (i, (conv, head)) in self.anchor_convs.iter().zip(&self.heads).enumerate() {
            let src = if i == 0 { &base_output } else { &anchor_outputs[i - 1] };
            let a = self.conv_forward(conv, src)?;
            let p = self.conv_forward(head, &a)?;
            let rows = p.rows() * self.config.ratios[i].len();
            maps.push(p.reshape(vec![rows, self.config.prediction_width()])?);
            anchor_outputs.push(a);
        }
        let output = SsadOutput { maps };
        for m in &output.maps {
            m.ensure_finite("prediction map")?;
        }
        Ok((
            output,
            ForwardTrace {
                base: steps,
                base_output,
                anchor_outputs,
            },
        ))
    }

    fn conv_backward(&mut self, conv: &Conv, input: &Tensor, grad: &Tensor, want_input: bool) -> Result<Option<Tensor>> {
        let (head, tail) = self.params.split_at_mut(conv.param + 1);
        let kernel = &mut head[conv.param];
        let bias = &mut tail[0];
        let (kernel_value, kernel_grad) = kernel.value_and_grad_mut();
        conv1d_backward_accumulate(
            input,
            kernel_value,
            conv.stride,
            Padding::Same,
            grad,
            kernel_grad,
            bias.grad_mut(),
            want_input,
        )
    }

    /// Accumulates parameter gradients given the loss gradient with respect
    /// to each prediction map (same shapes as [`SsadOutput::maps`]).
    pub fn backward(&mut self, trace: &ForwardTrace, grad_maps: &[Tensor]) -> Result<()> {
        if grad_maps.len() != self.heads.len() {
            return Err(Error::usage("one gradient map per anchor layer is required"));
        }
        let mut carry: Option<Tensor> = None;
        for i in (0..self.heads.len()).rev() {
            let head = self.heads[i];
            let conv = self.anchor_convs[i];
            let cells = self.map_lengths[i];
            let g_head = grad_maps[i].clone().reshape(vec![cells, grad_maps[i].len() / cells])?;
            let mut g = self
                .conv_backward(&head, &trace.anchor_outputs[i], &g_head, true)?
                .expect("input gradient requested");
            if let Some(c) = carry.take() {
                g.data_mut().iter_mut().zip(c.data()).for_each(|(a, b)| *a += b);
            }
            relu_backward(&trace.anchor_outputs[i], &mut g);
            let input = if i == 0 {
                &trace.base_output
            } else {
                &trace.anchor_outputs[i - 1]
            };
            carry = self.conv_backward(&conv, input, &g, true)?;
        }
        let mut g = carry.expect("at least one anchor layer");
        let base = self.base.clone();
        for (idx, (op, step)) in base.iter().zip(&trace.base).enumerate().rev() {
            match (op, step) {
                (BaseOp::Conv(c), Step::Conv { input, output }) => {
                    if c.relu {
                        relu_backward(output, &mut g);
                    }
                    match self.conv_backward(c, input, &g, idx > 0)? {
                        Some(next) => g = next,
                        None => break,
                    }
                }
                (BaseOp::Pool { .. }, Step::Pool { input_len, indices }) => {
                    g = maxpool1d_backward(*input_len, &g, indices)?;
                }
                _ => return Err(Error::usage("forward trace does not belong to this network")),
            }
        }
        Ok(())
    }

    /// Decodes every anchor of a forward pass into a window-normalized instance.
    pub fn decode(&self, output: &SsadOutput) -> Vec<PredictionInstance> {
        self.anchors
            .iter()
            .zip(output.rows())
            .map(|(a, row)| {
                decode_anchor(
                    a,
                    &RawPrediction::from_row(row),
                    self.config.alpha_center,
                    self.config.alpha_width,
                )
            })
            .collect()
    }
}
