use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::activation::{Activation, ActivationKind};
use crate::conv::{Conv2d, ConvTranspose2d};
use crate::dense::Dense;
use crate::error::{NnError, Result};
use crate::norm::{BatchNorm, Dropout};
use crate::reshape::{Crop2d, Flatten, Reshape, ZeroPad2d};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// A differentiable network stage. `forward` caches whatever `backward` needs;
/// `backward` consumes the gradient of the loss with respect to the last
/// output, accumulates parameter gradients into the parameter tensors, and
/// returns the gradient with respect to the last input.
pub trait Layer: Send + Sync {
    fn kind(&self) -> &'static str;

    fn forward(&mut self, input: &Tensor, mode: Mode) -> Result<Tensor>;

    fn backward(&mut self, grad_output: &Tensor) -> Result<Tensor>;

    fn params(&self) -> Vec<(&'static str, &Tensor)> {
        Vec::new()
    }

    fn params_mut(&mut self) -> Vec<(&'static str, &mut Tensor)> {
        Vec::new()
    }

    /// Non-trainable state (running statistics).
    fn buffers(&self) -> Vec<(&'static str, &Tensor)> {
        Vec::new()
    }

    fn buffers_mut(&mut self) -> Vec<(&'static str, &mut Tensor)> {
        Vec::new()
    }

    fn box_clone(&self) -> Box<dyn Layer>;
}

impl Clone for Box<dyn Layer> {
    fn clone(&self) -> Self {
        self.box_clone()
    }
}

pub(crate) fn missing_forward(kind: &str) -> NnError {
    NnError::Contract(format!("{kind}: backward called before forward"))
}

/// Declarative description of one layer; `F` is the kernel extent and `S` the stride.
#[derive(Debug, Clone, PartialEq)]
pub enum LayerSpec {
    Conv {
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
    },
    ConvTranspose {
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
    },
    Dense {
        inputs: usize,
        outputs: usize,
    },
    BatchNorm {
        channels: usize,
    },
    Dropout {
        p: f64,
    },
    Activation(ActivationKind),
    ZeroPad {
        pad: usize,
    },
    Crop {
        top: usize,
        left: usize,
        height: usize,
        width: usize,
    },
    Reshape {
        shape: Vec<usize>,
    },
    Flatten,
}

impl LayerSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(NnError::Spec(m));
        match self {
            LayerSpec::Conv {
                in_channels,
                out_channels,
                kernel,
                stride,
                ..
            }
            | LayerSpec::ConvTranspose {
                in_channels,
                out_channels,
                kernel,
                stride,
                ..
            } => {
                if *kernel < 1 || *stride < 1 {
                    return bad(format!("kernel {kernel} and stride {stride} must be >= 1"));
                }
                if *in_channels == 0 || *out_channels == 0 {
                    return bad("channel counts must be positive".into());
                }
                Ok(())
            }
            LayerSpec::Dense { inputs, outputs } => {
                if *inputs == 0 || *outputs == 0 {
                    return bad("dense extents must be positive".into());
                }
                Ok(())
            }
            LayerSpec::BatchNorm { channels } => {
                if *channels == 0 {
                    return bad("batchnorm needs channels".into());
                }
                Ok(())
            }
            LayerSpec::Dropout { p } => {
                if !(0.0..1.0).contains(p) {
                    return bad(format!("dropout probability {p} not in [0,1)"));
                }
                Ok(())
            }
            LayerSpec::Activation(ActivationKind::LeakyRelu { slope }) => {
                if !(*slope > 0.0) {
                    return bad(format!("leaky-relu slope {slope} must be > 0"));
                }
                Ok(())
            }
            LayerSpec::Activation(_) => Ok(()),
            LayerSpec::Crop { height, width, .. } => {
                if *height == 0 || *width == 0 {
                    return bad("empty crop".into());
                }
                Ok(())
            }
            LayerSpec::Reshape { shape } => {
                if shape.is_empty() || shape.contains(&0) {
                    return bad(format!("bad reshape target {shape:?}"));
                }
                Ok(())
            }
            LayerSpec::ZeroPad { .. } | LayerSpec::Flatten => Ok(()),
        }
    }

    /// Instantiate with Glorot-uniform weights and zero biases.
    pub fn build(&self, rng: &mut ChaCha8Rng) -> Result<Box<dyn Layer>> {
        self.validate()?;
        Ok(match self {
            LayerSpec::Conv {
                in_channels,
                out_channels,
                kernel,
                stride,
                padding,
            } => Box::new(Conv2d::new(
                *in_channels,
                *out_channels,
                *kernel,
                *stride,
                *padding,
                rng,
            )),
            LayerSpec::ConvTranspose {
                in_channels,
                out_channels,
                kernel,
                stride,
                padding,
            } => Box::new(ConvTranspose2d::new(
                *in_channels,
                *out_channels,
                *kernel,
                *stride,
                *padding,
                rng,
            )),
            LayerSpec::Dense { inputs, outputs } => Box::new(Dense::new(*inputs, *outputs, rng)),
            LayerSpec::BatchNorm { channels } => Box::new(BatchNorm::new(*channels)),
            LayerSpec::Dropout { p } => Box::new(Dropout::new(*p, rng.gen())),
            LayerSpec::Activation(kind) => Box::new(Activation::new(*kind)),
            LayerSpec::ZeroPad { pad } => Box::new(ZeroPad2d::new(*pad)),
            LayerSpec::Crop {
                top,
                left,
                height,
                width,
            } => Box::new(Crop2d::new(*top, *left, *height, *width)),
            LayerSpec::Reshape { shape } => Box::new(Reshape::new(shape.clone())),
            LayerSpec::Flatten => Box::new(Flatten::default()),
        })
    }
}

pub(crate) fn glorot_uniform(fan_in: usize, fan_out: usize, len: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    (0..len).map(|_| rng.gen_range(-limit..limit)).collect()
}
