use rand_chacha::ChaCha8Rng;

use crate::error::{shape_err, Result};
use crate::layer::{glorot_uniform, missing_forward, Layer, Mode};
use crate::linalg::gemm;
use crate::tensor::Tensor;

/// Fully connected layer, `y = x W^T + b` with weight `[outputs, inputs]`.
/// Inputs of any rank are flattened per batch element.
#[derive(Clone)]
pub struct Dense {
    pub weight: Tensor,
    pub bias: Tensor,
    inputs: usize,
    outputs: usize,
    cache: Option<Tensor>,
}

impl Dense {
    pub fn new(inputs: usize, outputs: usize, rng: &mut ChaCha8Rng) -> Self {
        let w = glorot_uniform(inputs, outputs, inputs * outputs, rng);
        Self {
            weight: Tensor::from_vec(&[outputs, inputs], w).expect("consistent extents"),
            bias: Tensor::zeros(&[outputs]),
            inputs,
            outputs,
            cache: None,
        }
    }
}

impl Layer for Dense {
    fn kind(&self) -> &'static str {
        "dense"
    }

    fn forward(&mut self, input: &Tensor, _mode: Mode) -> Result<Tensor> {
        if input.rank() < 2 || input.per_item() != self.inputs {
            return shape_err(format!(
                "dense expects [N, {}], got {:?}",
                self.inputs,
                input.shape()
            ));
        }
        let n = input.batch();
        let mut out = Vec::with_capacity(n * self.outputs);
        for _ in 0..n {
            out.extend_from_slice(self.bias.data());
        }
        gemm(n, self.inputs, self.outputs, input.data(), false, self.weight.data(), true, 1.0, &mut out);
        self.cache = Some(input.clone());
        Tensor::from_vec(&[n, self.outputs], out)
    }

    fn backward(&mut self, grad_output: &Tensor) -> Result<Tensor> {
        let x = self.cache.as_ref().ok_or_else(|| missing_forward("dense"))?;
        let n = x.batch();
        if grad_output.shape() != [n, self.outputs] {
            return shape_err(format!("dense grad {:?}", grad_output.shape()));
        }
        let g = grad_output.data();
        gemm(self.outputs, n, self.inputs, g, true, x.data(), false, 1.0, self.weight.grad_mut());
        let gb = self.bias.grad_mut();
        for row in g.chunks(self.outputs) {
            gb.iter_mut().zip(row).for_each(|(b, v)| *b += v);
        }
        let mut gx = vec![0.0; n * self.inputs];
        gemm(n, self.outputs, self.inputs, g, false, self.weight.data(), false, 0.0, &mut gx);
        Tensor::from_vec(x.shape(), gx)
    }

    fn params(&self) -> Vec<(&'static str, &Tensor)> {
        vec![("weight", &self.weight), ("bias", &self.bias)]
    }

    fn params_mut(&mut self) -> Vec<(&'static str, &mut Tensor)> {
        vec![("weight", &mut self.weight), ("bias", &mut self.bias)]
    }

    fn box_clone(&self) -> Box<dyn Layer> {
        Box::new(self.clone())
    }
}
