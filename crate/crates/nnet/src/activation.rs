use crate::error::{shape_err, Result};
use crate::layer::{missing_forward, Layer, Mode};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ActivationKind {
    LeakyRelu { slope: f64 },
    Sigmoid,
}

pub fn leaky_relu(x: f64, slope: f64) -> f64 {
    if x >= 0.0 {
        x
    } else {
        slope * x
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[derive(Clone)]
pub struct Activation {
    kind: ActivationKind,
    // leaky-relu keeps its input, sigmoid its output
    cache: Option<Tensor>,
}

impl Activation {
    pub fn new(kind: ActivationKind) -> Self {
        Self { kind, cache: None }
    }
}

impl Layer for Activation {
    fn kind(&self) -> &'static str {
        match self.kind {
            ActivationKind::LeakyRelu { .. } => "leaky_relu",
            ActivationKind::Sigmoid => "sigmoid",
        }
    }

    fn forward(&mut self, input: &Tensor, _mode: Mode) -> Result<Tensor> {
        let mut out = input.clone();
        out.clear_grad();
        match self.kind {
            ActivationKind::LeakyRelu { slope } => {
                out.data_mut().iter_mut().for_each(|v| *v = leaky_relu(*v, slope));
                self.cache = Some(input.clone());
            }
            ActivationKind::Sigmoid => {
                out.data_mut().iter_mut().for_each(|v| *v = sigmoid(*v));
                self.cache = Some(out.clone());
            }
        }
        Ok(out)
    }

    fn backward(&mut self, grad_output: &Tensor) -> Result<Tensor> {
        let cached = self.cache.as_ref().ok_or_else(|| missing_forward(self.kind()))?;
        if cached.shape() != grad_output.shape() {
            return shape_err(format!("{} grad {:?}", self.kind(), grad_output.shape()));
        }
        let mut g = grad_output.clone();
        match self.kind {
            ActivationKind::LeakyRelu { slope } => {
                for (gv, x) in g.data_mut().iter_mut().zip(cached.data()) {
                    if *x < 0.0 {
                        *gv *= slope;
                    }
                }
            }
            ActivationKind::Sigmoid => {
                for (gv, y) in g.data_mut().iter_mut().zip(cached.data()) {
                    *gv *= y * (1.0 - y);
                }
            }
        }
        Ok(g)
    }

    fn box_clone(&self) -> Box<dyn Layer> {
        Box::new(self.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn leaky_relu_scales_negatives() {
        assert_eq!(leaky_relu(-2.0, 0.2), -0.4);
        assert_eq!(leaky_relu(3.0, 0.2), 3.0);
    }

    #[test]
    fn sigmoid_is_bounded_and_symmetric() {
        assert_eq!(sigmoid(0.0), 0.5);
        for x in [-30.0, -3.0, 0.5, 12.0] {
            let s = sigmoid(x);
            assert!(s > 0.0 && s < 1.0);
            assert!((s + sigmoid(-x) - 1.0).abs() < 1e-15);
        }
    }
}
