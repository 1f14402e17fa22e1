use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{shape_err, NnError, Result};
use crate::layer::{missing_forward, Layer, Mode};
use crate::tensor::Tensor;

pub const BN_EPS: f64 = 1e-5;
pub const BN_MOMENTUM: f64 = 0.1;

/// Per-channel batch normalisation over `[N, C, ...]`. Train mode normalises
/// with the batch statistics and updates the running averages; eval mode uses
/// the running averages.
#[derive(Clone)]
pub struct BatchNorm {
    pub gamma: Tensor,
    pub beta: Tensor,
    pub running_mean: Tensor,
    pub running_var: Tensor,
    channels: usize,
    cache: Option<BnCache>,
}

#[derive(Clone)]
struct BnCache {
    shape: Vec<usize>,
    normalized: Vec<f64>,
    inv_std: Vec<f64>,
    mode: Mode,
}

impl BatchNorm {
    pub fn new(channels: usize) -> Self {
        Self {
            gamma: Tensor::filled(&[channels], 1.0),
            beta: Tensor::zeros(&[channels]),
            running_mean: Tensor::zeros(&[channels]),
            running_var: Tensor::filled(&[channels], 1.0),
            channels,
            cache: None,
        }
    }

    fn layout(&self, shape: &[usize]) -> Result<(usize, usize)> {
        if shape.len() < 2 || shape[1] != self.channels {
            return shape_err(format!(
                "batchnorm expects [N, {}, ...], got {shape:?}",
                self.channels
            ));
        }
        Ok((shape[0], shape[2..].iter().product()))
    }
}

impl Layer for BatchNorm {
    fn kind(&self) -> &'static str {
        "batchnorm"
    }

    fn forward(&mut self, input: &Tensor, mode: Mode) -> Result<Tensor> {
        let (n, plane) = self.layout(input.shape())?;
        let c = self.channels;
        let x = input.data();
        let count = (n * plane) as f64;
        let mut mean = vec![0.0; c];
        let mut var = vec![0.0; c];
        match mode {
            Mode::Train => {
                for b in 0..n {
                    for ch in 0..c {
                        let s = &x[(b * c + ch) * plane..(b * c + ch + 1) * plane];
                        mean[ch] += s.iter().sum::<f64>();
                    }
                }
                mean.iter_mut().for_each(|m| *m /= count);
                for b in 0..n {
                    for ch in 0..c {
                        let s = &x[(b * c + ch) * plane..(b * c + ch + 1) * plane];
                        var[ch] += s.iter().map(|v| (v - mean[ch]).powi(2)).sum::<f64>();
                    }
                }
                var.iter_mut().for_each(|v| *v /= count);
                let rm = self.running_mean.data_mut();
                for ch in 0..c {
                    rm[ch] = (1.0 - BN_MOMENTUM) * rm[ch] + BN_MOMENTUM * mean[ch];
                }
                let rv = self.running_var.data_mut();
                for ch in 0..c {
                    rv[ch] = (1.0 - BN_MOMENTUM) * rv[ch] + BN_MOMENTUM * var[ch];
                }
            }
            Mode::Eval => {
                mean.copy_from_slice(self.running_mean.data());
                var.copy_from_slice(self.running_var.data());
            }
        }
        let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + BN_EPS).sqrt()).collect();
        let mut normalized = vec![0.0; x.len()];
        let mut out = vec![0.0; x.len()];
        let (g, bt) = (self.gamma.data(), self.beta.data());
        for b in 0..n {
            for ch in 0..c {
                let r = (b * c + ch) * plane..(b * c + ch + 1) * plane;
                for i in r {
                    let xn = (x[i] - mean[ch]) * inv_std[ch];
                    normalized[i] = xn;
                    out[i] = g[ch] * xn + bt[ch];
                }
            }
        }
        self.cache = Some(BnCache {
            shape: input.shape().to_vec(),
            normalized,
            inv_std,
            mode,
        });
        Tensor::from_vec(input.shape(), out)
    }

    fn backward(&mut self, grad_output: &Tensor) -> Result<Tensor> {
        let cache = self.cache.as_ref().ok_or_else(|| missing_forward("batchnorm"))?;
        if grad_output.shape() != cache.shape.as_slice() {
            return shape_err(format!("batchnorm grad {:?}", grad_output.shape()));
        }
        let (n, plane) = self.layout(&cache.shape)?;
        let c = self.channels;
        let gy = grad_output.data();
        let xn = &cache.normalized;
        let mut sum_g = vec![0.0; c];
        let mut sum_gx = vec![0.0; c];
        for b in 0..n {
            for ch in 0..c {
                for i in (b * c + ch) * plane..(b * c + ch + 1) * plane {
                    sum_g[ch] += gy[i];
                    sum_gx[ch] += gy[i] * xn[i];
                }
            }
        }
        {
            let gg = self.gamma.grad_mut();
            for ch in 0..c {
                gg[ch] += sum_gx[ch];
            }
        }
        {
            let gb = self.beta.grad_mut();
            for ch in 0..c {
                gb[ch] += sum_g[ch];
            }
        }
        let gamma = self.gamma.data();
        let count = (n * plane) as f64;
        let mut gx = vec![0.0; gy.len()];
        for b in 0..n {
            for ch in 0..c {
                let k = gamma[ch] * cache.inv_std[ch];
                for i in (b * c + ch) * plane..(b * c + ch + 1) * plane {
                    gx[i] = match cache.mode {
                        Mode::Train => {
                            k * (gy[i] - sum_g[ch] / count - xn[i] * sum_gx[ch] / count)
                        }
                        Mode::Eval => k * gy[i],
                    };
                }
            }
        }
        Tensor::from_vec(&cache.shape, gx)
    }

    fn params(&self) -> Vec<(&'static str, &Tensor)> {
        vec![("gamma", &self.gamma), ("beta", &self.beta)]
    }

    fn params_mut(&mut self) -> Vec<(&'static str, &mut Tensor)> {
        vec![("gamma", &mut self.gamma), ("beta", &mut self.beta)]
    }

    fn buffers(&self) -> Vec<(&'static str, &Tensor)> {
        vec![
            ("running_mean", &self.running_mean),
            ("running_var", &self.running_var),
        ]
    }

    fn buffers_mut(&mut self) -> Vec<(&'static str, &mut Tensor)> {
        vec![
            ("running_mean", &mut self.running_mean),
            ("running_var", &mut self.running_var),
        ]
    }

    fn box_clone(&self) -> Box<dyn Layer> {
        Box::new(self.clone())
    }
}

/// Inverted dropout: train mode zeroes entries with probability `p` and
/// rescales survivors by `1/(1-p)`; eval mode is the identity.
#[derive(Clone)]
pub struct Dropout {
    p: f64,
    rng: ChaCha8Rng,
    cache: Option<(Mode, Vec<f64>)>,
}

impl Dropout {
    pub fn new(p: f64, seed: u64) -> Self {
        Self {
            p,
            rng: ChaCha8Rng::seed_from_u64(seed),
            cache: None,
        }
    }

    pub fn probability(&self) -> f64 {
        self.p
    }
}

impl Layer for Dropout {
    fn kind(&self) -> &'static str {
        "dropout"
    }

    fn forward(&mut self, input: &Tensor, mode: Mode) -> Result<Tensor> {
        let mut out = input.clone();
        out.clear_grad();
        match mode {
            Mode::Eval => {
                self.cache = Some((mode, Vec::new()));
            }
            Mode::Train => {
                let keep = 1.0 - self.p;
                let mask: Vec<f64> = (0..input.len())
                    .map(|_| if self.rng.gen::<f64>() < self.p { 0.0 } else { 1.0 / keep })
                    .collect();
                out.data_mut().iter_mut().zip(&mask).for_each(|(v, m)| *v *= m);
                self.cache = Some((mode, mask));
            }
        }
        Ok(out)
    }

    fn backward(&mut self, grad_output: &Tensor) -> Result<Tensor> {
        match self.cache.as_ref() {
            None => Err(missing_forward("dropout")),
            Some((Mode::Eval, _)) => Err(NnError::Contract(
                "dropout: backward through an eval-mode forward".into(),
            )),
            Some((Mode::Train, mask)) => {
                if mask.len() != grad_output.len() {
                    return shape_err(format!("dropout grad {:?}", grad_output.shape()));
                }
                let mut g = grad_output.clone();
                g.data_mut().iter_mut().zip(mask).for_each(|(v, m)| *v *= m);
                Ok(g)
            }
        }
    }

    fn box_clone(&self) -> Box<dyn Layer> {
        Box::new(self.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_batch_normalizes_to_zero() {
        let mut bn = BatchNorm::new(2);
        let x = Tensor::filled(&[4, 2, 3, 3], 7.5);
        let y = bn.forward(&x, Mode::Train).unwrap();
        assert!(y.data().iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn train_mode_standardizes_each_channel() {
        let mut bn = BatchNorm::new(2);
        let data: Vec<f64> = (0..2 * 2 * 5).map(|i| (i as f64).powf(1.3)).collect();
        let y = bn.forward(&Tensor::from_vec(&[2, 2, 5], data).unwrap(), Mode::Train).unwrap();
        for ch in 0..2 {
            let vals: Vec<f64> = (0..2)
                .flat_map(|b| y.data()[(b * 2 + ch) * 5..(b * 2 + ch + 1) * 5].to_vec())
                .collect();
            let m = vals.iter().sum::<f64>() / 10.0;
            let v = vals.iter().map(|x| (x - m).powi(2)).sum::<f64>() / 10.0;
            assert!(m.abs() < 1e-12);
            assert!((v - 1.0).abs() < 1e-4);
        }
    }

    #[test]
    fn eval_mode_uses_running_statistics() {
        let mut bn = BatchNorm::new(1);
        bn.running_mean.data_mut()[0] = 2.0;
        bn.running_var.data_mut()[0] = 4.0;
        let y = bn.forward(&Tensor::filled(&[1, 1, 1], 6.0), Mode::Eval).unwrap();
        assert!((y.data()[0] - 4.0 / (4.0 + BN_EPS).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn eval_dropout_is_identity_and_has_no_backward() {
        let mut d = Dropout::new(0.3, 9);
        let x = Tensor::from_vec(&[1, 4], vec![1.0, -2.0, 3.0, 4.0]).unwrap();
        assert_eq!(d.forward(&x, Mode::Eval).unwrap(), x);
        assert!(matches!(d.backward(&x), Err(NnError::Contract(_))));
    }

    #[test]
    fn train_dropout_preserves_mean() {
        let mut d = Dropout::new(0.3, 1);
        let x = Tensor::filled(&[1, 100_000], 1.0);
        let y = d.forward(&x, Mode::Train).unwrap();
        let mean = y.data().iter().sum::<f64>() / 100_000.0;
        assert!((mean - 1.0).abs() < 0.02);
        let dropped = y.data().iter().filter(|v| **v == 0.0).count() as f64 / 100_000.0;
        assert!((dropped - 0.3).abs() < 0.01);
    }
}
