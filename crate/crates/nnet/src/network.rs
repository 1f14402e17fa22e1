use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{shape_err, Result};
use crate::layer::{Layer, LayerSpec, Mode};
use crate::tensor::Tensor;

/// Feed-forward stack of layers, built from [`LayerSpec`]s.
#[derive(Clone)]
pub struct Sequential {
    specs: Vec<LayerSpec>,
    layers: Vec<Box<dyn Layer>>,
}

impl Sequential {
    pub fn build(specs: &[LayerSpec], seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = specs
            .iter()
            .map(|s| s.build(&mut rng))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            specs: specs.to_vec(),
            layers,
        })
    }

    pub fn specs(&self) -> &[LayerSpec] {
        &self.specs
    }

    pub fn layers(&self) -> &[Box<dyn Layer>] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Box<dyn Layer>] {
        &mut self.layers
    }

    pub fn forward(&mut self, input: &Tensor, mode: Mode) -> Result<Tensor> {
        let mut x = input.clone();
        x.clear_grad();
        for layer in self.layers.iter_mut() {
            x = layer.forward(&x, mode)?;
        }
        Ok(x)
    }

    pub fn backward(&mut self, grad_output: &Tensor) -> Result<Tensor> {
        let mut g = grad_output.clone();
        for layer in self.layers.iter_mut().rev() {
            g = layer.backward(&g)?;
        }
        Ok(g)
    }

    fn name(i: usize, layer: &dyn Layer, field: &str) -> String {
        format!("{i}.{}.{field}", layer.kind())
    }

    pub fn named_params(&self) -> Vec<(String, &Tensor)> {
        let mut out = Vec::new();
        for (i, l) in self.layers.iter().enumerate() {
            for (field, t) in l.params() {
                out.push((Self::name(i, l.as_ref(), field), t));
            }
        }
        out
    }

    pub fn named_buffers(&self) -> Vec<(String, &Tensor)> {
        let mut out = Vec::new();
        for (i, l) in self.layers.iter().enumerate() {
            for (field, t) in l.buffers() {
                out.push((Self::name(i, l.as_ref(), field), t));
            }
        }
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        self.layers
            .iter_mut()
            .flat_map(|l| l.params_mut().into_iter().map(|(_, t)| t))
            .collect()
    }

    pub fn buffers_mut(&mut self) -> Vec<&mut Tensor> {
        self.layers
            .iter_mut()
            .flat_map(|l| l.buffers_mut().into_iter().map(|(_, t)| t))
            .collect()
    }

    pub fn param_count(&self) -> usize {
        self.named_params().iter().map(|(_, t)| t.len()).sum()
    }

    pub fn zero_grad(&mut self) {
        self.params_mut().into_iter().for_each(|t| t.zero_grad());
    }

    /// Overwrite parameters and buffers from `(name, tensor)` pairs; every
    /// parameter and buffer of the network must be present with the right shape.
    pub fn load_named(&mut self, entries: &[(String, Tensor)]) -> Result<()> {
        let lookup = |name: &str| entries.iter().find(|(n, _)| n == name).map(|(_, t)| t);
        let fill = |name: String, slot: &mut Tensor| -> Result<()> {
            match lookup(&name) {
                Some(t) if t.shape() == slot.shape() => {
                    slot.data_mut().copy_from_slice(t.data());
                    slot.clear_grad();
                    Ok(())
                }
                Some(t) => shape_err(format!(
                    "{name}: stored shape {:?} != {:?}",
                    t.shape(),
                    slot.shape()
                )),
                None => shape_err(format!("missing tensor {name}")),
            }
        };
        for (i, l) in self.layers.iter_mut().enumerate() {
            let kind = l.kind();
            for (field, slot) in l.params_mut() {
                fill(format!("{i}.{kind}.{field}"), slot)?;
            }
            for (field, slot) in l.buffers_mut() {
                fill(format!("{i}.{kind}.{field}"), slot)?;
            }
        }
        Ok(())
    }
}
