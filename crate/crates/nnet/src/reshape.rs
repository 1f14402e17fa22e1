use crate::error::{shape_err, Result};
use crate::layer::{missing_forward, Layer, Mode};
use crate::tensor::Tensor;

/// Symmetric zero padding of the two trailing axes.
#[derive(Clone)]
pub struct ZeroPad2d {
    pad: usize,
    input_shape: Option<Vec<usize>>,
}

impl ZeroPad2d {
    pub fn new(pad: usize) -> Self {
        Self { pad, input_shape: None }
    }
}

fn planes(shape: &[usize]) -> Result<(usize, usize, usize)> {
    if shape.len() != 4 {
        return shape_err(format!("expected [N, C, H, W], got {shape:?}"));
    }
    Ok((shape[0] * shape[1], shape[2], shape[3]))
}

impl Layer for ZeroPad2d {
    fn kind(&self) -> &'static str {
        "zero_pad"
    }

    fn forward(&mut self, input: &Tensor, _mode: Mode) -> Result<Tensor> {
        let (m, h, w) = planes(input.shape())?;
        let p = self.pad;
        let (ph, pw) = (h + 2 * p, w + 2 * p);
        let mut out = vec![0.0; m * ph * pw];
        for k in 0..m {
            for y in 0..h {
                let src = &input.data()[(k * h + y) * w..(k * h + y + 1) * w];
                let start = (k * ph + y + p) * pw + p;
                out[start..start + w].copy_from_slice(src);
            }
        }
        let s = input.shape();
        self.input_shape = Some(s.to_vec());
        Tensor::from_vec(&[s[0], s[1], ph, pw], out)
    }

    fn backward(&mut self, grad_output: &Tensor) -> Result<Tensor> {
        let s = self.input_shape.clone().ok_or_else(|| missing_forward("zero_pad"))?;
        let p = self.pad;
        crop_planes(grad_output, p, p, s[2], s[3])
    }

    fn box_clone(&self) -> Box<dyn Layer> {
        Box::new(self.clone())
    }
}

fn crop_planes(input: &Tensor, top: usize, left: usize, height: usize, width: usize) -> Result<Tensor> {
    let (m, h, w) = planes(input.shape())?;
    if top + height > h || left + width > w {
        return shape_err(format!(
            "crop {height}x{width} at ({top},{left}) exceeds {h}x{w}"
        ));
    }
    let mut out = Vec::with_capacity(m * height * width);
    for k in 0..m {
        for y in top..top + height {
            let row = (k * h + y) * w;
            out.extend_from_slice(&input.data()[row + left..row + left + width]);
        }
    }
    let s = input.shape();
    Tensor::from_vec(&[s[0], s[1], height, width], out)
}

/// Keep the `height x width` window starting at (`top`, `left`).
#[derive(Clone)]
pub struct Crop2d {
    top: usize,
    left: usize,
    height: usize,
    width: usize,
    input_shape: Option<Vec<usize>>,
}

impl Crop2d {
    pub fn new(top: usize, left: usize, height: usize, width: usize) -> Self {
        Self {
            top,
            left,
            height,
            width,
            input_shape: None,
        }
    }
}

impl Layer for Crop2d {
    fn kind(&self) -> &'static str {
        "crop"
    }

    fn forward(&mut self, input: &Tensor, _mode: Mode) -> Result<Tensor> {
        let out = crop_planes(input, self.top, self.left, self.height, self.width)?;
        self.input_shape = Some(input.shape().to_vec());
        Ok(out)
    }

    fn backward(&mut self, grad_output: &Tensor) -> Result<Tensor> {
        let s = self.input_shape.clone().ok_or_else(|| missing_forward("crop"))?;
        let (m, h, w) = planes(&s)?;
        if grad_output.shape() != [s[0], s[1], self.height, self.width] {
            return shape_err(format!("crop grad {:?}", grad_output.shape()));
        }
        let mut g = vec![0.0; m * h * w];
        for k in 0..m {
            for y in 0..self.height {
                let src = &grad_output.data()[(k * self.height + y) * self.width..(k * self.height + y + 1) * self.width];
                let start = (k * h + y + self.top) * w + self.left;
                g[start..start + self.width].copy_from_slice(src);
            }
        }
        Tensor::from_vec(&s, g)
    }

    fn box_clone(&self) -> Box<dyn Layer> {
        Box::new(self.clone())
    }
}

/// Reshape each batch element to `shape` (batch axis kept).
#[derive(Clone)]
pub struct Reshape {
    shape: Vec<usize>,
    input_shape: Option<Vec<usize>>,
}

impl Reshape {
    pub fn new(shape: Vec<usize>) -> Self {
        Self { shape, input_shape: None }
    }
}

impl Layer for Reshape {
    fn kind(&self) -> &'static str {
        "reshape"
    }

    fn forward(&mut self, input: &Tensor, _mode: Mode) -> Result<Tensor> {
        let mut target = vec![input.batch()];
        target.extend_from_slice(&self.shape);
        self.input_shape = Some(input.shape().to_vec());
        let mut out = input.clone();
        out.clear_grad();
        out.reshape(&target)
    }

    fn backward(&mut self, grad_output: &Tensor) -> Result<Tensor> {
        let s = self.input_shape.clone().ok_or_else(|| missing_forward("reshape"))?;
        grad_output.clone().reshape(&s)
    }

    fn box_clone(&self) -> Box<dyn Layer> {
        Box::new(self.clone())
    }
}

#[derive(Clone, Default)]
pub struct Flatten {
    input_shape: Option<Vec<usize>>,
}

impl Layer for Flatten {
    fn kind(&self) -> &'static str {
        "flatten"
    }

    fn forward(&mut self, input: &Tensor, _mode: Mode) -> Result<Tensor> {
        self.input_shape = Some(input.shape().to_vec());
        let mut out = input.clone();
        out.clear_grad();
        out.reshape(&[input.batch(), input.per_item()])
    }

    fn backward(&mut self, grad_output: &Tensor) -> Result<Tensor> {
        let s = self.input_shape.clone().ok_or_else(|| missing_forward("flatten"))?;
        grad_output.clone().reshape(&s)
    }

    fn box_clone(&self) -> Box<dyn Layer> {
        Box::new(self.clone())
    }
}
