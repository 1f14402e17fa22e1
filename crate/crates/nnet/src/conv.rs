use rand_chacha::ChaCha8Rng;

use crate::error::{shape_err, Result};
use crate::layer::{glorot_uniform, missing_forward, Layer, Mode};
use crate::linalg::gemm;
use crate::tensor::Tensor;

/// Geometry of a strided, zero-padded sliding window over one image plane.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Window {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub kernel: usize,
    pub stride: usize,
    pub padding: usize,
    pub out_height: usize,
    pub out_width: usize,
}

impl Window {
    pub fn new(
        channels: usize,
        height: usize,
        width: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
    ) -> Result<Self> {
        let ph = height + 2 * padding;
        let pw = width + 2 * padding;
        if ph < kernel || pw < kernel {
            return shape_err(format!(
                "kernel {kernel} larger than padded input {ph}x{pw}"
            ));
        }
        Ok(Self {
            channels,
            height,
            width,
            kernel,
            stride,
            padding,
            out_height: (ph - kernel) / stride + 1,
            out_width: (pw - kernel) / stride + 1,
        })
    }

    fn rows(&self) -> usize {
        self.channels * self.kernel * self.kernel
    }

    fn positions(&self) -> usize {
        self.out_height * self.out_width
    }

    /// Unfold one image (`channels x height x width`) into `cols`, a row-major
    /// `rows x ld` matrix, writing columns `offset..offset+positions`.
    fn im2col(&self, image: &[f64], cols: &mut [f64], ld: usize, offset: usize) {
        let (f, s) = (self.kernel, self.stride);
        let area = self.height * self.width;
        for c in 0..self.channels {
            let plane = &image[c * area..(c + 1) * area];
            for ky in 0..f {
                let (ylo, yhi) = valid_range(ky, self.out_height, self.height, s, self.padding);
                for kx in 0..f {
                    let (xlo, xhi) = valid_range(kx, self.out_width, self.width, s, self.padding);
                    let row = (c * f + ky) * f + kx;
                    let dst = &mut cols[row * ld + offset..row * ld + offset + self.positions()];
                    dst[..ylo * self.out_width].fill(0.0);
                    dst[yhi * self.out_width..].fill(0.0);
                    for oy in ylo..yhi {
                        let iy = oy * s + ky - self.padding;
                        let out_row = &mut dst[oy * self.out_width..(oy + 1) * self.out_width];
                        let src = &plane[iy * self.width..(iy + 1) * self.width];
                        out_row[..xlo].fill(0.0);
                        out_row[xhi..].fill(0.0);
                        let first = xlo * s + kx - self.padding;
                        if s == 1 {
                            out_row[xlo..xhi].copy_from_slice(&src[first..first + xhi - xlo]);
                        } else {
                            for (j, v) in out_row[xlo..xhi].iter_mut().enumerate() {
                                *v = src[first + j * s];
                            }
                        }
                    }
                }
            }
        }
    }

    /// Adjoint of [`Window::im2col`]: scatter-add columns back into an image.
    fn col2im(&self, cols: &[f64], ld: usize, offset: usize, image: &mut [f64]) {
        let (f, s) = (self.kernel, self.stride);
        let area = self.height * self.width;
        for c in 0..self.channels {
            let plane = &mut image[c * area..(c + 1) * area];
            for ky in 0..f {
                let (ylo, yhi) = valid_range(ky, self.out_height, self.height, s, self.padding);
                for kx in 0..f {
                    let (xlo, xhi) = valid_range(kx, self.out_width, self.width, s, self.padding);
                    let row = (c * f + ky) * f + kx;
                    let src = &cols[row * ld + offset..row * ld + offset + self.positions()];
                    for oy in ylo..yhi {
                        let iy = oy * s + ky - self.padding;
                        let dst = &mut plane[iy * self.width..(iy + 1) * self.width];
                        let srow = &src[oy * self.out_width + xlo..oy * self.out_width + xhi];
                        let first = xlo * s + kx - self.padding;
                        if s == 1 {
                            for (d, v) in dst[first..first + srow.len()].iter_mut().zip(srow) {
                                *d += v;
                            }
                        } else {
                            for (j, v) in srow.iter().enumerate() {
                                dst[first + j * s] += v;
                            }
                        }
                    }
                }
            }
        }
    }
}

/// Output positions `lo..hi` whose input index `o*stride + k - pad` lies in
/// `0..len`.
fn valid_range(k: usize, out_len: usize, len: usize, stride: usize, pad: usize) -> (usize, usize) {
    let lo = if pad > k { (pad - k).div_ceil(stride) } else { 0 };
    let hi = if len + pad > k {
        ((len - 1 + pad - k) / stride + 1).min(out_len)
    } else {
        0
    };
    (lo.min(hi), hi)
}

fn expect_nchw(input: &Tensor, channels: usize, kind: &str) -> Result<(usize, usize, usize)> {
    let s = input.shape();
    if s.len() != 4 || s[1] != channels {
        return shape_err(format!(
            "{kind} expects [N, {channels}, H, W], got {s:?}"
        ));
    }
    Ok((s[0], s[2], s[3]))
}

/// Gather `[N, C, P]` into a `[C, N*P]` matrix.
fn to_channel_major(data: &[f64], n: usize, c: usize, p: usize) -> Vec<f64> {
    let mut out = vec![0.0; n * c * p];
    for b in 0..n {
        for ch in 0..c {
            let src = &data[(b * c + ch) * p..(b * c + ch + 1) * p];
            out[ch * n * p + b * p..ch * n * p + (b + 1) * p].copy_from_slice(src);
        }
    }
    out
}

/// Scatter a `[C, N*P]` matrix back to `[N, C, P]`.
fn from_channel_major(mat: &[f64], n: usize, c: usize, p: usize) -> Vec<f64> {
    let mut out = vec![0.0; n * c * p];
    for b in 0..n {
        for ch in 0..c {
            out[(b * c + ch) * p..(b * c + ch + 1) * p]
                .copy_from_slice(&mat[ch * n * p + b * p..ch * n * p + (b + 1) * p]);
        }
    }
    out
}

/// 2-D cross-correlation. Weight layout `[out, in, F, F]`.
#[derive(Clone)]
pub struct Conv2d {
    pub weight: Tensor,
    pub bias: Tensor,
    in_channels: usize,
    out_channels: usize,
    kernel: usize,
    stride: usize,
    padding: usize,
    cache: Option<(Window, usize, Vec<f64>)>,
    scratch: Vec<f64>,
}

impl Conv2d {
    pub fn new(
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        let area = kernel * kernel;
        let w = glorot_uniform(
            in_channels * area,
            out_channels * area,
            out_channels * in_channels * area,
            rng,
        );
        Self {
            weight: Tensor::from_vec(&[out_channels, in_channels, kernel, kernel], w)
                .expect("consistent extents"),
            bias: Tensor::zeros(&[out_channels]),
            in_channels,
            out_channels,
            kernel,
            stride,
            padding,
            cache: None,
            scratch: Vec::new(),
        }
    }

    pub fn with_weights(weight: Tensor, bias: Tensor, stride: usize, padding: usize) -> Result<Self> {
        let s = weight.shape().to_vec();
        if s.len() != 4 || s[2] != s[3] || bias.shape() != [s[0]] {
            return shape_err(format!("conv weight {s:?} / bias {:?}", bias.shape()));
        }
        Ok(Self {
            in_channels: s[1],
            out_channels: s[0],
            kernel: s[2],
            weight,
            bias,
            stride,
            padding,
            cache: None,
            scratch: Vec::new(),
        })
    }
}

impl Layer for Conv2d {
    fn kind(&self) -> &'static str {
        "conv"
    }

    fn forward(&mut self, input: &Tensor, _mode: Mode) -> Result<Tensor> {
        let (n, h, w) = expect_nchw(input, self.in_channels, "conv")?;
        let win = Window::new(self.in_channels, h, w, self.kernel, self.stride, self.padding)?;
        let (rows, pos) = (win.rows(), win.positions());
        let ld = n * pos;
        // every entry is rewritten by im2col, so stale contents are harmless
        let mut cols = self.cache.take().map(|c| c.2).unwrap_or_default();
        cols.resize(rows * ld, 0.0);
        let per = self.in_channels * h * w;
        for b in 0..n {
            win.im2col(&input.data()[b * per..(b + 1) * per], &mut cols, ld, b * pos);
        }
        let mut out = vec![0.0; self.out_channels * ld];
        gemm(self.out_channels, rows, ld, self.weight.data(), false, &cols, false, 0.0, &mut out);
        for (o, row) in out.chunks_mut(ld).enumerate() {
            let b = self.bias.data()[o];
            row.iter_mut().for_each(|v| *v += b);
        }
        let data = from_channel_major(&out, n, self.out_channels, pos);
        self.cache = Some((win, n, cols));
        Tensor::from_vec(&[n, self.out_channels, win.out_height, win.out_width], data)
    }

    fn backward(&mut self, grad_output: &Tensor) -> Result<Tensor> {
        let (win, n, cols) = self.cache.as_ref().ok_or_else(|| missing_forward("conv"))?;
        let (rows, pos) = (win.rows(), win.positions());
        let want = [n.to_owned(), self.out_channels, win.out_height, win.out_width];
        if grad_output.shape() != want {
            return shape_err(format!("conv grad {:?} != {:?}", grad_output.shape(), want));
        }
        let ld = n * pos;
        let gy = to_channel_major(grad_output.data(), *n, self.out_channels, pos);
        gemm(self.out_channels, ld, rows, &gy, false, cols, true, 1.0, self.weight.grad_mut());
        let gb = self.bias.grad_mut();
        for (o, row) in gy.chunks(ld).enumerate() {
            gb[o] += row.iter().sum::<f64>();
        }
        let gcols = &mut self.scratch;
        gcols.resize(rows * ld, 0.0);
        gemm(rows, self.out_channels, ld, self.weight.data(), true, &gy, false, 0.0, gcols);
        let per = self.in_channels * win.height * win.width;
        let mut gx = vec![0.0; n * per];
        for b in 0..*n {
            win.col2im(gcols, ld, b * pos, &mut gx[b * per..(b + 1) * per]);
        }
        Tensor::from_vec(&[*n, self.in_channels, win.height, win.width], gx)
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

/// Transposed convolution (adjoint of [`Conv2d`] in its input).
/// Weight layout `[in, out, F, F]`; output extent `(H-1)*S - 2*P + F`.
#[derive(Clone)]
pub struct ConvTranspose2d {
    pub weight: Tensor,
    pub bias: Tensor,
    in_channels: usize,
    out_channels: usize,
    kernel: usize,
    stride: usize,
    padding: usize,
    cache: Option<(Window, usize, Vec<f64>)>,
    scratch: Vec<f64>,
}

impl ConvTranspose2d {
    pub fn new(
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        let area = kernel * kernel;
        let w = glorot_uniform(
            out_channels * area,
            in_channels * area,
            out_channels * in_channels * area,
            rng,
        );
        Self {
            weight: Tensor::from_vec(&[in_channels, out_channels, kernel, kernel], w)
                .expect("consistent extents"),
            bias: Tensor::zeros(&[out_channels]),
            in_channels,
            out_channels,
            kernel,
            stride,
            padding,
            cache: None,
            scratch: Vec::new(),
        }
    }

    fn output_window(&self, h: usize, w: usize) -> Result<Window> {
        let grow = |x: usize| ((x - 1) * self.stride + self.kernel).checked_sub(2 * self.padding);
        match (grow(h), grow(w)) {
            (Some(oh), Some(ow)) if oh > 0 && ow > 0 => {
                // window over the *output* plane whose sliding positions are the input pixels
                let win = Window::new(self.out_channels, oh, ow, self.kernel, self.stride, self.padding)?;
                debug_assert_eq!((win.out_height, win.out_width), (h, w));
                Ok(win)
            }
            _ => shape_err(format!("conv_transpose input {h}x{w} too small")),
        }
    }
}

impl Layer for ConvTranspose2d {
    fn kind(&self) -> &'static str {
        "conv_transpose"
    }

    fn forward(&mut self, input: &Tensor, _mode: Mode) -> Result<Tensor> {
        let (n, h, w) = expect_nchw(input, self.in_channels, "conv_transpose")?;
        if h == 0 || w == 0 {
            return shape_err("conv_transpose on empty plane");
        }
        let win = self.output_window(h, w)?;
        let pos = h * w;
        let ld = n * pos;
        let rows = win.rows();
        let x = to_channel_major(input.data(), n, self.in_channels, pos);
        let cols = &mut self.scratch;
        cols.resize(rows * ld, 0.0);
        gemm(rows, self.in_channels, ld, self.weight.data(), true, &x, false, 0.0, cols);
        let per = self.out_channels * win.height * win.width;
        let mut out = vec![0.0; n * per];
        for b in 0..n {
            let img = &mut out[b * per..(b + 1) * per];
            win.col2im(cols, ld, b * pos, img);
            for (c, plane) in img.chunks_mut(win.height * win.width).enumerate() {
                let bias = self.bias.data()[c];
                plane.iter_mut().for_each(|v| *v += bias);
            }
        }
        self.cache = Some((win, n, x));
        Tensor::from_vec(&[n, self.out_channels, win.height, win.width], out)
    }

    fn backward(&mut self, grad_output: &Tensor) -> Result<Tensor> {
        let (win, n, x) = self
            .cache
            .as_ref()
            .ok_or_else(|| missing_forward("conv_transpose"))?;
        let want = [n.to_owned(), self.out_channels, win.height, win.width];
        if grad_output.shape() != want {
            return shape_err(format!(
                "conv_transpose grad {:?} != {:?}",
                grad_output.shape(),
                want
            ));
        }
        let pos = win.positions();
        let ld = n * pos;
        let rows = win.rows();
        let per = self.out_channels * win.height * win.width;
        let gcols = &mut self.scratch;
        gcols.resize(rows * ld, 0.0);
        let gb = self.bias.grad_mut();
        for b in 0..*n {
            let img = &grad_output.data()[b * per..(b + 1) * per];
            win.im2col(img, gcols, ld, b * pos);
            for (c, plane) in img.chunks(win.height * win.width).enumerate() {
                gb[c] += plane.iter().sum::<f64>();
            }
        }
        gemm(self.in_channels, ld, rows, x, false, gcols, true, 1.0, self.weight.grad_mut());
        let mut gx = vec![0.0; self.in_channels * ld];
        gemm(self.in_channels, rows, ld, self.weight.data(), false, gcols, false, 0.0, &mut gx);
        let data = from_channel_major(&gx, *n, self.in_channels, pos);
        Tensor::from_vec(&[*n, self.in_channels, win.out_height, win.out_width], data)
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
