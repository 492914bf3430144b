use super::{Scalar, Tensor};
use crate::error::{Error, Result};

/// Rectified convolution output together with its pre-activations.
#[derive(Debug, Clone)]
pub struct Conv2dOutput<T> {
    /// `n_f × H' × W'`, rectified.
    pub output: Tensor<T>,
    /// Same shape, before rectification.
    pub pre: Tensor<T>,
    pub stride: (usize, usize),
}

impl<T: Scalar> Conv2dOutput<T> {
    /// One bit per cell: whether the rectifier passed the value.
    pub fn active_mask(&self) -> impl Iterator<Item = bool> + '_ {
        self.pre.values().iter().map(|&v| v > T::zero())
    }
}

fn check_shapes<T: Scalar>(
    input: &Tensor<T>,
    kernels: &Tensor<T>,
    bias: &Tensor<T>,
    stride: (usize, usize),
) -> Result<(usize, usize, usize)> {
    if input.dims().len() != 2 {
        return Err(Error::Shape(format!("conv input must be H×W, got {:?}", input.dims())));
    }
    let &[n_f, kh, kw] = kernels.dims() else {
        return Err(Error::Shape(format!(
            "conv kernels must be n_f×kh×kw, got {:?}",
            kernels.dims()
        )));
    };
    if bias.dims() != [n_f] {
        return Err(Error::Shape(format!(
            "conv bias must have {n_f} entries, got {:?}",
            bias.dims()
        )));
    }
    if stride.0 == 0 || stride.1 == 0 {
        return Err(Error::Shape("conv stride must be at least 1".into()));
    }
    if kh == 0 || kw == 0 {
        return Err(Error::Shape("empty conv kernel".into()));
    }
    Ok((n_f, kh, kw))
}

/// Cross-correlation with zero "same" padding followed by `max(0, ·)`.
///
/// Output extents are `⌈H/s_q⌉ × ⌈W/s_d⌉`. Padding is placed after the input
/// on both axes, so output cell `(y, x)` reads input rows `y·s_q ..` and
/// columns `x·s_d ..`; with document stride `n` on a window-concatenated input
/// each kernel sees exactly one window.
pub fn conv2d<T: Scalar>(
    input: &Tensor<T>,
    kernels: &Tensor<T>,
    bias: &Tensor<T>,
    stride: (usize, usize),
) -> Result<Conv2dOutput<T>> {
    let (n_f, kh, kw) = check_shapes(input, kernels, bias, stride)?;
    let (h, w) = input.plane();
    let (oh, ow) = (h.div_ceil(stride.0), w.div_ceil(stride.1));
    let x = input.values();
    let k = kernels.values();
    let mut pre = Tensor::zeros(&[n_f, oh, ow]);
    let p = pre.values_mut();
    for f in 0..n_f {
        let kf = &k[f * kh * kw..(f + 1) * kh * kw];
        let b = bias.values()[f];
        for oy in 0..oh {
            for ox in 0..ow {
                let mut acc = b;
                let (y0, x0) = (oy * stride.0, ox * stride.1);
                for a in 0..kh.min(h.saturating_sub(y0)) {
                    let row = &x[(y0 + a) * w..(y0 + a + 1) * w];
                    let krow = &kf[a * kw..(a + 1) * kw];
                    for c in 0..kw.min(w.saturating_sub(x0)) {
                        acc += krow[c] * row[x0 + c];
                    }
                }
                p[(f * oh + oy) * ow + ox] = acc;
            }
        }
    }
    let mut output = pre.clone();
    for v in output.values_mut() {
        *v = v.max(T::zero());
    }
    Ok(Conv2dOutput {
        output,
        pre,
        stride,
    })
}

/// Accumulates gradients of [`conv2d`] given `d_out` (same shape as the output).
///
/// The rectifier's derivative at exactly zero is taken as zero.
pub fn conv2d_backward<T: Scalar>(
    input: &Tensor<T>,
    kernels: &Tensor<T>,
    fwd: &Conv2dOutput<T>,
    d_out: &Tensor<T>,
    grad_input: Option<&mut Tensor<T>>,
    grad_kernels: &mut Tensor<T>,
    grad_bias: &mut Tensor<T>,
) {
    let (n_f, kh, kw) = (kernels.dims()[0], kernels.dims()[1], kernels.dims()[2]);
    let (h, w) = input.plane();
    let (_, oh, ow) = (fwd.pre.dims()[0], fwd.pre.dims()[1], fwd.pre.dims()[2]);
    let stride = fwd.stride;
    let x = input.values();
    let k = kernels.values();
    let pre = fwd.pre.values();
    let d = d_out.values();
    let mut gi = grad_input.map(|g| g.values_mut());
    let gk = grad_kernels.values_mut();
    let gb = grad_bias.values_mut();
    for (f, bias_grad) in gb.iter_mut().enumerate().take(n_f) {
        for oy in 0..oh {
            for ox in 0..ow {
                let idx = (f * oh + oy) * ow + ox;
                if pre[idx] <= T::zero() {
                    continue;
                }
                let g = d[idx];
                if g == T::zero() {
                    continue;
                }
                *bias_grad += g;
                let (y0, x0) = (oy * stride.0, ox * stride.1);
                for a in 0..kh.min(h.saturating_sub(y0)) {
                    for c in 0..kw.min(w.saturating_sub(x0)) {
                        let xi = (y0 + a) * w + x0 + c;
                        let ki = (f * kh + a) * kw + c;
                        gk[ki] += g * x[xi];
                        if let Some(gi) = gi.as_deref_mut() {
                            gi[xi] += g * k[ki];
                        }
                    }
                }
            }
        }
    }
}
