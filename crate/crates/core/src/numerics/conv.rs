//! 2-D convolution (cross-correlation, zero padding) via im2col + GEMM.

use super::scalar::{gemm, MatRef};
use super::{Scalar, Tensor};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ConvGrads<T = f32> {
    pub input: Tensor<T>,
    pub kernel: Tensor<T>,
    pub bias: Vec<T>,
}

#[derive(Clone, Copy)]
struct Geometry {
    c: usize,
    h: usize,
    w: usize,
    kh: usize,
    kw: usize,
    stride: usize,
    pad: usize,
    ho: usize,
    wo: usize,
}

impl Geometry {
    fn is_pointwise(&self) -> bool {
        self.kh == 1 && self.kw == 1 && self.stride == 1 && self.pad == 0
    }

    fn patch(&self) -> usize {
        self.c * self.kh * self.kw
    }

    fn positions(&self) -> usize {
        self.ho * self.wo
    }
}

fn geometry<T: Scalar>(
    input: &Tensor<T>,
    kernel: &Tensor<T>,
    stride: usize,
    pad: usize,
) -> Result<Geometry> {
    let [_, c, h, w] = input.dims();
    let [_, kc, kh, kw] = kernel.dims();
    if stride == 0 {
        return Err(Error::shape("conv2d stride must be at least 1"));
    }
    if kc != c {
        return Err(Error::shape(format!(
            "conv2d kernel {:?} expects {kc} input channels, input {:?} has {c}",
            kernel.dims(),
            input.dims()
        )));
    }
    if h + 2 * pad < kh || w + 2 * pad < kw {
        return Err(Error::shape(format!(
            "conv2d kernel {kh}x{kw} larger than padded input {}x{}",
            h + 2 * pad,
            w + 2 * pad
        )));
    }
    Ok(Geometry {
        c,
        h,
        w,
        kh,
        kw,
        stride,
        pad,
        ho: (h + 2 * pad - kh) / stride + 1,
        wo: (w + 2 * pad - kw) / stride + 1,
    })
}

thread_local! {
    static SCRATCH: std::cell::RefCell<Vec<Box<dyn std::any::Any>>> = const { std::cell::RefCell::new(Vec::new()) };
}

/// Lends `f` a buffer of `len` elements from a per-thread pool. Contents are
/// unspecified; callers overwrite them.
fn with_scratch<T: Scalar + 'static, R>(len: usize, f: impl FnOnce(&mut [T]) -> R) -> R {
    let taken = SCRATCH.with(|pool| {
        let mut pool = pool.borrow_mut();
        let pos = pool.iter().position(|b| b.is::<Vec<T>>());
        pos.map(|i| pool.swap_remove(i))
    });
    let mut buf: Vec<T> = taken
        .map(|b| *b.downcast::<Vec<T>>().expect("checked type"))
        .unwrap_or_default();
    if buf.len() < len {
        buf.resize(len, T::zero());
    }
    let out = f(&mut buf[..len]);
    SCRATCH.with(|pool| pool.borrow_mut().push(Box::new(buf)));
    out
}

/// Output columns `[lo, hi)` whose input column `ox * stride + j - pad` is inside the row.
#[inline]
fn valid_cols(g: &Geometry, j: usize) -> (usize, usize) {
    let lo = if j < g.pad {
        (g.pad - j).div_ceil(g.stride)
    } else {
        0
    };
    let hi = (g.w + g.pad).saturating_sub(j).div_ceil(g.stride).min(g.wo);
    (lo.min(hi), hi)
}

/// Unfolds one sample `(C, H, W)` into `(C*kh*kw, Ho*Wo)`.
fn im2col<T: Scalar>(g: &Geometry, x: &[T], cols: &mut [T]) {
    let p = g.positions();
    for c in 0..g.c {
        let plane = &x[c * g.h * g.w..(c + 1) * g.h * g.w];
        for i in 0..g.kh {
            for j in 0..g.kw {
                let row = ((c * g.kh + i) * g.kw + j) * p;
                let dst = &mut cols[row..row + p];
                let (lo, hi) = valid_cols(g, j);
                for oy in 0..g.ho {
                    let y = (oy * g.stride + i) as isize - g.pad as isize;
                    let line = &mut dst[oy * g.wo..(oy + 1) * g.wo];
                    if y < 0 || y >= g.h as isize {
                        line.fill(T::zero());
                        continue;
                    }
                    let src = &plane[y as usize * g.w..(y as usize + 1) * g.w];
                    line[..lo].fill(T::zero());
                    line[hi..].fill(T::zero());
                    let x0 = lo * g.stride + j - g.pad;
                    if g.stride == 1 {
                        line[lo..hi].copy_from_slice(&src[x0..x0 + hi - lo]);
                    } else {
                        for (v, &sv) in line[lo..hi]
                            .iter_mut()
                            .zip(src[x0..].iter().step_by(g.stride))
                        {
                            *v = sv;
                        }
                    }
                }
            }
        }
    }
}

/// Adjoint of [`im2col`]: scatters-adds columns back onto `(C, H, W)`.
fn col2im<T: Scalar>(g: &Geometry, cols: &[T], dx: &mut [T]) {
    let p = g.positions();
    for c in 0..g.c {
        let plane = &mut dx[c * g.h * g.w..(c + 1) * g.h * g.w];
        for i in 0..g.kh {
            for j in 0..g.kw {
                let row = ((c * g.kh + i) * g.kw + j) * p;
                let src = &cols[row..row + p];
                let (lo, hi) = valid_cols(g, j);
                if lo >= hi {
                    continue;
                }
                let x0 = lo * g.stride + j - g.pad;
                for oy in 0..g.ho {
                    let y = (oy * g.stride + i) as isize - g.pad as isize;
                    if y < 0 || y >= g.h as isize {
                        continue;
                    }
                    let dst = &mut plane[y as usize * g.w..(y as usize + 1) * g.w];
                    let line = &src[oy * g.wo + lo..oy * g.wo + hi];
                    if g.stride == 1 {
                        for (d, &v) in dst[x0..x0 + hi - lo].iter_mut().zip(line) {
                            *d = *d + v;
                        }
                    } else {
                        for (d, &v) in dst[x0..].iter_mut().step_by(g.stride).zip(line) {
                            *d = *d + v;
                        }
                    }
                }
            }
        }
    }
}

/// Direct 2-D convolution of `input (N,C,H,W)` with `kernel (K,C,kh,kw)`.
///
/// Output is `(N, K, (H+2p-kh)/s+1, (W+2p-kw)/s+1)`.
pub fn conv2d<T: Scalar>(
    input: &Tensor<T>,
    kernel: &Tensor<T>,
    bias: &[T],
    stride: usize,
    pad: usize,
) -> Result<Tensor<T>> {
    let g = geometry(input, kernel, stride, pad)?;
    let n = input.dims()[0];
    let k = kernel.dims()[0];
    if bias.len() != k {
        return Err(Error::shape(format!(
            "conv2d bias length {} for {k} filters",
            bias.len()
        )));
    }
    let p = g.positions();
    let mut out = Tensor::zeros([n, k, g.ho, g.wo]);
    let weights = MatRef::new(kernel.data(), k, g.patch());
    let scratch = if g.is_pointwise() { 0 } else { g.patch() * p };
    with_scratch(scratch, |cols: &mut [T]| {
        for s in 0..n {
            let x = input.sample_slice(s);
            let dst = &mut out.data_mut()[s * k * p..(s + 1) * k * p];
            // bias first, then accumulate the product on top
            for (kk, &b) in bias.iter().enumerate() {
                dst[kk * p..(kk + 1) * p].iter_mut().for_each(|v| *v = b);
            }
            let rhs = if g.is_pointwise() {
                MatRef::new(x, g.patch(), p)
            } else {
                im2col(&g, x, cols);
                MatRef::new(cols, g.patch(), p)
            };
            gemm(weights, rhs, dst, true);
        }
    });
    Ok(out)
}

/// Gradients of [`conv2d`] with respect to its input, kernel and bias.
///
/// `input` is the tensor the forward pass consumed.
pub fn conv2d_backward<T: Scalar>(
    grad_out: &Tensor<T>,
    input: &Tensor<T>,
    kernel: &Tensor<T>,
    stride: usize,
    pad: usize,
) -> Result<ConvGrads<T>> {
    let g = geometry(input, kernel, stride, pad)?;
    let n = input.dims()[0];
    let k = kernel.dims()[0];
    if grad_out.dims() != [n, k, g.ho, g.wo] {
        return Err(Error::shape(format!(
            "conv2d upstream gradient {:?}, forward output was {:?}",
            grad_out.dims(),
            [n, k, g.ho, g.wo]
        )));
    }
    let p = g.positions();
    let weights = MatRef::new(kernel.data(), k, g.patch());
    let mut d_input = Tensor::zeros(input.dims());
    let mut d_kernel = Tensor::zeros(kernel.dims());
    let mut d_bias = vec![T::zero(); k];
    let scratch = if g.is_pointwise() { 0 } else { g.patch() * p };
    with_scratch(scratch, |cols: &mut [T]| {
        with_scratch(scratch, |d_cols: &mut [T]| {
            for s in 0..n {
                let x = input.sample_slice(s);
                let dy = grad_out.sample_slice(s);
                for (kk, db) in d_bias.iter_mut().enumerate() {
                    *db = dy[kk * p..(kk + 1) * p].iter().fold(*db, |acc, &v| acc + v);
                }
                let dy_mat = MatRef::new(dy, k, p);
                let patches = if g.is_pointwise() {
                    MatRef::new(x, g.patch(), p)
                } else {
                    im2col(&g, x, cols);
                    MatRef::new(cols, g.patch(), p)
                };
                gemm(dy_mat, patches.t(), d_kernel.data_mut(), true);
                let dx = &mut d_input.data_mut()[s * g.c * g.h * g.w..(s + 1) * g.c * g.h * g.w];
                if g.is_pointwise() {
                    gemm(weights.t(), dy_mat, dx, false);
                } else {
                    gemm(weights.t(), dy_mat, d_cols, false);
                    col2im(&g, d_cols, dx);
                }
            }
        })
    });
    Ok(ConvGrads {
        input: d_input,
        kernel: d_kernel,
        bias: d_bias,
    })
}
