use super::{Scalar, Tensor};
use crate::{Error, Result};

/// `y = x` for `x >= 0`, `slope * x` otherwise.
pub fn leaky_relu<T: Scalar>(x: &Tensor<T>, slope: T) -> Tensor<T> {
    let mut y = x.clone();
    for v in y.data_mut() {
        if *v < T::zero() {
            *v = *v * slope;
        }
    }
    y
}

/// Backward of [`leaky_relu`]; `input` is the forward input.
pub fn leaky_relu_backward<T: Scalar>(
    grad: &Tensor<T>,
    input: &Tensor<T>,
    slope: T,
) -> Result<Tensor<T>> {
    if grad.dims() != input.dims() {
        return Err(Error::shape(format!(
            "leaky_relu gradient {:?} vs input {:?}",
            grad.dims(),
            input.dims()
        )));
    }
    let mut d = grad.clone();
    for (g, &x) in d.data_mut().iter_mut().zip(input.data()) {
        if x < T::zero() {
            *g = *g * slope;
        }
    }
    Ok(d)
}

/// Per-plane state kept by [`instance_norm`] for its backward pass.
#[derive(Debug, Clone)]
pub struct InstanceNormCache<T = f32> {
    /// The normalized output.
    pub normalized: Tensor<T>,
    /// `1 / sqrt(var + eps)` per `(n, c)` plane.
    pub inv_std: Vec<T>,
}

/// Normalizes every `(n, c)` plane to zero mean and unit (biased) variance.
pub fn instance_norm<T: Scalar>(x: &Tensor<T>, eps: T) -> (Tensor<T>, InstanceNormCache<T>) {
    let [n, c, h, w] = x.dims();
    let count = T::from_f64((h * w) as f64);
    let mut y = x.clone();
    let mut inv_std = Vec::with_capacity(n * c);
    for s in 0..n {
        for ch in 0..c {
            let plane = y.plane_mut(s, ch);
            let mean = plane.iter().copied().sum::<T>() / count;
            let var = plane
                .iter()
                .map(|&v| {
                    let d = v - mean;
                    d * d
                })
                .sum::<T>()
                / count;
            let is = (var + eps).sqrt().recip();
            for v in plane.iter_mut() {
                *v = (*v - mean) * is;
            }
            inv_std.push(is);
        }
    }
    let cache = InstanceNormCache {
        normalized: y.clone(),
        inv_std,
    };
    (y, cache)
}

/// Backward of [`instance_norm`]:
/// `dx = inv_std * (dy - mean(dy) - xhat * mean(dy * xhat))` per plane.
pub fn instance_norm_backward<T: Scalar>(
    grad: &Tensor<T>,
    cache: &InstanceNormCache<T>,
) -> Result<Tensor<T>> {
    let xhat = &cache.normalized;
    if grad.dims() != xhat.dims() {
        return Err(Error::shape(format!(
            "instance_norm gradient {:?} vs forward {:?}",
            grad.dims(),
            xhat.dims()
        )));
    }
    let [n, c, h, w] = grad.dims();
    let count = T::from_f64((h * w) as f64);
    let mut dx = Tensor::zeros(grad.dims());
    for s in 0..n {
        for ch in 0..c {
            let dy = grad.plane(s, ch);
            let xh = xhat.plane(s, ch);
            let mean_dy = dy.iter().copied().sum::<T>() / count;
            let mean_dy_xh = dy.iter().zip(xh).map(|(&a, &b)| a * b).sum::<T>() / count;
            let is = cache.inv_std[s * c + ch];
            for ((o, &g), &xv) in dx.plane_mut(s, ch).iter_mut().zip(dy).zip(xh) {
                *o = is * (g - mean_dy - xv * mean_dy_xh);
            }
        }
    }
    Ok(dx)
}

/// Nearest-neighbour 2x upsampling: each pixel becomes a 2x2 block.
pub fn upsample2x<T: Scalar>(x: &Tensor<T>) -> Tensor<T> {
    let [n, c, h, w] = x.dims();
    let mut y = Tensor::zeros([n, c, 2 * h, 2 * w]);
    for s in 0..n {
        for ch in 0..c {
            let src = x.plane(s, ch);
            let dst = y.plane_mut(s, ch);
            for r in 0..2 * h {
                let row = &src[(r / 2) * w..(r / 2 + 1) * w];
                for (cc, v) in dst[r * 2 * w..(r + 1) * 2 * w].iter_mut().enumerate() {
                    *v = row[cc / 2];
                }
            }
        }
    }
    y
}

/// Adjoint of [`upsample2x`]: sums each 2x2 block of the gradient.
pub fn upsample2x_backward<T: Scalar>(grad: &Tensor<T>) -> Result<Tensor<T>> {
    let [n, c, h2, w2] = grad.dims();
    if h2 % 2 != 0 || w2 % 2 != 0 {
        return Err(Error::shape(format!(
            "upsample2x gradient {:?} has odd spatial dims",
            grad.dims()
        )));
    }
    let (h, w) = (h2 / 2, w2 / 2);
    let mut dx = Tensor::zeros([n, c, h, w]);
    for s in 0..n {
        for ch in 0..c {
            let src = grad.plane(s, ch);
            let dst = dx.plane_mut(s, ch);
            for r in 0..h {
                for cc in 0..w {
                    let a = src[2 * r * w2 + 2 * cc];
                    let b = src[2 * r * w2 + 2 * cc + 1];
                    let d = src[(2 * r + 1) * w2 + 2 * cc];
                    let e = src[(2 * r + 1) * w2 + 2 * cc + 1];
                    dst[r * w + cc] = (a + b) + (d + e);
                }
            }
        }
    }
    Ok(dx)
}

/// Softmax over the channel axis at every pixel, max-subtracted.
pub fn softmax_channel<T: Scalar>(logits: &Tensor<T>) -> Result<Tensor<T>> {
    let [n, c, h, w] = logits.dims();
    if c < 2 {
        return Err(Error::shape(format!("softmax over {c} channel(s)")));
    }
    let hw = h * w;
    let mut out = Tensor::zeros(logits.dims());
    let mut buf = vec![T::zero(); c];
    for s in 0..n {
        let src = logits.sample_slice(s);
        let base = s * c * hw;
        for p in 0..hw {
            let mut max = T::neg_infinity();
            for (ch, b) in buf.iter_mut().enumerate() {
                *b = src[ch * hw + p];
                max = max.max(*b);
            }
            let mut total = T::zero();
            for b in buf.iter_mut() {
                *b = (*b - max).exp();
                total = total + *b;
            }
            for (ch, &b) in buf.iter().enumerate() {
                out.data_mut()[base + ch * hw + p] = b / total;
            }
        }
    }
    Ok(out)
}
