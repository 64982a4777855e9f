//! U-Net with instance norm and leaky ReLU, stride-2 convolutions for
//! downsampling, and nearest-neighbour upsampling followed by a 1x1
//! convolution in the decoder.
//!
//! Level `l` (0 = full resolution) has width `config.width(l)`. The encoder
//! runs levels `0..=depth`; each level is two conv-norm-activation blocks, the
//! first of which has stride 2 for every level above 0. The decoder walks back
//! from `depth - 1` to 0, concatenating the matching encoder output before its
//! two blocks. A 1x1 convolution maps level 0 to the class logits.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use super::{UNetConfig, NUM_CLASSES};
use crate::numerics::{
    conv2d, conv2d_backward, instance_norm, instance_norm_backward, leaky_relu,
    leaky_relu_backward, upsample2x, upsample2x_backward, InstanceNormCache, Scalar, Tensor,
};
use crate::{Error, Mask, Result};

/// A named parameter. `shape` is the logical shape (rank 4 for kernels,
/// rank 1 for biases); `value` stores it padded to rank 4.
#[derive(Debug, Clone, PartialEq)]
pub struct Param<T = f32> {
    pub name: String,
    pub shape: Vec<usize>,
    pub value: Tensor<T>,
}

#[derive(Debug, Clone, Copy)]
struct ConvRef {
    /// Index of the kernel; the bias follows it.
    weight: usize,
    stride: usize,
    pad: usize,
}

impl ConvRef {
    fn bias(self) -> usize {
        self.weight + 1
    }
}

#[derive(Debug, Clone, Copy)]
struct DecoderRef {
    up: ConvRef,
    a: ConvRef,
    b: ConvRef,
}

#[derive(Debug, Clone)]
struct Layout {
    encoder: Vec<[ConvRef; 2]>,
    /// Indexed by level.
    decoder: Vec<DecoderRef>,
    head: ConvRef,
}

struct ParamSpec {
    name: String,
    shape: Vec<usize>,
    fan_in: usize,
}

fn layout(config: &UNetConfig) -> (Layout, Vec<ParamSpec>) {
    let mut specs = Vec::new();
    let mut conv = |name: String, out: usize, inp: usize, k: usize, stride: usize| {
        let weight = specs.len();
        specs.push(ParamSpec {
            name: format!("{name}.weight"),
            shape: vec![out, inp, k, k],
            fan_in: inp * k * k,
        });
        specs.push(ParamSpec {
            name: format!("{name}.bias"),
            shape: vec![out],
            fan_in: 0,
        });
        ConvRef {
            weight,
            stride,
            pad: k / 2,
        }
    };

    let depth = config.depth;
    let mut encoder = Vec::with_capacity(depth + 1);
    let mut prev = config.in_channels();
    for level in 0..=depth {
        let w = config.width(level);
        let stride = if level == 0 { 1 } else { 2 };
        let a = conv(format!("enc{level}.a"), w, prev, 3, stride);
        let b = conv(format!("enc{level}.b"), w, w, 3, 1);
        encoder.push([a, b]);
        prev = w;
    }
    let mut decoder: Vec<Option<DecoderRef>> = vec![None; depth];
    for level in (0..depth).rev() {
        let w = config.width(level);
        let up = conv(format!("dec{level}.up"), w, prev, 1, 1);
        let a = conv(format!("dec{level}.a"), w, 2 * w, 3, 1);
        let b = conv(format!("dec{level}.b"), w, w, 3, 1);
        decoder[level] = Some(DecoderRef { up, a, b });
        prev = w;
    }
    let head = conv("head".into(), NUM_CLASSES, prev, 1, 1);
    let layout = Layout {
        encoder,
        decoder: decoder
            .into_iter()
            .map(|d| d.expect("every level assigned"))
            .collect(),
        head,
    };
    (layout, specs)
}

fn padded_dims(shape: &[usize]) -> [usize; 4] {
    let mut d = [1; 4];
    d[..shape.len()].copy_from_slice(shape);
    d
}

/// Parameter gradients, aligned with [`Model::params`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<T = f32> {
    pub tensors: Vec<Tensor<T>>,
}

impl<T: Scalar> Gradients<T> {
    pub fn global_norm(&self) -> f64 {
        self.tensors
            .iter()
            .flat_map(|t| t.data())
            .map(|v| {
                let v = v.as_f64();
                v * v
            })
            .sum::<f64>()
            .sqrt()
    }

    pub fn scale(&mut self, factor: T) {
        for t in &mut self.tensors {
            t.data_mut().iter_mut().for_each(|v| *v = *v * factor);
        }
    }

    pub fn is_finite(&self) -> bool {
        self.tensors.iter().all(Tensor::is_finite)
    }

    pub fn refs(&self) -> Vec<&Tensor<T>> {
        self.tensors.iter().collect()
    }
}

#[derive(Debug, Clone)]
struct BlockCache<T> {
    input: Tensor<T>,
    norm: InstanceNormCache<T>,
}

#[derive(Debug, Clone)]
struct DecoderCache<T> {
    upsampled: Tensor<T>,
    a: BlockCache<T>,
    b: BlockCache<T>,
}

#[derive(Debug, Clone)]
struct SampleTape<T> {
    encoder: Vec<[BlockCache<T>; 2]>,
    decoder: Vec<DecoderCache<T>>,
    head_input: Tensor<T>,
}

/// Activations recorded by [`Model::forward_train`] for [`Model::backward`].
#[derive(Debug, Clone)]
pub struct Tape<T = f32> {
    samples: Vec<SampleTape<T>>,
}

impl<T> Default for Tape<T> {
    fn default() -> Self {
        Self {
            samples: Vec::new(),
        }
    }
}

impl<T> Tape<T> {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    /// Sign of every leaky-ReLU input, in a fixed traversal order. Two
    /// forward passes with equal patterns lie on the same linear piece of
    /// every activation.
    pub fn activation_pattern(&self) -> Vec<bool>
    where
        T: Scalar,
    {
        let mut out = Vec::new();
        for s in &self.samples {
            let blocks = s.encoder.iter().flatten().chain(s.decoder.iter().flat_map(|d| [&d.a, &d.b]));
            for b in blocks {
                out.extend(b.norm.normalized.data().iter().map(|&v| v >= T::zero()));
            }
        }
        out
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Network parameters and the config that shaped them.
#[derive(Debug, Clone, PartialEq)]
pub struct Model<T = f32> {
    config: UNetConfig,
    params: Vec<Param<T>>,
}

/// Builds a model with He-normal (fan-in) kernels and zero biases, drawn
/// from a ChaCha8 stream seeded with `seed`.
pub fn build_model<T: Scalar>(config: &UNetConfig, seed: u64) -> Result<Model<T>> {
    config.validate()?;
    let (_, specs) = layout(config);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gain = 2.0 / (1.0 + config.leaky_slope * config.leaky_slope);
    let params = specs
        .into_iter()
        .map(|spec| {
            let dims = padded_dims(&spec.shape);
            let value = if spec.fan_in == 0 {
                Tensor::zeros(dims)
            } else {
                let normal =
                    Normal::new(0.0, (gain / spec.fan_in as f64).sqrt()).expect("positive std");
                Tensor::from_fn(dims, |_| T::from_f64(normal.sample(&mut rng)))
            };
            Param {
                name: spec.name,
                shape: spec.shape,
                value,
            }
        })
        .collect();
    Ok(Model {
        config: config.clone(),
        params,
    })
}

impl<T: Scalar> Model<T> {
    /// Rebuilds a model from stored `(name, shape, data)` triples. Names and
    /// shapes must match what `config` produces, in any order.
    pub fn from_named(
        config: &UNetConfig,
        tensors: Vec<(String, Vec<usize>, Vec<T>)>,
    ) -> Result<Self> {
        config.validate()?;
        let (_, specs) = layout(config);
        let mut by_name: std::collections::HashMap<String, (Vec<usize>, Vec<T>)> =
            tensors.into_iter().map(|(n, s, d)| (n, (s, d))).collect();
        let mut params = Vec::with_capacity(specs.len());
        for spec in specs {
            let (shape, data) = by_name
                .remove(&spec.name)
                .ok_or_else(|| Error::Format(format!("missing parameter {}", spec.name)))?;
            if shape != spec.shape {
                return Err(Error::shape(format!(
                    "parameter {} stored as {shape:?}, config expects {:?}",
                    spec.name, spec.shape
                )));
            }
            params.push(Param {
                value: Tensor::from_vec(padded_dims(&shape), data)?,
                name: spec.name,
                shape,
            });
        }
        if let Some(extra) = by_name.keys().next() {
            return Err(Error::Format(format!("unexpected parameter {extra}")));
        }
        Ok(Model {
            config: config.clone(),
            params,
        })
    }

    pub fn config(&self) -> &UNetConfig {
        &self.config
    }

    pub fn params(&self) -> &[Param<T>] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Param<T>] {
        &mut self.params
    }

    pub fn param(&self, name: &str) -> Option<&Param<T>> {
        self.params.iter().find(|p| p.name == name)
    }

    pub fn param_count(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }

    pub fn cast<U: Scalar>(&self) -> Model<U> {
        Model {
            config: self.config.clone(),
            params: self
                .params
                .iter()
                .map(|p| Param {
                    name: p.name.clone(),
                    shape: p.shape.clone(),
                    value: p.value.cast(),
                })
                .collect(),
        }
    }

    fn check_input(&self, batch: &Tensor<T>) -> Result<()> {
        let [_, c, h, w] = batch.dims();
        if c != self.config.in_channels() {
            return Err(Error::shape(format!(
                "model expects {} input channels, batch has {c}",
                self.config.in_channels()
            )));
        }
        self.config.check_input_dims(h, w)
    }

    /// Inference: logits `(N, 2, H, W)`.
    pub fn forward(&self, batch: &Tensor<T>) -> Result<Tensor<T>> {
        self.check_input(batch)?;
        let (_, logits) = self.run(batch, false)?;
        Ok(logits)
    }

    /// Forward pass that also records what [`Model::backward`] needs.
    pub fn forward_train(&self, batch: &Tensor<T>) -> Result<(Tensor<T>, Tape<T>)> {
        self.check_input(batch)?;
        let (tapes, logits) = self.run(batch, true)?;
        Ok((
            logits,
            Tape {
                samples: tapes.into_iter().map(|t| t.expect("recorded")).collect(),
            },
        ))
    }

    fn run(
        &self,
        batch: &Tensor<T>,
        record: bool,
    ) -> Result<(Vec<Option<SampleTape<T>>>, Tensor<T>)> {
        let (layout, _) = layout(&self.config);
        let n = batch.dims()[0];
        let results: Vec<(Option<SampleTape<T>>, Tensor<T>)> = (0..n)
            .into_par_iter()
            .map(|s| self.forward_sample(&layout, batch.sample(s), record))
            .collect::<Result<_>>()?;
        let (tapes, outs): (Vec<_>, Vec<_>) = results.into_iter().unzip();
        Ok((tapes, Tensor::stack(&outs)?))
    }

    fn conv(&self, r: ConvRef, x: &Tensor<T>) -> Result<Tensor<T>> {
        let bias = self.params[r.bias()].value.data();
        conv2d(x, &self.params[r.weight].value, bias, r.stride, r.pad)
    }

    fn block(&self, r: ConvRef, x: Tensor<T>) -> Result<(Tensor<T>, BlockCache<T>)> {
        let z = self.conv(r, &x)?;
        let (xhat, norm) = instance_norm(&z, T::from_f64(self.config.norm_eps));
        let y = leaky_relu(&xhat, T::from_f64(self.config.leaky_slope));
        Ok((y, BlockCache { input: x, norm }))
    }

    fn forward_sample(
        &self,
        layout: &Layout,
        x: Tensor<T>,
        record: bool,
    ) -> Result<(Option<SampleTape<T>>, Tensor<T>)> {
        let mut enc_caches = Vec::with_capacity(layout.encoder.len());
        let mut skips = Vec::with_capacity(layout.encoder.len());
        let mut x = x;
        for refs in &layout.encoder {
            let (h, ca) = self.block(refs[0], x)?;
            let (out, cb) = self.block(refs[1], h)?;
            skips.push(out.clone());
            enc_caches.push([ca, cb]);
            x = out;
        }
        skips.pop(); // the bottleneck has no skip partner

        let mut dec_caches: Vec<Option<DecoderCache<T>>> = vec![None; layout.decoder.len()];
        for level in (0..layout.decoder.len()).rev() {
            let d = layout.decoder[level];
            let upsampled = upsample2x(&x);
            let up = self.conv(d.up, &upsampled)?;
            let cat = Tensor::concat_channels(&skips[level], &up)?;
            let (h, ca) = self.block(d.a, cat)?;
            let (out, cb) = self.block(d.b, h)?;
            if record {
                dec_caches[level] = Some(DecoderCache {
                    upsampled,
                    a: ca,
                    b: cb,
                });
            }
            x = out;
        }
        let logits = self.conv(layout.head, &x)?;
        let tape = record.then(|| SampleTape {
            encoder: enc_caches,
            decoder: dec_caches
                .into_iter()
                .map(|c| c.expect("recorded"))
                .collect(),
            head_input: x,
        });
        Ok((tape, logits))
    }

    /// Gradients of a scalar loss given `d loss / d logits`.
    pub fn backward(&self, tape: &Tape<T>, grad_logits: &Tensor<T>) -> Result<Gradients<T>> {
        if tape.is_empty() {
            return Err(Error::MissingCache);
        }
        let n = grad_logits.dims()[0];
        if n != tape.len() {
            return Err(Error::shape(format!(
                "logit gradient batch {n} vs {} recorded samples",
                tape.len()
            )));
        }
        let (layout, _) = layout(&self.config);
        let per_sample: Vec<Vec<Tensor<T>>> = (0..n)
            .into_par_iter()
            .map(|s| self.backward_sample(&layout, &tape.samples[s], &grad_logits.sample(s)))
            .collect::<Result<_>>()?;
        // fixed summation order keeps the result independent of scheduling
        let mut iter = per_sample.into_iter();
        let mut total = iter.next().expect("n >= 1");
        for g in iter {
            for (acc, t) in total.iter_mut().zip(&g) {
                acc.add_assign(t)?;
            }
        }
        Ok(Gradients { tensors: total })
    }

    fn block_backward(
        &self,
        r: ConvRef,
        cache: &BlockCache<T>,
        dy: &Tensor<T>,
        grads: &mut [Tensor<T>],
    ) -> Result<Tensor<T>> {
        let slope = T::from_f64(self.config.leaky_slope);
        let dxhat = leaky_relu_backward(dy, &cache.norm.normalized, slope)?;
        let dz = instance_norm_backward(&dxhat, &cache.norm)?;
        self.conv_backward(r, &cache.input, &dz, grads)
    }

    fn conv_backward(
        &self,
        r: ConvRef,
        input: &Tensor<T>,
        dz: &Tensor<T>,
        grads: &mut [Tensor<T>],
    ) -> Result<Tensor<T>> {
        let g = conv2d_backward(dz, input, &self.params[r.weight].value, r.stride, r.pad)?;
        grads[r.weight].add_assign(&g.kernel)?;
        let bias = grads[r.bias()].data_mut();
        for (b, &v) in bias.iter_mut().zip(&g.bias) {
            *b = *b + v;
        }
        Ok(g.input)
    }

    fn backward_sample(
        &self,
        layout: &Layout,
        tape: &SampleTape<T>,
        dlogits: &Tensor<T>,
    ) -> Result<Vec<Tensor<T>>> {
        let mut grads: Vec<Tensor<T>> = self
            .params
            .iter()
            .map(|p| Tensor::zeros(p.value.dims()))
            .collect();
        let mut d = self.conv_backward(layout.head, &tape.head_input, dlogits, &mut grads)?;

        let mut d_skips = Vec::with_capacity(layout.decoder.len());
        for (level, refs) in layout.decoder.iter().enumerate() {
            let cache = &tape.decoder[level];
            d = self.block_backward(refs.b, &cache.b, &d, &mut grads)?;
            let d_cat = self.block_backward(refs.a, &cache.a, &d, &mut grads)?;
            let (d_skip, d_up) = d_cat.split_channels(self.config.width(level));
            d_skips.push(d_skip);
            let d_upsampled = self.conv_backward(refs.up, &cache.upsampled, &d_up, &mut grads)?;
            d = upsample2x_backward(&d_upsampled)?;
        }

        for level in (0..layout.encoder.len()).rev() {
            if level < d_skips.len() {
                d.add_assign(&d_skips[level])?;
            }
            let refs = layout.encoder[level];
            let caches = &tape.encoder[level];
            d = self.block_backward(refs[1], &caches[1], &d, &mut grads)?;
            d = self.block_backward(refs[0], &caches[0], &d, &mut grads)?;
        }
        Ok(grads)
    }
}

/// Argmax decoding of 2-class logits; ties go to background.
pub fn predict_mask<T: Scalar>(logits: &Tensor<T>) -> Result<Vec<Mask>> {
    let [n, c, h, w] = logits.dims();
    if c != NUM_CLASSES {
        return Err(Error::shape(format!(
            "predict_mask expects 2 logit channels, got {c}"
        )));
    }
    Ok((0..n)
        .map(|s| {
            let bg = logits.plane(s, 0);
            let fg = logits.plane(s, 1);
            Mask::from_fn(h, w, |r, col| fg[r * w + col] > bg[r * w + col])
        })
        .collect())
}
