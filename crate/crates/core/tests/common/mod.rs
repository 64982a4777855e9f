//! Oracles shared by the integration tests and the acceptance harness.
#![allow(dead_code)]

use effseg::net::{build_model, CoordMode, Model, UNetConfig};
use effseg::numerics::{
    conv2d, conv2d_backward, instance_norm, instance_norm_backward, leaky_relu, leaky_relu_backward, upsample2x,
    upsample2x_backward, Tensor,
};
use effseg::train::dice_ce_loss;
use effseg::Mask;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const STEP: f64 = 1e-3;
pub const LAYER_TOL: f64 = 1e-6;
pub const MODEL_TOL: f64 = 1e-5;

pub fn random(dims: [usize; 4], rng: &mut ChaCha8Rng) -> Tensor<f64> {
    Tensor::from_fn(dims, |_| rng.random_range(-1.0..1.0))
}

/// `||a - b|| / max(||a||, ||b||)` over whole gradient vectors.
pub fn rel_error(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    diff / na.max(nb).max(1e-300)
}

/// Central differences of `f` with respect to every entry of `x`.
pub fn numeric(x: &Tensor<f64>, mut f: impl FnMut(&Tensor<f64>) -> f64) -> Vec<f64> {
    let mut probe = x.clone();
    (0..x.len())
        .map(|i| {
            let v = probe.data()[i];
            probe.data_mut()[i] = v + STEP;
            let up = f(&probe);
            probe.data_mut()[i] = v - STEP;
            let down = f(&probe);
            probe.data_mut()[i] = v;
            (up - down) / (2.0 * STEP)
        })
        .collect()
}

/// `sum(w * y)`, so the upstream gradient of `y` is `w`.
pub fn project(y: &Tensor<f64>, w: &Tensor<f64>) -> f64 {
    y.data().iter().zip(w.data()).map(|(a, b)| a * b).sum()
}

/// Relative errors of input, kernel and bias gradients for several geometries.
pub fn conv_errors() -> Vec<(String, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut out = Vec::new();
    for &(stride, pad, kh, h) in &[(1, 1, 3, 6), (2, 1, 3, 8), (1, 0, 1, 5), (2, 0, 3, 7)] {
        let x = random([2, 3, h, h], &mut rng);
        let k = random([4, 3, kh, kh], &mut rng);
        let b: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
        let y = conv2d(&x, &k, &b, stride, pad).unwrap();
        let w = random(y.dims(), &mut rng);
        let g = conv2d_backward(&w, &x, &k, stride, pad).unwrap();
        let dx = numeric(&x, |x| project(&conv2d(x, &k, &b, stride, pad).unwrap(), &w));
        let dk = numeric(&k, |k| project(&conv2d(&x, k, &b, stride, pad).unwrap(), &w));
        let bt = Tensor::from_vec([1, 1, 1, 4], b.clone()).unwrap();
        let db = numeric(&bt, |bt| project(&conv2d(&x, &k, bt.data(), stride, pad).unwrap(), &w));
        let tag = format!("conv s{stride} p{pad} k{kh}");
        out.push((format!("{tag} input"), rel_error(g.input.data(), &dx)));
        out.push((format!("{tag} kernel"), rel_error(g.kernel.data(), &dk)));
        out.push((format!("{tag} bias"), rel_error(&g.bias, &db)));
    }
    out
}

pub fn instance_norm_error() -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let x = random([2, 3, 4, 5], &mut rng);
    let w = random(x.dims(), &mut rng);
    let (_, cache) = instance_norm(&x, 1e-5);
    let g = instance_norm_backward(&w, &cache).unwrap();
    rel_error(g.data(), &numeric(&x, |x| project(&instance_norm(x, 1e-5).0, &w)))
}

pub fn leaky_relu_error() -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    // inputs stay well clear of the kink
    let x = Tensor::from_fn([2, 2, 4, 4], |_| {
        let v: f64 = rng.random_range(0.05..1.0);
        if rng.random_bool(0.5) {
            v
        } else {
            -v
        }
    });
    let w = random(x.dims(), &mut rng);
    let g = leaky_relu_backward(&w, &x, 0.01).unwrap();
    rel_error(g.data(), &numeric(&x, |x| project(&leaky_relu(x, 0.01), &w)))
}

pub fn upsample_error() -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let x = random([2, 3, 3, 4], &mut rng);
    let w = random([2, 3, 6, 8], &mut rng);
    let g = upsample2x_backward(&w).unwrap();
    rel_error(g.data(), &numeric(&x, |x| project(&upsample2x(x), &w)))
}

pub fn concat_error() -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let a = random([1, 2, 3, 3], &mut rng);
    let b = random([1, 3, 3, 3], &mut rng);
    let w = random([1, 5, 3, 3], &mut rng);
    let (ga, gb) = w.split_channels(2);
    let na = numeric(&a, |a| project(&Tensor::concat_channels(a, &b).unwrap(), &w));
    let nb = numeric(&b, |b| project(&Tensor::concat_channels(&a, b).unwrap(), &w));
    rel_error(ga.data(), &na).max(rel_error(gb.data(), &nb))
}

/// Loss gradient on a `1x2x4x4` batch, and on a batch of two where one
/// target is empty so the batch-wide Dice couples the samples.
pub fn loss_errors() -> [f64; 2] {
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    let logits = random([1, 2, 4, 4], &mut rng);
    let targets = Tensor::from_fn([1, 1, 4, 4], |[_, _, r, c]| if r + c >= 3 { 1.0 } else { 0.0 });
    let (_, g) = dice_ce_loss(&logits, &targets).unwrap();
    let single = rel_error(g.data(), &numeric(&logits, |l| dice_ce_loss(l, &targets).unwrap().0));

    let logits = random([2, 2, 4, 4], &mut rng);
    let targets = Tensor::from_fn([2, 1, 4, 4], |[s, _, r, _]| if s == 0 && r < 2 { 1.0 } else { 0.0 });
    let (_, g) = dice_ce_loss(&logits, &targets).unwrap();
    let pair = rel_error(g.data(), &numeric(&logits, |l| dice_ce_loss(l, &targets).unwrap().0));
    [single, pair]
}

/// Every per-layer check with its relative error.
pub fn layer_errors() -> Vec<(String, f64)> {
    let mut out = conv_errors();
    out.push(("instance norm".into(), instance_norm_error()));
    out.push(("leaky relu".into(), leaky_relu_error()));
    out.push(("upsample".into(), upsample_error()));
    out.push(("concat".into(), concat_error()));
    let [a, b] = loss_errors();
    out.push(("dice+ce loss".into(), a));
    out.push(("dice+ce loss, batch".into(), b));
    out
}

pub struct ModelCheck {
    pub error: f64,
    pub checked: usize,
    pub skipped: usize,
}

fn model_loss(model: &Model<f64>, x: &Tensor<f64>, t: &Tensor<f64>) -> (f64, Vec<bool>) {
    let (logits, tape) = model.forward_train(x).unwrap();
    (dice_ce_loss(&logits, t).unwrap().0, tape.activation_pattern())
}

/// Loss-through-model gradient of a depth-1, base-2 network on two 8x8
/// inputs against central differences over every parameter.
///
/// Finite differences only describe the derivative where the stencil stays
/// on one linear piece of every leaky ReLU; with `skip_kinks`, stencils that
/// change any activation sign are left out and counted.
pub fn model_check(mode: CoordMode, seed: u64, step: f64, skip_kinks: bool) -> ModelCheck {
    let cfg = UNetConfig {
        depth: 1,
        base_channels: 2,
        coord_mode: mode,
        normalize_coords: true,
        ..Default::default()
    };
    let mut model: Model<f64> = build_model(&cfg, seed).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = random([2, cfg.in_channels(), 8, 8], &mut rng);
    let t = Tensor::from_fn([2, 1, 8, 8], |[s, _, r, c]| {
        if (r + s) % 8 >= 3 && c >= 2 + s {
            1.0
        } else {
            0.0
        }
    });
    let (logits, tape) = model.forward_train(&x).unwrap();
    let pattern = tape.activation_pattern();
    let (_, dlogits) = dice_ce_loss(&logits, &t).unwrap();
    let grads = model.backward(&tape, &dlogits).unwrap();

    let (mut analytic, mut numerical) = (Vec::new(), Vec::new());
    let mut skipped = 0;
    for p in 0..model.params().len() {
        for i in 0..model.params()[p].value.len() {
            let v = model.params()[p].value.data()[i];
            model.params_mut()[p].value.data_mut()[i] = v + step;
            let (up, pu) = model_loss(&model, &x, &t);
            model.params_mut()[p].value.data_mut()[i] = v - step;
            let (down, pd) = model_loss(&model, &x, &t);
            model.params_mut()[p].value.data_mut()[i] = v;
            if skip_kinks && (pu != pattern || pd != pattern) {
                skipped += 1;
                continue;
            }
            analytic.push(grads.tensors[p].data()[i]);
            numerical.push((up - down) / (2.0 * step));
        }
    }
    ModelCheck {
        error: rel_error(&analytic, &numerical),
        checked: analytic.len(),
        skipped,
    }
}

/// Number of 16x16 pairs (out of `n`) where a metric disagrees with direct
/// pixel counting; every 97th ground truth is empty.
pub fn metric_mismatches(n: usize, seed: u64) -> usize {
    use effseg::eval::{area_bias_pct, area_error_pct, dsc};
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut bad = 0;
    for i in 0..n {
        let (dp, dg) = (rng.random_range(0.0..1.0), rng.random_range(0.0..1.0));
        let pred = Mask::from_fn(16, 16, |_, _| rng.random_bool(dp));
        let gt = if i % 97 == 0 {
            Mask::new(16, 16)
        } else {
            Mask::from_fn(16, 16, |_, _| rng.random_bool(dg))
        };
        let (mut inter, mut np, mut ng) = (0u64, 0u64, 0u64);
        for r in 0..16 {
            for c in 0..16 {
                let (p, g) = (pred.get(r, c), gt.get(r, c));
                inter += (p && g) as u64;
                np += p as u64;
                ng += g as u64;
            }
        }
        let oracle = if np + ng == 0 { 1.0 } else { 2.0 * inter as f64 / (np + ng) as f64 };
        let mut ok = dsc(&pred, &gt).unwrap() == oracle;
        if ng == 0 {
            ok &= area_error_pct(&pred, &gt).is_err() && area_bias_pct(&pred, &gt).is_err();
        } else {
            let bias = area_bias_pct(&pred, &gt).unwrap();
            let oracle_bias = 100.0 * (np as f64 - ng as f64) / ng as f64;
            ok &= (bias - oracle_bias).abs() <= 1e-12 * oracle_bias.abs().max(1.0);
            ok &= area_error_pct(&pred, &gt).unwrap() == bias.abs();
        }
        bad += (!ok) as usize;
    }
    bad
}

/// Two-tailed p by listing all `2^n` sign patterns of the ranked differences.
pub fn enumerated_p(d: &[f64]) -> f64 {
    let nz: Vec<f64> = d.iter().copied().filter(|&v| v != 0.0).collect();
    let n = nz.len();
    let ranks: Vec<f64> = nz
        .iter()
        .map(|&v| {
            let below = nz.iter().filter(|&&u| u.abs() < v.abs()).count() as f64;
            let equal = nz.iter().filter(|&&u| u.abs() == v.abs()).count() as f64;
            below + (equal + 1.0) / 2.0
        })
        .collect();
    let observed: f64 = nz.iter().zip(&ranks).filter(|(v, _)| **v > 0.0).map(|(_, r)| r).sum();
    let (mut le, mut ge) = (0u64, 0u64);
    for bits in 0u32..(1 << n) {
        let w: f64 = (0..n).filter(|i| bits >> i & 1 == 1).map(|i| ranks[i]).sum();
        le += (w <= observed + 1e-9) as u64;
        ge += (w >= observed - 1e-9) as u64;
    }
    let total = (1u64 << n) as f64;
    (2.0 * (le as f64 / total).min(ge as f64 / total)).min(1.0)
}

/// Paired sets with `n = 1 + i % 10` drawn on a coarse grid so ties and zero
/// differences occur. Yields `(a, b)`.
pub fn small_paired_sets(count: usize, seed: u64) -> Vec<(Vec<f64>, Vec<f64>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| {
            let n = 1 + i % 10;
            let a = (0..n).map(|_| rng.random_range(0..8) as f64 / 4.0).collect();
            let b = (0..n).map(|_| rng.random_range(0..8) as f64 / 4.0).collect();
            (a, b)
        })
        .collect()
}

/// Largest `|p_exact - p_normal|` over random paired sets of 25.
pub fn worst_normal_gap(count: usize, seed: u64) -> f64 {
    use effseg::eval::{wilcoxon_exact, wilcoxon_normal};
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..count {
        let shift = rng.random_range(-0.6..0.6);
        let a: Vec<f64> = (0..25).map(|_| rng.random_range(-1.0..1.0) + shift).collect();
        let b: Vec<f64> = (0..25).map(|_| rng.random_range(-1.0..1.0)).collect();
        let e = wilcoxon_exact(&a, &b).unwrap().p;
        let n = wilcoxon_normal(&a, &b).unwrap().p;
        worst = worst.max((e - n).abs());
    }
    worst
}
