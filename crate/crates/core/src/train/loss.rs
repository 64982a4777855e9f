use crate::numerics::{Scalar, Tensor};
use crate::{Error, Mask, Result};

/// Smoothing term of the soft Dice ratio.
pub const DICE_SMOOTH: f64 = 1e-5;

/// Stacks masks into a `(N, 1, H, W)` target tensor of zeros and ones.
pub fn masks_to_targets<T: Scalar>(masks: &[Mask]) -> Result<Tensor<T>> {
    let first = masks
        .first()
        .ok_or_else(|| Error::Empty("no target masks".into()))?;
    let (h, w) = first.dims();
    let mut data = Vec::with_capacity(masks.len() * h * w);
    for m in masks {
        if m.dims() != (h, w) {
            return Err(Error::shape(format!(
                "target masks {:?} and {:?}",
                (h, w),
                m.dims()
            )));
        }
        data.extend(
            m.data()
                .iter()
                .map(|&v| if v != 0 { T::one() } else { T::zero() }),
        );
    }
    Tensor::from_vec([masks.len(), 1, h, w], data)
}

/// Cross-entropy plus batch soft-Dice loss on 2-class logits.
///
/// `CE` is the mean over every pixel of the batch of `-log p(true class)`.
/// The Dice term is `1 - (2 sum(p_fg t) + eps) / (sum(p_fg) + sum(t) + eps)`
/// with sums over the whole batch. Returns the loss and `d loss / d logits`.
pub fn dice_ce_loss<T: Scalar>(
    logits: &Tensor<T>,
    targets: &Tensor<T>,
) -> Result<(f64, Tensor<T>)> {
    let [n, c, h, w] = logits.dims();
    if c != 2 {
        return Err(Error::shape(format!(
            "loss expects 2 logit channels, got {c}"
        )));
    }
    if targets.dims() != [n, 1, h, w] {
        return Err(Error::shape(format!(
            "targets {:?} do not match logits {:?}",
            targets.dims(),
            logits.dims()
        )));
    }
    if targets
        .data()
        .iter()
        .any(|&t| t != T::zero() && t != T::one())
    {
        return Err(Error::Format("loss targets must be binary".into()));
    }
    let hw = h * w;
    let count = (n * hw) as f64;

    // per-pixel foreground probability and CE
    let mut p_fg = vec![0.0f64; n * hw];
    let mut p_bg = vec![0.0f64; n * hw];
    let mut ce = 0.0f64;
    let (mut inter, mut pred_sum, mut true_sum) = (0.0f64, 0.0f64, 0.0f64);
    for s in 0..n {
        let z0 = logits.plane(s, 0);
        let z1 = logits.plane(s, 1);
        let t = targets.plane(s, 0);
        for i in 0..hw {
            let (a, b) = (z0[i].as_f64(), z1[i].as_f64());
            let m = a.max(b);
            let lse = m + ((a - m).exp() + (b - m).exp()).ln();
            let fg = t[i] == T::one();
            ce += lse - if fg { b } else { a };
            let p1 = (b - lse).exp();
            let p0 = (a - lse).exp();
            p_fg[s * hw + i] = p1;
            p_bg[s * hw + i] = p0;
            pred_sum += p1;
            if fg {
                inter += p1;
                true_sum += 1.0;
            }
        }
    }
    ce /= count;
    let denom = pred_sum + true_sum + DICE_SMOOTH;
    let numer = 2.0 * inter + DICE_SMOOTH;
    let loss = ce + 1.0 - numer / denom;

    let mut grad = Tensor::zeros(logits.dims());
    for s in 0..n {
        let t = targets.plane(s, 0);
        let base = s * 2 * hw;
        for i in 0..hw {
            let k = s * hw + i;
            let (p0, p1) = (p_bg[k], p_fg[k]);
            let tf = if t[i] == T::one() { 1.0 } else { 0.0 };
            let d_dice_dp1 = -(2.0 * tf * denom - numer) / (denom * denom);
            let g_dice = d_dice_dp1 * p1 * p0;
            let g0 = (p0 - (1.0 - tf)) / count - g_dice;
            let g1 = (p1 - tf) / count + g_dice;
            grad.data_mut()[base + i] = T::from_f64(g0);
            grad.data_mut()[base + hw + i] = T::from_f64(g1);
        }
    }
    Ok((loss, grad))
}
