use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{Error, Mask, Result};

/// Number of plane waves summed into the displacement field.
const WAVES: usize = 4;

/// A second reader's annotation of the same frame.
///
/// The boundary of `mask` moves along its normal by a smooth random field
/// with RMS `strength` pixels: a pixel is foreground when its signed distance
/// to the boundary is below the field value. The result is clipped to `fov`
/// and, if `mask` was one connected region, reduced to its largest
/// component.
pub fn simulate_observer(mask: &Mask, fov: &Mask, strength: f64, seed: u64) -> Result<Mask> {
    if !(strength >= 0.0 && strength.is_finite()) {
        return Err(Error::config(format!(
            "observer strength {strength} must be finite and >= 0"
        )));
    }
    if mask.dims() != fov.dims() {
        return Err(Error::shape(format!(
            "mask {:?} vs field of view {:?}",
            mask.dims(),
            fov.dims()
        )));
    }
    if strength == 0.0 || mask.is_empty() {
        return Ok(mask.and(fov));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let waves: Vec<(f64, f64, f64)> = (0..WAVES)
        .map(|_| {
            let wavelength: f64 = rng.random_range(24.0..64.0);
            let angle: f64 = rng.random_range(0.0..TAU);
            let phase: f64 = rng.random_range(0.0..TAU);
            let k = TAU / wavelength;
            (k * angle.cos(), k * angle.sin(), phase)
        })
        .collect();
    // each unit-amplitude sine has RMS 1/sqrt(2); the sum of WAVES has sqrt(WAVES/2)
    let gain = strength / (WAVES as f64 / 2.0).sqrt();
    let sd = signed_distance(mask);
    let (rows, cols) = mask.dims();
    let out = Mask::from_fn(rows, cols, |r, c| {
        let field: f64 = waves
            .iter()
            .map(|&(ky, kx, ph)| (ky * r as f64 + kx * c as f64 + ph).sin())
            .sum();
        fov.get(r, c) && sd[r * cols + c] < gain * field
    });
    Ok(if mask.component_count() == 1 {
        out.largest_component()
    } else {
        out
    })
}

/// Distance to the nearest pixel of the other class, minus half a pixel,
/// negated inside. Brute force over boundary pixels.
fn signed_distance(mask: &Mask) -> Vec<f64> {
    let (rows, cols) = mask.dims();
    let is_boundary = |r: usize, c: usize| {
        let v = mask.get(r, c);
        (r > 0 && mask.get(r - 1, c) != v)
            || (r + 1 < rows && mask.get(r + 1, c) != v)
            || (c > 0 && mask.get(r, c - 1) != v)
            || (c + 1 < cols && mask.get(r, c + 1) != v)
    };
    let mut inner = Vec::new();
    let mut outer = Vec::new();
    for r in 0..rows {
        for c in 0..cols {
            if is_boundary(r, c) {
                if mask.get(r, c) {
                    inner.push((r as f64, c as f64));
                } else {
                    outer.push((r as f64, c as f64));
                }
            }
        }
    }
    let nearest = |pts: &[(f64, f64)], r: f64, c: f64| {
        pts.iter()
            .map(|&(pr, pc)| (pr - r).hypot(pc - c))
            .fold(f64::INFINITY, f64::min)
    };
    let mut sd = vec![0.0; rows * cols];
    for r in 0..rows {
        for c in 0..cols {
            sd[r * cols + c] = if mask.get(r, c) {
                -(nearest(&outer, r as f64, c as f64) - 0.5)
            } else {
                nearest(&inner, r as f64, c as f64) - 0.5
            };
        }
    }
    sd
}
