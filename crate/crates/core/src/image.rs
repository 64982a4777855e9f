//! Plain 2-D rasters shared by the phantom, preprocessing and evaluation code.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Single-channel float image, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Image {
    rows: usize,
    cols: usize,
    data: Vec<f32>,
}

impl Image {
    pub fn new(rows: usize, cols: usize) -> Self {
        Self::filled(rows, cols, 0.0)
    }

    pub fn filled(rows: usize, cols: usize, value: f32) -> Self {
        Self {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::shape(format!(
                "image {rows}x{cols} needs {} values, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f32) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f32 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f32) {
        self.data[r * self.cols + c] = v;
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f32> {
        self.data
    }

    /// Sub-image `[r0, r0+rows) x [c0, c0+cols)`; must lie inside the image.
    pub fn crop(&self, r0: usize, c0: usize, rows: usize, cols: usize) -> Image {
        assert!(r0 + rows <= self.rows && c0 + cols <= self.cols);
        Image::from_fn(rows, cols, |r, c| self.get(r0 + r, c0 + c))
    }

    /// Zero-pads by the given margins.
    pub fn pad(&self, top: usize, bottom: usize, left: usize, right: usize) -> Image {
        let mut out = Image::new(self.rows + top + bottom, self.cols + left + right);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.set(r + top, c + left, self.get(r, c));
            }
        }
        out
    }
}

/// Binary mask; every value is exactly 0 or 1.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Mask {
    rows: usize,
    cols: usize,
    data: Vec<u8>,
}

impl Mask {
    pub fn new(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0; rows * cols],
        }
    }

    /// Builds a mask, rejecting any value other than 0 or 1.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<u8>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::shape(format!(
                "mask {rows}x{cols} needs {} values, got {}",
                rows * cols,
                data.len()
            )));
        }
        if data.iter().any(|&v| v > 1) {
            return Err(Error::Format("mask values must be 0 or 1".into()));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c) as u8);
            }
        }
        Self { rows, cols, data }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> bool {
        self.data[r * self.cols + c] != 0
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: bool) {
        self.data[r * self.cols + c] = v as u8;
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    /// Number of foreground pixels.
    pub fn area(&self) -> usize {
        self.data.iter().map(|&v| v as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.data.iter().all(|&v| v == 0)
    }

    pub fn and(&self, other: &Mask) -> Mask {
        assert_eq!(self.dims(), other.dims());
        Mask {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a & b)
                .collect(),
        }
    }

    /// True when every foreground pixel of `self` is also foreground in `other`.
    pub fn is_subset_of(&self, other: &Mask) -> bool {
        self.dims() == other.dims() && self.data.iter().zip(&other.data).all(|(&a, &b)| a <= b)
    }

    pub fn crop(&self, r0: usize, c0: usize, rows: usize, cols: usize) -> Mask {
        assert!(r0 + rows <= self.rows && c0 + cols <= self.cols);
        Mask::from_fn(rows, cols, |r, c| self.get(r0 + r, c0 + c))
    }

    pub fn pad(&self, top: usize, bottom: usize, left: usize, right: usize) -> Mask {
        let mut out = Mask::new(self.rows + top + bottom, self.cols + left + right);
        for r in 0..self.rows {
            for c in 0..self.cols {
                if self.get(r, c) {
                    out.set(r + top, c + left, true);
                }
            }
        }
        out
    }

    /// Smallest `(r0, c0, rows, cols)` box enclosing the foreground, if any.
    pub fn bounding_box(&self) -> Option<(usize, usize, usize, usize)> {
        let (mut r0, mut r1, mut c0, mut c1) = (usize::MAX, 0, usize::MAX, 0);
        for r in 0..self.rows {
            for c in 0..self.cols {
                if self.get(r, c) {
                    r0 = r0.min(r);
                    r1 = r1.max(r);
                    c0 = c0.min(c);
                    c1 = c1.max(c);
                }
            }
        }
        (r0 != usize::MAX).then(|| (r0, c0, r1 - r0 + 1, c1 - c0 + 1))
    }

    /// Number of 4-connected foreground components.
    pub fn component_count(&self) -> usize {
        label_components(self).1
    }

    /// Keeps only the largest 4-connected foreground component.
    pub fn largest_component(&self) -> Mask {
        let (labels, count) = label_components(self);
        if count <= 1 {
            return self.clone();
        }
        let mut sizes = vec![0usize; count + 1];
        for &l in &labels {
            sizes[l] += 1;
        }
        // label 0 is background; ties resolve to the lowest label
        let best = (1..=count)
            .max_by_key(|&l| (sizes[l], std::cmp::Reverse(l)))
            .unwrap();
        Mask {
            rows: self.rows,
            cols: self.cols,
            data: labels.iter().map(|&l| (l == best) as u8).collect(),
        }
    }
}

/// Separable Gaussian blur with clamped (replicated) borders; kernel radius `ceil(3 sigma)`.
pub fn gaussian_blur(img: &Image, sigma: f64) -> Image {
    if sigma <= 0.0 {
        return img.clone();
    }
    let radius = (3.0 * sigma).ceil() as isize;
    let weights: Vec<f64> = (-radius..=radius)
        .map(|d| (-((d * d) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let total: f64 = weights.iter().sum();
    let weights: Vec<f64> = weights.iter().map(|w| w / total).collect();
    let (rows, cols) = img.dims();
    let clamp = |v: isize, n: usize| v.clamp(0, n as isize - 1) as usize;
    let horizontal = Image::from_fn(rows, cols, |r, c| {
        let mut acc = 0.0;
        for (k, w) in weights.iter().enumerate() {
            acc += w * img.get(r, clamp(c as isize + k as isize - radius, cols)) as f64;
        }
        acc as f32
    });
    Image::from_fn(rows, cols, |r, c| {
        let mut acc = 0.0;
        for (k, w) in weights.iter().enumerate() {
            acc += w * horizontal.get(clamp(r as isize + k as isize - radius, rows), c) as f64;
        }
        acc as f32
    })
}

fn label_components(mask: &Mask) -> (Vec<usize>, usize) {
    let (rows, cols) = mask.dims();
    let mut labels = vec![0usize; rows * cols];
    let mut count = 0;
    let mut stack = Vec::new();
    for start in 0..rows * cols {
        if mask.data[start] == 0 || labels[start] != 0 {
            continue;
        }
        count += 1;
        labels[start] = count;
        stack.push(start);
        while let Some(i) = stack.pop() {
            let (r, c) = (i / cols, i % cols);
            let mut visit = |j: usize| {
                if mask.data[j] != 0 && labels[j] == 0 {
                    labels[j] = count;
                    stack.push(j);
                }
            };
            if r > 0 {
                visit(i - cols);
            }
            if r + 1 < rows {
                visit(i + cols);
            }
            if c > 0 {
                visit(i - 1);
            }
            if c + 1 < cols {
                visit(i + 1);
            }
        }
    }
    (labels, count)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mask_rejects_non_binary() {
        assert!(Mask::from_vec(1, 2, vec![0, 2]).is_err());
        assert!(Mask::from_vec(1, 2, vec![0, 1]).is_ok());
    }

    #[test]
    fn components_and_largest() {
        let m = Mask::from_fn(5, 5, |r, c| (r == 0 && c < 2) || (r >= 2 && c >= 2));
        assert_eq!(m.component_count(), 2);
        let big = m.largest_component();
        assert_eq!(big.area(), 9);
        assert_eq!(big.component_count(), 1);
    }

    #[test]
    fn crop_then_pad_restores_layout() {
        let m = Mask::from_fn(6, 6, |r, c| r == 3 && c == 2);
        assert_eq!(m.bounding_box(), Some((3, 2, 1, 1)));
        let p = m.crop(1, 1, 4, 4).pad(1, 1, 1, 1);
        assert_eq!(p, m);
    }
}
