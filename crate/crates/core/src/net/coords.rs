use serde::{Deserialize, Serialize};

use super::CoordMode;
use crate::numerics::{Scalar, Tensor};
use crate::{Error, Result};

/// Probe apex in pixel coordinates; may lie above the image (negative row).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Apex {
    pub row: f64,
    pub col: f64,
}

impl Apex {
    pub fn new(row: f64, col: f64) -> Self {
        Self { row, col }
    }

    pub fn distance(&self, row: f64, col: f64) -> f64 {
        (row - self.row).hypot(col - self.col)
    }
}

/// Appends coordinate channels to a single-channel batch `(N, 1, H, W)`.
///
/// Cartesian mode yields `(N, 3, H, W)` with channels image, `x` (column
/// index) and `y` (row index), in raw pixels with the origin at the top-left
/// pixel. Radial mode yields `(N, 2, H, W)` with the Euclidean pixel distance
/// from the probe apex; `apexes` holds either one apex for the whole batch or
/// one per sample.
///
/// With `normalize`, cartesian coordinates are mapped to `[-1, 1]` and radial
/// distances are divided by the image diagonal.
pub fn add_coord_channels<T: Scalar>(
    batch: &Tensor<T>,
    mode: CoordMode,
    apexes: Option<&[Apex]>,
    normalize: bool,
) -> Result<Tensor<T>> {
    let [n, c, h, w] = batch.dims();
    if c != 1 {
        return Err(Error::shape(format!(
            "coordinate channels expect 1 input channel, got {c}"
        )));
    }
    let coords = match mode {
        CoordMode::None => {
            return Err(Error::config(
                "add_coord_channels called with coord mode none",
            ))
        }
        CoordMode::Cartesian => {
            let sx = if normalize && w > 1 {
                2.0 / (w - 1) as f64
            } else {
                1.0
            };
            let sy = if normalize && h > 1 {
                2.0 / (h - 1) as f64
            } else {
                1.0
            };
            let off = if normalize { -1.0 } else { 0.0 };
            let xs = Tensor::from_fn([1, 1, h, w], |[_, _, _, col]| {
                T::from_f64(col as f64 * sx + off)
            });
            let ys = Tensor::from_fn([1, 1, h, w], |[_, _, row, _]| {
                T::from_f64(row as f64 * sy + off)
            });
            let per_sample = Tensor::concat_channels(&xs, &ys)?;
            Tensor::stack(&vec![per_sample; n])?
        }
        CoordMode::Radial => {
            let apexes = apexes
                .filter(|a| !a.is_empty())
                .ok_or_else(|| Error::config("radial coordinates need the probe apex"))?;
            if apexes.len() != 1 && apexes.len() != n {
                return Err(Error::shape(format!(
                    "{} apexes for a batch of {n}",
                    apexes.len()
                )));
            }
            let scale = if normalize {
                1.0 / ((h * h + w * w) as f64).sqrt()
            } else {
                1.0
            };
            let planes: Vec<Tensor<T>> = (0..n)
                .map(|s| {
                    let apex = apexes[if apexes.len() == 1 { 0 } else { s }];
                    Tensor::from_fn([1, 1, h, w], |[_, _, row, col]| {
                        T::from_f64(apex.distance(row as f64, col as f64) * scale)
                    })
                })
                .collect();
            Tensor::stack(&planes)?
        }
    };
    Tensor::concat_channels(batch, &coords)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn batch(n: usize, h: usize, w: usize) -> Tensor<f32> {
        Tensor::from_fn([n, 1, h, w], |[s, _, r, c]| {
            (s * 1000 + r * 17 + c) as f32 * 0.001
        })
    }

    #[test]
    fn cartesian_origin_and_corner() {
        let x = batch(2, 4, 4);
        let y = add_coord_channels(&x, CoordMode::Cartesian, None, false).unwrap();
        assert_eq!(y.dims(), [2, 3, 4, 4]);
        assert_eq!((y.at([0, 1, 0, 0]), y.at([0, 2, 0, 0])), (0.0, 0.0));
        assert_eq!((y.at([1, 1, 3, 3]), y.at([1, 2, 3, 3])), (3.0, 3.0));
        // x follows the column, y the row
        assert_eq!((y.at([0, 1, 1, 2]), y.at([0, 2, 1, 2])), (2.0, 1.0));
    }

    #[test]
    fn image_channel_is_untouched_and_coords_are_content_free() {
        let x = batch(3, 8, 6);
        let y = add_coord_channels(&x, CoordMode::Cartesian, None, false).unwrap();
        let (img, coords) = y.split_channels(1);
        assert_eq!(img, x);
        assert_eq!(coords.sample_slice(0), coords.sample_slice(2));
    }

    #[test]
    fn radial_distance_from_apex() {
        let x = batch(1, 64, 64);
        let apex = [Apex::new(-10.0, 32.0)];
        let y = add_coord_channels(&x, CoordMode::Radial, Some(&apex), false).unwrap();
        assert_eq!(y.dims(), [1, 2, 64, 64]);
        assert_eq!(y.at([0, 1, 40, 32]), 50.0);
    }

    #[test]
    fn radial_without_apex_is_an_error() {
        let x = batch(1, 8, 8);
        assert!(add_coord_channels(&x, CoordMode::Radial, None, false).is_err());
        assert!(add_coord_channels(&x, CoordMode::None, None, false).is_err());
    }

    #[test]
    fn normalized_cartesian_spans_unit_interval() {
        let x = batch(1, 5, 9);
        let y = add_coord_channels(&x, CoordMode::Cartesian, None, true).unwrap();
        assert_eq!(y.at([0, 1, 0, 0]), -1.0);
        assert_eq!(y.at([0, 1, 4, 8]), 1.0);
        assert_eq!(y.at([0, 2, 4, 8]), 1.0);
    }
}
