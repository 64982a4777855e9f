//! Cleaning raw frames before training: field-of-view masking, detection and
//! removal of burned-in caliper crosses, cropping and padding.

mod detect;
mod fov;
mod inpaint;

use serde::{Deserialize, Serialize};

pub use detect::{detect_crosses, Template};
pub use fov::{fov_mask, FovGeometry};
pub use inpaint::{inpaint, INPAINT_MAX_ITERS, INPAINT_TOL};

use crate::net::Apex;
use crate::phantom::Sample;
use crate::{Error, Image, Mask, Result};

/// Default normalized cross-correlation threshold for caliper detection.
pub const DEFAULT_THRESHOLD: f64 = 0.8;

/// Crop window followed by zero padding, as applied to one frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CropPad {
    pub row0: usize,
    pub col0: usize,
    pub rows: usize,
    pub cols: usize,
    pub pad_top: usize,
    pub pad_bottom: usize,
    pub pad_left: usize,
    pub pad_right: usize,
}

impl CropPad {
    /// Crop to `bbox` (`r0, c0, rows, cols`) and pad each side symmetrically
    /// (extra pixel at the bottom/right) up to a multiple of `divisor`.
    pub fn new(bbox: (usize, usize, usize, usize), divisor: usize) -> Result<Self> {
        if divisor == 0 {
            return Err(Error::config("padding divisor must be positive"));
        }
        let (row0, col0, rows, cols) = bbox;
        let extra = |n: usize| n.div_ceil(divisor) * divisor - n;
        let (er, ec) = (extra(rows), extra(cols));
        Ok(Self {
            row0,
            col0,
            rows,
            cols,
            pad_top: er / 2,
            pad_bottom: er - er / 2,
            pad_left: ec / 2,
            pad_right: ec - ec / 2,
        })
    }

    pub fn out_dims(&self) -> (usize, usize) {
        (
            self.rows + self.pad_top + self.pad_bottom,
            self.cols + self.pad_left + self.pad_right,
        )
    }

    pub fn apply_image(&self, img: &Image) -> Image {
        img.crop(self.row0, self.col0, self.rows, self.cols).pad(
            self.pad_top,
            self.pad_bottom,
            self.pad_left,
            self.pad_right,
        )
    }

    pub fn apply_mask(&self, mask: &Mask) -> Mask {
        mask.crop(self.row0, self.col0, self.rows, self.cols).pad(
            self.pad_top,
            self.pad_bottom,
            self.pad_left,
            self.pad_right,
        )
    }

    /// Maps a point of the original frame into the output frame.
    pub fn map_point(&self, row: f64, col: f64) -> (f64, f64) {
        (
            row - self.row0 as f64 + self.pad_top as f64,
            col - self.col0 as f64 + self.pad_left as f64,
        )
    }
}

/// Result of [`preprocess_pipeline`].
#[derive(Debug, Clone, PartialEq)]
pub struct Cleaned {
    pub image: Image,
    pub crop: CropPad,
    /// Detected cross centres in original frame coordinates.
    pub detections: Vec<(usize, usize)>,
    /// Inpainted pixels in original frame coordinates.
    pub hole: Mask,
}

/// Zeroes pixels outside the field of view, removes detected crosses by
/// inpainting their template support, crops to the field-of-view bounding
/// box and pads to a multiple of `divisor`.
pub fn preprocess_pipeline(
    image: &Image,
    geom: &FovGeometry,
    template: &Template,
    threshold: f64,
    divisor: usize,
) -> Result<Cleaned> {
    let (rows, cols) = image.dims();
    let fov = fov_mask(rows, cols, geom)?;
    let bbox = fov
        .bounding_box()
        .ok_or_else(|| Error::config("field of view contains no pixel"))?;
    let crop = CropPad::new(bbox, divisor)?;
    let mut masked = image.clone();
    for (v, &inside) in masked.data_mut().iter_mut().zip(fov.data()) {
        if inside == 0 {
            *v = 0.0;
        }
    }
    let detections = detect_crosses(&masked, template, threshold)?;
    let hole = template.footprint(rows, cols, &detections);
    let cleaned = if detections.is_empty() {
        masked
    } else {
        inpaint(&masked, &hole)?
    };
    Ok(Cleaned {
        image: crop.apply_image(&cleaned),
        crop,
        detections,
        hole,
    })
}

/// One `preproc_log.csv` row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreprocRecord {
    pub id: String,
    pub detections: usize,
    pub hole_pixels: usize,
    /// Mean absolute intensity change over inpainted pixels.
    pub mean_abs_change: f64,
    pub crop_row0: usize,
    pub crop_col0: usize,
    pub crop_rows: usize,
    pub crop_cols: usize,
    pub pad_top: usize,
    pub pad_bottom: usize,
    pub pad_left: usize,
    pub pad_right: usize,
}

impl PreprocRecord {
    pub fn crop(&self) -> CropPad {
        CropPad {
            row0: self.crop_row0,
            col0: self.crop_col0,
            rows: self.crop_rows,
            cols: self.crop_cols,
            pad_top: self.pad_top,
            pad_bottom: self.pad_bottom,
            pad_left: self.pad_left,
            pad_right: self.pad_right,
        }
    }
}

/// Runs [`preprocess_pipeline`] on a sample and moves its mask, apex and
/// caliper positions into the output frame.
pub fn preprocess_sample(
    sample: &Sample,
    geom: &FovGeometry,
    template: &Template,
    threshold: f64,
    divisor: usize,
) -> Result<(Sample, PreprocRecord)> {
    if sample.mask.dims() != sample.image.dims() {
        return Err(Error::shape(format!(
            "sample {}: image {:?} vs mask {:?}",
            sample.id,
            sample.image.dims(),
            sample.mask.dims()
        )));
    }
    let cleaned = preprocess_pipeline(&sample.image, geom, template, threshold, divisor)?;
    let crop = cleaned.crop;
    let hole_pixels = cleaned.hole.area();
    let mean_abs_change = if hole_pixels == 0 {
        0.0
    } else {
        let out = &cleaned.image;
        let mut total = 0.0;
        for r in 0..sample.image.rows() {
            for c in 0..sample.image.cols() {
                if cleaned.hole.get(r, c) {
                    // hole pixels outside the crop window were discarded
                    let (orow, ocol) = crop.map_point(r as f64, c as f64);
                    let inside = r >= crop.row0
                        && r < crop.row0 + crop.rows
                        && c >= crop.col0
                        && c < crop.col0 + crop.cols;
                    if inside {
                        total += (out.get(orow as usize, ocol as usize) - sample.image.get(r, c))
                            .abs() as f64;
                    }
                }
            }
        }
        total / hole_pixels as f64
    };
    let crosses = sample
        .crosses
        .iter()
        .filter_map(|&(r, c)| {
            let (rr, cc) = crop.map_point(r as f64, c as f64);
            (rr >= 0.0 && cc >= 0.0).then_some((rr as usize, cc as usize))
        })
        .collect();
    let out = Sample {
        id: sample.id.clone(),
        image: cleaned.image,
        mask: crop.apply_mask(&sample.mask),
        probe: sample.probe,
        apex: sample.apex.map(|a| {
            let (row, col) = crop.map_point(a.row, a.col);
            Apex::new(row, col)
        }),
        crosses,
    };
    let record = PreprocRecord {
        id: sample.id.clone(),
        detections: cleaned.detections.len(),
        hole_pixels,
        mean_abs_change,
        crop_row0: crop.row0,
        crop_col0: crop.col0,
        crop_rows: crop.rows,
        crop_cols: crop.cols,
        pad_top: crop.pad_top,
        pad_bottom: crop.pad_bottom,
        pad_left: crop.pad_left,
        pad_right: crop.pad_right,
    };
    Ok((out, record))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn crop_pad_is_symmetric() {
        let cp = CropPad::new((4, 2, 121, 112), 8).unwrap();
        assert_eq!(cp.out_dims(), (128, 112));
        assert_eq!((cp.pad_top, cp.pad_bottom), (3, 4));
        assert_eq!((cp.pad_left, cp.pad_right), (0, 0));
        assert_eq!(cp.map_point(4.0, 2.0), (3.0, 0.0));
    }

    #[test]
    fn crossless_image_is_only_masked_cropped_padded() {
        let img = Image::from_fn(20, 20, |r, c| ((r * 7 + c * 3) % 11) as f32 / 10.0);
        let geom = FovGeometry::Rectangle {
            row0: 2,
            row1: 17,
            col0: 1,
            col1: 19,
        };
        let t = crate::phantom::cross_template(3);
        let out = preprocess_pipeline(&img, &geom, &t, DEFAULT_THRESHOLD, 4).unwrap();
        assert!(out.detections.is_empty());
        let expected = CropPad::new((2, 1, 15, 18), 4).unwrap().apply_image(&img);
        assert_eq!(out.image, expected);
        assert_eq!(out.image.dims(), (16, 20));
    }
}
