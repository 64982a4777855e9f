//! Training-time augmentation: rotation, scaling, Gaussian noise, Gaussian
//! blur, brightness, contrast, low-resolution simulation, gamma and mirroring.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::net::Apex;
use crate::{gaussian_blur, Error, Image, Mask, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AugmentConfig {
    pub p_rotation: f64,
    /// Maximum absolute rotation in degrees.
    pub rotation_deg: f64,
    pub p_scale: f64,
    pub scale_range: (f64, f64),
    pub p_noise: f64,
    pub noise_sigma: (f64, f64),
    pub p_blur: f64,
    pub blur_sigma: (f64, f64),
    pub p_brightness: f64,
    pub brightness: (f64, f64),
    pub p_contrast: f64,
    pub contrast: (f64, f64),
    pub p_low_res: f64,
    pub low_res_factor: (f64, f64),
    pub p_gamma: f64,
    pub gamma: (f64, f64),
    /// Per-axis probability of mirroring.
    pub p_mirror: f64,
    /// Mirror left-right.
    pub mirror_horizontal: bool,
    /// Mirror top-bottom. Off by default: it swaps near and far field.
    pub mirror_vertical: bool,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self {
            p_rotation: 0.2,
            rotation_deg: 25.0,
            p_scale: 0.2,
            scale_range: (0.7, 1.4),
            p_noise: 0.15,
            noise_sigma: (0.0, 0.1),
            p_blur: 0.2,
            blur_sigma: (0.5, 1.5),
            p_brightness: 0.15,
            brightness: (0.7, 1.3),
            p_contrast: 0.15,
            contrast: (0.65, 1.5),
            p_low_res: 0.25,
            low_res_factor: (1.0, 2.0),
            p_gamma: 0.3,
            gamma: (0.7, 1.5),
            p_mirror: 0.5,
            mirror_horizontal: true,
            mirror_vertical: false,
        }
    }
}

impl AugmentConfig {
    /// Every probability zero.
    pub fn disabled() -> Self {
        Self {
            p_rotation: 0.0,
            p_scale: 0.0,
            p_noise: 0.0,
            p_blur: 0.0,
            p_brightness: 0.0,
            p_contrast: 0.0,
            p_low_res: 0.0,
            p_gamma: 0.0,
            p_mirror: 0.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let probs = [
            self.p_rotation,
            self.p_scale,
            self.p_noise,
            self.p_blur,
            self.p_brightness,
            self.p_contrast,
            self.p_low_res,
            self.p_gamma,
            self.p_mirror,
        ];
        if probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::config(
                "augmentation probabilities must lie in [0,1]",
            ));
        }
        let ranges = [
            self.scale_range,
            self.noise_sigma,
            self.blur_sigma,
            self.brightness,
            self.contrast,
            self.low_res_factor,
            self.gamma,
        ];
        if ranges.iter().any(|(lo, hi)| !(lo <= hi) || *lo < 0.0) {
            return Err(Error::config(
                "augmentation ranges must be non-negative with lo <= hi",
            ));
        }
        if self.scale_range.0 <= 0.0 || self.low_res_factor.0 < 1.0 || self.gamma.0 <= 0.0 {
            return Err(Error::config(
                "scale, gamma must be positive and low-res factor >= 1",
            ));
        }
        Ok(())
    }
}

/// Rotation about the image centre, isotropic zoom, then mirroring.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpatialTransform {
    pub angle_rad: f64,
    /// Values above 1 enlarge the content.
    pub scale: f64,
    pub flip_horizontal: bool,
    pub flip_vertical: bool,
}

impl Default for SpatialTransform {
    fn default() -> Self {
        Self {
            angle_rad: 0.0,
            scale: 1.0,
            flip_horizontal: false,
            flip_vertical: false,
        }
    }
}

impl SpatialTransform {
    pub fn rotation_degrees(deg: f64) -> Self {
        Self {
            angle_rad: deg.to_radians(),
            ..Self::default()
        }
    }

    fn has_warp(&self) -> bool {
        self.angle_rad != 0.0 || self.scale != 1.0
    }

    /// Source position sampled by output pixel `(r, c)` before mirroring.
    fn source(&self, rows: usize, cols: usize, r: f64, c: f64) -> (f64, f64) {
        let (cy, cx) = ((rows as f64 - 1.0) / 2.0, (cols as f64 - 1.0) / 2.0);
        let (sin, cos) = self.angle_rad.sin_cos();
        let (y, x) = (r - cy, c - cx);
        (
            (cos * y + sin * x) / self.scale + cy,
            (-sin * y + cos * x) / self.scale + cx,
        )
    }

    /// Where a point of the input frame ends up in the output frame.
    pub fn map_point(&self, rows: usize, cols: usize, row: f64, col: f64) -> (f64, f64) {
        let (cy, cx) = ((rows as f64 - 1.0) / 2.0, (cols as f64 - 1.0) / 2.0);
        let (sin, cos) = self.angle_rad.sin_cos();
        let (y, x) = (row - cy, col - cx);
        let mut r = self.scale * (cos * y - sin * x) + cy;
        let mut c = self.scale * (sin * y + cos * x) + cx;
        if self.flip_horizontal {
            c = cols as f64 - 1.0 - c;
        }
        if self.flip_vertical {
            r = rows as f64 - 1.0 - r;
        }
        (r, c)
    }

    /// Bilinear resampling with zero fill outside the frame.
    pub fn apply_image(&self, img: &Image) -> Image {
        let (rows, cols) = img.dims();
        let warped = if self.has_warp() {
            Image::from_fn(rows, cols, |r, c| {
                let (sy, sx) = self.source(rows, cols, r as f64, c as f64);
                bilinear(img, sy, sx)
            })
        } else {
            img.clone()
        };
        self.flip_image(warped)
    }

    /// Nearest-neighbour resampling; the result stays binary.
    pub fn apply_mask(&self, mask: &Mask) -> Mask {
        let (rows, cols) = mask.dims();
        let warped = if self.has_warp() {
            Mask::from_fn(rows, cols, |r, c| {
                let (sy, sx) = self.source(rows, cols, r as f64, c as f64);
                let (ry, rx) = (sy.round(), sx.round());
                ry >= 0.0
                    && rx >= 0.0
                    && (ry as usize) < rows
                    && (rx as usize) < cols
                    && mask.get(ry as usize, rx as usize)
            })
        } else {
            mask.clone()
        };
        let (fh, fv) = (self.flip_horizontal, self.flip_vertical);
        if !fh && !fv {
            return warped;
        }
        Mask::from_fn(rows, cols, |r, c| {
            warped.get(
                if fv { rows - 1 - r } else { r },
                if fh { cols - 1 - c } else { c },
            )
        })
    }

    fn flip_image(&self, img: Image) -> Image {
        let (fh, fv) = (self.flip_horizontal, self.flip_vertical);
        if !fh && !fv {
            return img;
        }
        let (rows, cols) = img.dims();
        Image::from_fn(rows, cols, |r, c| {
            img.get(
                if fv { rows - 1 - r } else { r },
                if fh { cols - 1 - c } else { c },
            )
        })
    }
}

fn bilinear(img: &Image, y: f64, x: f64) -> f32 {
    let (rows, cols) = img.dims();
    let (y0, x0) = (y.floor(), x.floor());
    let (fy, fx) = (y - y0, x - x0);
    let sample = |r: f64, c: f64| -> f64 {
        if r < 0.0 || c < 0.0 || r >= rows as f64 || c >= cols as f64 {
            0.0
        } else {
            img.get(r as usize, c as usize) as f64
        }
    };
    let top = sample(y0, x0) * (1.0 - fx) + sample(y0, x0 + 1.0) * fx;
    let bottom = sample(y0 + 1.0, x0) * (1.0 - fx) + sample(y0 + 1.0, x0 + 1.0) * fx;
    (top * (1.0 - fy) + bottom * fy) as f32
}

/// An augmented image/mask pair and the spatial transform that produced it.
#[derive(Debug, Clone)]
pub struct Augmented {
    pub image: Image,
    pub mask: Mask,
    pub spatial: SpatialTransform,
}

impl Augmented {
    /// Carries a probe apex through the spatial part of the augmentation.
    pub fn map_apex(&self, apex: Apex) -> Apex {
        let (rows, cols) = self.image.dims();
        let (r, c) = self.spatial.map_point(rows, cols, apex.row, apex.col);
        Apex::new(r, c)
    }
}

fn uniform<R: Rng + ?Sized>(rng: &mut R, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        rng.random_range(lo..hi)
    } else {
        lo
    }
}

fn map_clamped(img: &mut Image, f: impl Fn(f32) -> f32) {
    for v in img.data_mut() {
        *v = f(*v).clamp(0.0, 1.0);
    }
}

/// Applies each transform independently with its configured probability.
///
/// Spatial transforms act identically on image and mask (mask resampled
/// nearest-neighbour); intensity transforms touch only the image and clamp
/// it to `[0, 1]`.
pub fn augment_sample<R: Rng + ?Sized>(
    image: &Image,
    mask: &Mask,
    config: &AugmentConfig,
    rng: &mut R,
) -> Augmented {
    // fixed draw order keeps the stream layout stable across configs
    let mut spatial = SpatialTransform::default();
    if rng.random::<f64>() < config.p_rotation {
        spatial.angle_rad = uniform(rng, (-config.rotation_deg, config.rotation_deg)).to_radians();
    }
    if rng.random::<f64>() < config.p_scale {
        spatial.scale = uniform(rng, config.scale_range);
    }
    if config.mirror_horizontal && rng.random::<f64>() < config.p_mirror {
        spatial.flip_horizontal = true;
    }
    if config.mirror_vertical && rng.random::<f64>() < config.p_mirror {
        spatial.flip_vertical = true;
    }
    let mut img = spatial.apply_image(image);
    let mask = spatial.apply_mask(mask);

    if rng.random::<f64>() < config.p_noise {
        let sigma = uniform(rng, config.noise_sigma);
        if sigma > 0.0 {
            let normal = Normal::new(0.0, sigma).expect("finite sigma");
            for v in img.data_mut() {
                *v = (*v as f64 + normal.sample(rng)).clamp(0.0, 1.0) as f32;
            }
        }
    }
    if rng.random::<f64>() < config.p_blur {
        img = gaussian_blur(&img, uniform(rng, config.blur_sigma));
    }
    if rng.random::<f64>() < config.p_brightness {
        let f = uniform(rng, config.brightness) as f32;
        map_clamped(&mut img, |v| v * f);
    }
    if rng.random::<f64>() < config.p_contrast {
        let f = uniform(rng, config.contrast) as f32;
        let mean = (img.data().iter().map(|&v| v as f64).sum::<f64>()
            / img.data().len().max(1) as f64) as f32;
        map_clamped(&mut img, |v| (v - mean) * f + mean);
    }
    if rng.random::<f64>() < config.p_low_res {
        img = simulate_low_resolution(&img, uniform(rng, config.low_res_factor));
    }
    if rng.random::<f64>() < config.p_gamma {
        let g = uniform(rng, config.gamma) as f32;
        map_clamped(&mut img, |v| v.powf(g));
    }
    Augmented {
        image: img,
        mask,
        spatial,
    }
}

/// Nearest downsampling by `factor`, then nearest upsampling back.
pub fn simulate_low_resolution(img: &Image, factor: f64) -> Image {
    let (rows, cols) = img.dims();
    let lr = ((rows as f64 / factor).round() as usize).max(1);
    let lc = ((cols as f64 / factor).round() as usize).max(1);
    if lr == rows && lc == cols {
        return img.clone();
    }
    let small = Image::from_fn(lr, lc, |r, c| {
        let sr = (((r as f64 + 0.5) * rows as f64 / lr as f64) as usize).min(rows - 1);
        let sc = (((c as f64 + 0.5) * cols as f64 / lc as f64) as usize).min(cols - 1);
        img.get(sr, sc)
    });
    Image::from_fn(rows, cols, |r, c| {
        let sr = (((r as f64 + 0.5) * lr as f64 / rows as f64) as usize).min(lr - 1);
        let sc = (((c as f64 + 0.5) * lc as f64 / cols as f64) as usize).min(lc - 1);
        small.get(sr, sc)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn fixture() -> (Image, Mask) {
        let img = Image::from_fn(16, 16, |r, c| ((r * 7 + c * 3) % 13) as f32 / 13.0);
        let mask = Mask::from_fn(16, 16, |r, c| (4..9).contains(&r) && (2..12).contains(&c));
        (img, mask)
    }

    #[test]
    fn disabled_config_is_identity() {
        let (img, mask) = fixture();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..20 {
            let a = augment_sample(&img, &mask, &AugmentConfig::disabled(), &mut rng);
            assert_eq!(a.image, img);
            assert_eq!(a.mask, mask);
        }
    }

    #[test]
    fn mirroring_twice_is_identity() {
        let (img, mask) = fixture();
        let cfg = AugmentConfig {
            p_mirror: 1.0,
            mirror_vertical: true,
            ..AugmentConfig::disabled()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let once = augment_sample(&img, &mask, &cfg, &mut rng);
        assert_ne!(once.image, img);
        let twice = augment_sample(&once.image, &once.mask, &cfg, &mut rng);
        assert_eq!(twice.image, img);
        assert_eq!(twice.mask, mask);
    }

    #[test]
    fn quarter_turn_moves_single_pixel() {
        let n = 9;
        for &(r, c) in &[(0, 0), (1, 5), (8, 2), (4, 4)] {
            let mask = Mask::from_fn(n, n, |y, x| (y, x) == (r, c));
            let out = SpatialTransform::rotation_degrees(90.0).apply_mask(&mask);
            assert_eq!(out.area(), 1);
            // counter-clockwise on screen: (r, c) -> (n-1-c, r)
            assert!(out.get(n - 1 - c, r), "({r},{c})");
        }
        // even size: centre falls between pixels
        let mask = Mask::from_fn(8, 8, |y, x| (y, x) == (1, 6));
        let out = SpatialTransform::rotation_degrees(90.0).apply_mask(&mask);
        assert_eq!(out.area(), 1);
        assert!(out.get(1, 1));
    }

    #[test]
    fn map_point_agrees_with_mask_warp() {
        let t = SpatialTransform {
            angle_rad: 0.3,
            scale: 1.2,
            flip_horizontal: true,
            flip_vertical: false,
        };
        let (r, c) = t.map_point(32, 32, 10.0, 20.0);
        let (sy, sx) = t.source(32, 32, r, 31.0 - c);
        assert!((sy - 10.0).abs() < 1e-9 && (sx - 20.0).abs() < 1e-9);
    }

    #[test]
    fn full_augmentation_keeps_ranges_and_dims() {
        let (img, mask) = fixture();
        let cfg = AugmentConfig {
            p_rotation: 1.0,
            p_scale: 1.0,
            p_noise: 1.0,
            p_blur: 1.0,
            p_brightness: 1.0,
            p_contrast: 1.0,
            p_low_res: 1.0,
            p_gamma: 1.0,
            p_mirror: 1.0,
            mirror_vertical: true,
            ..AugmentConfig::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10 {
            let a = augment_sample(&img, &mask, &cfg, &mut rng);
            assert_eq!(a.image.dims(), img.dims());
            assert_eq!(a.mask.dims(), mask.dims());
            assert!(a.image.data().iter().all(|v| (0.0..=1.0).contains(v)));
            assert!(a.mask.data().iter().all(|&v| v <= 1));
        }
    }

    #[test]
    fn low_res_factor_one_is_identity() {
        let (img, _) = fixture();
        assert_eq!(simulate_low_resolution(&img, 1.0), img);
        let lr = simulate_low_resolution(&img, 2.0);
        assert_eq!(lr.get(0, 0), lr.get(1, 1));
    }
}
