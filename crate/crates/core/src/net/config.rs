use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Background and effusion.
pub const NUM_CLASSES: usize = 2;

/// Which coordinate channels are appended to the image before the first layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CoordMode {
    None,
    /// Column (`x`) and row (`y`) index channels, origin top-left.
    Cartesian,
    /// Distance from the probe apex.
    Radial,
}

impl CoordMode {
    pub fn extra_channels(self) -> usize {
        match self {
            CoordMode::None => 0,
            CoordMode::Cartesian => 2,
            CoordMode::Radial => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UNetConfig {
    /// Number of 2x downsampling stages.
    pub depth: usize,
    pub base_channels: usize,
    pub max_channels: usize,
    pub coord_mode: CoordMode,
    /// Scale coordinate channels to `[-1, 1]` (cartesian) or `[0, 1]` (radial).
    pub normalize_coords: bool,
    pub leaky_slope: f64,
    pub norm_eps: f64,
}

impl Default for UNetConfig {
    fn default() -> Self {
        Self {
            depth: 3,
            base_channels: 8,
            max_channels: 256,
            coord_mode: CoordMode::None,
            normalize_coords: false,
            leaky_slope: 0.01,
            norm_eps: 1e-5,
        }
    }
}

impl UNetConfig {
    pub fn with_coords(mut self, mode: CoordMode) -> Self {
        self.coord_mode = mode;
        self
    }

    /// 1 image channel plus the coordinate channels.
    pub fn in_channels(&self) -> usize {
        1 + self.coord_mode.extra_channels()
    }

    /// Feature width at resolution level `level` (0 = full resolution).
    pub fn width(&self, level: usize) -> usize {
        let w = self
            .base_channels
            .saturating_mul(1usize.checked_shl(level as u32).unwrap_or(usize::MAX));
        w.min(self.max_channels)
    }

    /// Widths of the encoder stages above the bottleneck.
    pub fn encoder_widths(&self) -> Vec<usize> {
        (0..self.depth).map(|l| self.width(l)).collect()
    }

    /// Spatial dims must be divisible by this.
    pub fn size_divisor(&self) -> usize {
        1 << self.depth
    }

    pub fn validate(&self) -> Result<()> {
        if self.depth < 1 || self.depth > 16 {
            return Err(Error::config(format!(
                "depth must be in 1..=16, got {}",
                self.depth
            )));
        }
        if self.base_channels < 1 || self.max_channels < self.base_channels {
            return Err(Error::config(format!(
                "base_channels {} / max_channels {} invalid",
                self.base_channels, self.max_channels
            )));
        }
        if !(0.0..1.0).contains(&self.leaky_slope) {
            return Err(Error::config(format!(
                "leaky slope {} outside [0,1)",
                self.leaky_slope
            )));
        }
        if !(self.norm_eps > 0.0) {
            return Err(Error::config("norm_eps must be positive"));
        }
        Ok(())
    }

    pub fn check_input_dims(&self, h: usize, w: usize) -> Result<()> {
        let d = self.size_divisor();
        if h == 0 || w == 0 || h % d != 0 || w % d != 0 {
            return Err(Error::shape(format!(
                "input {h}x{w} not divisible by 2^{} = {d}",
                self.depth
            )));
        }
        Ok(())
    }
}
