//! Synthetic ultrasound frames standing in for clinical pleural-effusion data.
//!
//! A frame shows soft tissue, a bright pleural line, an anechoic effusion
//! with a bright visceral pleura beneath it, aerated lung with reverberation
//! bands, optional rib shadows, multiplicative speckle, and two caliper
//! crosses burned in at the top and bottom of the deepest part of the
//! effusion. Linear probe frames are rectangular; curved probe frames are a
//! fan below an apex above the image.

mod cross;
mod generate;
mod observer;

use serde::{Deserialize, Serialize};

pub use cross::{burn_crosses, cross_template, deepest_column_endpoints};
pub use generate::{
    generate_dataset, generate_depth_gated_dataset, generate_depth_gated_sample, generate_sample,
};
pub use observer::simulate_observer;

use crate::net::Apex;
use crate::preproc::{FovGeometry, Template};
use crate::{Error, Image, Mask, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Probe {
    Linear,
    Curved,
}

impl Probe {
    pub fn as_str(self) -> &'static str {
        match self {
            Probe::Linear => "linear",
            Probe::Curved => "curved",
        }
    }
}

impl std::str::FromStr for Probe {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(Probe::Linear),
            "curved" => Ok(Probe::Curved),
            other => Err(Error::Format(format!("unknown probe '{other}'"))),
        }
    }
}

/// Mean echo intensity of each tissue class, in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Intensities {
    pub tissue: f64,
    pub fascia: f64,
    pub pleura: f64,
    pub effusion: f64,
    pub lung: f64,
    pub reverberation: f64,
    /// Multiplier applied inside rib shadows.
    pub shadow: f64,
}

impl Default for Intensities {
    fn default() -> Self {
        Self {
            tissue: 0.40,
            fascia: 0.60,
            pleura: 0.85,
            effusion: 0.06,
            lung: 0.50,
            reverberation: 0.68,
            shadow: 0.3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhantomSpec {
    pub probe: Probe,
    pub rows: usize,
    pub cols: usize,
    /// Linear probe: blank columns on each side of the imaging rectangle.
    pub side_margin: usize,
    /// Curved probe: the apex sits this far above row 0, centred laterally.
    pub apex_offset: f64,
    pub cone_half_angle_deg: f64,
    pub cone_r_min: f64,
    pub cone_r_max: f64,
    /// Depth of the parietal pleura (row for linear, radius for curved).
    pub pleura_depth: (f64, f64),
    /// Maximum effusion thickness in pixels, inclusive range.
    pub thickness: (usize, usize),
    /// Lateral extent of the effusion in pixels (arc length for curved).
    pub lateral_extent: (f64, f64),
    /// Amplitude of boundary undulation in pixels.
    pub waviness: (f64, f64),
    /// Inclusive range of the number of rib shadows.
    pub rib_shadows: (usize, usize),
    pub intensities: Intensities,
    /// Relative amplitude of multiplicative uniform speckle.
    pub speckle: f64,
    /// Gaussian blur applied after speckle.
    pub speckle_blur: f64,
    /// Arm length of the caliper cross; the template is `2 * arm + 1` square.
    pub cross_arm: usize,
    pub draw_crosses: bool,
    /// Decoy-and-target layout where only depth separates the classes.
    pub depth_gated: bool,
    /// Row threshold of the depth-gated layout; defaults to `rows / 2`.
    pub gate_row: Option<usize>,
    /// Depth-gated layout: minimum distance of either region from the gate row.
    pub gate_margin: usize,
    /// Depth-gated layout: minimum distance of either region from the top and bottom edges.
    pub edge_margin: usize,
}

impl Default for PhantomSpec {
    fn default() -> Self {
        Self::preset_a()
    }
}

impl PhantomSpec {
    /// Linear-array frames (dataset "A").
    pub fn preset_a() -> Self {
        Self {
            probe: Probe::Linear,
            rows: 128,
            cols: 128,
            side_margin: 8,
            apex_offset: 12.0,
            cone_half_angle_deg: 38.0,
            cone_r_min: 20.0,
            cone_r_max: 136.0,
            pleura_depth: (24.0, 44.0),
            thickness: (14, 34),
            lateral_extent: (48.0, 84.0),
            waviness: (0.0, 3.0),
            rib_shadows: (0, 2),
            intensities: Intensities::default(),
            speckle: 0.4,
            speckle_blur: 1.2,
            cross_arm: 4,
            draw_crosses: true,
            depth_gated: false,
            gate_row: None,
            gate_margin: 12,
            edge_margin: 20,
        }
    }

    /// Curved-array frames (dataset "B").
    pub fn preset_b() -> Self {
        Self {
            probe: Probe::Curved,
            cone_half_angle_deg: 45.0,
            pleura_depth: (52.0, 72.0),
            thickness: (14, 32),
            lateral_extent: (44.0, 72.0),
            ..Self::preset_a()
        }
    }

    /// Two identical dark regions, only the deeper one labelled.
    pub fn depth_gated() -> Self {
        Self {
            probe: Probe::Linear,
            side_margin: 0,
            thickness: (14, 22),
            lateral_extent: (36.0, 60.0),
            waviness: (0.0, 2.0),
            rib_shadows: (0, 0),
            draw_crosses: false,
            depth_gated: true,
            ..Self::preset_a()
        }
    }

    /// Dataset size of the named preset.
    pub fn preset(name: &str) -> Option<(Self, usize)> {
        match name {
            "A" | "a" => Some((Self::preset_a(), 51)),
            "B" | "b" => Some((Self::preset_b(), 92)),
            "gated" | "depth-gated" => Some((Self::depth_gated(), 100)),
            _ => None,
        }
    }

    pub fn apex(&self) -> Option<Apex> {
        match self.probe {
            Probe::Linear => None,
            Probe::Curved => Some(Apex::new(-self.apex_offset, self.cols as f64 / 2.0)),
        }
    }

    pub fn fov(&self) -> FovGeometry {
        match self.probe {
            Probe::Linear => FovGeometry::Rectangle {
                row0: 0,
                row1: self.rows,
                col0: self.side_margin,
                col1: self.cols - self.side_margin.min(self.cols / 2),
            },
            Probe::Curved => FovGeometry::Cone {
                apex: self.apex().expect("curved"),
                half_angle_deg: self.cone_half_angle_deg,
                r_min: self.cone_r_min,
                r_max: self.cone_r_max,
            },
        }
    }

    pub fn gate(&self) -> usize {
        self.gate_row.unwrap_or(self.rows / 2)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::config(msg));
        if self.rows < 16 || self.cols < 16 {
            return bad(format!("phantom {}x{} too small", self.rows, self.cols));
        }
        for (name, (lo, hi)) in [
            ("pleura_depth", self.pleura_depth),
            ("lateral_extent", self.lateral_extent),
            ("waviness", self.waviness),
        ] {
            if !(lo <= hi) || lo < 0.0 {
                return bad(format!("{name} range [{lo}, {hi}] is empty or negative"));
            }
        }
        if self.thickness.0 > self.thickness.1 || self.thickness.0 == 0 {
            return bad(format!("thickness range {:?} invalid", self.thickness));
        }
        if self.rib_shadows.0 > self.rib_shadows.1 {
            return bad(format!("rib shadow range {:?} is empty", self.rib_shadows));
        }
        if !(0.0..1.0).contains(&self.speckle) || self.speckle_blur < 0.0 {
            return bad("speckle must lie in [0,1) and blur be non-negative".into());
        }
        self.fov().validate(self.rows, self.cols)?;
        let thick = self.thickness.1 as f64;
        let wave = self.waviness.1;
        if self.depth_gated {
            let gate = self.gate() as f64;
            let need = thick + wave.ceil() + 1.0 + (self.gate_margin + self.edge_margin) as f64;
            if gate < need || self.rows as f64 - gate < need {
                return bad(format!(
                    "gate row {gate} leaves no room for regions {thick} px thick"
                ));
            }
            if self.lateral_extent.1 + 4.0 > self.cols as f64 - 2.0 * self.side_margin as f64 {
                return bad("lateral extent wider than the field of view".into());
            }
            return Ok(());
        }
        match self.probe {
            Probe::Linear => {
                // pleura (3 rows) + effusion + visceral line + some lung
                if self.pleura_depth.1 + wave + 2.0 + thick + 8.0 > self.rows as f64
                    || self.pleura_depth.0 < 8.0
                {
                    return bad(format!(
                        "pleura depth {:?} and thickness {thick} do not fit in {} rows",
                        self.pleura_depth, self.rows
                    ));
                }
                if self.lateral_extent.1 + 4.0 > self.cols as f64 - 2.0 * self.side_margin as f64 {
                    return bad("lateral extent wider than the field of view".into());
                }
            }
            Probe::Curved => {
                if self.pleura_depth.0 < self.cone_r_min + 8.0
                    || self.pleura_depth.1 + wave + 2.0 + thick + 8.0 > self.cone_r_max
                    || self.pleura_depth.1 + wave + 2.0 + thick + 8.0
                        > self.rows as f64 + self.apex_offset
                {
                    return bad(format!(
                        "pleura radius {:?} and thickness {thick} do not fit in the cone",
                        self.pleura_depth
                    ));
                }
                let arc = 2.0 * self.cone_half_angle_deg.to_radians() * self.pleura_depth.0;
                if self.lateral_extent.1 + 8.0 > arc {
                    return bad("lateral extent wider than the cone".into());
                }
            }
        }
        Ok(())
    }

    /// Square template of the burned-in caliper cross.
    pub fn template(&self) -> Template {
        cross_template(self.cross_arm)
    }
}

/// One frame with its annotation.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub id: String,
    pub image: Image,
    pub mask: Mask,
    pub probe: Probe,
    pub apex: Option<Apex>,
    /// Top then bottom `(row, col)` of the deepest mask column.
    pub crosses: Vec<(usize, usize)>,
}
