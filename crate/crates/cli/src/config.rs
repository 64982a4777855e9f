//! The JSON run configuration and its resolution into explicit values.

use std::path::Path;

use effseg::net::{CoordMode, UNetConfig};
use effseg::phantom::PhantomSpec;
use effseg::preproc::DEFAULT_THRESHOLD;
use effseg::train::TrainConfig;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhantomSection {
    /// `A`, `B` or `gated`; supplies `spec` and `count` when they are absent.
    pub preset: String,
    pub count: Option<usize>,
    pub spec: Option<PhantomSpec>,
}

impl Default for PhantomSection {
    fn default() -> Self {
        Self {
            preset: "A".into(),
            count: None,
            spec: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PreprocSection {
    pub threshold: f64,
    /// Output sides are padded to a multiple of this; defaults to `2^depth`.
    pub divisor: Option<usize>,
}

impl Default for PreprocSection {
    fn default() -> Self {
        Self {
            threshold: DEFAULT_THRESHOLD,
            divisor: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    pub folds: usize,
    /// Coordinate channels of the coordconv variant.
    pub coord_mode: CoordMode,
    pub histogram_bins: usize,
    /// Boundary perturbation of the simulated second observer, in pixels.
    pub observer_strength: f64,
}

impl Default for EvalSection {
    fn default() -> Self {
        Self {
            folds: 5,
            coord_mode: CoordMode::Cartesian,
            histogram_bins: 10,
            observer_strength: 4.0,
        }
    }
}

/// Everything a run needs. After [`RunConfig::resolve`] every optional
/// field is filled in and `train.seed` equals `seed`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub phantom: PhantomSection,
    pub unet: UNetConfig,
    pub train: TrainConfig,
    pub preprocess: PreprocSection,
    pub eval: EvalSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            phantom: PhantomSection::default(),
            unet: UNetConfig::default(),
            train: TrainConfig::default(),
            preprocess: PreprocSection::default(),
            eval: EvalSection::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        match path {
            None => Ok(Self::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", p.display())))?;
                serde_json::from_str(&text)
                    .map_err(|e| CliError::Usage(format!("config {}: {e}", p.display())))
            }
        }
    }

    pub fn resolve(mut self, seed: Option<u64>) -> Result<Self, CliError> {
        if let Some(s) = seed {
            self.seed = s;
        }
        self.train.seed = self.seed;
        let (preset, n) = PhantomSpec::preset(&self.phantom.preset)
            .ok_or_else(|| CliError::Usage(format!("unknown phantom preset '{}'", self.phantom.preset)))?;
        let spec = self.phantom.spec.get_or_insert(preset);
        spec.validate()?;
        self.phantom.count.get_or_insert(n);
        self.preprocess.divisor.get_or_insert(1 << self.unet.depth);
        self.unet.validate()?;
        self.train.validate()?;
        if self.eval.coord_mode == CoordMode::None {
            return Err(CliError::Usage("eval.coord_mode must name coordinate channels".into()));
        }
        if self.eval.folds < 2 || self.eval.histogram_bins == 0 {
            return Err(CliError::Usage("eval.folds must be >= 2 and histogram_bins >= 1".into()));
        }
        Ok(self)
    }

    pub fn spec(&self) -> &PhantomSpec {
        self.phantom.spec.as_ref().expect("resolved")
    }

    pub fn count(&self) -> usize {
        self.phantom.count.expect("resolved")
    }

    pub fn divisor(&self) -> usize {
        self.preprocess.divisor.expect("resolved")
    }

    pub fn unet_for(&self, coordconv: bool) -> UNetConfig {
        let mode = if coordconv { self.eval.coord_mode } else { CoordMode::None };
        self.unet.clone().with_coords(mode)
    }
}
