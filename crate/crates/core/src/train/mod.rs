//! The training recipe: Dice + cross-entropy loss, augmentation, polynomial
//! learning-rate decay and Nesterov SGD, ending with the final-epoch model.

mod augment;
mod loss;
mod schedule;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use augment::{
    augment_sample, simulate_low_resolution, AugmentConfig, Augmented, SpatialTransform,
};
pub use loss::{dice_ce_loss, masks_to_targets, DICE_SMOOTH};
pub use schedule::lr_poly;

use crate::net::{add_coord_channels, build_model, Apex, CoordMode, Model, UNetConfig};
use crate::numerics::{sgd_nesterov_step, OptimizerState, Tensor};
use crate::phantom::Sample;
use crate::{Error, Image, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr0: f64,
    pub momentum: f64,
    pub poly_exponent: f64,
    pub steps_per_epoch: usize,
    pub seed: u64,
    /// Rescale gradients whose global L2 norm exceeds this value.
    pub grad_clip: Option<f64>,
    pub augment: AugmentConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 100,
            batch_size: 4,
            lr0: 0.01,
            momentum: 0.99,
            poly_exponent: 0.9,
            steps_per_epoch: 50,
            seed: 0,
            grad_clip: Some(12.0),
            augment: AugmentConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 || self.steps_per_epoch == 0 {
            return Err(Error::config(
                "epochs, batch_size and steps_per_epoch must be at least 1",
            ));
        }
        if !(self.lr0 > 0.0 && self.lr0.is_finite()) {
            return Err(Error::config(format!("lr0 {} must be positive", self.lr0)));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::config(format!(
                "momentum {} outside [0, 1)",
                self.momentum
            )));
        }
        if !(self.poly_exponent >= 0.0 && self.poly_exponent.is_finite()) {
            return Err(Error::config("poly_exponent must be finite and >= 0"));
        }
        if let Some(c) = self.grad_clip {
            if !(c > 0.0) {
                return Err(Error::config(format!("grad_clip {c} must be positive")));
            }
        }
        self.augment.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub mean_loss: f64,
    pub lr: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub epochs: Vec<EpochRecord>,
}

/// SplitMix64 finalizer chained over `parts`; gives each batch slot its own
/// RNG stream independent of scheduling.
pub fn derive_seed(parts: &[u64]) -> u64 {
    let mut z: u64 = 0x9E37_79B9_7F4A_7C15;
    for &p in parts {
        z = z.wrapping_add(p).wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^= z >> 31;
    }
    z
}

/// Stacks images into `(N, 1, H, W)` and appends coordinate channels as the
/// network configuration asks. Radial mode needs an apex for every image.
pub fn model_input(
    images: &[&Image],
    apexes: &[Option<Apex>],
    unet: &UNetConfig,
) -> Result<Tensor<f32>> {
    let first = images
        .first()
        .ok_or_else(|| Error::Empty("no images for the batch".into()))?;
    let (h, w) = first.dims();
    let mut data = Vec::with_capacity(images.len() * h * w);
    for img in images {
        if img.dims() != (h, w) {
            return Err(Error::shape(format!(
                "batch mixes {:?} and {:?} images",
                (h, w),
                img.dims()
            )));
        }
        data.extend_from_slice(img.data());
    }
    let batch = Tensor::from_vec([images.len(), 1, h, w], data)?;
    match unet.coord_mode {
        CoordMode::None => Ok(batch),
        CoordMode::Cartesian => {
            add_coord_channels(&batch, CoordMode::Cartesian, None, unet.normalize_coords)
        }
        CoordMode::Radial => {
            let apexes: Vec<Apex> = apexes
                .iter()
                .map(|a| {
                    a.ok_or_else(|| {
                        Error::config("radial coordinates need an apex for every image")
                    })
                })
                .collect::<Result<_>>()?;
            if apexes.len() != images.len() {
                return Err(Error::shape(format!(
                    "{} apexes for {} images",
                    apexes.len(),
                    images.len()
                )));
            }
            add_coord_channels(
                &batch,
                CoordMode::Radial,
                Some(&apexes),
                unet.normalize_coords,
            )
        }
    }
}

/// Trains one model from scratch and returns it as it stands after the last
/// epoch, with the per-epoch loss log.
///
/// Every step draws `batch_size` sample indices with replacement from the
/// run's RNG, augments each slot with its own stream seeded from
/// `(seed, epoch, step, slot)`, appends coordinate channels after the
/// spatial transforms, and takes one Nesterov step at `lr_poly(epoch)`.
pub fn train_fold(
    samples: &[Sample],
    config: &TrainConfig,
    unet: &UNetConfig,
) -> Result<(Model, TrainLog)> {
    config.validate()?;
    unet.validate()?;
    if samples.is_empty() {
        return Err(Error::Empty("training set is empty".into()));
    }
    if samples.len() < config.batch_size {
        return Err(Error::config(format!(
            "{} training samples for batch size {}",
            samples.len(),
            config.batch_size
        )));
    }
    let dims = samples[0].image.dims();
    for s in samples {
        if s.image.dims() != dims || s.mask.dims() != dims {
            return Err(Error::shape(format!("sample {} is not {:?}", s.id, dims)));
        }
    }
    unet.check_input_dims(dims.0, dims.1)?;

    let mut model: Model = build_model(unet, config.seed)?;
    let mut state = OptimizerState::new(
        model.params().iter().map(|p| &p.value),
        config.momentum as f32,
        0.0,
    );
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut log = TrainLog::default();
    for epoch in 0..config.epochs {
        let lr = lr_poly(epoch, config)?;
        state.lr = lr as f32;
        let mut total = 0.0;
        for step in 0..config.steps_per_epoch {
            let picks: Vec<usize> = (0..config.batch_size)
                .map(|_| rng.random_range(0..samples.len()))
                .collect();
            let augmented: Vec<(Augmented, Option<Apex>)> = picks
                .par_iter()
                .enumerate()
                .map(|(slot, &i)| {
                    let s = &samples[i];
                    let mut slot_rng = ChaCha8Rng::seed_from_u64(derive_seed(&[
                        config.seed,
                        epoch as u64,
                        step as u64,
                        slot as u64,
                    ]));
                    let a = augment_sample(&s.image, &s.mask, &config.augment, &mut slot_rng);
                    let apex = s.apex.map(|p| a.map_apex(p));
                    (a, apex)
                })
                .collect();
            let images: Vec<&Image> = augmented.iter().map(|(a, _)| &a.image).collect();
            let apexes: Vec<Option<Apex>> = augmented.iter().map(|(_, p)| *p).collect();
            let masks: Vec<_> = augmented.iter().map(|(a, _)| a.mask.clone()).collect();
            let input = model_input(&images, &apexes, unet)?;
            let targets = masks_to_targets::<f32>(&masks)?;

            let (logits, tape) = model.forward_train(&input)?;
            let (loss, grad_logits) = dice_ce_loss(&logits, &targets)?;
            if !loss.is_finite() {
                return Err(Error::NonFinite(format!(
                    "loss at epoch {epoch}, step {step}"
                )));
            }
            let mut grads = model.backward(&tape, &grad_logits)?;
            if !grads.is_finite() {
                return Err(Error::NonFinite(format!(
                    "gradient at epoch {epoch}, step {step}"
                )));
            }
            if let Some(clip) = config.grad_clip {
                let norm = grads.global_norm();
                if norm > clip {
                    grads.scale((clip / norm) as f32);
                }
            }
            let grad_refs = grads.refs();
            let mut params: Vec<&mut Tensor> = model
                .params_mut()
                .iter_mut()
                .map(|p| &mut p.value)
                .collect();
            sgd_nesterov_step(&mut params, &grad_refs, &mut state)?;
            total += loss;
        }
        log.epochs.push(EpochRecord {
            epoch,
            mean_loss: total / config.steps_per_epoch as f64,
            lr,
        });
    }
    Ok((model, log))
}
