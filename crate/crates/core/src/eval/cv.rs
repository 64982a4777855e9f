use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{MetricsRecord, Variant};
use crate::net::{predict_mask, Model, UNetConfig};
use crate::phantom::Sample;
use crate::train::{derive_seed, model_input, train_fold, TrainConfig, TrainLog};
use crate::{Error, Image, Mask, Result};

/// Images per inference batch.
const PREDICT_BATCH: usize = 4;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldSplit {
    pub folds: Vec<Vec<String>>,
}

impl FoldSplit {
    pub fn k(&self) -> usize {
        self.folds.len()
    }

    /// Fold holding `id`, if any.
    pub fn fold_of(&self, id: &str) -> Option<usize> {
        self.folds.iter().position(|f| f.iter().any(|x| x == id))
    }
}

/// Shuffles `ids` with a seeded RNG and deals them round-robin into `k` folds.
pub fn kfold_split(ids: &[String], k: usize, seed: u64) -> Result<FoldSplit> {
    if k < 2 {
        return Err(Error::config(format!("k-fold split needs k >= 2, got {k}")));
    }
    if ids.len() < k {
        return Err(Error::config(format!(
            "{} ids cannot fill {k} folds",
            ids.len()
        )));
    }
    let unique: BTreeSet<&String> = ids.iter().collect();
    if unique.len() != ids.len() {
        return Err(Error::config("duplicate ids in k-fold split"));
    }
    let mut order = ids.to_vec();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut folds = vec![Vec::new(); k];
    for (i, id) in order.into_iter().enumerate() {
        folds[i % k].push(id);
    }
    Ok(FoldSplit { folds })
}

/// Foreground masks predicted by `model` for each sample.
pub fn predict(model: &Model, samples: &[&Sample], unet: &UNetConfig) -> Result<Vec<Mask>> {
    let mut out = Vec::with_capacity(samples.len());
    for chunk in samples.chunks(PREDICT_BATCH) {
        let images: Vec<&Image> = chunk.iter().map(|s| &s.image).collect();
        let apexes: Vec<_> = chunk.iter().map(|s| s.apex).collect();
        let input = model_input(&images, &apexes, unet)?;
        let logits = model.forward(&input)?;
        if !logits.is_finite() {
            return Err(Error::NonFinite("network output".into()));
        }
        out.extend(predict_mask(&logits)?);
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct CvOutcome {
    pub split: FoldSplit,
    /// One record per image, sorted by id.
    pub records: Vec<MetricsRecord>,
    /// Ids each fold's model was trained on.
    pub train_ids: Vec<Vec<String>>,
    pub logs: Vec<TrainLog>,
    /// Final-epoch model of each fold.
    pub models: Vec<Model>,
    /// Held-out predictions, in the order of `records`.
    pub predictions: Vec<Mask>,
}

/// Image-level k-fold cross-validation: fold `f` trains a fresh model on the
/// other folds (training seed derived from `(train.seed, f)`) and evaluates
/// each of its own images once with the final-epoch weights.
pub fn cross_validate(
    dataset: &[Sample],
    train: &TrainConfig,
    unet: &UNetConfig,
    k: usize,
    split_seed: u64,
) -> Result<CvOutcome> {
    let ids: Vec<String> = dataset.iter().map(|s| s.id.clone()).collect();
    let split = kfold_split(&ids, k, split_seed)?;
    let variant = Variant::of(unet.coord_mode);
    let mut scored: Vec<(MetricsRecord, Mask)> = Vec::with_capacity(dataset.len());
    let mut train_ids = Vec::with_capacity(k);
    let mut logs = Vec::with_capacity(k);
    let mut models = Vec::with_capacity(k);
    for (f, held_out) in split.folds.iter().enumerate() {
        let held: BTreeSet<&str> = held_out.iter().map(String::as_str).collect();
        let (test, train_set): (Vec<&Sample>, Vec<&Sample>) =
            dataset.iter().partition(|s| held.contains(s.id.as_str()));
        let train_samples: Vec<Sample> = train_set.iter().map(|s| (*s).clone()).collect();
        let cfg = TrainConfig {
            seed: derive_seed(&[train.seed, f as u64]),
            ..train.clone()
        };
        let (model, log) = train_fold(&train_samples, &cfg, unet)?;
        let preds = predict(&model, &test, unet)?;
        for (s, pred) in test.iter().zip(preds) {
            scored.push((MetricsRecord::new(&s.id, variant, f, &pred, &s.mask)?, pred));
        }
        train_ids.push(train_samples.into_iter().map(|s| s.id).collect());
        logs.push(log);
        models.push(model);
    }
    scored.sort_by(|a, b| a.0.id.cmp(&b.0.id));
    let (records, predictions) = scored.into_iter().unzip();
    Ok(CvOutcome {
        split,
        records,
        train_ids,
        logs,
        models,
        predictions,
    })
}
