use std::path::Path;

use effseg::eval::{
    cross_validate, dsc, histogram_counts, histogram_csv, kfold_split, summarize_report, MetricsRecord, Variant,
};
use effseg::io::{load_dataset, load_sample, read_csv, read_meta, save_dataset, save_weights, write_csv};
use effseg::phantom::{generate_dataset, generate_depth_gated_dataset, simulate_observer, Sample};
use effseg::preproc::{fov_mask, preprocess_sample};
use effseg::train::{derive_seed, train_fold, TrainConfig, TrainLog};
use effseg::Mask;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::CliError;

#[derive(Debug, Serialize, Deserialize)]
struct ObserverRecord {
    id: String,
    dsc: f64,
}

pub fn phantom(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    let spec = cfg.spec();
    let samples = if spec.depth_gated {
        generate_depth_gated_dataset(cfg.count(), spec, cfg.seed)?
    } else {
        generate_dataset(cfg.count(), spec, cfg.seed)?
    };
    save_dataset(out, &samples)?;
    println!("wrote {} samples to {}", samples.len(), out.display());
    Ok(())
}

pub fn preprocess(cfg: &RunConfig, input: &Path, out: &Path) -> Result<(), CliError> {
    let spec = cfg.spec();
    let (geom, template) = (spec.fov(), spec.template());
    let mut cleaned = Vec::new();
    let mut log = Vec::new();
    let mut failures = 0;
    for row in read_meta(input)? {
        let result = load_sample(input, &row).and_then(|s| {
            preprocess_sample(&s, &geom, &template, cfg.preprocess.threshold, cfg.divisor())
        });
        match result {
            Ok((s, rec)) => {
                cleaned.push(s);
                log.push(rec);
            }
            Err(e) => {
                eprintln!("{}: {e}", row.id);
                failures += 1;
            }
        }
    }
    save_dataset(out, &cleaned)?;
    write_csv(&out.join("preproc_log.csv"), &log)?;
    println!("preprocessed {} samples into {}", cleaned.len(), out.display());
    if failures > 0 {
        return Err(CliError::Core(effseg::Error::Format(format!("{failures} samples failed"))));
    }
    Ok(())
}

fn write_train_log(path: &Path, log: &TrainLog) -> Result<(), CliError> {
    write_csv(path, &log.epochs)?;
    Ok(())
}

pub fn train(cfg: &RunConfig, dataset: &Path, fold: usize, coordconv: bool, out: &Path) -> Result<(), CliError> {
    let samples = load_dataset(dataset)?;
    let ids: Vec<String> = samples.iter().map(|s| s.id.clone()).collect();
    let split = kfold_split(&ids, cfg.eval.folds, cfg.seed)?;
    let held = split
        .folds
        .get(fold)
        .ok_or_else(|| CliError::Usage(format!("fold {fold} out of range 0..{}", split.k())))?;
    let train_set: Vec<Sample> = samples.into_iter().filter(|s| !held.contains(&s.id)).collect();
    // same seed as fold `fold` of the cv command
    let train_cfg = TrainConfig {
        seed: derive_seed(&[cfg.train.seed, fold as u64]),
        ..cfg.train.clone()
    };
    let unet = cfg.unet_for(coordconv);
    let (model, log) = train_fold(&train_set, &train_cfg, &unet)?;
    save_weights(&out.join("weights.efsg"), &model)?;
    write_train_log(&out.join("train_log.csv"), &log)?;
    let last = log.epochs.last().expect("at least one epoch");
    println!(
        "fold {fold} ({}): {} epochs, final loss {:.4}",
        Variant::of(unet.coord_mode).as_str(),
        log.epochs.len(),
        last.mean_loss
    );
    Ok(())
}

fn observer_records(cfg: &RunConfig, samples: &[Sample]) -> Result<Vec<ObserverRecord>, CliError> {
    let spec = cfg.spec();
    samples
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let (rows, cols) = s.mask.dims();
            let fov = if (rows, cols) == (spec.rows, spec.cols) {
                fov_mask(rows, cols, &spec.fov())?
            } else {
                // preprocessed frames are already cropped to the field of view
                Mask::from_fn(rows, cols, |_, _| true)
            };
            let other = simulate_observer(&s.mask, &fov, cfg.eval.observer_strength, derive_seed(&[cfg.seed, i as u64]))?;
            Ok(ObserverRecord {
                id: s.id.clone(),
                dsc: dsc(&other, &s.mask)?,
            })
        })
        .collect()
}

pub fn cv(cfg: &RunConfig, dataset: &Path, out: &Path) -> Result<(), CliError> {
    let samples = load_dataset(dataset)?;
    let mut records = Vec::new();
    for coordconv in [false, true] {
        let unet = cfg.unet_for(coordconv);
        let variant = Variant::of(unet.coord_mode);
        let outcome = cross_validate(&samples, &cfg.train, &unet, cfg.eval.folds, cfg.seed)?;
        for (f, log) in outcome.logs.iter().enumerate() {
            write_train_log(&out.join(format!("train_log_{}_fold{f}.csv", variant.as_str())), log)?;
        }
        records.extend(outcome.records);
    }
    write_csv(&out.join("metrics.csv"), &records)?;
    let observer = observer_records(cfg, &samples)?;
    write_csv(&out.join("interobserver.csv"), &observer)?;
    render(cfg, &records, &observer, out)
}

pub fn report(cfg: &RunConfig, metrics: &[std::path::PathBuf], interobserver: Option<&Path>, out: &Path) -> Result<(), CliError> {
    let mut records: Vec<MetricsRecord> = Vec::new();
    for p in metrics {
        records.extend(read_csv::<MetricsRecord>(p)?);
    }
    let default_path = metrics[0].parent().unwrap_or(Path::new(".")).join("interobserver.csv");
    let observer = match interobserver {
        Some(p) => read_csv(p)?,
        None if default_path.exists() => read_csv(&default_path)?,
        None => Vec::new(),
    };
    render(cfg, &records, &observer, out)
}

fn render(cfg: &RunConfig, records: &[MetricsRecord], observer: &[ObserverRecord], out: &Path) -> Result<(), CliError> {
    let (baseline, coordconv): (Vec<MetricsRecord>, Vec<MetricsRecord>) =
        records.iter().cloned().partition(|r| r.variant == Variant::Baseline);
    let inter: Vec<f64> = observer.iter().map(|r| r.dsc).collect();
    let report = summarize_report(&baseline, &coordconv, &inter)?;
    std::fs::write(out.join("report.txt"), &report.text)?;
    write_csv(&out.join("summary.csv"), &report.rows)?;
    for (variant, recs) in [(Variant::Baseline, &baseline), (Variant::Coordconv, &coordconv)] {
        let values: Vec<f64> = recs.iter().map(|r| r.dsc).collect();
        let counts = histogram_counts(&values, cfg.eval.histogram_bins, (0.0, 1.0))?;
        std::fs::write(
            out.join(format!("hist_{}.csv", variant.as_str())),
            histogram_csv(&counts, (0.0, 1.0)),
        )?;
    }
    print!("{}", report.text);
    Ok(())
}
