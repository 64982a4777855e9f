use std::path::Path;

use serde::{de::DeserializeOwned, Deserialize, Serialize};

use super::pgm::{read_image, read_mask, write_image, write_mask};
use crate::net::Apex;
use crate::phantom::{Probe, Sample};
use crate::{Error, Result};

/// One row of `meta.csv`. Linear probes leave the apex empty; frames
/// without calipers leave the cross columns empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetaRow {
    pub id: String,
    pub probe: Probe,
    pub apex_row: Option<f64>,
    pub apex_col: Option<f64>,
    pub cross_top_row: Option<usize>,
    pub cross_top_col: Option<usize>,
    pub cross_bottom_row: Option<usize>,
    pub cross_bottom_col: Option<usize>,
}

impl MetaRow {
    pub fn of(sample: &Sample) -> Self {
        let top = sample.crosses.first();
        let bottom = sample.crosses.get(1);
        Self {
            id: sample.id.clone(),
            probe: sample.probe,
            apex_row: sample.apex.map(|a| a.row),
            apex_col: sample.apex.map(|a| a.col),
            cross_top_row: top.map(|p| p.0),
            cross_top_col: top.map(|p| p.1),
            cross_bottom_row: bottom.map(|p| p.0),
            cross_bottom_col: bottom.map(|p| p.1),
        }
    }

    pub fn apex(&self) -> Result<Option<Apex>> {
        match (self.apex_row, self.apex_col) {
            (Some(r), Some(c)) => Ok(Some(Apex::new(r, c))),
            (None, None) => Ok(None),
            _ => Err(Error::Format(format!(
                "{}: apex needs both row and col",
                self.id
            ))),
        }
    }

    pub fn crosses(&self) -> Result<Vec<(usize, usize)>> {
        let mut out = Vec::new();
        for (r, c) in [
            (self.cross_top_row, self.cross_top_col),
            (self.cross_bottom_row, self.cross_bottom_col),
        ] {
            match (r, c) {
                (Some(r), Some(c)) => out.push((r, c)),
                (None, None) => {}
                _ => {
                    return Err(Error::Format(format!(
                        "{}: cross needs both row and col",
                        self.id
                    )))
                }
            }
        }
        Ok(out)
    }
}

/// Writes `rows` with a header in field order.
pub fn write_csv<R: Serialize>(path: &Path, rows: &[R]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_error)?;
    for r in rows {
        w.serialize(r).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads every row; a file with no data rows is an error.
pub fn read_csv<R: DeserializeOwned>(path: &Path) -> Result<Vec<R>> {
    let mut r = csv::Reader::from_path(path).map_err(csv_error)?;
    let rows = r
        .deserialize()
        .collect::<std::result::Result<Vec<R>, _>>()
        .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    if rows.is_empty() {
        return Err(Error::Empty(format!("{} has no rows", path.display())));
    }
    Ok(rows)
}

fn csv_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Format(format!("{other:?}")),
    }
}

/// Writes `images/<id>.pgm`, `masks/<id>.pgm` and `meta.csv` under `dir`.
pub fn save_dataset(dir: &Path, samples: &[Sample]) -> Result<()> {
    std::fs::create_dir_all(dir.join("images"))?;
    std::fs::create_dir_all(dir.join("masks"))?;
    for s in samples {
        write_image(&dir.join("images").join(format!("{}.pgm", s.id)), &s.image)?;
        write_mask(&dir.join("masks").join(format!("{}.pgm", s.id)), &s.mask)?;
    }
    let meta: Vec<MetaRow> = samples.iter().map(MetaRow::of).collect();
    write_csv(&dir.join("meta.csv"), &meta)
}

pub fn read_meta(dir: &Path) -> Result<Vec<MetaRow>> {
    read_csv(&dir.join("meta.csv"))
}

/// Loads the sample described by one meta row.
pub fn load_sample(dir: &Path, row: &MetaRow) -> Result<Sample> {
    let image = read_image(&dir.join("images").join(format!("{}.pgm", row.id)))?;
    let mask = read_mask(&dir.join("masks").join(format!("{}.pgm", row.id)))?;
    if image.dims() != mask.dims() {
        return Err(Error::shape(format!(
            "{}: image {:?} and mask {:?} differ in size",
            row.id,
            image.dims(),
            mask.dims()
        )));
    }
    Ok(Sample {
        id: row.id.clone(),
        image,
        mask,
        probe: row.probe,
        apex: row.apex()?,
        crosses: row.crosses()?,
    })
}

/// Loads every sample listed in `meta.csv`, in file order.
pub fn load_dataset(dir: &Path) -> Result<Vec<Sample>> {
    read_meta(dir)?
        .iter()
        .map(|row| load_sample(dir, row))
        .collect()
}
