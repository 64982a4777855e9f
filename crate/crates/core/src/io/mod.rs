//! Persistence: binary PGM images, the weights file, the dataset layout
//! (`images/<id>.pgm`, `masks/<id>.pgm`, `meta.csv`) and CSV tables.

mod dataset;
mod pgm;
mod weights;

pub use dataset::{
    load_dataset, load_sample, read_csv, read_meta, save_dataset, write_csv, MetaRow,
};
pub use pgm::{decode_pgm, encode_pgm, read_image, read_mask, write_image, write_mask};
pub use weights::{
    decode_weights, encode_weights, load_weights, save_weights, WEIGHTS_MAGIC, WEIGHTS_VERSION,
};
