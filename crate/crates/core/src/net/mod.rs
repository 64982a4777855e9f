//! The encoder-decoder segmentation network and its coordinate inputs.

mod config;
mod coords;
mod unet;

pub use config::{CoordMode, UNetConfig, NUM_CLASSES};
pub use coords::{add_coord_channels, Apex};
pub use unet::{build_model, predict_mask, Gradients, Model, Param, Tape};
