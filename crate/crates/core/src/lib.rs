//! Pleural effusion segmentation from ultrasound, end to end at desk scale.
//!
//! The crate is organised bottom-up:
//!
//! - [`numerics`]: a small tensor type, the differentiable layers a U-Net
//!   needs and the Nesterov SGD optimizer.
//! - [`net`]: the encoder-decoder network and coordinate input channels.
//! - [`phantom`]: synthetic ultrasound frames with ground truth, calipers and
//!   a simulated second observer.
//! - [`preproc`]: field-of-view masking, caliper detection and inpainting.
//! - [`train`]: Dice + cross-entropy loss, augmentation, LR schedule and the
//!   per-fold training loop.
//! - [`eval`]: overlap/area metrics, quartiles, k-fold protocol, Wilcoxon
//!   signed-rank test and report rendering.
//! - [`io`]: PGM images, the binary weights format and dataset layout.

pub mod error;
pub mod eval;
pub mod io;
pub mod net;
pub mod numerics;
pub mod phantom;
pub mod preproc;
pub mod train;

mod image;

pub use error::{Error, Result};
pub use image::{gaussian_blur, Image, Mask};
