use super::TrainConfig;
use crate::{Error, Result};

/// Polynomial decay: `lr0 * (1 - epoch / epochs) ^ exponent`.
pub fn lr_poly(epoch: usize, config: &TrainConfig) -> Result<f64> {
    if epoch >= config.epochs {
        return Err(Error::config(format!(
            "epoch {epoch} outside 0..{}",
            config.epochs
        )));
    }
    let frac = 1.0 - epoch as f64 / config.epochs as f64;
    Ok(config.lr0 * frac.powf(config.poly_exponent))
}
