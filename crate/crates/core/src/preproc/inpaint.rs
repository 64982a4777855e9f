use crate::{Error, Image, Mask, Result};

/// Stop once no hole pixel moves by more than this in one sweep.
pub const INPAINT_TOL: f64 = 1e-4;
pub const INPAINT_MAX_ITERS: usize = 10_000;

/// Harmonic fill: hole pixels are repeatedly replaced by the mean of their
/// in-image 4-neighbours (Gauss-Seidel sweeps in raster order) until the
/// largest change in a sweep drops below [`INPAINT_TOL`], or after
/// [`INPAINT_MAX_ITERS`] sweeps. Hole pixels start at the mean of the known
/// pixels bordering the hole, so the result depends only on pixels outside
/// the hole and a second pass reproduces it exactly. Pixels outside the hole
/// are returned bit-unchanged.
pub fn inpaint(image: &Image, hole: &Mask) -> Result<Image> {
    if image.dims() != hole.dims() {
        return Err(Error::shape(format!(
            "image {:?} vs hole {:?}",
            image.dims(),
            hole.dims()
        )));
    }
    let (rows, cols) = image.dims();
    if hole.area() == rows * cols {
        return Err(Error::config("hole covers the whole image"));
    }
    let pixels: Vec<usize> = (0..rows * cols).filter(|&i| hole.data()[i] != 0).collect();
    if pixels.is_empty() {
        return Ok(image.clone());
    }
    let mut work: Vec<f64> = image.data().iter().map(|&v| v as f64).collect();
    let (mut rim_sum, mut rim_n) = (0.0, 0usize);
    for i in 0..rows * cols {
        if hole.data()[i] != 0 {
            continue;
        }
        let (r, c) = (i / cols, i % cols);
        let touches = (r > 0 && hole.get(r - 1, c))
            || (r + 1 < rows && hole.get(r + 1, c))
            || (c > 0 && hole.get(r, c - 1))
            || (c + 1 < cols && hole.get(r, c + 1));
        if touches {
            rim_sum += work[i];
            rim_n += 1;
        }
    }
    let start = rim_sum / rim_n as f64;
    for &i in &pixels {
        work[i] = start;
    }
    for _ in 0..INPAINT_MAX_ITERS {
        let mut max_change: f64 = 0.0;
        for &i in &pixels {
            let (r, c) = (i / cols, i % cols);
            let (mut sum, mut n) = (0.0, 0.0);
            if r > 0 {
                sum += work[i - cols];
                n += 1.0;
            }
            if r + 1 < rows {
                sum += work[i + cols];
                n += 1.0;
            }
            if c > 0 {
                sum += work[i - 1];
                n += 1.0;
            }
            if c + 1 < cols {
                sum += work[i + 1];
                n += 1.0;
            }
            let v = sum / n;
            max_change = max_change.max((v - work[i]).abs());
            work[i] = v;
        }
        if max_change < INPAINT_TOL {
            break;
        }
    }
    let mut out = image.clone();
    for &i in &pixels {
        out.data_mut()[i] = work[i] as f32;
    }
    Ok(out)
}
