use std::path::Path;

use crate::{Error, Image, Mask, Result};

/// Binary PGM (P5) with maxval 255.
pub fn encode_pgm(rows: usize, cols: usize, pixels: &[u8]) -> Vec<u8> {
    let mut out = format!("P5\n{cols} {rows}\n255\n").into_bytes();
    out.extend_from_slice(pixels);
    out
}

/// Parses an 8-bit binary PGM, returning `(rows, cols, maxval, pixels)`.
pub fn decode_pgm(bytes: &[u8]) -> Result<(usize, usize, u8, Vec<u8>)> {
    let bad = |msg: &str| Error::Format(format!("PGM: {msg}"));
    let mut pos = 0;
    let mut token = || -> Result<String> {
        loop {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < bytes.len() && bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
                continue;
            }
            break;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(bad("truncated header"));
        }
        Ok(String::from_utf8_lossy(&bytes[start..pos]).into_owned())
    };
    if token()? != "P5" {
        return Err(bad("not a binary (P5) file"));
    }
    let num = |s: String| s.parse::<usize>().map_err(|_| bad("bad header number"));
    let cols = num(token()?)?;
    let rows = num(token()?)?;
    let maxval = num(token()?)?;
    if maxval == 0 || maxval > 255 {
        return Err(bad("only 8-bit files are supported"));
    }
    // exactly one whitespace byte separates the header from the raster
    let start = pos + 1;
    let n = rows * cols;
    if rows == 0 || cols == 0 || bytes.len() < start + n {
        return Err(bad("raster shorter than the header declares"));
    }
    Ok((rows, cols, maxval as u8, bytes[start..start + n].to_vec()))
}

fn quantize(v: f32) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

pub fn write_image(path: &Path, img: &Image) -> Result<()> {
    let pixels: Vec<u8> = img.data().iter().map(|&v| quantize(v)).collect();
    std::fs::write(path, encode_pgm(img.rows(), img.cols(), &pixels))?;
    Ok(())
}

/// Reads an image and scales it to `[0, 1]` by its maxval.
pub fn read_image(path: &Path) -> Result<Image> {
    let (rows, cols, maxval, px) = decode_pgm(&std::fs::read(path)?)?;
    Image::from_vec(
        rows,
        cols,
        px.iter().map(|&v| v as f32 / maxval as f32).collect(),
    )
}

/// Masks are stored as 0/255.
pub fn write_mask(path: &Path, mask: &Mask) -> Result<()> {
    let pixels: Vec<u8> = mask.data().iter().map(|&v| v * 255).collect();
    std::fs::write(path, encode_pgm(mask.rows(), mask.cols(), &pixels))?;
    Ok(())
}

/// Reads a mask; every pixel must be 0 or maxval.
pub fn read_mask(path: &Path) -> Result<Mask> {
    let (rows, cols, maxval, px) = decode_pgm(&std::fs::read(path)?)?;
    let bits = px
        .iter()
        .map(|&v| match v {
            0 => Ok(0),
            v if v == maxval => Ok(1),
            v => Err(Error::Format(format!(
                "{}: mask value {v} is neither 0 nor {maxval}",
                path.display()
            ))),
        })
        .collect::<Result<Vec<u8>>>()?;
    Mask::from_vec(rows, cols, bits)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_with_comment() {
        let mut bytes = b"P5\n# made by hand\n3 2\n255\n".to_vec();
        bytes.extend_from_slice(&[0, 1, 2, 3, 4, 5]);
        let (rows, cols, maxval, px) = decode_pgm(&bytes).unwrap();
        assert_eq!((rows, cols, maxval), (2, 3, 255));
        assert_eq!(px, vec![0, 1, 2, 3, 4, 5]);
    }

    #[test]
    fn rejects_truncated_and_ascii() {
        assert!(decode_pgm(b"P5\n3 2\n255\n\x00\x01").is_err());
        assert!(decode_pgm(b"P2\n1 1\n255\n0").is_err());
        assert!(decode_pgm(b"P5\n1 1\n65535\n\x00\x00").is_err());
    }

    #[test]
    fn encode_decode_round_trip() {
        let px: Vec<u8> = (0..12).collect();
        let (r, c, _, back) = decode_pgm(&encode_pgm(3, 4, &px)).unwrap();
        assert_eq!((r, c, back), (3, 4, px));
    }

    #[test]
    fn quantization_rounds() {
        assert_eq!(quantize(0.5), 128);
        assert_eq!(quantize(1.2), 255);
        assert_eq!(quantize(-0.1), 0);
    }
}
