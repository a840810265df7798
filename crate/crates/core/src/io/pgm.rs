//! Binary (P5) graymaps, 8 or 16 bits per sample.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::signal::{Image2D, ValueRange};

/// Load a P5 graymap with samples scaled to [0, 1] by its maxval.
pub fn load_image<T: Real>(path: impl AsRef<Path>) -> Result<Image2D<T>> {
    read_pgm(BufReader::new(File::open(path)?))
}

pub fn read_pgm<T: Real, R: Read>(mut r: R) -> Result<Image2D<T>> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    let mut pos = 0;
    if bytes.get(..2) != Some(b"P5") {
        return Err(Error::Format("not a binary graymap (expected P5)".into()));
    }
    pos += 2;
    let width = header_number(&bytes, &mut pos)?;
    let height = header_number(&bytes, &mut pos)?;
    let maxval = header_number(&bytes, &mut pos)?;
    // exactly one whitespace byte separates the header from the raster
    match bytes.get(pos) {
        Some(b) if b.is_ascii_whitespace() => pos += 1,
        _ => return Err(Error::Format("missing whitespace after maxval".into())),
    }
    if width == 0 || height == 0 {
        return Err(Error::Format(format!("empty raster {width}x{height}")));
    }
    if maxval == 0 || maxval > 65535 {
        return Err(Error::Unsupported(format!("maxval {maxval}")));
    }
    let depth = if maxval < 256 { 1 } else { 2 };
    let need = width * height * depth;
    let raster = &bytes[pos..];
    if raster.len() < need {
        return Err(Error::Format(format!(
            "raster has {} bytes, header implies {need}",
            raster.len()
        )));
    }
    let scale = 1.0 / maxval as f64;
    let samples = (0..width * height)
        .map(|k| {
            let v = if depth == 1 {
                raster[k] as f64
            } else {
                u16::from_be_bytes([raster[2 * k], raster[2 * k + 1]]) as f64
            };
            T::of(v * scale)
        })
        .collect();
    let mut im = Image2D::from_rows(height, width, samples)?;
    im.value_range = ValueRange::UNIT;
    Ok(im)
}

fn header_number(bytes: &[u8], pos: &mut usize) -> Result<usize> {
    loop {
        match bytes.get(*pos) {
            Some(b'#') => {
                while let Some(&b) = bytes.get(*pos) {
                    *pos += 1;
                    if b == b'\n' || b == b'\r' {
                        break;
                    }
                }
            }
            Some(b) if b.is_ascii_whitespace() => *pos += 1,
            Some(_) => break,
            None => return Err(Error::Format("truncated header".into())),
        }
    }
    let start = *pos;
    while bytes.get(*pos).is_some_and(u8::is_ascii_digit) {
        *pos += 1;
    }
    std::str::from_utf8(&bytes[start..*pos])
        .ok()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::Format(format!("bad header field at byte {start}")))
}

/// Save as P5 with the given maxval (≤ 255 writes 8-bit samples). Samples are
/// clamped to [0, 1] and rounded.
pub fn save_image<T: Real>(im: &Image2D<T>, path: impl AsRef<Path>, maxval: u16) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_pgm(im, &mut w, maxval)?;
    w.flush()?;
    Ok(())
}

pub fn write_pgm<T: Real, W: Write>(im: &Image2D<T>, mut w: W, maxval: u16) -> Result<()> {
    if maxval == 0 {
        return Err(Error::Config("maxval must be positive".into()));
    }
    let (rows, cols) = im.shape();
    write!(w, "P5\n{cols} {rows}\n{maxval}\n")?;
    let mut out = Vec::with_capacity(rows * cols * 2);
    for &v in im.as_slice() {
        let q = (v.to_f64_lossy().clamp(0.0, 1.0) * maxval as f64).round() as u16;
        if maxval < 256 {
            out.push(q as u8);
        } else {
            out.extend_from_slice(&q.to_be_bytes());
        }
    }
    w.write_all(&out)?;
    Ok(())
}
