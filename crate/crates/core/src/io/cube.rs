//! Raw band-sequential cube files.
//!
//! Layout (all integers little-endian):
//!
//! | offset | size | field                                   |
//! |-------:|-----:|-----------------------------------------|
//! | 0      | 4    | magic `PCS3`                            |
//! | 4      | 2    | version (1)                             |
//! | 6      | 1    | sample format: 0 u8, 1 u16le, 2 f64le   |
//! | 7      | 1    | interleave: 0 BSQ                       |
//! | 8      | 4    | rows                                    |
//! | 12     | 4    | cols                                    |
//! | 16     | 4    | bands                                   |
//! | 20     | 12   | reserved, zero                          |
//! | 32     |      | payload, band by band, each row-major   |
//!
//! Integer samples are scaled to [0, 1] by the format's full range; `f64le`
//! samples are taken as stored.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::signal::{Cube3D, ValueRange};

pub const CUBE_MAGIC: [u8; 4] = *b"PCS3";
pub const CUBE_VERSION: u16 = 1;
pub const CUBE_HEADER_LEN: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleFormat {
    U8,
    U16Le,
    F64Le,
}

impl SampleFormat {
    pub fn bytes_per_sample(self) -> usize {
        match self {
            SampleFormat::U8 => 1,
            SampleFormat::U16Le => 2,
            SampleFormat::F64Le => 8,
        }
    }

    fn code(self) -> u8 {
        match self {
            SampleFormat::U8 => 0,
            SampleFormat::U16Le => 1,
            SampleFormat::F64Le => 2,
        }
    }

    fn from_code(c: u8) -> Result<Self> {
        match c {
            0 => Ok(SampleFormat::U8),
            1 => Ok(SampleFormat::U16Le),
            2 => Ok(SampleFormat::F64Le),
            _ => Err(Error::Unsupported(format!("sample format code {c}"))),
        }
    }
}

impl std::str::FromStr for SampleFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "u8" => Ok(SampleFormat::U8),
            "u16" | "u16le" => Ok(SampleFormat::U16Le),
            "f64" | "f64le" => Ok(SampleFormat::F64Le),
            _ => Err(Error::Config(format!("unknown sample format '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Interleave {
    /// Band-sequential.
    #[default]
    Bsq,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CubeHeader {
    pub rows: usize,
    pub cols: usize,
    pub bands: usize,
    pub sample_format: SampleFormat,
    pub interleave: Interleave,
}

impl CubeHeader {
    pub fn new(rows: usize, cols: usize, bands: usize, sample_format: SampleFormat) -> Self {
        Self {
            rows,
            cols,
            bands,
            sample_format,
            interleave: Interleave::Bsq,
        }
    }

    pub fn payload_len(&self) -> usize {
        self.rows * self.cols * self.bands * self.sample_format.bytes_per_sample()
    }

    pub fn to_bytes(&self) -> Result<[u8; CUBE_HEADER_LEN]> {
        let dim = |v: usize, what: &str| {
            u32::try_from(v).map_err(|_| Error::Unsupported(format!("{what} = {v} exceeds u32")))
        };
        let mut h = [0u8; CUBE_HEADER_LEN];
        h[..4].copy_from_slice(&CUBE_MAGIC);
        h[4..6].copy_from_slice(&CUBE_VERSION.to_le_bytes());
        h[6] = self.sample_format.code();
        h[7] = 0;
        h[8..12].copy_from_slice(&dim(self.rows, "rows")?.to_le_bytes());
        h[12..16].copy_from_slice(&dim(self.cols, "cols")?.to_le_bytes());
        h[16..20].copy_from_slice(&dim(self.bands, "bands")?.to_le_bytes());
        Ok(h)
    }

    pub fn parse(h: &[u8]) -> Result<Self> {
        if h.len() < CUBE_HEADER_LEN {
            return Err(Error::Format(format!("cube header needs {CUBE_HEADER_LEN} bytes, got {}", h.len())));
        }
        if h[..4] != CUBE_MAGIC {
            return Err(Error::Format("bad cube magic".into()));
        }
        let version = u16::from_le_bytes([h[4], h[5]]);
        if version != CUBE_VERSION {
            return Err(Error::Unsupported(format!("cube file version {version}")));
        }
        let sample_format = SampleFormat::from_code(h[6])?;
        if h[7] != 0 {
            return Err(Error::Unsupported(format!("interleave code {} (only BSQ)", h[7])));
        }
        let u = |k: usize| u32::from_le_bytes([h[k], h[k + 1], h[k + 2], h[k + 3]]) as usize;
        Ok(Self::new(u(8), u(12), u(16), sample_format))
    }
}

/// Read a cube file with its own header.
pub fn load_cube<T: Real>(path: impl AsRef<Path>) -> Result<Cube3D<T>> {
    read_cube(File::open(path)?)
}

pub fn read_cube<T: Real, R: Read>(mut r: R) -> Result<Cube3D<T>> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    let header = CubeHeader::parse(&bytes)?;
    decode(&header, &bytes[CUBE_HEADER_LEN..])
}

/// Read a headerless BSQ payload described by `header`.
pub fn load_raw_cube<T: Real>(path: impl AsRef<Path>, header: &CubeHeader) -> Result<Cube3D<T>> {
    let bytes = std::fs::read(path)?;
    decode(header, &bytes)
}

fn decode<T: Real>(header: &CubeHeader, payload: &[u8]) -> Result<Cube3D<T>> {
    let CubeHeader { rows, cols, bands, .. } = *header;
    if rows == 0 || cols == 0 || bands == 0 {
        return Err(Error::Format(format!("empty cube {rows}x{cols}x{bands}")));
    }
    if payload.len() != header.payload_len() {
        return Err(Error::Format(format!(
            "payload has {} bytes, a {rows}x{cols}x{bands} {:?} cube needs {}",
            payload.len(),
            header.sample_format,
            header.payload_len()
        )));
    }
    let sample = |k: usize| -> f64 {
        match header.sample_format {
            SampleFormat::U8 => payload[k] as f64 / 255.0,
            SampleFormat::U16Le => u16::from_le_bytes([payload[2 * k], payload[2 * k + 1]]) as f64 / 65535.0,
            SampleFormat::F64Le => {
                let mut b = [0u8; 8];
                b.copy_from_slice(&payload[8 * k..8 * k + 8]);
                f64::from_le_bytes(b)
            }
        }
    };
    let mut samples = vec![T::zero(); rows * cols * bands];
    let mut k = 0;
    for b in 0..bands {
        for r in 0..rows {
            for c in 0..cols {
                samples[r + rows * (c + cols * b)] = T::of(sample(k));
                k += 1;
            }
        }
    }
    let mut cube = Cube3D::from_band_vects(rows, cols, bands, samples)?;
    cube.value_range = ValueRange::UNIT;
    Ok(cube)
}

/// Write `cube` with a header. Integer formats clamp to [0, 1] and round.
pub fn save_cube<T: Real>(cube: &Cube3D<T>, path: impl AsRef<Path>, format: SampleFormat) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_cube(cube, &mut w, format)?;
    w.flush()?;
    Ok(())
}

pub fn write_cube<T: Real, W: Write>(cube: &Cube3D<T>, mut w: W, format: SampleFormat) -> Result<()> {
    let (rows, cols, bands) = cube.shape();
    let header = CubeHeader::new(rows, cols, bands, format);
    w.write_all(&header.to_bytes()?)?;
    let mut out = Vec::with_capacity(header.payload_len());
    for b in 0..bands {
        for r in 0..rows {
            for c in 0..cols {
                let v = cube.get(r, c, b).to_f64_lossy();
                match format {
                    SampleFormat::U8 => out.push((v.clamp(0.0, 1.0) * 255.0).round() as u8),
                    SampleFormat::U16Le => {
                        let q = (v.clamp(0.0, 1.0) * 65535.0).round() as u16;
                        out.extend_from_slice(&q.to_le_bytes());
                    }
                    SampleFormat::F64Le => out.extend_from_slice(&v.to_le_bytes()),
                }
            }
        }
    }
    w.write_all(&out)?;
    Ok(())
}
