//! File formats.
//!
//! Histories are stored as a 32-byte header followed by little-endian `f64`
//! values, frame-major with x fastest:
//!
//! | bytes  | field                                  |
//! |--------|----------------------------------------|
//! | 0..4   | magic `LWAV`                           |
//! | 4..6   | version (u16, currently 1)             |
//! | 6..8   | dimension d (u16)                      |
//! | 8..12  | extent N (u32)                         |
//! | 12..16 | frame count K (u32)                    |
//! | 16     | band: 0 zeromax, 1 central, 255 none   |
//! | 17..32 | zero padding                           |
//!
//! Spatial spectra from the wide-precision path use the same header with
//! magic `LWSP` and `(re, im)` pairs instead of reals.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::filter::FilterBand;
use crate::grid::{GridShape, History};
use crate::spectral::SpatialSpectra;

pub const HEADER_LEN: usize = 32;
pub const VERSION: u16 = 1;
const MAGIC_HISTORY: &[u8; 4] = b"LWAV";
const MAGIC_SPECTRA: &[u8; 4] = b"LWSP";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Header {
    pub magic: [u8; 4],
    pub dim: u16,
    pub extent: u32,
    pub frames: u32,
    pub band: Option<FilterBand>,
}

impl Header {
    pub fn to_bytes(&self) -> [u8; HEADER_LEN] {
        let mut b = [0u8; HEADER_LEN];
        b[0..4].copy_from_slice(&self.magic);
        b[4..6].copy_from_slice(&VERSION.to_le_bytes());
        b[6..8].copy_from_slice(&self.dim.to_le_bytes());
        b[8..12].copy_from_slice(&self.extent.to_le_bytes());
        b[12..16].copy_from_slice(&self.frames.to_le_bytes());
        b[16] = match self.band {
            Some(FilterBand::ZeroMax) => 0,
            Some(FilterBand::Central) => 1,
            None => 255,
        };
        b
    }

    pub fn parse(b: &[u8]) -> Result<Self> {
        if b.len() < HEADER_LEN {
            return Err(Error::format(b.len() as u64, "file shorter than the 32-byte header"));
        }
        let mut magic = [0u8; 4];
        magic.copy_from_slice(&b[0..4]);
        if &magic != MAGIC_HISTORY && &magic != MAGIC_SPECTRA {
            return Err(Error::format(0, "bad magic, expected LWAV or LWSP"));
        }
        let version = u16::from_le_bytes([b[4], b[5]]);
        if version != VERSION {
            return Err(Error::format(4, format!("unsupported version {version}")));
        }
        let dim = u16::from_le_bytes([b[6], b[7]]);
        let extent = u32::from_le_bytes(b[8..12].try_into().unwrap());
        let frames = u32::from_le_bytes(b[12..16].try_into().unwrap());
        let band = match b[16] {
            0 => Some(FilterBand::ZeroMax),
            1 => Some(FilterBand::Central),
            255 => None,
            other => return Err(Error::format(16, format!("unknown band code {other}"))),
        };
        if let Some(i) = b[17..HEADER_LEN].iter().position(|&x| x != 0) {
            return Err(Error::format(17 + i as u64, "non-zero header padding"));
        }
        if GridShape::new(dim as usize, extent as usize).is_err() {
            return Err(Error::format(6, format!("invalid lattice d={dim} N={extent}")));
        }
        Ok(Header {
            magic,
            dim,
            extent,
            frames,
            band,
        })
    }

    pub fn shape(&self) -> GridShape {
        GridShape::new(self.dim as usize, self.extent as usize).expect("validated in parse")
    }

    pub fn is_spectra(&self) -> bool {
        &self.magic == MAGIC_SPECTRA
    }
}

fn header_for(shape: GridShape, frames: usize, band: Option<FilterBand>, magic: &[u8; 4]) -> Result<Header> {
    let frames = u32::try_from(frames).map_err(|_| Error::domain("too many frames for the file format"))?;
    let extent = u32::try_from(shape.extent()).map_err(|_| Error::domain("extent too large for the file format"))?;
    Ok(Header {
        magic: *magic,
        dim: shape.dim() as u16,
        extent,
        frames,
        band,
    })
}

/// Serializes a history to bytes.
pub fn history_to_bytes(h: &History) -> Result<Vec<u8>> {
    let head = header_for(h.shape(), h.len(), h.band(), MAGIC_HISTORY)?;
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * h.data().len());
    out.extend_from_slice(&head.to_bytes());
    for v in h.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

fn payload_check(head: &Header, bytes: &[u8], per_value: usize) -> Result<usize> {
    let count = head.shape().sites() as u64 * head.frames as u64;
    let want = HEADER_LEN as u64 + count * per_value as u64;
    if (bytes.len() as u64) < want {
        return Err(Error::format(
            bytes.len() as u64,
            format!("truncated payload, expected {want} bytes in total"),
        ));
    }
    if (bytes.len() as u64) > want {
        return Err(Error::format(want, "trailing bytes after payload"));
    }
    Ok(count as usize)
}

pub fn history_from_bytes(bytes: &[u8]) -> Result<History> {
    let head = Header::parse(bytes)?;
    if head.is_spectra() {
        return Err(Error::format(0, "file holds spatial spectra, not a history"));
    }
    let count = payload_check(&head, bytes, 8)?;
    let mut data = Vec::with_capacity(count);
    for (i, chunk) in bytes[HEADER_LEN..].chunks_exact(8).enumerate() {
        let v = f64::from_le_bytes(chunk.try_into().unwrap());
        if !v.is_finite() {
            return Err(Error::format((HEADER_LEN + 8 * i) as u64, "non-finite value"));
        }
        data.push(v);
    }
    History::from_data(head.shape(), head.band, data, head.frames as usize)
}

pub fn spectra_to_bytes(s: &SpatialSpectra) -> Result<Vec<u8>> {
    let head = header_for(s.shape(), s.frames(), s.band(), MAGIC_SPECTRA)?;
    let mut out = Vec::with_capacity(HEADER_LEN + 16 * s.data().len());
    out.extend_from_slice(&head.to_bytes());
    for v in s.data() {
        out.extend_from_slice(&v.re.to_le_bytes());
        out.extend_from_slice(&v.im.to_le_bytes());
    }
    Ok(out)
}

pub fn spectra_from_bytes(bytes: &[u8]) -> Result<SpatialSpectra> {
    let head = Header::parse(bytes)?;
    if !head.is_spectra() {
        return Err(Error::format(0, "file holds a history, not spatial spectra"));
    }
    let count = payload_check(&head, bytes, 16)?;
    let mut data = Vec::with_capacity(count);
    for (i, chunk) in bytes[HEADER_LEN..].chunks_exact(16).enumerate() {
        let re = f64::from_le_bytes(chunk[..8].try_into().unwrap());
        let im = f64::from_le_bytes(chunk[8..].try_into().unwrap());
        if !re.is_finite() || !im.is_finite() {
            return Err(Error::format((HEADER_LEN + 16 * i) as u64, "non-finite value"));
        }
        data.push(Complex64::new(re, im));
    }
    SpatialSpectra::new(head.shape(), head.band, head.frames as usize, data)
}

/// Contents of a file that may hold either format.
pub enum Recording {
    History(History),
    Spectra(SpatialSpectra),
}

pub fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    File::open(path)
        .and_then(|mut f| f.read_to_end(&mut buf))
        .map_err(|e| Error::io(path, e))?;
    Ok(buf)
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn read_recording(path: &Path) -> Result<Recording> {
    let bytes = read_bytes(path)?;
    let head = Header::parse(&bytes)?;
    if head.is_spectra() {
        spectra_from_bytes(&bytes).map(Recording::Spectra)
    } else {
        history_from_bytes(&bytes).map(Recording::History)
    }
}

pub fn write_history(path: &Path, h: &History) -> Result<()> {
    write_bytes(path, &history_to_bytes(h)?)
}

pub fn read_history(path: &Path) -> Result<History> {
    history_from_bytes(&read_bytes(path)?)
}

pub fn write_spectra(path: &Path, s: &SpatialSpectra) -> Result<()> {
    write_bytes(path, &spectra_to_bytes(s)?)
}

/// Writes `header` then one line per row, each row's cells joined by commas.
pub fn write_csv<R, I, C>(path: &Path, header: &str, rows: R) -> Result<()>
where
    R: IntoIterator<Item = I>,
    I: IntoIterator<Item = C>,
    C: std::fmt::Display,
{
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let res = (|| -> std::io::Result<()> {
        writeln!(w, "{header}")?;
        for row in rows {
            let cells: Vec<String> = row.into_iter().map(|c| c.to_string()).collect();
            writeln!(w, "{}", cells.join(","))?;
        }
        w.flush()
    })();
    res.map_err(|e| Error::io(path, e))
}

/// Bit depth of a PGM heatmap.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PgmDepth {
    Eight,
    Sixteen,
}

/// Encodes a row-major `width × height` image of non-negative magnitudes as
/// a binary PGM. Values are normalized to the maximum and log-scaled over
/// `decades` orders of magnitude.
pub fn pgm_bytes(values: &[f64], width: usize, height: usize, depth: PgmDepth, decades: f64) -> Vec<u8> {
    assert_eq!(values.len(), width * height);
    let maxval: u32 = match depth {
        PgmDepth::Eight => 255,
        PgmDepth::Sixteen => 65535,
    };
    let peak = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut out = format!("P5\n{width} {height}\n{maxval}\n").into_bytes();
    for &v in values {
        let level = if peak > 0.0 && v.abs() > 0.0 {
            let db = (v.abs() / peak).log10() / decades + 1.0;
            db.clamp(0.0, 1.0)
        } else {
            0.0
        };
        let q = (level * maxval as f64).round() as u32;
        match depth {
            PgmDepth::Eight => out.push(q as u8),
            PgmDepth::Sixteen => out.extend_from_slice(&(q as u16).to_be_bytes()),
        }
    }
    out
}
