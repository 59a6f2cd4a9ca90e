//! Binary grid files for received signals and radio-map magnitudes.
//!
//! Layout (little endian): 4-byte magic (`LISC` complex, `LISR` real),
//! `u32` version, `u32 n_x`, `u32 n_y`, `f64` frequency, `f64` per-snapshot
//! noise variance, `u32` snapshot count, `f64` element spacing, then the
//! row-major payload. Complex payloads interleave real and imaginary parts.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::lis::ReceivedSignal;

pub const COMPLEX_MAGIC: &[u8; 4] = b"LISC";
pub const REAL_MAGIC: &[u8; 4] = b"LISR";
pub const FORMAT_VERSION: u32 = 1;
const HEADER_LEN: usize = 4 + 4 + 4 + 4 + 8 + 8 + 4 + 8;

/// Metadata stored alongside a real-valued grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridHeader {
    pub frequency: f64,
    pub sigma2: f64,
    pub s_count: u32,
    pub spacing: f64,
}

impl GridHeader {
    pub fn of(signal: &ReceivedSignal) -> Self {
        Self {
            frequency: signal.frequency,
            sigma2: signal.sigma2,
            s_count: signal.s_count,
            spacing: signal.spacing,
        }
    }
}

fn write_header(out: &mut impl Write, magic: &[u8; 4], nx: usize, ny: usize, h: &GridHeader) -> Result<()> {
    let mut buf = Vec::with_capacity(HEADER_LEN);
    buf.extend_from_slice(magic);
    buf.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    buf.extend_from_slice(&(nx as u32).to_le_bytes());
    buf.extend_from_slice(&(ny as u32).to_le_bytes());
    buf.extend_from_slice(&h.frequency.to_le_bytes());
    buf.extend_from_slice(&h.sigma2.to_le_bytes());
    buf.extend_from_slice(&h.s_count.to_le_bytes());
    buf.extend_from_slice(&h.spacing.to_le_bytes());
    out.write_all(&buf)?;
    Ok(())
}

fn read_grid(input: &mut impl Read, origin: &Path, magic: &[u8; 4]) -> Result<(usize, usize, GridHeader, Vec<f64>)> {
    let bad = |reason: String| Error::Format {
        path: origin.to_path_buf(),
        reason,
    };
    let mut head = [0u8; HEADER_LEN];
    input
        .read_exact(&mut head)
        .map_err(|_| bad("truncated header".into()))?;
    if &head[..4] != magic {
        return Err(bad(format!("expected magic {:?}", String::from_utf8_lossy(magic))));
    }
    let u32_at = |o: usize| u32::from_le_bytes(head[o..o + 4].try_into().unwrap());
    let f64_at = |o: usize| f64::from_le_bytes(head[o..o + 8].try_into().unwrap());
    let version = u32_at(4);
    if version != FORMAT_VERSION {
        return Err(bad(format!("unsupported version {version}")));
    }
    let (nx, ny) = (u32_at(8) as usize, u32_at(12) as usize);
    let header = GridHeader {
        frequency: f64_at(16),
        sigma2: f64_at(24),
        s_count: u32_at(32),
        spacing: f64_at(36),
    };
    let per = if magic == COMPLEX_MAGIC { 2 } else { 1 };
    let mut payload = Vec::new();
    input.read_to_end(&mut payload)?;
    if payload.len() != 8 * per * nx * ny {
        return Err(bad(format!(
            "payload is {} bytes, header implies {}",
            payload.len(),
            8 * per * nx * ny
        )));
    }
    let values = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok((nx, ny, header, values))
}

pub fn write_signal(signal: &ReceivedSignal, mut out: impl Write) -> Result<()> {
    let v = &signal.values;
    write_header(&mut out, COMPLEX_MAGIC, v.nx(), v.ny(), &GridHeader::of(signal))?;
    let mut buf = Vec::with_capacity(16 * v.len());
    for c in v.as_slice() {
        buf.extend_from_slice(&c.re.to_le_bytes());
        buf.extend_from_slice(&c.im.to_le_bytes());
    }
    out.write_all(&buf)?;
    Ok(())
}

pub fn read_signal(mut input: impl Read, origin: &Path) -> Result<ReceivedSignal> {
    let (nx, ny, h, raw) = read_grid(&mut input, origin, COMPLEX_MAGIC)?;
    let data = raw.chunks_exact(2).map(|p| Complex64::new(p[0], p[1])).collect();
    Ok(ReceivedSignal {
        values: Grid::from_vec(nx, ny, data),
        sigma2: h.sigma2,
        s_count: h.s_count,
        frequency: h.frequency,
        spacing: h.spacing,
    })
}

pub fn save_signal(signal: &ReceivedSignal, path: &Path) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    write_signal(signal, &mut out)?;
    out.flush()?;
    Ok(())
}

pub fn load_signal(path: &Path) -> Result<ReceivedSignal> {
    read_signal(BufReader::new(File::open(path)?), path)
}

pub fn write_magnitude(values: &Grid<f64>, header: &GridHeader, mut out: impl Write) -> Result<()> {
    write_header(&mut out, REAL_MAGIC, values.nx(), values.ny(), header)?;
    let mut buf = Vec::with_capacity(8 * values.len());
    for v in values.as_slice() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    out.write_all(&buf)?;
    Ok(())
}

pub fn read_magnitude(mut input: impl Read, origin: &Path) -> Result<(Grid<f64>, GridHeader)> {
    let (nx, ny, h, raw) = read_grid(&mut input, origin, REAL_MAGIC)?;
    Ok((Grid::from_vec(nx, ny, raw), h))
}

pub fn save_magnitude(values: &Grid<f64>, header: &GridHeader, path: &Path) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    write_magnitude(values, header, &mut out)?;
    out.flush()?;
    Ok(())
}

pub fn load_magnitude(path: &Path) -> Result<(Grid<f64>, GridHeader)> {
    read_magnitude(BufReader::new(File::open(path)?), path)
}
