//! Raw float raster files (`CDRAS1`).
//!
//! Layout, all multi-byte values little-endian:
//! - 16-byte header: 8-byte magic `CDRAS1` (NUL-padded), u16 width,
//!   u16 height, u16 channels, u16 reserved (zero)
//! - `width * height * channels` f32 values, row-major, channels
//!   interleaved per pixel

use std::fs;
use std::io::Write as _;
use std::path::Path;

use centerdepth_core::Raster;

use crate::error::PipelineError;

pub const MAGIC: [u8; 8] = *b"CDRAS1\0\0";
pub const HEADER_LEN: usize = 16;

pub fn encode(raster: &Raster) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + raster.data().len() * 4);
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&raster.width().to_le_bytes());
    out.extend_from_slice(&raster.height().to_le_bytes());
    out.extend_from_slice(&raster.channels().to_le_bytes());
    out.extend_from_slice(&0u16.to_le_bytes());
    for v in raster.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode(bytes: &[u8], origin: &Path) -> Result<Raster, PipelineError> {
    let malformed = |why: &str| PipelineError::MalformedRaster {
        path: origin.to_path_buf(),
        why: why.to_string(),
    };
    if bytes.len() < HEADER_LEN {
        return Err(malformed("shorter than the 16-byte header"));
    }
    if bytes[..8] != MAGIC {
        return Err(malformed("bad magic"));
    }
    let u16_at = |off: usize| u16::from_le_bytes([bytes[off], bytes[off + 1]]);
    let width = u16_at(8);
    let height = u16_at(10);
    let channels = u16_at(12);
    if u16_at(14) != 0 {
        return Err(malformed("reserved field must be zero"));
    }
    let expected = width as usize * height as usize * channels as usize;
    let payload = &bytes[HEADER_LEN..];
    if payload.len() != expected * 4 {
        return Err(malformed("payload length does not match header dimensions"));
    }
    let data: Vec<f32> = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    Raster::from_data(width, height, channels, data)
        .ok_or_else(|| malformed("inconsistent dimensions"))
}

pub fn write_file(path: &Path, raster: &Raster) -> Result<(), PipelineError> {
    let bytes = encode(raster);
    let mut f = fs::File::create(path).map_err(|e| PipelineError::io(path, e))?;
    f.write_all(&bytes).map_err(|e| PipelineError::io(path, e))?;
    Ok(())
}

pub fn read_file(path: &Path) -> Result<Raster, PipelineError> {
    let bytes = fs::read(path).map_err(|e| PipelineError::io(path, e))?;
    decode(&bytes, path)
}
