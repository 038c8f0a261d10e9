//! Row-major multi-channel float raster, the in-memory form of the
//! `.f32` frame files.

use alloc::vec;
use alloc::vec::Vec;

/// Dense `width x height x channels` raster of `f32` values, row-major with
/// interleaved channels. Storage is `f32` to match the on-disk format;
/// numeric work reads values out as `f64`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Raster {
    width: u16,
    height: u16,
    channels: u16,
    data: Vec<f32>,
}

impl Raster {
    /// Raster filled with a constant value.
    pub fn filled(width: u16, height: u16, channels: u16, value: f32) -> Self {
        let len = width as usize * height as usize * channels as usize;
        Self {
            width,
            height,
            channels,
            data: vec![value; len],
        }
    }

    pub fn zeros(width: u16, height: u16, channels: u16) -> Self {
        Self::filled(width, height, channels, 0.0)
    }

    /// Wraps an existing buffer. Returns `None` when the buffer length does
    /// not match `width * height * channels`.
    pub fn from_data(width: u16, height: u16, channels: u16, data: Vec<f32>) -> Option<Self> {
        let len = width as usize * height as usize * channels as usize;
        if data.len() != len {
            return None;
        }
        Some(Self {
            width,
            height,
            channels,
            data,
        })
    }

    #[inline]
    pub fn width(&self) -> u16 {
        self.width
    }

    #[inline]
    pub fn height(&self) -> u16 {
        self.height
    }

    #[inline]
    pub fn channels(&self) -> u16 {
        self.channels
    }

    #[inline]
    pub fn data(&self) -> &[f32] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    #[inline]
    pub fn in_bounds(&self, x: i64, y: i64) -> bool {
        x >= 0 && y >= 0 && x < self.width as i64 && y < self.height as i64
    }

    #[inline]
    fn index(&self, x: u16, y: u16, c: u16) -> usize {
        (y as usize * self.width as usize + x as usize) * self.channels as usize + c as usize
    }

    #[inline]
    pub fn get(&self, x: u16, y: u16, c: u16) -> f32 {
        self.data[self.index(x, y, c)]
    }

    #[inline]
    pub fn set(&mut self, x: u16, y: u16, c: u16, value: f32) {
        let i = self.index(x, y, c);
        self.data[i] = value;
    }

    /// All channel values at a pixel, in channel order.
    pub fn pixel(&self, x: u16, y: u16) -> &[f32] {
        let i = self.index(x, y, 0);
        &self.data[i..i + self.channels as usize]
    }
}
