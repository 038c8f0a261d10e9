//! Keypoint heatmap rendering and center-point decoding.
//!
//! Ground-truth heatmaps carry one object-size-adaptive Gaussian peak per
//! target; decoding finds windowed strict maxima above a score threshold
//! and expands each center into its detection region.

use alloc::vec::Vec;
use core::fmt;

use libm::{exp, floor, round};

use crate::geometry::ObjectClass;

/// Square confidence map over heatmap cells, values in `[0, 1]`.
///
/// `stride` is the ratio of image pixels per heatmap cell; cell `(i, j)`
/// covers the image point `((i + 0.5) * stride, (j + 0.5) * stride)` at its
/// center.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Heatmap {
    size: u16,
    stride: f64,
    values: Vec<f64>,
}

impl Heatmap {
    pub fn zeros(size: u16, stride: f64) -> Self {
        Self {
            size,
            stride,
            values: alloc::vec![0.0; size as usize * size as usize],
        }
    }

    pub fn from_values(size: u16, stride: f64, values: Vec<f64>) -> Option<Self> {
        if values.len() != size as usize * size as usize {
            return None;
        }
        Some(Self {
            size,
            stride,
            values,
        })
    }

    #[inline]
    pub fn size(&self) -> u16 {
        self.size
    }

    #[inline]
    pub fn stride(&self) -> f64 {
        self.stride
    }

    #[inline]
    pub fn get(&self, x: u16, y: u16) -> f64 {
        self.values[y as usize * self.size as usize + x as usize]
    }

    #[inline]
    pub fn set(&mut self, x: u16, y: u16, v: f64) {
        self.values[y as usize * self.size as usize + x as usize] = v;
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Image coordinate of a cell center.
    pub fn cell_to_image(&self, cell: u16) -> f64 {
        (cell as f64 + 0.5) * self.stride
    }

    /// Nearest cell for an image coordinate, clamped into bounds.
    pub fn image_to_cell(&self, coord: f64) -> u16 {
        let c = floor(coord / self.stride);
        c.max(0.0).min(self.size as f64 - 1.0) as u16
    }

    /// Splats `max(existing, exp(-(dx^2 + dy^2) / (2 sigma^2)))` around
    /// `center`, with `sigma = max(1, min(w, h) / 6)` adapted to the object
    /// size in cells. The center cell is set to exactly 1.
    pub fn render_gaussian_peak(
        &mut self,
        center: (u16, u16),
        object_size: (f64, f64),
    ) -> Result<(), HeatmapError> {
        let (cx, cy) = center;
        if cx >= self.size || cy >= self.size {
            return Err(HeatmapError::CenterOutOfBounds);
        }
        let sigma = (object_size.0.min(object_size.1) / 6.0).max(1.0);
        let denom = 2.0 * sigma * sigma;
        // beyond ~5 sigma the splat is below any useful threshold
        let radius = libm::ceil(5.0 * sigma) as i64;
        let n = self.size as i64;
        for y in (cy as i64 - radius).max(0)..=(cy as i64 + radius).min(n - 1) {
            for x in (cx as i64 - radius).max(0)..=(cx as i64 + radius).min(n - 1) {
                let dx = x as f64 - cx as f64;
                let dy = y as f64 - cy as f64;
                let g = exp(-(dx * dx + dy * dy) / denom);
                let i = y as usize * self.size as usize + x as usize;
                if g > self.values[i] {
                    self.values[i] = g;
                }
            }
        }
        self.set(cx, cy, 1.0);
        Ok(())
    }
}

/// A decoded center candidate: cell coordinates plus heatmap score.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Peak {
    pub cell: (u16, u16),
    pub score: f64,
}

/// Cells that are strict maxima of their `window x window` neighborhood
/// with score >= `score_threshold`, sorted by descending score.
///
/// On plateaus the cell with the smallest row-major index wins. `window`
/// must be odd and >= 3.
pub fn extract_peaks(hm: &Heatmap, score_threshold: f64, window: u16) -> Vec<Peak> {
    assert!(window >= 3 && window % 2 == 1, "window must be odd and >= 3");
    let n = hm.size() as i64;
    let r = (window / 2) as i64;
    let mut peaks = Vec::new();
    for y in 0..n {
        for x in 0..n {
            let v = hm.get(x as u16, y as u16);
            if v < score_threshold {
                continue;
            }
            let idx = y * n + x;
            let mut is_peak = true;
            'scan: for ny in (y - r).max(0)..=(y + r).min(n - 1) {
                for nx in (x - r).max(0)..=(x + r).min(n - 1) {
                    if nx == x && ny == y {
                        continue;
                    }
                    let nv = hm.get(nx as u16, ny as u16);
                    if nv > v || (nv == v && ny * n + nx < idx) {
                        is_peak = false;
                        break 'scan;
                    }
                }
            }
            if is_peak {
                peaks.push(Peak {
                    cell: (x as u16, y as u16),
                    score: v,
                });
            }
        }
    }
    peaks.sort_by(|a, b| {
        b.score
            .partial_cmp(&a.score)
            .unwrap_or(core::cmp::Ordering::Equal)
            .then_with(|| {
                let ia = a.cell.1 as u32 * hm.size() as u32 + a.cell.0 as u32;
                let ib = b.cell.1 as u32 * hm.size() as u32 + b.cell.0 as u32;
                ia.cmp(&ib)
            })
    });
    peaks
}

/// Integer-lattice pixel region `|x - x_c| <= w/2, |y - y_c| <= h/2`
/// intersected with the image bounds.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Region {
    center: (f64, f64),
    half_w: f64,
    half_h: f64,
    /// Inclusive lattice ranges after clipping.
    x_range: (u16, u16),
    y_range: (u16, u16),
}

impl Region {
    #[inline]
    pub fn center(&self) -> (f64, f64) {
        self.center
    }

    /// Nearest lattice pixel to the continuous center, clamped into the
    /// region. This is the CRF anchor.
    pub fn center_pixel(&self) -> (u16, u16) {
        let cx = round(self.center.0)
            .max(self.x_range.0 as f64)
            .min(self.x_range.1 as f64) as u16;
        let cy = round(self.center.1)
            .max(self.y_range.0 as f64)
            .min(self.y_range.1 as f64) as u16;
        (cx, cy)
    }

    pub fn len(&self) -> usize {
        (self.x_range.1 - self.x_range.0 + 1) as usize
            * (self.y_range.1 - self.y_range.0 + 1) as usize
    }

    pub fn is_empty(&self) -> bool {
        false // construction guarantees at least the center pixel
    }

    /// Row-major iteration over the lattice pixels.
    pub fn pixels(&self) -> impl Iterator<Item = (u16, u16)> + '_ {
        let (x0, x1) = self.x_range;
        let (y0, y1) = self.y_range;
        (y0..=y1).flat_map(move |y| (x0..=x1).map(move |x| (x, y)))
    }

    /// Region membership on integer pixels, including the
    /// bounds clip.
    pub fn contains(&self, x: u16, y: u16) -> bool {
        (x as f64 - self.center.0).abs() <= self.half_w
            && (y as f64 - self.center.1).abs() <= self.half_h
            && x >= self.x_range.0
            && x <= self.x_range.1
            && y >= self.y_range.0
            && y <= self.y_range.1
    }
}

/// Builds the detection region around a center, clipped to
/// `bounds = (width, height)` in pixels.
pub fn build_region(
    center: (f64, f64),
    w: f64,
    h: f64,
    bounds: (u16, u16),
) -> Result<Region, HeatmapError> {
    let (bw, bh) = (bounds.0 as f64, bounds.1 as f64);
    if !(center.0 >= 0.0 && center.0 < bw && center.1 >= 0.0 && center.1 < bh) {
        return Err(HeatmapError::CenterOutOfBounds);
    }
    assert!(w >= 0.0 && h >= 0.0, "region size must be non-negative");
    let lo = |c: f64, half: f64| libm::ceil(c - half).max(0.0);
    let hi = |c: f64, half: f64, b: f64| floor(c + half).min(b - 1.0);
    let mut x0 = lo(center.0, w / 2.0);
    let mut x1 = hi(center.0, w / 2.0, bw);
    let mut y0 = lo(center.1, h / 2.0);
    let mut y1 = hi(center.1, h / 2.0, bh);
    // a non-integer center with a sub-pixel extent can leave the lattice
    // empty; fall back to the nearest pixel so the anchor always exists
    if x0 > x1 {
        let c = libm::round(center.0).max(0.0).min(bw - 1.0);
        x0 = c;
        x1 = c;
    }
    if y0 > y1 {
        let c = libm::round(center.1).max(0.0).min(bh - 1.0);
        y0 = c;
        y1 = c;
    }
    Ok(Region {
        center,
        half_w: w / 2.0,
        half_h: h / 2.0,
        x_range: (x0 as u16, x1 as u16),
        y_range: (y0 as u16, y1 as u16),
    })
}

/// A decoded object: center, size, class, heatmap score and the derived
/// region, all in image pixels.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Detection {
    pub center: (f64, f64),
    pub size: (f64, f64),
    pub class: ObjectClass,
    pub score: f64,
    pub region: Region,
}

impl Detection {
    pub fn new(
        center: (f64, f64),
        size: (f64, f64),
        class: ObjectClass,
        score: f64,
        image_bounds: (u16, u16),
    ) -> Result<Self, HeatmapError> {
        let region = build_region(center, size.0, size.1, image_bounds)?;
        Ok(Self {
            center,
            size,
            class,
            score,
            region,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HeatmapError {
    CenterOutOfBounds,
}

impl fmt::Display for HeatmapError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HeatmapError::CenterOutOfBounds => write!(f, "center lies outside the bounds"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for HeatmapError {}
