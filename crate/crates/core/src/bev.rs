//! Bird's-eye-view obstacle mapping and A* path planning.
//!
//! Detections are back-projected at their estimated depths, dropped onto
//! the ground plane (camera X lateral, camera Z forward), rasterized into
//! an occupancy grid with an inflation margin, and planned over with an
//! 8-connected A* using the octile heuristic.

use alloc::collections::BinaryHeap;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;

use libm::sqrt;

use crate::geometry::{back_project, CameraIntrinsics, GeometryError, ImagePoint};
use crate::heatmap::Detection;

/// Obstacle position in the ego ground plane, meters. The camera origin is
/// the ego frame origin.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GroundPoint {
    /// Lateral offset, camera X.
    pub x: f64,
    /// Forward distance, camera Z.
    pub z: f64,
    /// Physical footprint radius estimated from the detection box width.
    pub radius: f64,
}

/// Metric extents and resolution of an occupancy grid.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GridSpec {
    pub resolution: f64,
    pub x_min: f64,
    pub x_max: f64,
    pub z_min: f64,
    pub z_max: f64,
}

impl GridSpec {
    pub fn validate(&self) -> Result<(), BevError> {
        if !(self.resolution > 0.0) || self.x_max <= self.x_min || self.z_max <= self.z_min {
            return Err(BevError::InvalidGridSpec);
        }
        Ok(())
    }
}

/// Boolean occupancy over a regular ground-plane grid.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct OccupancyGrid {
    spec: GridSpec,
    nx: u16,
    nz: u16,
    cells: Vec<bool>,
}

impl OccupancyGrid {
    pub fn empty(spec: GridSpec) -> Result<Self, BevError> {
        spec.validate()?;
        let nx = libm::ceil((spec.x_max - spec.x_min) / spec.resolution) as u16;
        let nz = libm::ceil((spec.z_max - spec.z_min) / spec.resolution) as u16;
        Ok(Self {
            spec,
            nx,
            nz,
            cells: alloc::vec![false; nx as usize * nz as usize],
        })
    }

    #[inline]
    pub fn dims(&self) -> (u16, u16) {
        (self.nx, self.nz)
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    #[inline]
    fn index(&self, i: u16, j: u16) -> usize {
        j as usize * self.nx as usize + i as usize
    }

    #[inline]
    pub fn occupied(&self, i: u16, j: u16) -> bool {
        self.cells[self.index(i, j)]
    }

    pub fn set_occupied(&mut self, i: u16, j: u16, value: bool) {
        let idx = self.index(i, j);
        self.cells[idx] = value;
    }

    /// Metric center of a cell.
    pub fn cell_center(&self, i: u16, j: u16) -> (f64, f64) {
        (
            self.spec.x_min + (i as f64 + 0.5) * self.spec.resolution,
            self.spec.z_min + (j as f64 + 0.5) * self.spec.resolution,
        )
    }

    /// Cell containing a metric point, if inside the extents.
    pub fn cell_of(&self, x: f64, z: f64) -> Option<(u16, u16)> {
        if x < self.spec.x_min || z < self.spec.z_min {
            return None;
        }
        let i = libm::floor((x - self.spec.x_min) / self.spec.resolution) as i64;
        let j = libm::floor((z - self.spec.z_min) / self.spec.resolution) as i64;
        if i >= self.nx as i64 || j >= self.nz as i64 {
            return None;
        }
        Some((i as u16, j as u16))
    }

    pub fn occupied_cells(&self) -> impl Iterator<Item = (u16, u16)> + '_ {
        let nx = self.nx;
        self.cells
            .iter()
            .enumerate()
            .filter(|(_, &o)| o)
            .map(move |(idx, _)| ((idx % nx as usize) as u16, (idx / nx as usize) as u16))
    }

    pub fn occupied_count(&self) -> usize {
        self.cells.iter().filter(|&&o| o).count()
    }
}

/// Grid path from start to goal; consecutive cells are 8-neighbors and no
/// cell is occupied. `length_m` is the octile path length in meters.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PlannedPath {
    pub cells: Vec<(u16, u16)>,
    pub length_m: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BevError {
    NonPositiveDepth,
    InvalidGridSpec,
    /// Start or goal occupied or outside the grid.
    InvalidEndpoint,
    Unreachable,
}

impl fmt::Display for BevError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BevError::NonPositiveDepth => write!(f, "depth must be positive"),
            BevError::InvalidGridSpec => write!(f, "grid spec invalid"),
            BevError::InvalidEndpoint => write!(f, "start or goal occupied or outside the grid"),
            BevError::Unreachable => write!(f, "goal unreachable"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for BevError {}

/// Maps a detection with an estimated center depth onto the ground plane.
/// The footprint radius follows from similar triangles:
/// `radius = box_width_px * depth / (2 fx)`.
pub fn detection_to_bev(
    det: &Detection,
    depth: f64,
    k: &CameraIntrinsics,
) -> Result<GroundPoint, BevError> {
    if depth <= 0.0 {
        return Err(BevError::NonPositiveDepth);
    }
    let cam = back_project(
        ImagePoint {
            u: det.center.0,
            v: det.center.1,
            depth,
        },
        k,
    )
    .map_err(|e| match e {
        GeometryError::NonPositiveDepth => BevError::NonPositiveDepth,
        _ => BevError::NonPositiveDepth,
    })?;
    Ok(GroundPoint {
        x: cam.x,
        z: cam.z,
        radius: det.size.0 * depth / (2.0 * k.fx),
    })
}

/// Marks every cell whose center lies within `radius + inflation` of any
/// obstacle point.
pub fn rasterize_obstacles(
    points: &[GroundPoint],
    spec: GridSpec,
    inflation_m: f64,
) -> Result<OccupancyGrid, BevError> {
    let mut grid = OccupancyGrid::empty(spec)?;
    for p in points {
        let r = p.radius + inflation_m;
        let i_lo = libm::floor((p.x - r - spec.x_min) / spec.resolution).max(0.0) as i64;
        let i_hi = libm::ceil((p.x + r - spec.x_min) / spec.resolution) as i64;
        let j_lo = libm::floor((p.z - r - spec.z_min) / spec.resolution).max(0.0) as i64;
        let j_hi = libm::ceil((p.z + r - spec.z_min) / spec.resolution) as i64;
        for j in j_lo..=j_hi.min(grid.nz as i64 - 1) {
            for i in i_lo..=i_hi.min(grid.nx as i64 - 1) {
                if i < 0 || j < 0 {
                    continue;
                }
                let (cx, cz) = grid.cell_center(i as u16, j as u16);
                let dx = cx - p.x;
                let dz = cz - p.z;
                if sqrt(dx * dx + dz * dz) <= r {
                    grid.set_occupied(i as u16, j as u16, true);
                }
            }
        }
    }
    Ok(grid)
}

const SQRT2: f64 = core::f64::consts::SQRT_2;

/// Octile distance, admissible and consistent for unit/sqrt(2) step costs.
fn octile(a: (u16, u16), b: (u16, u16)) -> f64 {
    let dx = (a.0 as f64 - b.0 as f64).abs();
    let dy = (a.1 as f64 - b.1 as f64).abs();
    let (lo, hi) = if dx < dy { (dx, dy) } else { (dy, dx) };
    (hi - lo) + SQRT2 * lo
}

#[derive(PartialEq)]
struct QueueEntry {
    f: f64,
    index: usize,
}

impl Eq for QueueEntry {}

impl Ord for QueueEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        // min-heap on f, ties broken by smaller index for determinism
        other
            .f
            .partial_cmp(&self.f)
            .unwrap_or(Ordering::Equal)
            .then_with(|| other.index.cmp(&self.index))
    }
}

impl PartialOrd for QueueEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// 8-connected A* with unit straight / sqrt(2) diagonal step costs. The
/// returned cost equals Dijkstra's optimum because the octile heuristic is
/// admissible and consistent.
pub fn astar(
    grid: &OccupancyGrid,
    start: (u16, u16),
    goal: (u16, u16),
) -> Result<PlannedPath, BevError> {
    let (nx, nz) = grid.dims();
    let in_grid = |c: (u16, u16)| c.0 < nx && c.1 < nz;
    if !in_grid(start) || !in_grid(goal) || grid.occupied(start.0, start.1) || grid.occupied(goal.0, goal.1)
    {
        return Err(BevError::InvalidEndpoint);
    }
    let ncells = nx as usize * nz as usize;
    let idx = |c: (u16, u16)| c.1 as usize * nx as usize + c.0 as usize;
    let mut g = alloc::vec![f64::INFINITY; ncells];
    let mut parent = alloc::vec![usize::MAX; ncells];
    let mut closed = alloc::vec![false; ncells];
    let mut open = BinaryHeap::new();
    g[idx(start)] = 0.0;
    open.push(QueueEntry {
        f: octile(start, goal),
        index: idx(start),
    });
    while let Some(QueueEntry { index, .. }) = open.pop() {
        if closed[index] {
            continue;
        }
        closed[index] = true;
        let cell = ((index % nx as usize) as u16, (index / nx as usize) as u16);
        if cell == goal {
            let mut cells = Vec::new();
            let mut cur = index;
            while cur != usize::MAX {
                cells.push(((cur % nx as usize) as u16, (cur / nx as usize) as u16));
                cur = parent[cur];
            }
            cells.reverse();
            return Ok(PlannedPath {
                length_m: g[index] * grid.spec.resolution,
                cells,
            });
        }
        for dj in -1i64..=1 {
            for di in -1i64..=1 {
                if di == 0 && dj == 0 {
                    continue;
                }
                let ni = cell.0 as i64 + di;
                let nj = cell.1 as i64 + dj;
                if ni < 0 || nj < 0 || ni >= nx as i64 || nj >= nz as i64 {
                    continue;
                }
                let ncell = (ni as u16, nj as u16);
                if grid.occupied(ncell.0, ncell.1) {
                    continue;
                }
                let nidx = idx(ncell);
                if closed[nidx] {
                    continue;
                }
                let step = if di != 0 && dj != 0 { SQRT2 } else { 1.0 };
                let cand = g[index] + step;
                if cand < g[nidx] {
                    g[nidx] = cand;
                    parent[nidx] = index;
                    open.push(QueueEntry {
                        f: cand + octile(ncell, goal),
                        index: nidx,
                    });
                }
            }
        }
    }
    Err(BevError::Unreachable)
}
