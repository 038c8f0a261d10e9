//! Deterministic synthetic frame generation.
//!
//! Stands in for a simulator-collected dataset: places class-plausible
//! targets with exact per-distance-bin counts, then renders the depth
//! raster, feature map, ground-truth heatmap and size map for each frame.
//!
//! Reproducibility contract: every byte of every frame is a pure function
//! of `(seed, config, frame_index)`. The generator is ChaCha8; frame `f`
//! draws placement samples from stream `2 * f` and rendering noise from
//! stream `2 * f + 1` of the seeded cipher, so frames can be produced
//! independently and in parallel.

use alloc::vec::Vec;
use core::fmt;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::geometry::{
    filter_targets, project_box, Annotation2D, Box3D, CameraIntrinsics, DepthConvention,
    ObjectClass, RigidTransform, WorldPoint,
};
use crate::heatmap::Heatmap;
use crate::raster::Raster;

/// Class weight entry of the target mix.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ClassWeight {
    pub class: ObjectClass,
    pub weight: f64,
}

/// Scene generator parameters.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SceneConfig {
    pub seed: u64,
    pub image_width: u16,
    pub image_height: u16,
    /// Feature map / heatmap side length N.
    pub feature_size: u16,
    /// Feature channels C.
    pub channels: u16,
    pub targets_per_bin: usize,
    /// Non-overlapping ordered depth bins in meters, within (0, 200].
    pub depth_bins: Vec<(f64, f64)>,
    pub class_mix: Vec<ClassWeight>,
    /// Std-dev of the Gaussian noise added to every feature channel.
    pub noise_sigma: f64,
    /// Depth written outside any target box; beyond the range cutoff so
    /// background pixels are distinguishable from targets.
    pub background_depth: f64,
    /// Focal length of the synthetic camera (fx = fy, principal point at
    /// the image center).
    pub focal: f64,
    pub depth_convention: DepthConvention,
    pub max_range: f64,
    pub min_visibility: f64,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            image_width: 512,
            image_height: 512,
            feature_size: 128,
            channels: 4,
            targets_per_bin: 3,
            depth_bins: alloc::vec![(0.0, 50.0), (50.0, 100.0), (100.0, 150.0), (150.0, 200.0)],
            class_mix: alloc::vec![
                ClassWeight { class: ObjectClass::Car, weight: 0.40 },
                ClassWeight { class: ObjectClass::Van, weight: 0.15 },
                ClassWeight { class: ObjectClass::Truck, weight: 0.10 },
                ClassWeight { class: ObjectClass::Bicycle, weight: 0.10 },
                ClassWeight { class: ObjectClass::Pedestrian, weight: 0.25 },
            ],
            noise_sigma: 0.02,
            background_depth: 300.0,
            focal: 500.0,
            depth_convention: DepthConvention::EuclideanRange,
            max_range: 200.0,
            min_visibility: 0.25,
        }
    }
}

impl SceneConfig {
    pub fn validate(&self) -> Result<(), SceneError> {
        if self.feature_size < 16 {
            return Err(SceneError::InvalidConfig("feature_size >= 16"));
        }
        if self.channels < 2 {
            return Err(SceneError::InvalidConfig("channels >= 2"));
        }
        if self.image_width == 0 || self.image_height == 0 {
            return Err(SceneError::InvalidConfig("image dimensions > 0"));
        }
        let n = self.feature_size;
        if self.image_width % n != 0
            || self.image_height % n != 0
            || self.image_width / n != self.image_height / n
        {
            return Err(SceneError::InvalidConfig(
                "image dimensions must be an equal integer multiple of feature_size",
            ));
        }
        if self.depth_bins.is_empty() {
            return Err(SceneError::InvalidConfig("at least one depth bin"));
        }
        let mut prev_hi = 0.0;
        for &(lo, hi) in &self.depth_bins {
            if !(lo < hi) || lo < prev_hi || hi > 200.0 {
                return Err(SceneError::InvalidConfig(
                    "depth bins must be ordered, non-overlapping and within (0, 200]",
                ));
            }
            prev_hi = hi;
        }
        if self.class_mix.is_empty() || self.class_mix.iter().any(|c| c.weight < 0.0) {
            return Err(SceneError::InvalidConfig("class mix weights must be >= 0"));
        }
        if self.class_mix.iter().map(|c| c.weight).sum::<f64>() <= 0.0 {
            return Err(SceneError::InvalidConfig("class mix must have positive mass"));
        }
        if self.noise_sigma < 0.0 {
            return Err(SceneError::InvalidConfig("noise_sigma >= 0"));
        }
        if !(self.background_depth > self.max_range) {
            return Err(SceneError::InvalidConfig("background_depth > max_range"));
        }
        if !(self.focal > 0.0) {
            return Err(SceneError::InvalidConfig("focal > 0"));
        }
        if !(self.max_range > 0.0) {
            return Err(SceneError::InvalidConfig("max_range > 0"));
        }
        if !(0.0..=1.0).contains(&self.min_visibility) {
            return Err(SceneError::InvalidConfig("min_visibility in [0, 1]"));
        }
        Ok(())
    }

    pub fn intrinsics(&self) -> CameraIntrinsics {
        CameraIntrinsics {
            fx: self.focal,
            fy: self.focal,
            cx: self.image_width as f64 / 2.0,
            cy: self.image_height as f64 / 2.0,
            width: self.image_width,
            height: self.image_height,
        }
    }

    /// Image pixels per feature-map cell.
    pub fn stride(&self) -> f64 {
        (self.image_width / self.feature_size) as f64
    }
}

/// A placed target: world pose, physical size and its derived annotation.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TargetInstance {
    pub class: ObjectClass,
    pub position: WorldPoint,
    pub yaw_rad: f64,
    /// `(length, width, height)` in meters.
    pub size: (f64, f64, f64),
    pub annotation: Annotation2D,
}

impl TargetInstance {
    /// Depth variation amplitude across the visible surface: the rendered
    /// per-pixel depth bulges from the center depth (at the box center) up
    /// to roughly this amount near the box edges. Half the physical width,
    /// the spherical-cap profile, and inside the object's half-extent.
    pub fn surface_curvature(&self) -> f64 {
        0.5 * self.size.1
    }

    /// Rendered depth at an integer pixel inside the annotation box. Equals
    /// the annotation depth exactly at the center pixel.
    pub fn surface_depth(&self, px: f64, py: f64) -> f64 {
        let a = &self.annotation;
        let hw = (a.bbox_width() / 2.0).max(0.5);
        let hh = (a.bbox_height() / 2.0).max(0.5);
        let rx = (px - a.center.0) / hw;
        let ry = (py - a.center.1) / hh;
        a.depth_m + self.surface_curvature() * (rx * rx + ry * ry).min(2.0) / 2.0
    }
}

/// One rendered sample: the desk-scale stand-in for a simulator frame.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticFrame {
    pub frame_id: u64,
    /// N x N x C feature map.
    pub feature_map: Raster,
    /// width x height x 1 depth raster, meters.
    pub depth: Raster,
    /// N x N ground-truth center heatmap.
    pub heatmap: Heatmap,
    /// N x N x 2 ground-truth box size (pixels) at each center cell.
    pub size_map: Raster,
    /// Post-filter annotations, in generation order.
    pub annotations: Vec<Annotation2D>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SceneError {
    InvalidConfig(&'static str),
    /// A bin's placement retries ran out (image too crowded for the
    /// requested target count).
    PlacementExhausted { bin: usize },
}

impl fmt::Display for SceneError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SceneError::InvalidConfig(inv) => write!(f, "scene config violates invariant: {inv}"),
            SceneError::PlacementExhausted { bin } => {
                write!(f, "could not place a target in depth bin {bin} within 1000 retries")
            }
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for SceneError {}

/// Uniform in `[0, 1)` from the top 53 bits of the next word.
fn uniform(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

fn uniform_in(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * uniform(rng)
}

/// Standard normal via Box-Muller; kept hand-rolled (on libm) so the noise
/// stream is identical on every platform.
pub fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    let mut u1 = uniform(rng);
    if u1 <= 0.0 {
        u1 = f64::MIN_POSITIVE;
    }
    let u2 = uniform(rng);
    libm::sqrt(-2.0 * libm::log(u1)) * libm::cos(2.0 * core::f64::consts::PI * u2)
}

fn placement_rng(cfg: &SceneConfig, frame_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(2 * frame_index);
    rng
}

fn noise_rng(cfg: &SceneConfig, frame_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(2 * frame_index + 1);
    rng
}

/// Plausible physical size ranges per class: (length, width, height) lo/hi.
fn size_ranges(class: ObjectClass) -> [(f64, f64); 3] {
    match class {
        ObjectClass::Car => [(3.5, 5.5), (1.6, 2.0), (1.4, 1.8)],
        ObjectClass::Van => [(4.5, 5.8), (1.8, 2.1), (1.9, 2.4)],
        ObjectClass::Truck => [(6.0, 10.0), (2.2, 2.6), (2.6, 3.6)],
        ObjectClass::Bicycle => [(1.6, 1.9), (0.5, 0.8), (1.0, 1.4)],
        ObjectClass::Pedestrian => [(0.4, 0.6), (0.4, 0.6), (1.5, 2.0)],
    }
}

fn sample_class(rng: &mut ChaCha8Rng, mix: &[ClassWeight]) -> ObjectClass {
    let total: f64 = mix.iter().map(|c| c.weight).sum();
    let mut x = uniform(rng) * total;
    for c in mix {
        x -= c.weight;
        if x < 0.0 {
            return c.class;
        }
    }
    mix.last().unwrap().class
}

/// Intersection-over-union of two `[x_min, y_min, x_max, y_max]` boxes.
pub fn bbox_iou(a: &[f64; 4], b: &[f64; 4]) -> f64 {
    let ix = (a[2].min(b[2]) - a[0].max(b[0])).max(0.0);
    let iy = (a[3].min(b[3]) - a[1].max(b[1])).max(0.0);
    let inter = ix * iy;
    let area_a = (a[2] - a[0]) * (a[3] - a[1]);
    let area_b = (b[2] - b[0]) * (b[3] - b[1]);
    let union = area_a + area_b - inter;
    if union <= 0.0 {
        0.0
    } else {
        inter / union
    }
}

const MAX_RETRIES: usize = 1000;
const MAX_IOU: f64 = 0.7;
/// Safety margin for the center-occlusion test, covering center rounding.
const CENTER_MARGIN_PX: f64 = 2.0;

/// Places exactly `targets_per_bin` targets in every depth bin.
///
/// Each target is sampled as (class, physical size, range within the bin,
/// center pixel, yaw), projected, and accepted only if its 2D box lies
/// fully inside the image and overlaps no accepted box with IoU above 0.7;
/// rejected draws are re-sampled up to 1000 times per target.
pub fn generate_scene(
    cfg: &SceneConfig,
    frame_index: u64,
) -> Result<Vec<TargetInstance>, SceneError> {
    cfg.validate()?;
    let mut rng = placement_rng(cfg, frame_index);
    let k = cfg.intrinsics();
    let extrinsics = RigidTransform::identity();
    let mut targets: Vec<TargetInstance> = Vec::new();
    for (bin_idx, &(lo, hi)) in cfg.depth_bins.iter().enumerate() {
        for _ in 0..cfg.targets_per_bin {
            let mut placed = false;
            for _retry in 0..MAX_RETRIES {
                let class = sample_class(&mut rng, &cfg.class_mix);
                let [lr, wr, hr] = size_ranges(class);
                let length = uniform_in(&mut rng, lr.0, lr.1);
                let width = uniform_in(&mut rng, wr.0, wr.1);
                let height = uniform_in(&mut rng, hr.0, hr.1);
                let range = uniform_in(&mut rng, lo, hi);
                let u = uniform_in(&mut rng, 1.0, cfg.image_width as f64 - 1.0);
                let v = uniform_in(&mut rng, 1.0, cfg.image_height as f64 - 1.0);
                let yaw = uniform_in(&mut rng, 0.0, 2.0 * core::f64::consts::PI);
                // place the center on the viewing ray through (u, v) at the
                // sampled Euclidean range
                let dx = (u - k.cx) / k.fx;
                let dy = (v - k.cy) / k.fy;
                let norm = libm::sqrt(dx * dx + dy * dy + 1.0);
                let center = WorldPoint {
                    x: range * dx / norm,
                    y: range * dy / norm,
                    z: range / norm,
                };
                let b = Box3D::from_pose(class, center, length, width, height, yaw);
                let ann = match project_box(&b, &extrinsics, &k, cfg.depth_convention) {
                    Ok(a) => a,
                    Err(_) => continue,
                };
                if ann.visibility < 1.0 {
                    continue; // must project fully inside the image
                }
                if !(ann.depth_m >= lo && ann.depth_m < hi) {
                    continue;
                }
                if targets.iter().any(|t| bbox_iou(&t.annotation.bbox, &ann.bbox) > MAX_IOU) {
                    continue;
                }
                // keep every center unoccluded: a nearer box over a target's
                // center makes its depth unreadable (the dataset filter the
                // pipeline assumes drops such targets)
                let covers = |bb: &[f64; 4], p: (f64, f64)| {
                    p.0 >= bb[0] - CENTER_MARGIN_PX
                        && p.0 <= bb[2] + CENTER_MARGIN_PX
                        && p.1 >= bb[1] - CENTER_MARGIN_PX
                        && p.1 <= bb[3] + CENTER_MARGIN_PX
                };
                let occludes = targets.iter().any(|t| {
                    let other = &t.annotation;
                    if other.depth_m < ann.depth_m {
                        covers(&other.bbox, ann.center)
                    } else {
                        covers(&ann.bbox, other.center)
                    }
                });
                if occludes {
                    continue;
                }
                targets.push(TargetInstance {
                    class,
                    position: center,
                    yaw_rad: yaw,
                    size: (length, width, height),
                    annotation: ann,
                });
                placed = true;
                break;
            }
            if !placed {
                return Err(SceneError::PlacementExhausted { bin: bin_idx });
            }
        }
    }
    Ok(targets)
}

/// Normalized depth signal on feature channel 0.
pub fn depth_signal(depth_m: f64) -> f64 {
    depth_m / 200.0
}

/// Renders the frame rasters from placed targets.
///
/// Depth raster: per-pixel surface depth of the nearest covering target,
/// `background_depth` elsewhere. Feature channel 0 carries the
/// depth-correlated signal of the covering target, channel 1 a class
/// signal, remaining channels a per-target texture tag; all channels get
/// Gaussian noise of std `noise_sigma`. The ground-truth heatmap holds one
/// size-adaptive Gaussian peak per target.
pub fn render_frame(
    targets: &[TargetInstance],
    cfg: &SceneConfig,
    frame_index: u64,
) -> Result<SyntheticFrame, SceneError> {
    cfg.validate()?;
    let (w, h) = (cfg.image_width, cfg.image_height);
    let n = cfg.feature_size;
    let stride = cfg.stride();

    let mut depth = Raster::filled(w, h, 1, cfg.background_depth as f32);
    for t in targets {
        let bb = &t.annotation.bbox;
        let x0 = libm::floor(bb[0]).max(0.0) as u16;
        let x1 = (libm::ceil(bb[2]) as i64).min(w as i64 - 1) as u16;
        let y0 = libm::floor(bb[1]).max(0.0) as u16;
        let y1 = (libm::ceil(bb[3]) as i64).min(h as i64 - 1) as u16;
        for py in y0..=y1 {
            for px in x0..=x1 {
                let fx = px as f64;
                let fy = py as f64;
                if fx < bb[0] || fx > bb[2] || fy < bb[1] || fy > bb[3] {
                    continue;
                }
                let d = t.surface_depth(fx, fy) as f32;
                if d < depth.get(px, py, 0) {
                    depth.set(px, py, 0, d);
                }
            }
        }
    }

    // nearest covering target per feature cell, sampled at the cell center
    let covering = |ix: f64, iy: f64| -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for (ti, t) in targets.iter().enumerate() {
            let bb = &t.annotation.bbox;
            if ix >= bb[0] && ix <= bb[2] && iy >= bb[1] && iy <= bb[3] {
                let d = t.annotation.depth_m;
                if best.map_or(true, |(_, bd)| d < bd) {
                    best = Some((ti, d));
                }
            }
        }
        best.map(|(ti, _)| ti)
    };

    let mut feature_map = Raster::zeros(n, n, cfg.channels);
    for j in 0..n {
        for i in 0..n {
            let ix = (i as f64 + 0.5) * stride;
            let iy = (j as f64 + 0.5) * stride;
            match covering(ix, iy) {
                Some(ti) => {
                    let t = &targets[ti];
                    feature_map.set(i, j, 0, depth_signal(t.annotation.depth_m) as f32);
                    feature_map.set(i, j, 1, (t.class.index() as f32 + 1.0) / 5.0);
                    // texture tag: spacing 0.3 keeps cross-target weights
                    // negligible at the default bandwidth even when boxes
                    // overlap and their depth signals nearly agree
                    for c in 2..cfg.channels {
                        feature_map.set(i, j, c, (ti as f32 + 1.0) * 0.3);
                    }
                }
                None => {
                    feature_map.set(i, j, 0, depth_signal(cfg.background_depth) as f32);
                }
            }
        }
    }
    if cfg.noise_sigma > 0.0 {
        let mut rng = noise_rng(cfg, frame_index);
        for v in feature_map.data_mut() {
            *v += (cfg.noise_sigma * standard_normal(&mut rng)) as f32;
        }
    }

    let mut heatmap = Heatmap::zeros(n, stride);
    for t in targets {
        let a = &t.annotation;
        let cell = (heatmap.image_to_cell(a.center.0), heatmap.image_to_cell(a.center.1));
        let size_cells = (a.bbox_width() / stride, a.bbox_height() / stride);
        heatmap
            .render_gaussian_peak(cell, size_cells)
            .expect("annotation centers lie inside the image");
    }
    // rasters are stored on disk as f32; snap the heatmap now so emitted
    // datasets load back to exactly the in-memory frame
    for v in heatmap.values_mut() {
        *v = *v as f32 as f64;
    }

    let annotations = filter_targets(
        &targets.iter().map(|t| t.annotation.clone()).collect::<Vec<_>>(),
        cfg.max_range,
        cfg.min_visibility,
    );
    let size_map = build_size_map(&annotations, n, stride);

    Ok(SyntheticFrame {
        frame_id: frame_index,
        feature_map,
        depth,
        heatmap,
        size_map,
        annotations,
    })
}

/// N x N x 2 raster holding each annotation's region extent (width,
/// height) in pixels at its center cell, zero elsewhere. Pure in the
/// annotations, so loaders can rebuild it instead of storing it.
pub fn build_size_map(annotations: &[Annotation2D], n: u16, stride: f64) -> Raster {
    let hm = Heatmap::zeros(n, stride);
    let mut size_map = Raster::zeros(n, n, 2);
    for a in annotations {
        let cell = (hm.image_to_cell(a.center.0), hm.image_to_cell(a.center.1));
        let (w, h) = a.region_extent();
        size_map.set(cell.0, cell.1, 0, w as f32);
        size_map.set(cell.0, cell.1, 1, h as f32);
    }
    size_map
}
