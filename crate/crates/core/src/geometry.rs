//! Rigid transforms and pinhole projection.
//!
//! Used in two directions: projecting 3D scene ground truth into annotated
//! 2D frames, and back-projecting detections (center pixel + estimated
//! depth) into camera-frame coordinates for BEV localization.
//!
//! Camera convention: X right, Y down, Z along the optical axis; only
//! points with Z > 0 project.

use alloc::vec::Vec;
use core::fmt;

use libm::sqrt;

/// Pinhole intrinsics: focal lengths and principal point in pixels.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u16,
    pub height: u16,
}

impl CameraIntrinsics {
    pub fn new(
        fx: f64,
        fy: f64,
        cx: f64,
        cy: f64,
        width: u16,
        height: u16,
    ) -> Result<Self, GeometryError> {
        let ok = fx > 0.0
            && fy > 0.0
            && cx >= 0.0
            && cx < width as f64
            && cy >= 0.0
            && cy < height as f64;
        if !ok {
            return Err(GeometryError::InvalidIntrinsics);
        }
        Ok(Self {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
        })
    }

    /// KITTI-shaped default: 1242x375, fx = fy, principal point at the
    /// image center. The exact focal length is a configurable preset, not
    /// a calibration constant.
    pub fn kitti_like() -> Self {
        Self {
            fx: 700.0,
            fy: 700.0,
            cx: 621.0,
            cy: 187.5,
            width: 1242,
            height: 375,
        }
    }
}

/// World-to-camera rigid transform `[R | t]`.
///
/// The rotation must be orthonormal with determinant +1; `new` rejects
/// anything with `max|R'R - I| >= 1e-9`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RigidTransform {
    rotation: [[f64; 3]; 3],
    translation: [f64; 3],
}

const ROTATION_TOL: f64 = 1e-9;

impl RigidTransform {
    pub fn new(rotation: [[f64; 3]; 3], translation: [f64; 3]) -> Result<Self, GeometryError> {
        // max|R'R - I|
        let mut dev: f64 = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                let mut dot = 0.0;
                for k in 0..3 {
                    dot += rotation[k][i] * rotation[k][j];
                }
                let target = if i == j { 1.0 } else { 0.0 };
                let d = (dot - target).abs();
                if d > dev {
                    dev = d;
                }
            }
        }
        if dev >= ROTATION_TOL || det3(&rotation) <= 0.0 {
            return Err(GeometryError::InvalidRotation);
        }
        Ok(Self {
            rotation,
            translation,
        })
    }

    pub fn identity() -> Self {
        Self {
            rotation: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
            translation: [0.0; 3],
        }
    }

    /// Rotation about the camera Z axis, mostly useful in tests.
    pub fn rotation_z(angle_rad: f64, translation: [f64; 3]) -> Self {
        let (s, c) = (libm::sin(angle_rad), libm::cos(angle_rad));
        Self {
            rotation: [[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]],
            translation,
        }
    }

    pub fn rotation(&self) -> &[[f64; 3]; 3] {
        &self.rotation
    }

    pub fn translation(&self) -> &[f64; 3] {
        &self.translation
    }

    /// `self` after `other`: applies `other` first.
    pub fn compose(&self, other: &Self) -> Self {
        let mut r = [[0.0; 3]; 3];
        let mut t = [0.0; 3];
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    r[i][j] += self.rotation[i][k] * other.rotation[k][j];
                }
                t[i] += self.rotation[i][j] * other.translation[j];
            }
            t[i] += self.translation[i];
        }
        Self {
            rotation: r,
            translation: t,
        }
    }
}

fn det3(m: &[[f64; 3]; 3]) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

/// Point in world coordinates, meters.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct WorldPoint {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

/// Point in camera coordinates, meters; `z` is optical-axis depth.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CameraPoint {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl CameraPoint {
    /// Euclidean distance from the camera origin.
    pub fn range(&self) -> f64 {
        sqrt(self.x * self.x + self.y * self.y + self.z * self.z)
    }
}

/// Projected pixel with the optical-axis depth it was projected from.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ImagePoint {
    pub u: f64,
    pub v: f64,
    pub depth: f64,
}

/// Which scalar an annotation reports as "depth".
///
/// The default is the Euclidean range from the camera origin to the object
/// center; optical-axis Z is kept as an alternative convention.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum DepthConvention {
    #[default]
    EuclideanRange,
    AxisZ,
}

/// Object category tag shared across the pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum ObjectClass {
    Car,
    Van,
    Truck,
    Bicycle,
    Pedestrian,
}

impl ObjectClass {
    pub const ALL: [ObjectClass; 5] = [
        ObjectClass::Car,
        ObjectClass::Van,
        ObjectClass::Truck,
        ObjectClass::Bicycle,
        ObjectClass::Pedestrian,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ObjectClass::Car => "car",
            ObjectClass::Van => "van",
            ObjectClass::Truck => "truck",
            ObjectClass::Bicycle => "bicycle",
            ObjectClass::Pedestrian => "pedestrian",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.iter().copied().find(|c| c.name() == name)
    }

    pub fn index(&self) -> usize {
        Self::ALL.iter().position(|c| c == self).unwrap()
    }
}

/// 3D cuboid in world space: 8 vertices plus the geometric center.
///
/// Vertex order: bit 0 of the index selects the +x face, bit 1 the +y face,
/// bit 2 the +z face of the local box frame.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Box3D {
    pub class: ObjectClass,
    pub vertices: [WorldPoint; 8],
    pub center: WorldPoint,
}

impl Box3D {
    /// Validates the cuboid invariant: for each local axis the two opposite
    /// face centroids are equidistant from the center within 1e-6 m.
    pub fn new(
        class: ObjectClass,
        vertices: [WorldPoint; 8],
        center: WorldPoint,
    ) -> Result<Self, GeometryError> {
        for bit in 0..3 {
            let mut pos = [0.0f64; 3];
            let mut neg = [0.0f64; 3];
            for (i, v) in vertices.iter().enumerate() {
                let acc = if i & (1 << bit) != 0 { &mut pos } else { &mut neg };
                acc[0] += v.x;
                acc[1] += v.y;
                acc[2] += v.z;
            }
            let dist = |c: &[f64; 3]| {
                let dx = c[0] / 4.0 - center.x;
                let dy = c[1] / 4.0 - center.y;
                let dz = c[2] / 4.0 - center.z;
                sqrt(dx * dx + dy * dy + dz * dz)
            };
            if (dist(&pos) - dist(&neg)).abs() >= 1e-6 {
                return Err(GeometryError::InvalidBox);
            }
        }
        Ok(Self {
            class,
            vertices,
            center,
        })
    }

    /// Axis-aligned-in-yaw cuboid: length along local x, width along local
    /// z, height along local y (y points down, matching the camera frame).
    pub fn from_pose(
        class: ObjectClass,
        center: WorldPoint,
        length: f64,
        width: f64,
        height: f64,
        yaw_rad: f64,
    ) -> Self {
        let (s, c) = (libm::sin(yaw_rad), libm::cos(yaw_rad));
        let mut vertices = [WorldPoint {
            x: 0.0,
            y: 0.0,
            z: 0.0,
        }; 8];
        for (i, v) in vertices.iter_mut().enumerate() {
            let lx = if i & 1 != 0 { length / 2.0 } else { -length / 2.0 };
            let ly = if i & 2 != 0 { height / 2.0 } else { -height / 2.0 };
            let lz = if i & 4 != 0 { width / 2.0 } else { -width / 2.0 };
            // yaw about the vertical (y) axis
            v.x = center.x + c * lx + s * lz;
            v.y = center.y + ly;
            v.z = center.z - s * lx + c * lz;
        }
        Self {
            class,
            vertices,
            center,
        }
    }
}

/// 2D annotation derived from a 3D box: image-space bounding box, center
/// pixel, center depth and an in-image visibility fraction.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Annotation2D {
    pub class: ObjectClass,
    /// `[x_min, y_min, x_max, y_max]`, clamped inside the image.
    pub bbox: [f64; 4],
    /// Projected center pixel `(u, v)`; may lie outside the clamped box
    /// when the object straddles an image edge.
    pub center: (f64, f64),
    /// Center depth in meters, per the chosen [`DepthConvention`].
    pub depth_m: f64,
    /// Fraction of the unclamped projected hull area inside the image.
    pub visibility: f64,
}

impl Annotation2D {
    pub fn bbox_width(&self) -> f64 {
        self.bbox[2] - self.bbox[0]
    }

    pub fn bbox_height(&self) -> f64 {
        self.bbox[3] - self.bbox[1]
    }

    /// Width and height of the largest box centered on the center point
    /// that stays inside the bounding box. A depth region built from this
    /// extent never overhangs the object, even when perspective pushes the
    /// projected center off the box midpoint. Zero on an axis whose center
    /// coordinate falls outside the box.
    pub fn region_extent(&self) -> (f64, f64) {
        let w = 2.0 * (self.center.0 - self.bbox[0]).min(self.bbox[2] - self.center.0);
        let h = 2.0 * (self.center.1 - self.bbox[1]).min(self.bbox[3] - self.center.1);
        (w.max(0.0), h.max(0.0))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GeometryError {
    /// Source camera point has Z <= 0.
    BehindCamera,
    /// Back-projection requires depth > 0.
    NonPositiveDepth,
    InvalidRotation,
    InvalidIntrinsics,
    InvalidBox,
}

impl fmt::Display for GeometryError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GeometryError::BehindCamera => write!(f, "point is behind the camera (Z <= 0)"),
            GeometryError::NonPositiveDepth => write!(f, "depth must be positive"),
            GeometryError::InvalidRotation => {
                write!(f, "rotation is not orthonormal with determinant +1")
            }
            GeometryError::InvalidIntrinsics => write!(
                f,
                "intrinsics invalid: need fx > 0, fy > 0 and principal point inside the image"
            ),
            GeometryError::InvalidBox => write!(f, "vertices do not form a valid cuboid"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for GeometryError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProjectionError {
    /// All 8 vertices have Z <= 0.
    FullyBehindCamera,
    /// The box center has Z <= 0 even though some vertices are in front.
    CenterBehindCamera,
    /// The clamped 2D box has zero area.
    DegenerateProjection,
}

impl fmt::Display for ProjectionError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProjectionError::FullyBehindCamera => write!(f, "box is fully behind the camera"),
            ProjectionError::CenterBehindCamera => write!(f, "box center is behind the camera"),
            ProjectionError::DegenerateProjection => {
                write!(f, "projected box has zero area inside the image")
            }
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for ProjectionError {}

/// `P_c = R * P_w + t`.
pub fn world_to_camera(p: WorldPoint, x: &RigidTransform) -> CameraPoint {
    let r = &x.rotation;
    let t = &x.translation;
    CameraPoint {
        x: r[0][0] * p.x + r[0][1] * p.y + r[0][2] * p.z + t[0],
        y: r[1][0] * p.x + r[1][1] * p.y + r[1][2] * p.z + t[1],
        z: r[2][0] * p.x + r[2][1] * p.y + r[2][2] * p.z + t[2],
    }
}

/// Pinhole projection with homogeneous normalization:
/// `u = fx * X/Z + cx`, `v = fy * Y/Z + cy`.
pub fn project_to_image(
    p: CameraPoint,
    k: &CameraIntrinsics,
) -> Result<ImagePoint, GeometryError> {
    if p.z <= 0.0 {
        return Err(GeometryError::BehindCamera);
    }
    Ok(ImagePoint {
        u: k.fx * p.x / p.z + k.cx,
        v: k.fy * p.y / p.z + k.cy,
        depth: p.z,
    })
}

/// Inverse pinhole projection: lifts a pixel at a known optical-axis depth
/// back into camera coordinates.
pub fn back_project(ip: ImagePoint, k: &CameraIntrinsics) -> Result<CameraPoint, GeometryError> {
    if ip.depth <= 0.0 {
        return Err(GeometryError::NonPositiveDepth);
    }
    Ok(CameraPoint {
        x: (ip.u - k.cx) * ip.depth / k.fx,
        y: (ip.v - k.cy) * ip.depth / k.fy,
        z: ip.depth,
    })
}

/// Projects a 3D box into a 2D annotation: the 2D box is the axis-aligned
/// hull of the projected vertices clamped to the image, the center pixel is
/// the projection of the 3D center, and visibility is the in-image fraction
/// of the unclamped hull area.
///
/// Vertices behind the camera are dropped from the hull; the whole box
/// behind the camera is an error.
pub fn project_box(
    b: &Box3D,
    x: &RigidTransform,
    k: &CameraIntrinsics,
    convention: DepthConvention,
) -> Result<Annotation2D, ProjectionError> {
    let center_cam = world_to_camera(b.center, x);
    let mut any_front = false;
    let mut min_u = f64::INFINITY;
    let mut max_u = f64::NEG_INFINITY;
    let mut min_v = f64::INFINITY;
    let mut max_v = f64::NEG_INFINITY;
    for v in &b.vertices {
        let c = world_to_camera(*v, x);
        if c.z <= 0.0 {
            continue;
        }
        any_front = true;
        let ip = project_to_image(c, k).expect("z > 0 checked");
        min_u = min_u.min(ip.u);
        max_u = max_u.max(ip.u);
        min_v = min_v.min(ip.v);
        max_v = max_v.max(ip.v);
    }
    if !any_front {
        return Err(ProjectionError::FullyBehindCamera);
    }
    if center_cam.z <= 0.0 {
        return Err(ProjectionError::CenterBehindCamera);
    }
    let hull_area = (max_u - min_u) * (max_v - min_v);
    let (w, h) = (k.width as f64, k.height as f64);
    let cl = [
        min_u.max(0.0),
        min_v.max(0.0),
        max_u.min(w),
        max_v.min(h),
    ];
    if cl[2] <= cl[0] || cl[3] <= cl[1] {
        return Err(ProjectionError::DegenerateProjection);
    }
    let clamped_area = (cl[2] - cl[0]) * (cl[3] - cl[1]);
    let visibility = if hull_area > 0.0 {
        (clamped_area / hull_area).min(1.0)
    } else {
        0.0
    };
    let center_ip = project_to_image(center_cam, k).expect("center z > 0 checked");
    let depth_m = match convention {
        DepthConvention::EuclideanRange => center_cam.range(),
        DepthConvention::AxisZ => center_cam.z,
    };
    Ok(Annotation2D {
        class: b.class,
        bbox: cl,
        center: (center_ip.u, center_ip.v),
        depth_m,
        visibility,
    })
}

/// Keeps annotations with `depth <= max_range` and
/// `visibility >= min_visibility`, preserving order. Idempotent.
pub fn filter_targets(
    anns: &[Annotation2D],
    max_range: f64,
    min_visibility: f64,
) -> Vec<Annotation2D> {
    anns.iter()
        .filter(|a| a.depth_m <= max_range && a.visibility >= min_visibility)
        .cloned()
        .collect()
}
