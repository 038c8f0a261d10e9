//! Star-topology fully-connected CRF over a detection's region.
//!
//! Every region pixel is paired with the center pixel; pairwise weights
//! come from feature similarity, the unary term ties each pixel's depth to
//! its initial estimate. The energy is
//!
//! ```text
//! E(D) = lambda_u * sum_j (D_j - d_j)^2  +  sum_{i != c} w_i * (D_i - D_c)^2
//! ```
//!
//! which is strictly convex for `lambda_u > 0`, so the star-graph
//! elimination gives the unique minimizer in closed form. A coordinate
//! descent solver is kept as an independent cross-check.

use alloc::boxed::Box;
use alloc::vec::Vec;
use core::fmt;

use libm::exp;

use crate::heatmap::Region;
use crate::raster::Raster;

/// Which minimizer [`refine_center_depth`] runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Solver {
    #[default]
    ClosedForm,
    CoordinateDescent,
}

/// CRF parameters. `sigma_f` is the feature-similarity bandwidth,
/// `lambda_u` the unary weight; `spatial_sigma`, when set, multiplies each
/// weight by a spatial Gaussian in pixel distance to the center.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CrfConfig {
    pub sigma_f: f64,
    pub lambda_u: f64,
    pub solver: Solver,
    pub max_iters: usize,
    pub tol: f64,
    pub spatial_sigma: Option<f64>,
}

impl Default for CrfConfig {
    fn default() -> Self {
        Self {
            sigma_f: 0.1,
            lambda_u: 1.0,
            solver: Solver::ClosedForm,
            max_iters: 200,
            tol: 1e-10,
            spatial_sigma: None,
        }
    }
}

impl CrfConfig {
    pub fn validate(&self) -> Result<(), CrfError> {
        if !(self.sigma_f > 0.0) {
            return Err(CrfError::InvalidConfig("sigma_f > 0"));
        }
        if !(self.lambda_u > 0.0) {
            return Err(CrfError::InvalidConfig("lambda_u > 0"));
        }
        if !(self.tol > 0.0) {
            return Err(CrfError::InvalidConfig("tol > 0"));
        }
        if let Some(s) = self.spatial_sigma {
            if !(s > 0.0) {
                return Err(CrfError::InvalidConfig("spatial_sigma > 0"));
            }
        }
        Ok(())
    }
}

/// Per-pixel state of one region solve: unary estimates, weights to the
/// center, and the solution depths. Pixel order is the region's row-major
/// order; `center_index` marks the anchor.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionDepthField {
    region: Region,
    pub unary: Vec<f64>,
    /// Feature-similarity weights to the center; the entry at
    /// `center_index` is excluded from all pairwise sums.
    pub weights: Vec<f64>,
    pub depths: Vec<f64>,
    center_index: usize,
}

impl RegionDepthField {
    /// Validates lengths, weight bounds `(0, 1]` and finiteness, and seeds
    /// the solution depths with the unary estimates.
    pub fn new(region: Region, unary: Vec<f64>, weights: Vec<f64>) -> Result<Self, CrfError> {
        let n = region.len();
        if unary.len() != n || weights.len() != n {
            return Err(CrfError::LengthMismatch {
                expected: n,
                got: if unary.len() != n {
                    unary.len()
                } else {
                    weights.len()
                },
            });
        }
        if unary.iter().any(|d| !d.is_finite()) {
            return Err(CrfError::NonFiniteUnary);
        }
        let center = region.center_pixel();
        let center_index = region
            .pixels()
            .position(|p| p == center)
            .expect("region contains its center pixel");
        for (i, w) in weights.iter().enumerate() {
            if i != center_index && !(*w > 0.0 && *w <= 1.0) {
                return Err(CrfError::WeightOutOfRange(*w));
            }
        }
        let depths = unary.clone();
        Ok(Self {
            region,
            unary,
            weights,
            depths,
            center_index,
        })
    }

    #[inline]
    pub fn region(&self) -> &Region {
        &self.region
    }

    #[inline]
    pub fn center_index(&self) -> usize {
        self.center_index
    }

    pub fn center_depth(&self) -> f64 {
        self.depths[self.center_index]
    }

    pub fn len(&self) -> usize {
        self.unary.len()
    }

    pub fn is_empty(&self) -> bool {
        self.unary.is_empty()
    }
}

/// Feature-similarity weight `exp(-|f_i - f_c|^2 / (2 sigma_f^2))`.
pub fn feature_weight(f_i: &[f64], f_c: &[f64], sigma_f: f64) -> Result<f64, CrfError> {
    if f_i.len() != f_c.len() {
        return Err(CrfError::LengthMismatch {
            expected: f_c.len(),
            got: f_i.len(),
        });
    }
    debug_assert!(sigma_f > 0.0);
    let mut sq = 0.0;
    for (a, b) in f_i.iter().zip(f_c) {
        let d = a - b;
        sq += d * d;
    }
    // the true range is (0, 1]; keep underflowed weights strictly positive
    Ok(exp(-sq / (2.0 * sigma_f * sigma_f)).max(f64::MIN_POSITIVE))
}

/// Pairwise potential `w * (D_i - D_c)^2`.
#[inline]
pub fn pairwise_energy(d_i: f64, d_c: f64, omega: f64) -> f64 {
    let d = d_i - d_c;
    omega * d * d
}

/// Total energy of the field under the quadratic unary
/// `lambda_u * (D - d)^2` plus the star pairwise terms.
pub fn total_energy(field: &RegionDepthField, cfg: &CrfConfig) -> f64 {
    let c = field.center_index;
    let d_c = field.depths[c];
    let mut e = 0.0;
    for i in 0..field.len() {
        let du = field.depths[i] - field.unary[i];
        e += cfg.lambda_u * du * du;
        if i != c {
            e += pairwise_energy(field.depths[i], d_c, field.weights[i]);
        }
    }
    e
}

/// Analytic gradient of [`total_energy`] with respect to the depths, in
/// pixel order.
pub fn energy_gradient(field: &RegionDepthField, cfg: &CrfConfig) -> Vec<f64> {
    let c = field.center_index;
    let d_c = field.depths[c];
    let mut g = alloc::vec![0.0; field.len()];
    for i in 0..field.len() {
        g[i] += 2.0 * cfg.lambda_u * (field.depths[i] - field.unary[i]);
        if i != c {
            let diff = field.depths[i] - d_c;
            g[i] += 2.0 * field.weights[i] * diff;
            g[c] -= 2.0 * field.weights[i] * diff;
        }
    }
    g
}

/// Unique minimizer via star-graph elimination: with
/// `a_i = w_i / (lambda_u + w_i)`,
/// `D_c = (d_c + sum a_i d_i) / (1 + sum a_i)` and
/// `D_i = (lambda_u d_i + w_i D_c) / (lambda_u + w_i)`.
pub fn solve_closed_form(field: &mut RegionDepthField, cfg: &CrfConfig) {
    debug_assert!(cfg.lambda_u > 0.0);
    let c = field.center_index;
    let lambda = cfg.lambda_u;
    let mut alpha_sum = 0.0;
    let mut alpha_dot = 0.0;
    for i in 0..field.len() {
        if i == c {
            continue;
        }
        let a = field.weights[i] / (lambda + field.weights[i]);
        alpha_sum += a;
        alpha_dot += a * field.unary[i];
    }
    let d_center = (field.unary[c] + alpha_dot) / (1.0 + alpha_sum);
    for i in 0..field.len() {
        field.depths[i] = if i == c {
            d_center
        } else {
            (lambda * field.unary[i] + field.weights[i] * d_center) / (lambda + field.weights[i])
        };
    }
}

/// Per-sweep trace of the coordinate descent solver. `energies[0]` is the
/// energy of the initial state.
#[derive(Debug, Clone, PartialEq)]
pub struct DescentReport {
    pub sweeps: usize,
    pub energies: Vec<f64>,
    pub final_delta: f64,
}

/// Exact per-variable minimization, the center updated last each sweep,
/// until `|dE| < cfg.tol` or `cfg.max_iters` sweeps.
///
/// On non-convergence the field still holds the last iterate; the error
/// carries the trace.
pub fn solve_coordinate_descent(
    field: &mut RegionDepthField,
    cfg: &CrfConfig,
) -> Result<DescentReport, CrfError> {
    if cfg.max_iters == 0 {
        return Err(CrfError::InvalidConfig("max_iters >= 1"));
    }
    debug_assert!(cfg.lambda_u > 0.0);
    let c = field.center_index;
    let lambda = cfg.lambda_u;
    let mut energies = Vec::with_capacity(cfg.max_iters + 1);
    energies.push(total_energy(field, cfg));
    let mut delta = f64::INFINITY;
    let mut sweeps = 0;
    while sweeps < cfg.max_iters {
        let d_c = field.depths[c];
        for i in 0..field.len() {
            if i == c {
                continue;
            }
            field.depths[i] =
                (lambda * field.unary[i] + field.weights[i] * d_c) / (lambda + field.weights[i]);
        }
        let mut w_sum = 0.0;
        let mut w_dot = 0.0;
        for i in 0..field.len() {
            if i == c {
                continue;
            }
            w_sum += field.weights[i];
            w_dot += field.weights[i] * field.depths[i];
        }
        field.depths[c] = (lambda * field.unary[c] + w_dot) / (lambda + w_sum);
        let e = total_energy(field, cfg);
        delta = (energies.last().unwrap() - e).abs();
        energies.push(e);
        sweeps += 1;
        if delta < cfg.tol {
            return Ok(DescentReport {
                sweeps,
                energies,
                final_delta: delta,
            });
        }
    }
    Err(CrfError::NotConverged {
        report: Box::new(DescentReport {
            sweeps,
            energies,
            final_delta: delta,
        }),
    })
}

/// Where the initial per-pixel depth estimates come from: a depth raster at
/// image resolution (ground truth or an external prediction) or a constant.
#[derive(Debug, Clone, Copy)]
pub enum UnarySource<'a> {
    Raster(&'a Raster),
    Constant(f64),
}

/// A refined detection depth plus the full region field for inspection.
#[derive(Debug, Clone, PartialEq)]
pub struct Refined {
    pub center_depth: f64,
    pub field: RegionDepthField,
}

/// Runs the full per-detection refinement: samples feature vectors per
/// region pixel (nearest cell at `feature_stride`), computes the weights,
/// fills the unary estimates and minimizes the energy.
pub fn refine_center_depth(
    region: &Region,
    feature_map: &Raster,
    feature_stride: f64,
    unary: UnarySource<'_>,
    cfg: &CrfConfig,
) -> Result<Refined, CrfError> {
    cfg.validate()?;
    if feature_map.width() == 0 || feature_map.height() == 0 {
        return Err(CrfError::EmptyRegion);
    }
    let sample_cell = |coord: f64, max: u16| -> u16 {
        let c = libm::floor(coord / feature_stride);
        c.max(0.0).min(max as f64 - 1.0) as u16
    };
    let (cpx, cpy) = region.center_pixel();
    let f_c: Vec<f64> = feature_map
        .pixel(
            sample_cell(cpx as f64, feature_map.width()),
            sample_cell(cpy as f64, feature_map.height()),
        )
        .iter()
        .map(|&v| v as f64)
        .collect();

    let n = region.len();
    let mut unary_vals = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    let mut f_i = Vec::with_capacity(f_c.len());
    for (x, y) in region.pixels() {
        let d = match unary {
            UnarySource::Constant(v) => v,
            UnarySource::Raster(r) => {
                if !r.in_bounds(x as i64, y as i64) {
                    return Err(CrfError::UnarySourceMissing);
                }
                r.get(x, y, 0) as f64
            }
        };
        unary_vals.push(d);
        f_i.clear();
        f_i.extend(
            feature_map
                .pixel(
                    sample_cell(x as f64, feature_map.width()),
                    sample_cell(y as f64, feature_map.height()),
                )
                .iter()
                .map(|&v| v as f64),
        );
        let mut w = feature_weight(&f_i, &f_c, cfg.sigma_f)?;
        if let Some(sigma_s) = cfg.spatial_sigma {
            let dx = x as f64 - region.center().0;
            let dy = y as f64 - region.center().1;
            w *= exp(-(dx * dx + dy * dy) / (2.0 * sigma_s * sigma_s));
        }
        // exp of a non-positive argument can underflow to subnormal zero on
        // extreme feature distances; the field requires w > 0
        weights.push(w.max(f64::MIN_POSITIVE));
    }

    let mut field = RegionDepthField::new(region.clone(), unary_vals, weights)?;
    match cfg.solver {
        Solver::ClosedForm => solve_closed_form(&mut field, cfg),
        Solver::CoordinateDescent => match solve_coordinate_descent(&mut field, cfg) {
            Ok(_) => {}
            Err(CrfError::NotConverged { .. }) => {} // last iterate kept
            Err(e) => return Err(e),
        },
    }
    Ok(Refined {
        center_depth: field.center_depth(),
        field,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub enum CrfError {
    LengthMismatch { expected: usize, got: usize },
    WeightOutOfRange(f64),
    NonFiniteUnary,
    InvalidConfig(&'static str),
    NotConverged { report: Box<DescentReport> },
    EmptyRegion,
    UnarySourceMissing,
}

impl fmt::Display for CrfError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CrfError::LengthMismatch { expected, got } => {
                write!(f, "length mismatch: expected {expected}, got {got}")
            }
            CrfError::WeightOutOfRange(w) => write!(f, "weight {w} outside (0, 1]"),
            CrfError::NonFiniteUnary => write!(f, "unary depth estimates must be finite"),
            CrfError::InvalidConfig(inv) => write!(f, "config violates invariant: {inv}"),
            CrfError::NotConverged { report } => write!(
                f,
                "coordinate descent did not converge: |dE| = {:.3e} after {} sweeps",
                report.final_delta, report.sweeps
            ),
            CrfError::EmptyRegion => write!(f, "region does not intersect the feature map"),
            CrfError::UnarySourceMissing => {
                write!(f, "unary source does not cover the region")
            }
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for CrfError {}
