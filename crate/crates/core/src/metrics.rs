//! Depth-accuracy metrics: delta thresholds, MRE/MAE/RMSE, distance-binned
//! MAE, and the Center/Seg depth extraction baselines.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::fmt::Write as _;

use libm::{round, sqrt};

use crate::raster::Raster;

/// One evaluated target: predicted vs ground-truth center depth.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DepthPair {
    pub frame_id: u64,
    pub target_id: u64,
    pub pred_m: f64,
    pub gt_m: f64,
}

impl DepthPair {
    pub fn new(frame_id: u64, target_id: u64, pred_m: f64, gt_m: f64) -> Result<Self, MetricsError> {
        if !(gt_m > 0.0) || !pred_m.is_finite() {
            return Err(MetricsError::InvalidPair { frame_id, target_id });
        }
        Ok(Self {
            frame_id,
            target_id,
            pred_m,
            gt_m,
        })
    }
}

/// How the delta accuracy ratio is formed. The symmetric
/// `max(pred/gt, gt/pred)` form is the monocular-depth convention and the
/// default.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum DeltaRatio {
    #[default]
    Symmetric,
    PredOverGt,
}

/// Distance bin row: half-open `[lo, hi)`, the final bin closed at its
/// upper edge. Empty bins report `mae: None` so averages are never diluted.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BinMae {
    pub label: String,
    pub lo: f64,
    pub hi: f64,
    pub mae: Option<f64>,
    pub count: usize,
}

/// Full metric suite over one pair set.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MetricsReport {
    pub delta1: f64,
    pub delta2: f64,
    pub delta3: f64,
    pub mre: f64,
    pub mae: f64,
    pub rmse: f64,
    pub per_bin_mae: Vec<BinMae>,
    pub n: usize,
    pub threshold: f64,
}

/// Fraction of pairs whose ratio is strictly below `threshold^k` for
/// k = 1, 2, 3.
pub fn delta_metrics(
    pairs: &[DepthPair],
    threshold: f64,
    ratio: DeltaRatio,
) -> Result<(f64, f64, f64), MetricsError> {
    if pairs.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    debug_assert!(threshold > 1.0);
    let mut counts = [0usize; 3];
    for p in pairs {
        let r = match ratio {
            DeltaRatio::Symmetric => (p.pred_m / p.gt_m).max(p.gt_m / p.pred_m),
            DeltaRatio::PredOverGt => p.pred_m / p.gt_m,
        };
        let mut t = 1.0;
        for c in counts.iter_mut() {
            t *= threshold;
            if r < t {
                *c += 1;
            }
        }
    }
    let n = pairs.len() as f64;
    Ok((
        counts[0] as f64 / n,
        counts[1] as f64 / n,
        counts[2] as f64 / n,
    ))
}

/// `(mre, mae, rmse)` over the pair set.
pub fn error_metrics(pairs: &[DepthPair]) -> Result<(f64, f64, f64), MetricsError> {
    if pairs.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    let n = pairs.len() as f64;
    let mut rel = 0.0;
    let mut abs = 0.0;
    let mut sq = 0.0;
    for p in pairs {
        let e = (p.pred_m - p.gt_m).abs();
        rel += e / p.gt_m;
        abs += e;
        sq += e * e;
    }
    Ok((rel / n, abs / n, sqrt(sq / n)))
}

/// Per-bin MAE by ground-truth depth. Edges must be strictly increasing;
/// bins are `[lo, hi)` with the last bin closed at `hi`.
pub fn binned_mae(pairs: &[DepthPair], bin_edges: &[f64]) -> Vec<BinMae> {
    assert!(
        bin_edges.len() >= 2 && bin_edges.windows(2).all(|w| w[0] < w[1]),
        "bin edges must be strictly increasing"
    );
    let nbins = bin_edges.len() - 1;
    let mut sums = alloc::vec![0.0f64; nbins];
    let mut counts = alloc::vec![0usize; nbins];
    for p in pairs {
        let gt = p.gt_m;
        for b in 0..nbins {
            let last = b == nbins - 1;
            if gt >= bin_edges[b] && (gt < bin_edges[b + 1] || (last && gt == bin_edges[b + 1])) {
                sums[b] += (p.pred_m - p.gt_m).abs();
                counts[b] += 1;
                break;
            }
        }
    }
    (0..nbins)
        .map(|b| {
            let mut label = String::new();
            let _ = write!(label, "R{}", b + 1);
            BinMae {
                label,
                lo: bin_edges[b],
                hi: bin_edges[b + 1],
                mae: if counts[b] > 0 {
                    Some(sums[b] / counts[b] as f64)
                } else {
                    None
                },
                count: counts[b],
            }
        })
        .collect()
}

/// Center extraction baseline: reads the depth raster at the nearest
/// integer pixel to the given center.
pub fn extract_center_depth(raster: &Raster, center: (f64, f64)) -> Result<f64, MetricsError> {
    let x = round(center.0) as i64;
    let y = round(center.1) as i64;
    if !raster.in_bounds(x, y) {
        return Err(MetricsError::OutOfBounds);
    }
    Ok(raster.get(x as u16, y as u16, 0) as f64)
}

/// Seg extraction baseline: arithmetic mean of the depth raster over the
/// mask pixels.
pub fn extract_seg_depth(raster: &Raster, mask: &[(u16, u16)]) -> Result<f64, MetricsError> {
    if mask.is_empty() {
        return Err(MetricsError::EmptyMask);
    }
    let mut sum = 0.0;
    for &(x, y) in mask {
        if !raster.in_bounds(x as i64, y as i64) {
            return Err(MetricsError::OutOfBounds);
        }
        sum += raster.get(x, y, 0) as f64;
    }
    Ok(sum / mask.len() as f64)
}

/// Assembles the full report for one pair set.
pub fn build_report(
    pairs: &[DepthPair],
    threshold: f64,
    bin_edges: &[f64],
    ratio: DeltaRatio,
) -> Result<MetricsReport, MetricsError> {
    let (delta1, delta2, delta3) = delta_metrics(pairs, threshold, ratio)?;
    let (mre, mae, rmse) = error_metrics(pairs)?;
    Ok(MetricsReport {
        delta1,
        delta2,
        delta3,
        mre,
        mae,
        rmse,
        per_bin_mae: binned_mae(pairs, bin_edges),
        n: pairs.len(),
        threshold,
    })
}

impl MetricsReport {
    /// Aligned plain-text table in the headline column order
    /// (d1 d2 d3 MRE RMSE) followed by the per-bin MAE row.
    pub fn to_table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{:>8} {:>8} {:>8} {:>8} {:>8}",
            "d1", "d2", "d3", "MRE", "RMSE"
        );
        let _ = writeln!(
            s,
            "{:>8.3} {:>8.3} {:>8.3} {:>8.3} {:>8.3}",
            self.delta1, self.delta2, self.delta3, self.mre, self.rmse
        );
        let mut header = String::new();
        let mut row = String::new();
        for bin in &self.per_bin_mae {
            let _ = write!(header, "{:>10}", alloc::format!("MAE_{}", bin.label));
            match bin.mae {
                Some(m) => {
                    let _ = write!(row, "{:>10.3}", m);
                }
                None => {
                    let _ = write!(row, "{:>10}", "-");
                }
            }
        }
        let _ = writeln!(s, "{header}");
        let _ = writeln!(s, "{row}");
        let _ = writeln!(s, "n = {}", self.n);
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MetricsError {
    EmptyInput,
    EmptyMask,
    OutOfBounds,
    InvalidPair { frame_id: u64, target_id: u64 },
}

impl fmt::Display for MetricsError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MetricsError::EmptyInput => write!(f, "metric input is empty"),
            MetricsError::EmptyMask => write!(f, "segmentation mask is empty"),
            MetricsError::OutOfBounds => write!(f, "pixel outside the raster"),
            MetricsError::InvalidPair { frame_id, target_id } => write!(
                f,
                "invalid depth pair (frame {frame_id}, target {target_id}): gt must be > 0 and pred finite"
            ),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for MetricsError {}

/// Standard R1-R4 distance bin edges in meters.
pub const DEFAULT_BIN_EDGES: [f64; 5] = [0.0, 50.0, 100.0, 150.0, 200.0];

/// Headline delta threshold.
pub const DEFAULT_DELTA_THRESHOLD: f64 = 1.10;
