//! Pair ingestion, report serialization and plot-ready exports.

use std::fs;
use std::path::Path;

use centerdepth_core::bev::{OccupancyGrid, PlannedPath};
use centerdepth_core::metrics::{DepthPair, MetricsReport};

use crate::error::PipelineError;

/// Writes one `{frame_id, target_id, pred_m, gt_m}` object per line.
pub fn write_pairs(path: &Path, pairs: &[DepthPair]) -> Result<(), PipelineError> {
    let mut out = String::new();
    for p in pairs {
        out.push_str(
            &serde_json::to_string(p)
                .map_err(|e| PipelineError::Other(format!("pair serialization: {e}")))?,
        );
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| PipelineError::io(path, e))
}

pub fn read_pairs(path: &Path) -> Result<Vec<DepthPair>, PipelineError> {
    let text = fs::read_to_string(path).map_err(|_| PipelineError::MissingInput(path.into()))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            serde_json::from_str(l).map_err(|e| PipelineError::Other(format!("bad pair line: {e}")))
        })
        .collect()
}

/// Machine-readable report next to the human-readable fixed-width table.
pub fn write_report(dir: &Path, report: &MetricsReport) -> Result<(), PipelineError> {
    let json_path = dir.join("report.json");
    let json = serde_json::to_string_pretty(report)
        .map_err(|e| PipelineError::Other(format!("report serialization: {e}")))?;
    fs::write(&json_path, json).map_err(|e| PipelineError::io(&json_path, e))?;
    let table_path = dir.join("report.txt");
    fs::write(&table_path, report.to_table()).map_err(|e| PipelineError::io(&table_path, e))?;
    Ok(())
}

pub fn read_report(path: &Path) -> Result<MetricsReport, PipelineError> {
    let text = fs::read_to_string(path).map_err(|_| PipelineError::MissingInput(path.into()))?;
    serde_json::from_str(&text).map_err(|e| PipelineError::Other(format!("bad report: {e}")))
}

/// One bar per bin: `label,mae,count`; empty bins emit an empty mae field.
pub fn write_bin_mae_csv(path: &Path, report: &MetricsReport) -> Result<(), PipelineError> {
    let mut out = String::from("bin,mae_m,count\n");
    for bin in &report.per_bin_mae {
        match bin.mae {
            Some(m) => out.push_str(&format!("{},{},{}\n", bin.label, m, bin.count)),
            None => out.push_str(&format!("{},,0\n", bin.label)),
        }
    }
    fs::write(path, out).map_err(|e| PipelineError::io(path, e))
}

/// BEV scatter: one `x,z` row per occupied cell center.
pub fn write_grid_csv(path: &Path, grid: &OccupancyGrid) -> Result<(), PipelineError> {
    let mut out = String::from("x_m,z_m\n");
    for (i, j) in grid.occupied_cells() {
        let (x, z) = grid.cell_center(i, j);
        out.push_str(&format!("{x},{z}\n"));
    }
    fs::write(path, out).map_err(|e| PipelineError::io(path, e))
}

/// Path polyline: one `x,z` row per path cell, start to goal.
pub fn write_path_csv(
    path: &Path,
    grid: &OccupancyGrid,
    planned: &PlannedPath,
) -> Result<(), PipelineError> {
    let mut out = String::from("x_m,z_m\n");
    for &(i, j) in &planned.cells {
        let (x, z) = grid.cell_center(i, j);
        out.push_str(&format!("{x},{z}\n"));
    }
    fs::write(path, out).map_err(|e| PipelineError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use centerdepth_core::bev::{rasterize_obstacles, GridSpec, GroundPoint};
    use centerdepth_core::metrics::{build_report, DeltaRatio};

    fn pairs() -> Vec<DepthPair> {
        vec![
            DepthPair::new(0, 0, 10.5, 10.0).unwrap(),
            DepthPair::new(0, 1, 57.0, 60.0).unwrap(),
            DepthPair::new(1, 0, 130.0, 120.0).unwrap(),
            DepthPair::new(1, 1, 155.0, 180.0).unwrap(),
        ]
    }

    #[test]
    fn pairs_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pairs.jsonl");
        write_pairs(&path, &pairs()).unwrap();
        assert_eq!(read_pairs(&path).unwrap(), pairs());
    }

    #[test]
    fn report_round_trips_losslessly() {
        let report = build_report(
            &pairs(),
            1.10,
            &[0.0, 50.0, 100.0, 150.0, 200.0],
            DeltaRatio::Symmetric,
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_report(dir.path(), &report).unwrap();
        let back = read_report(&dir.path().join("report.json")).unwrap();
        assert_eq!(back, report);
        let table = fs::read_to_string(dir.path().join("report.txt")).unwrap();
        assert!(table.contains("d1") && table.contains("MAE_R4"));
    }

    #[test]
    fn bar_file_has_one_row_per_bin() {
        let report = build_report(
            &pairs(),
            1.10,
            &[0.0, 50.0, 100.0, 150.0, 200.0],
            DeltaRatio::Symmetric,
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bin_mae.csv");
        write_bin_mae_csv(&path, &report).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 1 + 4);
    }

    #[test]
    fn scatter_rows_equal_occupied_cells() {
        let spec = GridSpec {
            resolution: 1.0,
            x_min: -5.0,
            x_max: 5.0,
            z_min: 0.0,
            z_max: 10.0,
        };
        let grid = rasterize_obstacles(
            &[GroundPoint {
                x: 0.0,
                z: 5.0,
                radius: 1.2,
            }],
            spec,
            0.0,
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("grid.csv");
        write_grid_csv(&path, &grid).unwrap();
        let rows = fs::read_to_string(&path).unwrap().lines().count() - 1;
        assert_eq!(rows, grid.occupied_count());
        assert!(rows > 0);
    }
}
