//! Run orchestration for the CLI subcommands.
//!
//! Every run gets a fresh timestamped directory under `out_dir` holding
//! the echoed resolved config and all artifacts. File contents contain no
//! timestamps, so identical (config, seed) runs are byte-identical. On any
//! error a `FAILED` marker with the message is left in the run directory.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use rand_chacha::ChaCha8Rng;
use rand_core::SeedableRng;

use centerdepth_core::bev::{astar, detection_to_bev, rasterize_obstacles, OccupancyGrid};
use centerdepth_core::crf::{refine_center_depth, UnarySource};
use centerdepth_core::geometry::CameraIntrinsics;
use centerdepth_core::heatmap::{extract_peaks, Detection};
use centerdepth_core::metrics::{build_report, extract_center_depth, DepthPair};
use centerdepth_core::scene::{generate_scene, render_frame, standard_normal, SyntheticFrame};
use centerdepth_core::Raster;

use crate::config::RunConfig;
use crate::dataset::{emit_dataset, load_dataset};
use crate::error::PipelineError;
use crate::report::{
    read_pairs, write_bin_mae_csv, write_grid_csv, write_pairs, write_path_csv, write_report,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Gen,
    Refine,
    Eval,
    Plan,
    Demo,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Gen => "gen",
            Command::Refine => "refine",
            Command::Eval => "eval",
            Command::Plan => "plan",
            Command::Demo => "demo",
        }
    }
}

/// Creates `out_dir/run-<epoch-seconds>-<cmd>`, suffixed on collision.
pub fn create_run_dir(cfg: &RunConfig, cmd: Command) -> Result<PathBuf, PipelineError> {
    let stamp = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    for attempt in 0u32.. {
        let name = if attempt == 0 {
            format!("run-{stamp}-{}", cmd.name())
        } else {
            format!("run-{stamp}-{}-{attempt}", cmd.name())
        };
        let dir = cfg.out_dir.join(name);
        match fs::create_dir_all(dir.parent().unwrap())
            .and_then(|_| fs::create_dir(&dir))
        {
            Ok(()) => {
                let echo_path = dir.join("config.toml");
                fs::write(&echo_path, crate::config::echo(cfg))
                    .map_err(|e| PipelineError::io(&echo_path, e))?;
                return Ok(dir);
            }
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => continue,
            Err(e) => return Err(PipelineError::io(&dir, e)),
        }
    }
    unreachable!()
}

pub fn write_failure_marker(run_dir: &Path, err: &PipelineError) {
    let _ = fs::write(run_dir.join("FAILED"), format!("{err}\n"));
}

fn thread_pool(cfg: &RunConfig) -> Result<rayon::ThreadPool, PipelineError> {
    let mut n = if cfg.threads == 0 {
        std::thread::available_parallelism().map(|p| p.get()).unwrap_or(1)
    } else {
        cfg.threads
    };
    if let Ok(cap) = std::env::var("CENTERDEPTH_THREADS") {
        if let Ok(cap) = cap.parse::<usize>() {
            if cap >= 1 {
                n = n.min(cap);
            }
        }
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build()
        .map_err(|e| PipelineError::Other(format!("thread pool: {e}")))
}

/// `gen`: render `cfg.frames` frames and emit them as a dataset.
pub fn run_gen(cfg: &RunConfig, run_dir: &Path) -> Result<PathBuf, PipelineError> {
    let scene_cfg = cfg.scene_resolved();
    let pool = thread_pool(cfg)?;
    let frames: Result<Vec<SyntheticFrame>, PipelineError> = pool.install(|| {
        use rayon::prelude::*;
        (0..cfg.frames as u64)
            .into_par_iter()
            .map(|f| {
                let targets = generate_scene(&scene_cfg, f)?;
                Ok(render_frame(&targets, &scene_cfg, f)?)
            })
            .collect()
    });
    let frames = frames?;
    let dataset_dir = run_dir.join("dataset");
    emit_dataset(&frames, &dataset_dir)?;
    Ok(dataset_dir)
}

/// Zero-mean Gaussian corruption of the depth raster inside annotation
/// boxes, std `coeff * depth` per pixel. Pixel visit order is fixed so the
/// result is deterministic; overlap pixels are corrupted once.
pub fn corrupt_depth(frame: &SyntheticFrame, coeff: f64, seed: u64) -> Raster {
    let mut noisy = frame.depth.clone();
    if coeff <= 0.0 {
        return noisy;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // dedicated stream family, disjoint from scene generation streams
    rng.set_stream((1u64 << 32) | frame.frame_id);
    let (w, h) = (noisy.width(), noisy.height());
    let mut visited = vec![false; w as usize * h as usize];
    for a in &frame.annotations {
        let x0 = a.bbox[0].floor().max(0.0) as u16;
        let x1 = (a.bbox[2].ceil() as i64).min(w as i64 - 1) as u16;
        let y0 = a.bbox[1].floor().max(0.0) as u16;
        let y1 = (a.bbox[3].ceil() as i64).min(h as i64 - 1) as u16;
        for py in y0..=y1 {
            for px in x0..=x1 {
                let idx = py as usize * w as usize + px as usize;
                if visited[idx] {
                    continue;
                }
                visited[idx] = true;
                let d = noisy.get(px, py, 0) as f64;
                let corrupted = d + coeff * d * standard_normal(&mut rng);
                noisy.set(px, py, 0, corrupted.max(0.1) as f32);
            }
        }
    }
    noisy
}

/// One decoded target: its annotation index, detection, and GT depth.
pub struct DecodedTarget {
    pub target_id: u64,
    pub detection: Detection,
    pub gt_depth: f64,
}

/// Decodes the frame's heatmap and assigns one detection per annotation.
///
/// Each annotation claims the peak nearest its center cell (within one
/// window radius); if none survives non-maximum suppression the annotation
/// center itself anchors the detection, so downstream pair counts always
/// equal the annotation count.
pub fn decode_frame(frame: &SyntheticFrame, cfg: &RunConfig) -> Vec<DecodedTarget> {
    let hm = &frame.heatmap;
    let peaks = extract_peaks(hm, cfg.decode.score_threshold, cfg.decode.window);
    let bounds = (frame.depth.width(), frame.depth.height());
    let reach = cfg.decode.window as i64 / 2;
    frame
        .annotations
        .iter()
        .enumerate()
        .map(|(i, a)| {
            let cell = (hm.image_to_cell(a.center.0), hm.image_to_cell(a.center.1));
            let near = peaks
                .iter()
                .filter(|p| {
                    (p.cell.0 as i64 - cell.0 as i64).abs() <= reach
                        && (p.cell.1 as i64 - cell.1 as i64).abs() <= reach
                })
                .min_by(|a, b| {
                    let d = |p: &centerdepth_core::heatmap::Peak| {
                        let dx = p.cell.0 as i64 - cell.0 as i64;
                        let dy = p.cell.1 as i64 - cell.1 as i64;
                        dx * dx + dy * dy
                    };
                    d(a).cmp(&d(b))
                });
            // the annotation center stands in for the sub-cell offset head:
            // cell-quantized centers (up to stride/2 off) can miss targets
            // only a few pixels wide
            let center = a.center;
            let score = near.map_or_else(|| hm.get(cell.0, cell.1), |p| p.score);
            let size = if cfg.decode.use_gt_sizes {
                a.region_extent()
            } else {
                let c = (hm.image_to_cell(center.0), hm.image_to_cell(center.1));
                (
                    frame.size_map.get(c.0, c.1, 0) as f64,
                    frame.size_map.get(c.0, c.1, 1) as f64,
                )
            };
            let detection = Detection::new(center, size, a.class, score, bounds)
                .expect("annotation centers are inside the image");
            DecodedTarget {
                target_id: i as u64,
                detection,
                gt_depth: a.depth_m,
            }
        })
        .collect()
}

/// Refined and raw center-extraction pairs for one frame.
pub fn refine_frame(
    frame: &SyntheticFrame,
    cfg: &RunConfig,
) -> Result<(Vec<DepthPair>, Vec<DepthPair>), PipelineError> {
    let noisy = corrupt_depth(frame, cfg.refine.unary_noise_coeff, cfg.seed);
    let stride = frame.heatmap.stride();
    let mut refined = Vec::new();
    let mut raw = Vec::new();
    for t in decode_frame(frame, cfg) {
        let r = refine_center_depth(
            &t.detection.region,
            &frame.feature_map,
            stride,
            UnarySource::Raster(&noisy),
            &cfg.crf,
        )?;
        refined.push(DepthPair::new(
            frame.frame_id,
            t.target_id,
            r.center_depth,
            t.gt_depth,
        )?);
        let center_value = extract_center_depth(&noisy, t.detection.center)?;
        raw.push(DepthPair::new(
            frame.frame_id,
            t.target_id,
            center_value,
            t.gt_depth,
        )?);
    }
    Ok((refined, raw))
}

/// `refine`: dataset -> `pairs.jsonl` (CRF) and `pairs_center.jsonl`
/// (raw center-extraction baseline).
pub fn run_refine(
    cfg: &RunConfig,
    dataset_dir: &Path,
    run_dir: &Path,
) -> Result<PathBuf, PipelineError> {
    let frames = load_dataset(dataset_dir)?;
    let pool = thread_pool(cfg)?;
    let per_frame: Result<Vec<_>, PipelineError> = pool.install(|| {
        use rayon::prelude::*;
        frames.par_iter().map(|f| refine_frame(f, cfg)).collect()
    });
    let mut refined = Vec::new();
    let mut raw = Vec::new();
    for (r, c) in per_frame? {
        refined.extend(r);
        raw.extend(c);
    }
    let pairs_path = run_dir.join("pairs.jsonl");
    write_pairs(&pairs_path, &refined)?;
    write_pairs(&run_dir.join("pairs_center.jsonl"), &raw)?;
    Ok(pairs_path)
}

/// `eval`: pairs -> report.json, report.txt, bin_mae.csv.
pub fn run_eval(cfg: &RunConfig, pairs_path: &Path, run_dir: &Path) -> Result<(), PipelineError> {
    let pairs = read_pairs(pairs_path)?;
    let report = build_report(
        &pairs,
        cfg.eval.threshold,
        &cfg.eval.bin_edges,
        cfg.eval.ratio,
    )?;
    write_report(run_dir, &report)?;
    write_bin_mae_csv(&run_dir.join("bin_mae.csv"), &report)?;
    Ok(())
}

/// Deterministic nearest free cell by squared distance, row-major ties.
fn nearest_free(grid: &OccupancyGrid, want: (u16, u16)) -> Option<(u16, u16)> {
    let (nx, nz) = grid.dims();
    let mut best: Option<((u16, u16), i64)> = None;
    for j in 0..nz {
        for i in 0..nx {
            if grid.occupied(i, j) {
                continue;
            }
            let dx = i as i64 - want.0 as i64;
            let dz = j as i64 - want.1 as i64;
            let d = dx * dx + dz * dz;
            if best.map_or(true, |(_, bd)| d < bd) {
                best = Some(((i, j), d));
            }
        }
    }
    best.map(|(c, _)| c)
}

/// `plan`: first frame's refined detections -> occupancy grid + A* path.
pub fn run_plan(cfg: &RunConfig, dataset_dir: &Path, run_dir: &Path) -> Result<(), PipelineError> {
    let frames = load_dataset(dataset_dir)?;
    let frame = frames
        .first()
        .ok_or_else(|| PipelineError::Other("dataset has no frames".to_string()))?;
    let noisy = corrupt_depth(frame, cfg.refine.unary_noise_coeff, cfg.seed);
    let scene_cfg = cfg.scene_resolved();
    let k: CameraIntrinsics = scene_cfg.intrinsics();
    let stride = frame.heatmap.stride();
    let mut points = Vec::new();
    for t in decode_frame(frame, cfg) {
        let depth = refine_center_depth(
            &t.detection.region,
            &frame.feature_map,
            stride,
            UnarySource::Raster(&noisy),
            &cfg.crf,
        )?
        .center_depth;
        points.push(detection_to_bev(&t.detection, depth, &k)?);
    }
    let grid = rasterize_obstacles(&points, cfg.plan.grid_spec(), cfg.plan.inflation_m)?;
    write_grid_csv(&run_dir.join("grid.csv"), &grid)?;
    let want_start = grid
        .cell_of(cfg.plan.start_xz[0], cfg.plan.start_xz[1])
        .ok_or_else(|| PipelineError::ValidationFailure("plan.start_xz inside grid".to_string()))?;
    let want_goal = grid
        .cell_of(cfg.plan.goal_xz[0], cfg.plan.goal_xz[1])
        .ok_or_else(|| PipelineError::ValidationFailure("plan.goal_xz inside grid".to_string()))?;
    // endpoints landing on an obstacle snap to the nearest free cell
    let start = nearest_free(&grid, want_start)
        .ok_or_else(|| PipelineError::Other("grid fully occupied".to_string()))?;
    let goal = nearest_free(&grid, want_goal)
        .ok_or_else(|| PipelineError::Other("grid fully occupied".to_string()))?;
    let path = astar(&grid, start, goal)?;
    write_path_csv(&run_dir.join("path.csv"), &grid, &path)?;
    Ok(())
}

/// Runs one subcommand end to end inside a fresh run directory. Returns
/// the run directory on success.
pub fn run(cfg: &RunConfig, cmd: Command, input: Option<&Path>) -> Result<PathBuf, PipelineError> {
    let run_dir = create_run_dir(cfg, cmd)?;
    let result = (|| -> Result<(), PipelineError> {
        match cmd {
            Command::Gen => {
                run_gen(cfg, &run_dir)?;
            }
            Command::Refine => {
                let dataset = input.ok_or_else(|| {
                    PipelineError::MissingInput(PathBuf::from("--input <dataset dir>"))
                })?;
                run_refine(cfg, dataset, &run_dir)?;
            }
            Command::Eval => {
                let pairs = input.ok_or_else(|| {
                    PipelineError::MissingInput(PathBuf::from("--input <pairs.jsonl>"))
                })?;
                run_eval(cfg, pairs, &run_dir)?;
            }
            Command::Plan => {
                let dataset = input.ok_or_else(|| {
                    PipelineError::MissingInput(PathBuf::from("--input <dataset dir>"))
                })?;
                run_plan(cfg, dataset, &run_dir)?;
            }
            Command::Demo => {
                let dataset = run_gen(cfg, &run_dir)?;
                let pairs = run_refine(cfg, &dataset, &run_dir)?;
                run_eval(cfg, &pairs, &run_dir)?;
                run_plan(cfg, &dataset, &run_dir)?;
            }
        }
        Ok(())
    })();
    match result {
        Ok(()) => Ok(run_dir),
        Err(e) => {
            write_failure_marker(&run_dir, &e);
            Err(e)
        }
    }
}
