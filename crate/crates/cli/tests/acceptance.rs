//! Acceptance gate: ten numbered criteria, one pass/fail line each.
//!
//! Built without the default test harness so every line prints under
//! `cargo test`; the process exits non-zero if any criterion fails.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use nalgebra::{DMatrix, DVector, Matrix3, Matrix4, Rotation3, Vector3, Vector4};
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use sha2::{Digest, Sha256};

use centerdepth::config::RunConfig;
use centerdepth::pipeline::refine_frame;
use centerdepth::report::{read_report, write_report};
use centerdepth_core::bev::{astar, BevError, GridSpec, OccupancyGrid};
use centerdepth_core::crf::{
    energy_gradient, feature_weight, solve_closed_form, solve_coordinate_descent, total_energy,
    CrfConfig, CrfError, RegionDepthField,
};
use centerdepth_core::geometry::{
    back_project, project_to_image, world_to_camera, Box3D, CameraIntrinsics, CameraPoint,
    ObjectClass, RigidTransform, WorldPoint,
};
use centerdepth_core::heatmap::{build_region, extract_peaks, Heatmap, Region};
use centerdepth_core::metrics::{
    binned_mae, delta_metrics, error_metrics, DeltaRatio, DepthPair, DEFAULT_BIN_EDGES,
};
use centerdepth_core::scene::{generate_scene, render_frame};

fn unit(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * unit(rng)
}

type Check = Result<String, String>;

// --- criteria 1 and 2: CRF solver correctness -------------------------------

/// Region with an exact pixel count of `sw x sh`, sides 1..=32.
fn random_region(rng: &mut ChaCha8Rng) -> Region {
    let sw = 1 + (rng.next_u64() % 32) as u16;
    let sh = 1 + (rng.next_u64() % 32) as u16;
    let cx = 33.0 + if sw % 2 == 0 { 0.5 } else { 0.0 };
    let cy = 33.0 + if sh % 2 == 0 { 0.5 } else { 0.0 };
    let r = build_region((cx, cy), (sw - 1) as f64, (sh - 1) as f64, (96, 96))
        .expect("region inside bounds");
    assert_eq!(r.len(), sw as usize * sh as usize);
    r
}

/// Field with random unary depths in [1, 200] and weights derived from
/// random per-pixel feature vectors.
fn random_field(rng: &mut ChaCha8Rng) -> RegionDepthField {
    let region = random_region(rng);
    let n = region.len();
    let features: Vec<[f64; 4]> = (0..n)
        .map(|_| {
            [
                uniform(rng, 0.0, 1.0),
                uniform(rng, 0.0, 1.0),
                uniform(rng, 0.0, 1.0),
                uniform(rng, 0.0, 1.0),
            ]
        })
        .collect();
    let center = {
        let c = region.center_pixel();
        region.pixels().position(|p| p == c).unwrap()
    };
    let f_c = features[center];
    let mut weights: Vec<f64> = features
        .iter()
        .map(|f| feature_weight(f, &f_c, 0.25).unwrap())
        .collect();
    weights[center] = 1.0;
    let unary: Vec<f64> = (0..n).map(|_| uniform(rng, 1.0, 200.0)).collect();
    RegionDepthField::new(region, unary, weights).unwrap()
}

/// Stationarity system of the quadratic energy, solved densely with an
/// independent LU factorization.
fn dense_solve(field: &RegionDepthField, lambda: f64) -> DVector<f64> {
    let n = field.len();
    let c = field.center_index();
    let mut a = DMatrix::zeros(n, n);
    let mut b = DVector::zeros(n);
    for i in 0..n {
        b[i] = lambda * field.unary[i];
        if i == c {
            let w_sum: f64 = (0..n).filter(|&j| j != c).map(|j| field.weights[j]).sum();
            a[(i, i)] = lambda + w_sum;
            for j in 0..n {
                if j != c {
                    a[(i, j)] = -field.weights[j];
                }
            }
        } else {
            a[(i, i)] = lambda + field.weights[i];
            a[(i, c)] = -field.weights[i];
        }
    }
    a.lu().solve(&b).expect("system is positive definite")
}

fn criterion_1(fields: &[RegionDepthField]) -> Check {
    let t0 = Instant::now();
    let cfg = CrfConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(201);
    for (case, base) in fields.iter().enumerate() {
        // gradient vs central differences at a perturbed state; the energy
        // is quadratic so any step is exact up to rounding
        let mut field = base.clone();
        for d in field.depths.iter_mut() {
            *d += uniform(&mut rng, -3.0, 3.0);
        }
        let grad = energy_gradient(&field, &cfg);
        let n = field.len();
        let coords: Vec<usize> = if n <= 64 {
            (0..n).collect()
        } else {
            let mut v: Vec<usize> = (0..16).map(|_| rng.next_u64() as usize % n).collect();
            v.push(field.center_index());
            v
        };
        let h = 1e-3;
        for &i in &coords {
            let orig = field.depths[i];
            field.depths[i] = orig + h;
            let ep = total_energy(&field, &cfg);
            field.depths[i] = orig - h;
            let em = total_energy(&field, &cfg);
            field.depths[i] = orig;
            let fd = (ep - em) / (2.0 * h);
            if (grad[i] - fd).abs() > 1e-6 * fd.abs().max(1.0) {
                return Err(format!(
                    "case {case} pixel {i}: gradient {} vs finite difference {fd}",
                    grad[i]
                ));
            }
        }
        let mut field = base.clone();
        let want = dense_solve(&field, cfg.lambda_u);
        solve_closed_form(&mut field, &cfg);
        for i in 0..n {
            if (field.depths[i] - want[i]).abs() > 1e-9 * want[i].abs().max(1.0) {
                return Err(format!(
                    "case {case} pixel {i}: closed form {} vs dense solve {}",
                    field.depths[i], want[i]
                ));
            }
        }
    }
    let dt = t0.elapsed().as_secs_f64();
    if dt >= 30.0 {
        return Err(format!("runtime {dt:.1}s exceeds the 30s budget"));
    }
    Ok(format!("{} regions, {dt:.1}s", fields.len()))
}

fn criterion_2(fields: &[RegionDepthField]) -> Check {
    let cfg = CrfConfig {
        tol: 1e-15,
        max_iters: 20_000,
        ..CrfConfig::default()
    };
    for (case, base) in fields.iter().enumerate() {
        let mut cd = base.clone();
        let report = match solve_coordinate_descent(&mut cd, &cfg) {
            Ok(r) => r,
            // an absolute energy tolerance of 1e-15 can sit below rounding
            // noise on large regions; the iterate is still at the optimum
            Err(CrfError::NotConverged { report }) => *report,
            Err(e) => return Err(format!("case {case}: solver error {e}")),
        };
        for (s, w) in report.energies.windows(2).enumerate() {
            if w[1] > w[0] + 1e-9 * w[0].abs().max(1.0) {
                return Err(format!(
                    "case {case} sweep {s}: energy rose from {} to {}",
                    w[0], w[1]
                ));
            }
        }
        let mut cf = base.clone();
        solve_closed_form(&mut cf, &cfg);
        for i in 0..base.len() {
            if (cd.depths[i] - cf.depths[i]).abs() > 1e-6 * cf.depths[i].abs().max(1.0) {
                return Err(format!(
                    "case {case} pixel {i}: descent {} vs closed form {}",
                    cd.depths[i], cf.depths[i]
                ));
            }
        }
    }
    Ok(format!(
        "{} regions, per-sweep energy trace non-increasing",
        fields.len()
    ))
}

// --- criterion 3: feature-similarity weight ---------------------------------

fn criterion_3() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(103);
    let inv_e = (-1.0f64).exp();
    for case in 0..100_000 {
        let dim = 1 + (rng.next_u64() % 8) as usize;
        let sigma = uniform(&mut rng, 0.05, 1.0);
        let f_c: Vec<f64> = (0..dim).map(|_| uniform(&mut rng, -2.0, 2.0)).collect();

        // perturbed pair: inside (0, 1] and strictly below 1
        let f_i: Vec<f64> = f_c
            .iter()
            .map(|&v| {
                let mag = uniform(&mut rng, 1e-6, 1.0);
                v + if rng.next_u64() & 1 == 0 { mag } else { -mag }
            })
            .collect();
        let w = feature_weight(&f_i, &f_c, sigma).unwrap();
        if !(w > 0.0 && w <= 1.0) {
            return Err(format!("case {case}: weight {w} outside (0, 1]"));
        }
        if w == 1.0 {
            return Err(format!("case {case}: unequal vectors produced weight 1"));
        }

        // bitwise-equal pair: exactly 1
        let w = feature_weight(&f_c, &f_c, sigma).unwrap();
        if w != 1.0 {
            return Err(format!("case {case}: equal vectors produced weight {w}"));
        }

        // squared feature distance of exactly two sigma^2: weight 1/e
        let mut f_i = f_c.clone();
        f_i[0] += sigma * 2f64.sqrt();
        let w = feature_weight(&f_i, &f_c, sigma).unwrap();
        if (w - inv_e).abs() > 1e-12 {
            return Err(format!(
                "case {case}: weight {w} deviates from 1/e by {:.3e}",
                (w - inv_e).abs()
            ));
        }
    }
    Ok("100000 vector pairs, bounds + identity + 1/e anchor".to_string())
}

// --- criterion 4: projection suite ------------------------------------------

fn criterion_4() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(104);
    for case in 0..100_000 {
        // rigid transform vs homogeneous 4x4 oracle
        let rot = Rotation3::from_euler_angles(
            uniform(&mut rng, -3.0, 3.0),
            uniform(&mut rng, -3.0, 3.0),
            uniform(&mut rng, -3.0, 3.0),
        );
        let m = rot.matrix();
        let rotation = [
            [m[(0, 0)], m[(0, 1)], m[(0, 2)]],
            [m[(1, 0)], m[(1, 1)], m[(1, 2)]],
            [m[(2, 0)], m[(2, 1)], m[(2, 2)]],
        ];
        let translation = [
            uniform(&mut rng, -50.0, 50.0),
            uniform(&mut rng, -50.0, 50.0),
            uniform(&mut rng, -50.0, 50.0),
        ];
        let x = RigidTransform::new(rotation, translation).expect("orthonormal");
        let p = WorldPoint {
            x: uniform(&mut rng, -100.0, 100.0),
            y: uniform(&mut rng, -100.0, 100.0),
            z: uniform(&mut rng, -100.0, 100.0),
        };
        let got = world_to_camera(p, &x);
        let m4 = Matrix4::new(
            rotation[0][0], rotation[0][1], rotation[0][2], translation[0],
            rotation[1][0], rotation[1][1], rotation[1][2], translation[1],
            rotation[2][0], rotation[2][1], rotation[2][2], translation[2],
            0.0, 0.0, 0.0, 1.0,
        );
        let want = m4 * Vector4::new(p.x, p.y, p.z, 1.0);
        for (g, w) in [(got.x, want[0]), (got.y, want[1]), (got.z, want[2])] {
            if (g - w).abs() > 1e-12 * w.abs().max(1.0) {
                return Err(format!("case {case}: transform {g} vs matrix {w}"));
            }
        }

        // pinhole projection vs 3x3 intrinsic-matrix oracle, then the
        // round trip back to camera coordinates
        let k = CameraIntrinsics::new(
            uniform(&mut rng, 200.0, 1200.0),
            uniform(&mut rng, 200.0, 1200.0),
            uniform(&mut rng, 100.0, 900.0),
            uniform(&mut rng, 100.0, 700.0),
            1024,
            768,
        )
        .expect("positive intrinsics");
        let c = CameraPoint {
            x: uniform(&mut rng, -40.0, 40.0),
            y: uniform(&mut rng, -40.0, 40.0),
            z: uniform(&mut rng, 0.5, 250.0),
        };
        let ip = project_to_image(c, &k).unwrap();
        let k3 = Matrix3::new(k.fx, 0.0, k.cx, 0.0, k.fy, k.cy, 0.0, 0.0, 1.0);
        let h = k3 * Vector3::new(c.x, c.y, c.z);
        let (wu, wv) = (h[0] / h[2], h[1] / h[2]);
        // scale the tolerance by the cancelling term magnitudes, the
        // honest relative-error reference for u = fx x / z + cx
        let su = (k.fx * c.x / c.z).abs().max(k.cx).max(1.0);
        let sv = (k.fy * c.y / c.z).abs().max(k.cy).max(1.0);
        if (ip.u - wu).abs() > 1e-12 * su || (ip.v - wv).abs() > 1e-12 * sv {
            return Err(format!(
                "case {case}: projection ({}, {}) vs matrix ({wu}, {wv})",
                ip.u, ip.v
            ));
        }
        let back = back_project(ip, &k).unwrap();
        if (back.x - c.x).abs() > 1e-9 || (back.y - c.y).abs() > 1e-9 || (back.z - c.z).abs() > 1e-9
        {
            return Err(format!("case {case}: round trip drifted"));
        }

        // projected box hull must contain the projected center
        let center = WorldPoint {
            x: uniform(&mut rng, -20.0, 20.0),
            y: uniform(&mut rng, -20.0, 20.0),
            z: uniform(&mut rng, 6.0, 150.0),
        };
        let b = Box3D::from_pose(
            ObjectClass::Car,
            center,
            uniform(&mut rng, 0.5, 5.0),
            uniform(&mut rng, 0.5, 5.0),
            uniform(&mut rng, 0.5, 5.0),
            uniform(&mut rng, -3.2, 3.2),
        );
        let ident = RigidTransform::identity();
        let mut hull = [f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY];
        for v in &b.vertices {
            let ip = project_to_image(world_to_camera(*v, &ident), &k).unwrap();
            hull[0] = hull[0].min(ip.u);
            hull[1] = hull[1].min(ip.v);
            hull[2] = hull[2].max(ip.u);
            hull[3] = hull[3].max(ip.v);
        }
        let cp = project_to_image(world_to_camera(center, &ident), &k).unwrap();
        if cp.u < hull[0] - 1e-9
            || cp.u > hull[2] + 1e-9
            || cp.v < hull[1] - 1e-9
            || cp.v > hull[3] + 1e-9
        {
            return Err(format!("case {case}: center outside the projected hull"));
        }
    }
    Ok("100000 configurations, matrix oracle + round trip + hulls".to_string())
}

// --- criterion 5: decoder exactness -----------------------------------------

fn criterion_5() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(105);
    let size: u16 = 96;
    for frame in 0..500 {
        let mut hm = Heatmap::zeros(size, 4.0);
        let count = 1 + (rng.next_u64() % 8) as usize;
        let mut planted: Vec<(u16, u16)> = Vec::new();
        while planted.len() < count {
            let cand = (
                (rng.next_u64() % size as u64) as u16,
                (rng.next_u64() % size as u64) as u16,
            );
            // splat radius is at most ceil(5 * 17/6) = 15 cells; 24 cells
            // of separation keeps every peak's window untouched by others
            let clear = planted.iter().all(|p| {
                (p.0 as i32 - cand.0 as i32).abs().max((p.1 as i32 - cand.1 as i32).abs()) >= 24
            });
            if clear {
                planted.push(cand);
            }
        }
        for &cell in &planted {
            let w = uniform(&mut rng, 6.0, 17.0);
            let h = uniform(&mut rng, 6.0, 17.0);
            hm.render_gaussian_peak(cell, (w, h)).unwrap();
        }
        let peaks = extract_peaks(&hm, 0.5, 3);
        let mut got: Vec<(u16, u16)> = peaks.iter().map(|p| p.cell).collect();
        got.sort_unstable();
        planted.sort_unstable();
        if got != planted {
            return Err(format!(
                "frame {frame}: planted {planted:?}, decoded {got:?}"
            ));
        }
        if peaks.iter().any(|p| p.score != 1.0) {
            return Err(format!("frame {frame}: planted center score below 1"));
        }
    }
    Ok("500 frames, planted centers recovered exactly, no false positives".to_string())
}

// --- criterion 6: metric oracle equivalence ---------------------------------

#[allow(clippy::type_complexity)]
fn brute_force_metrics(pairs: &[DepthPair], threshold: f64) -> (f64, f64, f64, f64, f64, f64) {
    let n = pairs.len() as f64;
    let mut d = [0.0; 3];
    for (ki, dk) in d.iter_mut().enumerate() {
        let t = threshold.powi(ki as i32 + 1);
        *dk = pairs
            .iter()
            .filter(|p| (p.pred_m / p.gt_m).max(p.gt_m / p.pred_m) < t)
            .count() as f64
            / n;
    }
    let mre = pairs.iter().map(|p| (p.pred_m - p.gt_m).abs() / p.gt_m).sum::<f64>() / n;
    let mae = pairs.iter().map(|p| (p.pred_m - p.gt_m).abs()).sum::<f64>() / n;
    let rmse = (pairs.iter().map(|p| (p.pred_m - p.gt_m).powi(2)).sum::<f64>() / n).sqrt();
    (d[0], d[1], d[2], mre, mae, rmse)
}

fn criterion_6() -> Check {
    if DEFAULT_BIN_EDGES != [0.0, 50.0, 100.0, 150.0, 200.0] {
        return Err("default bin edges are not 0/50/100/150/200".to_string());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(106);
    for case in 0..10_000 {
        let n = 1 + (rng.next_u64() % 60) as usize;
        let pairs: Vec<DepthPair> = (0..n)
            .map(|i| {
                let gt = uniform(&mut rng, 0.5, 210.0);
                let pred = gt * uniform(&mut rng, 0.7, 1.4);
                DepthPair::new(0, i as u64, pred, gt).unwrap()
            })
            .collect();
        let (d1, d2, d3) = delta_metrics(&pairs, 1.10, DeltaRatio::Symmetric).unwrap();
        let (mre, mae, rmse) = error_metrics(&pairs).unwrap();
        let want = brute_force_metrics(&pairs, 1.10);
        let diffs = [
            d1 - want.0,
            d2 - want.1,
            d3 - want.2,
            mre - want.3,
            mae - want.4,
            rmse - want.5,
        ];
        if diffs.iter().any(|d| d.abs() > 1e-12) {
            return Err(format!("case {case}: headline metrics disagree: {diffs:?}"));
        }
        if !(d1 <= d2 && d2 <= d3) {
            return Err(format!("case {case}: delta fractions not monotone"));
        }
        if rmse < mae {
            return Err(format!("case {case}: rmse {rmse} below mae {mae}"));
        }
        let bins = binned_mae(&pairs, &DEFAULT_BIN_EDGES);
        for (bi, bin) in bins.iter().enumerate() {
            if bin.label != format!("R{}", bi + 1)
                || bin.lo != DEFAULT_BIN_EDGES[bi]
                || bin.hi != DEFAULT_BIN_EDGES[bi + 1]
            {
                return Err(format!("case {case}: bin {bi} mislabeled"));
            }
            let last = bi == bins.len() - 1;
            let members: Vec<&DepthPair> = pairs
                .iter()
                .filter(|p| p.gt_m >= bin.lo && (p.gt_m < bin.hi || (last && p.gt_m == bin.hi)))
                .collect();
            if bin.count != members.len() {
                return Err(format!("case {case}: bin {bi} count disagrees"));
            }
            match bin.mae {
                Some(m) => {
                    let want = members.iter().map(|p| (p.pred_m - p.gt_m).abs()).sum::<f64>()
                        / members.len() as f64;
                    if (m - want).abs() > 1e-12 {
                        return Err(format!("case {case}: bin {bi} mae disagrees"));
                    }
                }
                None => {
                    if !members.is_empty() {
                        return Err(format!("case {case}: bin {bi} dropped members"));
                    }
                }
            }
        }
    }
    Ok("10000 pair sets vs brute-force evaluator".to_string())
}

// --- criterion 7: refinement distance balance -------------------------------

fn criterion_7() -> Check {
    let t0 = Instant::now();
    let mut passing = 0;
    let mut detail = String::new();
    for seed in 0..20u64 {
        let mut cfg = RunConfig::default();
        cfg.seed = seed;
        cfg.frames = 200;
        cfg.scene.image_width = 256;
        cfg.scene.image_height = 256;
        cfg.scene.feature_size = 64;
        let scene = cfg.scene_resolved();
        let mut refined = Vec::new();
        let mut raw = Vec::new();
        for f in 0..cfg.frames as u64 {
            let targets =
                generate_scene(&scene, f).map_err(|e| format!("seed {seed} frame {f}: {e}"))?;
            let frame =
                render_frame(&targets, &scene, f).map_err(|e| format!("seed {seed} frame {f}: {e}"))?;
            let (r, c) = refine_frame(&frame, &cfg).map_err(|e| format!("seed {seed}: {e}"))?;
            refined.extend(r);
            raw.extend(c);
        }
        let mae = |pairs: &[DepthPair]| -> Result<Vec<f64>, String> {
            binned_mae(pairs, &DEFAULT_BIN_EDGES)
                .iter()
                .map(|b| b.mae.ok_or_else(|| format!("seed {seed}: empty bin {}", b.label)))
                .collect()
        };
        let r = mae(&refined)?;
        let c = mae(&raw)?;
        let per_bin = r.iter().zip(&c).all(|(a, b)| a < b);
        let flatter = r[3] / r[0] < c[3] / c[0];
        if per_bin && flatter {
            passing += 1;
        } else if detail.is_empty() {
            detail = format!(
                " (e.g. seed {seed}: refined {r:.3?} vs raw {c:.3?})",
                r = r.as_slice(),
                c = c.as_slice()
            );
        }
    }
    let dt = t0.elapsed().as_secs_f64();
    if dt >= 120.0 {
        return Err(format!("runtime {dt:.1}s exceeds the 2 min budget"));
    }
    if passing < 18 {
        return Err(format!("only {passing}/20 seeds show the balance pattern{detail}"));
    }
    Ok(format!(
        "{passing}/20 seeds: refined beats raw in every bin with a flatter R4/R1 ratio, {dt:.1}s"
    ))
}

// --- criterion 8: planner optimality ----------------------------------------

/// Heap-based Dijkstra over the same 8-connected move set.
fn dijkstra_cost(grid: &OccupancyGrid, start: (u16, u16), goal: (u16, u16)) -> Option<f64> {
    use std::cmp::Reverse;
    use std::collections::BinaryHeap;
    let (nx, nz) = grid.dims();
    let ncells = nx as usize * nz as usize;
    let idx = |c: (u16, u16)| c.1 as usize * nx as usize + c.0 as usize;
    let mut dist = vec![f64::INFINITY; ncells];
    let mut done = vec![false; ncells];
    let mut heap: BinaryHeap<(Reverse<u64>, usize)> = BinaryHeap::new();
    dist[idx(start)] = 0.0;
    heap.push((Reverse(0), idx(start)));
    while let Some((_, u)) = heap.pop() {
        if done[u] {
            continue;
        }
        done[u] = true;
        if u == idx(goal) {
            return Some(dist[u]);
        }
        let (ux, uz) = ((u % nx as usize) as i64, (u / nx as usize) as i64);
        for dz in -1i64..=1 {
            for dx in -1i64..=1 {
                if dx == 0 && dz == 0 {
                    continue;
                }
                let (vx, vz) = (ux + dx, uz + dz);
                if vx < 0 || vz < 0 || vx >= nx as i64 || vz >= nz as i64 {
                    continue;
                }
                if grid.occupied(vx as u16, vz as u16) {
                    continue;
                }
                let step = if dx != 0 && dz != 0 {
                    std::f64::consts::SQRT_2
                } else {
                    1.0
                };
                let v = vz as usize * nx as usize + vx as usize;
                if dist[u] + step < dist[v] {
                    dist[v] = dist[u] + step;
                    // bit order equals numeric order for non-negative floats
                    heap.push((Reverse(dist[v].to_bits()), v));
                }
            }
        }
    }
    None
}

fn criterion_8() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(108);
    let spec = GridSpec {
        resolution: 1.0,
        x_min: 0.0,
        x_max: 64.0,
        z_min: 0.0,
        z_max: 64.0,
    };
    let mut routable = 0;
    for case in 0..1000 {
        let mut grid = OccupancyGrid::empty(spec).unwrap();
        let (nx, nz) = grid.dims();
        for j in 0..nz {
            for i in 0..nx {
                if unit(&mut rng) < 0.3 {
                    grid.set_occupied(i, j, true);
                }
            }
        }
        let start = (0, 0);
        let goal = (nx - 1, nz - 1);
        grid.set_occupied(start.0, start.1, false);
        grid.set_occupied(goal.0, goal.1, false);
        let want = dijkstra_cost(&grid, start, goal);
        match astar(&grid, start, goal) {
            Ok(path) => {
                routable += 1;
                let cost = path.length_m / spec.resolution;
                let want = match want {
                    Some(w) => w,
                    None => return Err(format!("case {case}: path where Dijkstra finds none")),
                };
                if (cost - want).abs() > 1e-9 {
                    return Err(format!("case {case}: cost {cost} vs Dijkstra {want}"));
                }
            }
            Err(BevError::Unreachable) => {
                if want.is_some() {
                    return Err(format!("case {case}: Unreachable despite a Dijkstra route"));
                }
            }
            Err(e) => return Err(format!("case {case}: unexpected error {e}")),
        }
    }
    // a goal sealed off by a wall must be reported, never pathed around
    let mut grid = OccupancyGrid::empty(spec).unwrap();
    let (nx, nz) = grid.dims();
    for j in 0..nz {
        grid.set_occupied(nx - 2, j, true);
    }
    match astar(&grid, (0, 0), (nx - 1, nz - 1)) {
        Err(BevError::Unreachable) => {}
        other => return Err(format!("walled goal produced {other:?}")),
    }
    Ok(format!("1000 grids, {routable} routable, costs equal Dijkstra"))
}

// --- criterion 9: end-to-end determinism ------------------------------------

fn hash_tree(root: &Path) -> Result<BTreeMap<String, String>, String> {
    fn walk(
        root: &Path,
        dir: &Path,
        out: &mut BTreeMap<String, String>,
    ) -> Result<(), String> {
        for entry in fs::read_dir(dir).map_err(|e| e.to_string())? {
            let path = entry.map_err(|e| e.to_string())?.path();
            if path.is_dir() {
                walk(root, &path, out)?;
            } else {
                let bytes = fs::read(&path).map_err(|e| e.to_string())?;
                let rel = path
                    .strip_prefix(root)
                    .map_err(|e| e.to_string())?
                    .to_string_lossy()
                    .into_owned();
                out.insert(rel, format!("{:x}", Sha256::digest(&bytes)));
            }
        }
        Ok(())
    }
    let mut out = BTreeMap::new();
    walk(root, root, &mut out)?;
    Ok(out)
}

fn criterion_9() -> Check {
    let exe = env!("CARGO_BIN_EXE_centerdepth");
    let out = tempfile::tempdir().map_err(|e| e.to_string())?;
    let run_demo = || -> Result<std::path::PathBuf, String> {
        let before: Vec<_> = fs::read_dir(out.path())
            .map_err(|e| e.to_string())?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .collect();
        let status = Command::new(exe)
            .args(["demo", "--seed", "7", "--out"])
            .arg(out.path())
            .output()
            .map_err(|e| e.to_string())?;
        if !status.status.success() {
            return Err(format!(
                "demo exited with {:?}: {}",
                status.status.code(),
                String::from_utf8_lossy(&status.stderr)
            ));
        }
        fs::read_dir(out.path())
            .map_err(|e| e.to_string())?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .find(|p| !before.contains(p))
            .ok_or_else(|| "no new run directory".to_string())
    };
    let a = run_demo()?;
    let b = run_demo()?;
    let ha = hash_tree(&a)?;
    let hb = hash_tree(&b)?;
    if ha != hb {
        let diff: Vec<&String> = ha
            .iter()
            .filter(|(k, v)| hb.get(*k) != Some(v))
            .map(|(k, _)| k)
            .collect();
        return Err(format!("artifact trees differ: {diff:?}"));
    }
    // the emitted report must parse back losslessly
    let original = fs::read(a.join("report.json")).map_err(|e| e.to_string())?;
    let parsed = read_report(&a.join("report.json")).map_err(|e| e.to_string())?;
    let echo_dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    write_report(echo_dir.path(), &parsed).map_err(|e| e.to_string())?;
    let echoed = fs::read(echo_dir.path().join("report.json")).map_err(|e| e.to_string())?;
    if echoed != original {
        return Err("report round trip is not byte-identical".to_string());
    }
    Ok(format!("two runs, {} artifacts checksum-identical", ha.len()))
}

// --- criterion 10: delta threshold conformance ------------------------------

fn criterion_10() -> Check {
    let pairs: Vec<DepthPair> = [1.05, 1.15, 1.25]
        .iter()
        .enumerate()
        .map(|(i, &r)| DepthPair::new(0, i as u64, r, 1.0).unwrap())
        .collect();
    let (d1, d2, d3) = delta_metrics(&pairs, 1.10, DeltaRatio::Symmetric).unwrap();
    if d1 != 1.0 / 3.0 || d2 != 2.0 / 3.0 || d3 != 1.0 {
        return Err(format!("got ({d1}, {d2}, {d3}), want (1/3, 2/3, 1)"));
    }
    Ok("ratios {1.05, 1.15, 1.25} at threshold 1.10 give exactly (1/3, 2/3, 1)".to_string())
}

// -----------------------------------------------------------------------------

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let fields: Vec<RegionDepthField> = (0..1000).map(|_| random_field(&mut rng)).collect();

    let checks: Vec<(&str, Check)> = vec![
        ("crf closed form vs dense solve + gradients", criterion_1(&fields)),
        ("coordinate descent agreement + monotonicity", criterion_2(&fields)),
        ("feature weight bounds and anchors", criterion_3()),
        ("projection suite", criterion_4()),
        ("decoder exactness", criterion_5()),
        ("metric oracle equivalence", criterion_6()),
        ("refinement distance balance", criterion_7()),
        ("planner optimality", criterion_8()),
        ("end-to-end determinism", criterion_9()),
        ("delta threshold conformance", criterion_10()),
    ];

    let mut failures = 0;
    for (i, (name, outcome)) in checks.iter().enumerate() {
        match outcome {
            Ok(detail) => println!("criterion {:2} {name}: pass ({detail})", i + 1),
            Err(why) => {
                failures += 1;
                println!("criterion {:2} {name}: FAIL - {why}", i + 1);
            }
        }
    }
    if failures > 0 {
        println!("acceptance: {failures} criterion(s) failed");
        std::process::exit(1);
    }
    println!("acceptance: all 10 criteria passed");
}
