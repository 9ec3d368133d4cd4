//! Metric aggregation over augmentation outputs: pseudo-label error against
//! the scene's analytic radiance, warped-depth accuracy on held-out views,
//! dual-path render consistency, and the ablation grid. Shared by the CLI
//! and the acceptance suite so both report identical numbers.

use crate::augment::{
    run_augmentation, AugmentConfig, AugmentReport, AugmentedRay, CastingMode,
};
use crate::error::Result;
use crate::math::UnitVec3;
use crate::render::{depth_metrics, psnr, ssim, DepthMap};
use crate::scene::{render_composite_path, render_ground_truth, SceneBundle};
use crate::warp::warp_depth;

/// Mean squared pseudo-label error against the analytic radiance of each
/// ray's (origin, direction); the scene model is exact ground truth here.
pub fn pseudo_label_mse(bundle: &SceneBundle, rays: &[AugmentedRay]) -> Option<f64> {
    if rays.is_empty() {
        return None;
    }
    let mut acc = 0.0;
    for r in rays {
        let truth = bundle
            .radiance
            .eval(&bundle.field, &r.ray.origin, &r.ray.direction);
        let d = r.pseudo_color - truth.clamped();
        acc += (d.r * d.r + d.g * d.g + d.b * d.b) / 3.0;
    }
    Some(acc / rays.len() as f64)
}

/// Picks the training camera nearest to a target camera center (ties to the
/// lower index); the warp source for that held-out view.
pub fn nearest_train_camera(bundle: &SceneBundle, train: &[usize], target: usize) -> usize {
    let center = bundle.cameras[target].center();
    let mut best = (usize::MAX, f64::INFINITY);
    for &ti in train {
        let d = (bundle.cameras[ti].center() - center).norm();
        if d < best.1 {
            best = (ti, d);
        }
    }
    best.0
}

/// Warps the nearest training view's ground-truth depth into every test
/// camera; returns (test index, warped depth) pairs.
pub fn warp_test_depths(
    bundle: &SceneBundle,
    sparsity: usize,
) -> Result<Vec<(usize, DepthMap)>> {
    let train = bundle.sparse_train_indices(sparsity);
    let mut out = Vec::with_capacity(bundle.test_indices.len());
    for &ti in &bundle.test_indices {
        let src = nearest_train_camera(bundle, &train, ti);
        let warped = warp_depth(
            &bundle.depths[src],
            &bundle.cameras[src],
            &bundle.cameras[ti],
        )?;
        out.push((ti, warped.depth));
    }
    Ok(out)
}

/// Mean (absrel, rmse) of warped depths against ground truth over test views
/// with any jointly valid pixels.
pub fn warped_depth_error(
    bundle: &SceneBundle,
    warped: &[(usize, DepthMap)],
) -> Option<(f64, f64)> {
    let mut acc = (0.0, 0.0);
    let mut count = 0usize;
    for (ti, depth) in warped {
        if let Ok((absrel, rmse)) = depth_metrics(depth, &bundle.depths[*ti]) {
            acc.0 += absrel;
            acc.1 += rmse;
            count += 1;
        }
    }
    if count == 0 {
        None
    } else {
        Some((acc.0 / count as f64, acc.1 / count as f64))
    }
}

/// Mean PSNR/SSIM between the compositor-path and trace-path renders of the
/// test cameras; the dual-route consistency audit.
pub fn dual_path_metrics(bundle: &SceneBundle) -> Result<(f64, f64)> {
    let mut psnr_acc = 0.0;
    let mut ssim_acc = 0.0;
    for &ti in &bundle.test_indices {
        let cam = &bundle.cameras[ti];
        let (traced, _) = render_ground_truth(
            &bundle.field,
            &bundle.radiance,
            cam,
            bundle.spec.render.max_steps,
        );
        let composed = render_composite_path(
            &bundle.field,
            &bundle.radiance,
            cam,
            bundle.spec.render.composite_samples,
            bundle.spec.render.composite_sharpness,
        );
        let p = psnr(&composed, &traced)?;
        psnr_acc += if p.is_finite() { p } else { 99.0 };
        ssim_acc += ssim(&composed, &traced)?;
    }
    let n = bundle.test_indices.len() as f64;
    Ok((psnr_acc / n, ssim_acc / n))
}

/// One scalar in the metrics table.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricRow {
    pub condition: String,
    pub sparsity: usize,
    pub metric: String,
    pub value: f64,
}

/// CSV with the fixed schema `condition,sparsity,metric,value`; float
/// formatting is the shortest round-trip form, so equal runs are
/// byte-identical.
pub fn rows_to_csv(rows: &[MetricRow]) -> String {
    let mut s = String::from("condition,sparsity,metric,value\n");
    for r in rows {
        s.push_str(&format!("{},{},{},{}\n", r.condition, r.sparsity, r.metric, r.value));
    }
    s
}

/// Metric rows for one augmentation run: label error, ray bookkeeping, and
/// (when enabled) warped-depth accuracy.
pub fn evaluate_run(
    bundle: &SceneBundle,
    condition: &str,
    config: &AugmentConfig,
    rays: &[AugmentedRay],
    report: &AugmentReport,
) -> Result<Vec<MetricRow>> {
    let mut rows = Vec::new();
    let mut push = |metric: &str, value: f64| {
        rows.push(MetricRow {
            condition: condition.to_string(),
            sparsity: config.sparsity,
            metric: metric.to_string(),
            value,
        });
    };
    if let Some(mse) = pseudo_label_mse(bundle, rays) {
        push("pseudo_label_mse", mse);
    }
    push("rays_cast", report.rays_cast as f64);
    push("rays_emitted", report.rays_emitted as f64);
    push("rays_rejected", report.rays_rejected() as f64);
    push("vertices_sh_fitted", report.vertices_sh_fitted as f64);
    if config.use_depth_warp {
        let warped = warp_test_depths(bundle, config.sparsity)?;
        if let Some((absrel, rmse)) = warped_depth_error(bundle, &warped) {
            push("warped_depth_absrel", absrel);
            push("warped_depth_rmse", rmse);
        }
    }
    Ok(rows)
}

/// The five ablation conditions.
pub const ABLATION_CONDITIONS: [&str; 5] =
    ["full", "no_sh", "no_visibility", "random_casting", "no_depth_warp"];

/// Applies a named ablation to a base configuration.
pub fn condition_config(base: &AugmentConfig, condition: &str) -> AugmentConfig {
    let mut cfg = base.clone();
    match condition {
        "full" => {}
        "no_sh" => cfg.use_sh = false,
        "no_visibility" => cfg.use_visibility_check = false,
        "random_casting" => cfg.casting = CastingMode::Random,
        "no_depth_warp" => cfg.use_depth_warp = false,
        other => panic!("unknown ablation condition {other}"),
    }
    cfg
}

/// Runs the 5 ablation conditions × {dense, sparse} grid and returns the
/// aggregated metric rows (10 condition runs total).
pub fn ablation_grid(
    bundle: &SceneBundle,
    base: &AugmentConfig,
    sparse_k: usize,
) -> Result<Vec<MetricRow>> {
    let mut rows = Vec::new();
    for sparsity in [1, sparse_k] {
        for condition in ABLATION_CONDITIONS {
            let mut cfg = condition_config(base, condition);
            cfg.sparsity = sparsity;
            let (rays, report) = run_augmentation(bundle, &cfg)?;
            rows.extend(evaluate_run(bundle, condition, &cfg, &rays, &report)?);
        }
    }
    Ok(rows)
}

/// Fraction of rays whose direction lies in the open hemisphere of the
/// normal at their source vertex; the random-casting audit.
pub fn hemisphere_fraction(rays: &[AugmentedRay], normals: &[UnitVec3]) -> f64 {
    if rays.is_empty() {
        return 0.0;
    }
    let ok = rays
        .iter()
        .filter(|r| {
            normals
                .get(r.source_vertex)
                .is_some_and(|n| r.ray.direction.dot(n) > 0.0)
        })
        .count();
    ok as f64 / rays.len() as f64
}
