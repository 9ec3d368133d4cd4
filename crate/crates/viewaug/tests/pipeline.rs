//! Cross-module pipeline tests: ray casting, observation gathering against
//! the mesh oracle, labeling, full augmentation runs on the preset scenes,
//! the radiance split experiment, and dual-path render consistency.

use viewaug::augment::{
    cast_surface_rays, gather_observations, label_rays, radiance_split_experiment,
    run_augmentation, synthetic_radiance_points, AugmentConfig, CastingMode, LabelKind,
    MarchParams,
};
use viewaug::eval::{condition_config, hemisphere_fraction, pseudo_label_mse};
use viewaug::geom::Ray;
use viewaug::math::{Rgb, UnitVec3, Vec3};
use viewaug::mesh::{marching_cubes, mesh_ray_intersect, surface_points};
use viewaug::scene::{
    build_scene, load_scene_spec, render_composite_path, render_ground_truth, SceneBundle,
};
use viewaug::sdf::ray_march_visibility;
use viewaug::sh::RadianceSampleSet;

fn preset_path(name: &str) -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../presets")
        .join(name)
}

fn preset_bundle(name: &str) -> SceneBundle {
    let spec = load_scene_spec(&preset_path(name)).expect("preset parses");
    build_scene(&spec).expect("preset builds")
}

fn quick_config() -> AugmentConfig {
    AugmentConfig {
        max_points: 500,
        rays_per_vertex: 8,
        mesh_resolution: 32,
        ..AugmentConfig::default()
    }
}

// -- casting ---------------------------------------------------------------

#[test]
fn surface_rays_stay_in_open_hemisphere() {
    let normal = UnitVec3::z_axis();
    let rays = cast_surface_rays(&Vec3::zeros(), &normal, 5000, 99);
    assert!(rays.iter().all(|r| r.direction.z() > 0.0));
}

#[test]
fn surface_ray_mean_matches_hemisphere_centroid() {
    // Uniform hemisphere about +z has centroid (0, 0, 1/2).
    let normal = UnitVec3::z_axis();
    let rays = cast_surface_rays(&Vec3::zeros(), &normal, 100_000, 7);
    let mut mean = Vec3::zeros();
    for r in &rays {
        mean += *r.direction.as_vector();
    }
    mean /= rays.len() as f64;
    assert!((mean - Vec3::new(0.0, 0.0, 0.5)).norm() < 0.01, "centroid {mean:?}");
}

#[test]
fn surface_rays_deterministic_per_stream() {
    let normal = UnitVec3::new(0.3, -0.5, 0.8).unwrap();
    let a = cast_surface_rays(&Vec3::new(1.0, 2.0, 3.0), &normal, 16, 1234);
    let b = cast_surface_rays(&Vec3::new(1.0, 2.0, 3.0), &normal, 16, 1234);
    assert_eq!(a, b);
}

// -- gathering -------------------------------------------------------------

#[test]
fn gather_sees_camera_above_pole_not_below() {
    let bundle = preset_bundle("sphere_ring.json");
    // Replace cameras with two hand-posed ones: one above the +z pole, one
    // below the sphere.
    use viewaug::geom::{PinholeCamera, RigidTransform};
    let above = {
        let rot = nalgebra::Matrix3::from_columns(&[
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(0.0, -1.0, 0.0),
            Vec3::new(0.0, 0.0, -1.0),
        ]);
        PinholeCamera::new(
            100.0,
            100.0,
            48.0,
            48.0,
            96,
            96,
            RigidTransform::new(rot, Vec3::new(0.0, 0.0, 5.0)).unwrap(),
        )
        .unwrap()
    };
    let below = {
        let rot = nalgebra::Matrix3::from_columns(&[
            Vec3::new(-1.0, 0.0, 0.0),
            Vec3::new(0.0, -1.0, 0.0),
            Vec3::new(0.0, 0.0, 1.0),
        ]);
        PinholeCamera::new(
            100.0,
            100.0,
            48.0,
            48.0,
            96,
            96,
            RigidTransform::new(rot, Vec3::new(0.0, 0.0, -5.0)).unwrap(),
        )
        .unwrap()
    };
    let img = viewaug::render::ImageBuffer::new_filled(96, 96, Rgb::splat(0.5));
    let pole = Vec3::new(0.0, 0.0, 1.0);
    let march = MarchParams::for_field(&bundle.field);

    let set = gather_observations(
        &pole,
        &[&above],
        &[&img],
        &bundle.field,
        &march,
        true,
    );
    assert_eq!(set.len(), 1);
    let dir = set.samples[0].1;
    assert!((dir.as_vector() - Vec3::new(0.0, 0.0, 1.0)).norm() < 1e-12);

    let occluded = gather_observations(
        &pole,
        &[&below],
        &[&img],
        &bundle.field,
        &march,
        true,
    );
    assert!(occluded.is_empty(), "pole cannot be seen through the sphere");
}

#[test]
fn gather_visible_set_matches_mesh_oracle() {
    let bundle = preset_bundle("sphere_ring.json");
    let mesh = marching_cubes(&bundle.field, 64).unwrap();
    let vertices = surface_points(&mesh, 300, 11);
    let march = MarchParams::for_field(&bundle.field);

    let mut agree = 0usize;
    let mut total = 0usize;
    for (p, _n) in &vertices {
        for cam in &bundle.cameras {
            let Some((pixel, _)) = cam.project(p) else { continue };
            if !cam.contains_pixel(&pixel) {
                continue;
            }
            let Ok(dir) = UnitVec3::from_vector(cam.center() - p) else { continue };
            let marched = ray_march_visibility(
                &bundle.field,
                p,
                &dir,
                march.eps,
                march.lift,
                march.max_steps,
            )
            .visible;
            let oracle =
                mesh_ray_intersect(&mesh, &Ray::new(*p, dir), march.lift).is_none();
            total += 1;
            if marched == oracle {
                agree += 1;
            }
        }
    }
    assert!(total > 2000, "audit needs a real sample, got {total}");
    let rate = agree as f64 / total as f64;
    assert!(rate >= 0.99, "visible-set agreement {rate:.4} below 99%");
}

// -- labeling ----------------------------------------------------------------

fn fibonacci_dirs(n: usize) -> Vec<UnitVec3> {
    let golden = std::f64::consts::PI * (3.0 - 5.0_f64.sqrt());
    (0..n)
        .map(|i| {
            let z = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
            let r = (1.0 - z * z).sqrt();
            let phi = golden * i as f64;
            UnitVec3::new(r * phi.cos(), r * phi.sin(), z).unwrap()
        })
        .collect()
}

#[test]
fn label_constant_point_reproduces_color() {
    let color = Rgb::new(0.4, 0.2, 0.7);
    let observations =
        RadianceSampleSet::new(fibonacci_dirs(12).into_iter().map(|d| (color, d)).collect());
    let rays = cast_surface_rays(&Vec3::zeros(), &UnitVec3::z_axis(), 8, 5);
    let cfg = AugmentConfig::default();
    let (labeled, _) = label_rays(&rays, &observations, &cfg, 0, 77);
    assert_eq!(labeled.len(), 8);
    for r in &labeled {
        assert_eq!(r.label_kind, LabelKind::ShQueried);
        assert!((r.pseudo_color.r - color.r).abs() < 1e-6);
        assert!((r.pseudo_color.g - color.g).abs() < 1e-6);
        assert!((r.pseudo_color.b - color.b).abs() < 1e-6);
    }
}

#[test]
fn label_falls_back_below_threshold_with_exact_observation_color() {
    let observations = RadianceSampleSet::new(
        fibonacci_dirs(3)
            .into_iter()
            .enumerate()
            .map(|(i, d)| (Rgb::new(0.1 * i as f64, 0.5, 0.9 - 0.1 * i as f64), d))
            .collect(),
    );
    let rays = cast_surface_rays(&Vec3::zeros(), &UnitVec3::z_axis(), 6, 5);
    let cfg = AugmentConfig::default(); // threshold 10 > 3 observations
    let (labeled, _) = label_rays(&rays, &observations, &cfg, 0, 123);
    let first = labeled[0].pseudo_color;
    assert!(labeled.iter().all(|r| r.label_kind == LabelKind::SingleViewAssigned));
    assert!(labeled.iter().all(|r| r.pseudo_color == first));
    // Bit-identical to one of the gathered observations.
    assert!(observations.samples.iter().any(|(c, _)| *c == first));
}

#[test]
fn label_band_limited_generator_recovers_held_out_directions() {
    use viewaug::sh::ShExpansion;
    // Fixed ℓ ≤ 2 generator with colors comfortably inside [0, 1].
    let mut coeffs = vec![[0.0; 3]; 9];
    let dc = 2.0 * std::f64::consts::PI.sqrt();
    coeffs[0] = [0.5 * dc, 0.45 * dc, 0.55 * dc];
    coeffs[2] = [0.08, -0.06, 0.04];
    coeffs[5] = [-0.05, 0.07, 0.03];
    coeffs[8] = [0.04, 0.02, -0.06];
    let generator = ShExpansion::new(2, coeffs).unwrap();

    let observations = RadianceSampleSet::new(
        fibonacci_dirs(50)
            .into_iter()
            .map(|d| (Rgb::from_array(generator.eval_raw(&d)), d))
            .collect(),
    );
    let rays = cast_surface_rays(&Vec3::zeros(), &UnitVec3::z_axis(), 32, 9);
    let cfg = AugmentConfig::default();
    let (labeled, _) = label_rays(&rays, &observations, &cfg, 0, 3);
    for r in &labeled {
        let want = generator.eval_raw(&r.ray.direction);
        assert!((r.pseudo_color.r - want[0]).abs() < 1e-3);
        assert!((r.pseudo_color.g - want[1]).abs() < 1e-3);
        assert!((r.pseudo_color.b - want[2]).abs() < 1e-3);
    }
}

// -- full runs ----------------------------------------------------------------

#[test]
fn augmentation_report_is_consistent_and_deterministic() {
    let bundle = preset_bundle("sphere_ring.json");
    let cfg = quick_config();
    let (rays_a, report_a) = run_augmentation(&bundle, &cfg).unwrap();
    let (rays_b, report_b) = run_augmentation(&bundle, &cfg).unwrap();
    assert!(!rays_a.is_empty());
    assert_eq!(report_a.rays_rejected() + report_a.rays_emitted, report_a.rays_cast);
    assert_eq!(rays_a, rays_b);
    assert_eq!(report_a.rays_cast, report_b.rays_cast);
    assert_eq!(report_a.rays_emitted, report_b.rays_emitted);
}

#[test]
fn no_visibility_emits_every_cast_ray() {
    let bundle = preset_bundle("sphere_ring.json");
    let mut cfg = quick_config();
    cfg.use_visibility_check = false;
    let (rays, report) = run_augmentation(&bundle, &cfg).unwrap();
    // Without the filter nothing is rejected; only empty-observation
    // vertices may drop rays, and on a ring every vertex sees cameras...
    assert_eq!(report.rays_rejected_visibility, 0);
    assert_eq!(report.rays_cast, rays.len() + report.rays_dropped_no_observations);
}

#[test]
fn emitted_rays_pass_mesh_oracle_audit() {
    let bundle = preset_bundle("sphere_ring.json");
    let cfg = quick_config();
    let (rays, _) = run_augmentation(&bundle, &cfg).unwrap();
    let mesh = marching_cubes(&bundle.field, cfg.mesh_resolution).unwrap();
    let march = MarchParams::for_field(&bundle.field);

    let audit = rays.iter().take(500);
    let mut agree = 0usize;
    let mut total = 0usize;
    for r in audit {
        total += 1;
        if mesh_ray_intersect(&mesh, &r.ray, march.lift).is_none() {
            agree += 1;
        }
    }
    assert!(total >= 400);
    let rate = agree as f64 / total as f64;
    assert!(rate >= 0.99, "emitted rays intersect the mesh at rate {:.4}", 1.0 - rate);
}

#[test]
fn random_casting_covers_both_hemispheres() {
    let bundle = preset_bundle("sphere_ring.json");
    let mut cfg = quick_config();
    cfg.casting = CastingMode::Random;
    cfg.use_visibility_check = false; // keep every cast ray for the audit
    let (rays, _) = run_augmentation(&bundle, &cfg).unwrap();

    // Pair each ray with its slot vertex's normal; directions are uniform on
    // the full sphere, so about half fail the hemisphere test.
    let mesh = marching_cubes(&bundle.field, cfg.mesh_resolution).unwrap();
    let vertices = surface_points(&mesh, cfg.max_points, viewaug::math::derive_stream(cfg.seed, 0, 1));
    let normals: Vec<UnitVec3> = vertices.iter().map(|(_, n)| *n).collect();
    let frac = hemisphere_fraction(&rays, &normals);
    assert!(
        (frac - 0.5).abs() <= 0.05,
        "hemisphere pass fraction {frac} should be ~1/2"
    );
}

#[test]
fn depth_warp_flag_changes_no_rays() {
    let bundle = preset_bundle("sphere_ring.json");
    let full = quick_config();
    let no_warp = condition_config(&full, "no_depth_warp");
    let (rays_full, _) = run_augmentation(&bundle, &full).unwrap();
    let (rays_nw, _) = run_augmentation(&bundle, &no_warp).unwrap();
    assert_eq!(rays_full, rays_nw);
}

#[test]
fn occluder_pair_no_visibility_emits_more() {
    let bundle = preset_bundle("occluder_pair.json");
    let full = quick_config();
    let (_, report_full) = run_augmentation(&bundle, &full).unwrap();
    let no_vis = condition_config(&full, "no_visibility");
    let (_, report_nv) = run_augmentation(&bundle, &no_vis).unwrap();
    assert!(
        report_nv.rays_emitted > report_full.rays_emitted,
        "visibility filter should remove rays ({} vs {})",
        report_nv.rays_emitted,
        report_full.rays_emitted
    );
}

#[test]
fn dense_pseudo_labels_beat_sparse() {
    let bundle = preset_bundle("street.json");
    let mut dense = quick_config();
    dense.max_points = 1500;
    dense.mesh_resolution = 48;
    let mut sparse = dense.clone();
    sparse.sparsity = 4;
    let (rays_d, _) = run_augmentation(&bundle, &dense).unwrap();
    let (rays_s, _) = run_augmentation(&bundle, &sparse).unwrap();
    let mse_d = pseudo_label_mse(&bundle, &rays_d).unwrap();
    let mse_s = pseudo_label_mse(&bundle, &rays_s).unwrap();
    assert!(
        mse_s >= mse_d,
        "sparse labels ({mse_s:.6}) should not beat dense ({mse_d:.6})"
    );
}

// -- split experiment ---------------------------------------------------------

#[test]
fn split_experiment_constant_radiance_is_exact_for_both() {
    let points: Vec<RadianceSampleSet> = (0..50)
        .map(|i| {
            let c = Rgb::splat(0.2 + 0.01 * (i % 10) as f64);
            RadianceSampleSet::new(fibonacci_dirs(30).into_iter().map(|d| (c, d)).collect())
        })
        .collect();
    let cfg = AugmentConfig::default();
    let table = radiance_split_experiment(
        &points,
        &[(8, 2), (7, 3), (6, 4), (5, 5)],
        &cfg,
        3,
    )
    .unwrap();
    for i in 0..4 {
        assert!(table.sh_mse[i] < 1e-9, "sh mse {} at ratio {i}", table.sh_mse[i]);
        assert!(table.interp_mse[i] < 1e-9, "interp mse {} at ratio {i}", table.interp_mse[i]);
    }
}

#[test]
fn split_experiment_band_limited_sh_dominates() {
    let points = synthetic_radiance_points(2000, 30, 2, 0.15, 0.02, 99);
    let cfg = AugmentConfig::default();
    let ratios = [(8, 2), (7, 3), (6, 4), (5, 5)];
    let table = radiance_split_experiment(&points, &ratios, &cfg, 4).unwrap();
    for i in 0..ratios.len() {
        assert!(
            table.sh_mse[i] < table.interp_mse[i],
            "ratio {:?}: sh {} vs interp {}",
            ratios[i],
            table.sh_mse[i],
            table.interp_mse[i]
        );
    }
    for i in 1..ratios.len() {
        assert!(table.sh_mse[i] >= table.sh_mse[i - 1], "sh mse must grow as data shrinks");
        assert!(
            table.interp_mse[i] >= table.interp_mse[i - 1],
            "interp mse must grow as data shrinks"
        );
    }
}

// -- dual-path consistency ------------------------------------------------------

#[test]
fn trace_and_composite_paths_agree_on_street() {
    let bundle = preset_bundle("street.json");
    let mut within = 0usize;
    let mut total = 0usize;
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
        for (a, b) in traced.pixels().iter().zip(composed.pixels()) {
            let d = (a.r - b.r).abs().max((a.g - b.g).abs()).max((a.b - b.b).abs());
            total += 1;
            if d <= 2.0 / 255.0 {
                within += 1;
            }
        }
    }
    let rate = within as f64 / total as f64;
    assert!(rate >= 0.95, "dual-path agreement {rate:.4} below 95%");
}
