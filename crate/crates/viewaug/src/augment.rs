//! The ray-augmentation pipeline: surface ray casting, visibility filtering,
//! per-point observation gathering, radiance-map fitting (or the
//! interpolation / single-view fallbacks), pseudo-label emission, and the
//! radiance split experiment.
//!
//! Per-vertex work is independent and runs data-parallel; every random
//! choice draws from a stream derived from (seed, item index), so results
//! are identical regardless of scheduling.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, UnitSphere};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{PinholeCamera, Ray};
use crate::math::{derive_stream, Rgb, UnitVec3, Vec3};
use crate::mesh::{marching_cubes, surface_points};
use crate::render::ImageBuffer;
use crate::scene::SceneBundle;
use crate::sdf::{ray_march_visibility, GridSdf, SdfField};
use crate::sh::{fit_sh, interpolate_from_set, query_sh, RadianceSampleSet, ShExpansion};

/// How augmented ray directions are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CastingMode {
    /// Hemisphere about each surface vertex normal.
    SurfaceGuided,
    /// Ablation comparator: origins uniform in the scene box, directions
    /// uniform on the full sphere.
    Random,
}

/// Pipeline configuration; field defaults match the experiment scale the
/// library targets (10k surface points, 16 rays each, ℓ = 2 maps).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AugmentConfig {
    pub rays_per_vertex: usize,
    /// Minimum observation count for fitting a radiance map; below it a
    /// single seeded observation labels all of a vertex's rays.
    pub n_v_threshold: usize,
    pub l_max: usize,
    pub ridge: f64,
    pub seed: u64,
    pub use_sh: bool,
    pub use_visibility_check: bool,
    pub casting: CastingMode,
    pub use_depth_warp: bool,
    /// Surface-point budget drawn from the extracted mesh.
    pub max_points: usize,
    pub mesh_resolution: usize,
    /// Keep-every-k thinning of the training cameras (1 = dense).
    pub sparsity: usize,
    /// Amplitude of band-limited noise applied when emulating coarse
    /// geometry, as a fraction of the voxel size; 0 uses the field as-is.
    pub coarse_noise: f64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        AugmentConfig {
            rays_per_vertex: 16,
            n_v_threshold: 10,
            l_max: 2,
            ridge: 1e-4,
            seed: 42,
            use_sh: true,
            use_visibility_check: true,
            casting: CastingMode::SurfaceGuided,
            use_depth_warp: true,
            max_points: 10_000,
            mesh_resolution: 64,
            sparsity: 1,
            coarse_noise: 0.0,
        }
    }
}

impl AugmentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.rays_per_vertex < 1 {
            return Err(Error::invalid("rays_per_vertex must be at least 1"));
        }
        if self.l_max > crate::sh::MAX_L {
            return Err(Error::invalid("l_max outside supported range"));
        }
        if !(self.ridge >= 0.0) {
            return Err(Error::invalid("ridge must be non-negative"));
        }
        if self.max_points < 1 {
            return Err(Error::invalid("max_points must be at least 1"));
        }
        if self.mesh_resolution < 8 {
            return Err(Error::invalid("mesh_resolution must be at least 8"));
        }
        if self.sparsity < 1 {
            return Err(Error::invalid("sparsity must be at least 1"));
        }
        if !(self.coarse_noise >= 0.0) {
            return Err(Error::invalid("coarse_noise must be non-negative"));
        }
        Ok(())
    }
}

/// Where an augmented ray's pseudo-label came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelKind {
    /// Queried from a fitted radiance map.
    ShQueried,
    /// Copied verbatim from one observation (too few views to fit).
    SingleViewAssigned,
    /// Geodesic two-view interpolation (the no-SH ablation path).
    Interpolated,
}

impl LabelKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            LabelKind::ShQueried => "sh_queried",
            LabelKind::SingleViewAssigned => "single_view_assigned",
            LabelKind::Interpolated => "interpolated",
        }
    }

    pub fn from_str(s: &str) -> Result<Self> {
        match s {
            "sh_queried" => Ok(LabelKind::ShQueried),
            "single_view_assigned" => Ok(LabelKind::SingleViewAssigned),
            "interpolated" => Ok(LabelKind::Interpolated),
            other => Err(Error::invalid(format!("unknown label kind {other}"))),
        }
    }
}

/// A surface-origin ray carrying its pseudo-label and provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedRay {
    pub ray: Ray,
    pub pseudo_color: Rgb,
    pub source_vertex: usize,
    pub label_kind: LabelKind,
}

/// Pipeline bookkeeping; `rays_rejected() + rays_emitted == rays_cast`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AugmentReport {
    pub vertices_processed: usize,
    pub rays_cast: usize,
    pub rays_rejected_visibility: usize,
    pub rays_dropped_no_observations: usize,
    pub rays_emitted: usize,
    pub vertices_sh_fitted: usize,
    pub vertices_single_view: usize,
    pub vertices_interpolated: usize,
    pub vertices_skipped_no_observations: usize,
    pub wall_time_ms: u128,
}

impl AugmentReport {
    pub fn rays_rejected(&self) -> usize {
        self.rays_rejected_visibility + self.rays_dropped_no_observations
    }

    pub fn to_text(&self) -> String {
        format!(
            "vertices_processed: {}\nrays_cast: {}\nrays_rejected_visibility: {}\n\
             rays_dropped_no_observations: {}\nrays_emitted: {}\nvertices_sh_fitted: {}\n\
             vertices_single_view: {}\nvertices_interpolated: {}\n\
             vertices_skipped_no_observations: {}\nwall_time_ms: {}\n",
            self.vertices_processed,
            self.rays_cast,
            self.rays_rejected_visibility,
            self.rays_dropped_no_observations,
            self.rays_emitted,
            self.vertices_sh_fitted,
            self.vertices_single_view,
            self.vertices_interpolated,
            self.vertices_skipped_no_observations,
            self.wall_time_ms
        )
    }
}

/// Marching parameters shared by the visibility check and gathering.
#[derive(Debug, Clone, Copy)]
pub struct MarchParams {
    pub eps: f64,
    pub lift: f64,
    pub max_steps: usize,
}

impl MarchParams {
    pub fn for_field(field: &SdfField) -> Self {
        let eps = field.default_eps();
        MarchParams { eps, lift: 3.0 * eps, max_steps: 128 }
    }
}

/// Casts `count` rays from a surface vertex with directions uniform on the
/// open hemisphere about the normal (`dot(dir, normal) > 0` strictly).
/// Deterministic per RNG stream.
pub fn cast_surface_rays(
    position: &Vec3,
    normal: &UnitVec3,
    count: usize,
    stream: u64,
) -> Vec<Ray> {
    let mut rng = ChaCha8Rng::seed_from_u64(stream);
    (0..count)
        .map(|_| {
            loop {
                let d: [f64; 3] = UnitSphere.sample(&mut rng);
                let mut dir = Vec3::new(d[0], d[1], d[2]);
                let dot = dir.dot(normal.as_vector());
                if dot < 0.0 {
                    dir = -dir;
                } else if dot == 0.0 {
                    continue; // grazing; redraw
                }
                return Ray::new(*position, UnitVec3::from_vector(dir).expect("unit sample"));
            }
        })
        .collect()
}

/// Ablation comparator rays: origins uniform in the field's bounding box,
/// directions uniform on the full sphere.
pub fn cast_random_rays(field: &SdfField, count: usize, stream: u64) -> Vec<Ray> {
    let mut rng = ChaCha8Rng::seed_from_u64(stream);
    let b = field.bounds();
    (0..count)
        .map(|_| {
            let origin = Vec3::new(
                rng.gen_range(b.min.x..=b.max.x),
                rng.gen_range(b.min.y..=b.max.y),
                rng.gen_range(b.min.z..=b.max.z),
            );
            let d: [f64; 3] = UnitSphere.sample(&mut rng);
            Ray::new(origin, UnitVec3::new(d[0], d[1], d[2]).expect("unit sample"))
        })
        .collect()
}

/// Collects the (color, direction) observations of a point: every camera
/// where the point projects in bounds with positive depth and, when
/// `check_visibility` is set, the march from the point toward the camera
/// center stays clear. Direction is `Norm(camera_center − point)`; color is
/// a bilinear image lookup at the projected pixel.
pub fn gather_observations(
    point: &Vec3,
    cameras: &[&PinholeCamera],
    images: &[&ImageBuffer],
    field: &SdfField,
    march: &MarchParams,
    check_visibility: bool,
) -> RadianceSampleSet {
    debug_assert_eq!(cameras.len(), images.len());
    let mut set = RadianceSampleSet::default();
    for (cam, img) in cameras.iter().zip(images) {
        let Some((pixel, _depth)) = cam.project(point) else {
            continue;
        };
        if !cam.contains_pixel(&pixel) {
            continue;
        }
        let Ok(dir) = UnitVec3::from_vector(cam.center() - point) else {
            continue;
        };
        if check_visibility {
            let vis = ray_march_visibility(field, point, &dir, march.eps, march.lift, march.max_steps);
            if !vis.visible {
                continue;
            }
        }
        set.push(img.sample_bilinear(pixel[0], pixel[1]), dir);
    }
    set
}

/// How a vertex's rays ended up labeled.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LabelOutcome {
    Sh,
    SingleView,
    Interpolated,
    SkippedNoObservations,
}

/// Labels a vertex's rays from its observations:
/// - enough observations and SH enabled → fit a radiance map, query per ray;
/// - SH disabled with ≥ 2 observations → geodesic two-view interpolation;
/// - otherwise → one seeded observation's color for every ray.
///
/// Colors are clamped at emission. Empty observations skip the vertex.
pub fn label_rays(
    rays: &[Ray],
    observations: &RadianceSampleSet,
    config: &AugmentConfig,
    source_vertex: usize,
    stream: u64,
) -> (Vec<AugmentedRay>, LabelOutcome) {
    if observations.is_empty() {
        return (Vec::new(), LabelOutcome::SkippedNoObservations);
    }

    let single_view = |rays: &[Ray]| -> Vec<AugmentedRay> {
        let mut rng = ChaCha8Rng::seed_from_u64(stream);
        let (color, _) = observations
            .samples
            .choose(&mut rng)
            .expect("observations checked non-empty");
        rays.iter()
            .map(|r| AugmentedRay {
                ray: *r,
                pseudo_color: *color,
                source_vertex,
                label_kind: LabelKind::SingleViewAssigned,
            })
            .collect()
    };

    if config.use_sh {
        if observations.len() >= config.n_v_threshold {
            match fit_sh(observations, config.l_max, config.ridge) {
                Ok(expansion) => {
                    let labeled = rays
                        .iter()
                        .map(|r| AugmentedRay {
                            ray: *r,
                            pseudo_color: query_sh(&expansion, &r.direction),
                            source_vertex,
                            label_kind: LabelKind::ShQueried,
                        })
                        .collect();
                    return (labeled, LabelOutcome::Sh);
                }
                // Degenerate geometry (e.g. ridge 0 with clustered views);
                // fall back rather than dropping the vertex.
                Err(_) => return (single_view(rays), LabelOutcome::SingleView),
            }
        }
        return (single_view(rays), LabelOutcome::SingleView);
    }

    if observations.len() >= 2 {
        let mut labeled = Vec::with_capacity(rays.len());
        for r in rays {
            match interpolate_from_set(&r.direction, observations) {
                Ok(color) => labeled.push(AugmentedRay {
                    ray: *r,
                    pseudo_color: color.clamped(),
                    source_vertex,
                    label_kind: LabelKind::Interpolated,
                }),
                // Coincident nearest pair; copy the nearest observation.
                Err(_) => return (single_view(rays), LabelOutcome::SingleView),
            }
        }
        return (labeled, LabelOutcome::Interpolated);
    }
    (single_view(rays), LabelOutcome::SingleView)
}

/// The coarse geometry stand-in: the scene field itself, or a grid sampling
/// of it corrupted by band-limited noise (sum of a few fixed-frequency
/// sinusoids) scaled to a fraction of the voxel size.
pub fn coarse_field(field: &SdfField, config: &AugmentConfig) -> Result<SdfField> {
    if config.coarse_noise == 0.0 {
        return Ok(field.clone());
    }
    let bounds = *field.bounds();
    let res = config.mesh_resolution;
    let voxel = bounds.extent().max() / (res - 1) as f64;
    let amp = config.coarse_noise * voxel;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_stream(config.seed, 0, 0x6e6f6973));
    let waves: Vec<(Vec3, f64)> = (0..4)
        .map(|_| {
            let w = Vec3::new(
                rng.gen_range(-2.0..2.0),
                rng.gen_range(-2.0..2.0),
                rng.gen_range(-2.0..2.0),
            ) * (std::f64::consts::PI / bounds.extent().max());
            (w, rng.gen_range(0.0..std::f64::consts::TAU))
        })
        .collect();
    let noise = move |p: &Vec3| -> f64 {
        waves
            .iter()
            .map(|(w, phase)| (w.dot(p) + phase).sin())
            .sum::<f64>()
            * (amp / 4.0)
    };
    let grid = GridSdf::from_field(field, [res, res, res], bounds, noise)?;
    Ok(SdfField::grid(grid))
}

/// Runs the full augmentation over a scene bundle: extract coarse geometry,
/// subsample surface points, cast rays, visibility-filter, gather
/// observations, and label. Deterministic per (scene, config, seed).
pub fn run_augmentation(
    bundle: &SceneBundle,
    config: &AugmentConfig,
) -> Result<(Vec<AugmentedRay>, AugmentReport)> {
    config.validate()?;
    let start = std::time::Instant::now();

    let geometry = coarse_field(&bundle.field, config)?;
    let mesh = marching_cubes(&geometry, config.mesh_resolution)?;
    let mut report = AugmentReport::default();
    if mesh.is_empty() {
        report.wall_time_ms = start.elapsed().as_millis();
        return Ok((Vec::new(), report));
    }
    let vertices = surface_points(&mesh, config.max_points, derive_stream(config.seed, 0, 1));

    let train = bundle.sparse_train_indices(config.sparsity);
    let cameras: Vec<&PinholeCamera> = train.iter().map(|&i| &bundle.cameras[i]).collect();
    let images: Vec<&ImageBuffer> = train.iter().map(|&i| &bundle.images[i]).collect();
    let march = MarchParams::for_field(&geometry);

    struct VertexResult {
        rays: Vec<AugmentedRay>,
        cast: usize,
        rejected: usize,
        dropped: usize,
        outcomes: Vec<LabelOutcome>,
    }

    let per_vertex: Vec<VertexResult> = vertices
        .par_iter()
        .enumerate()
        .map(|(vi, (position, normal))| {
            let cast_stream = derive_stream(config.seed, vi as u64, 2);
            let label_stream = derive_stream(config.seed, vi as u64, 3);
            let rays = match config.casting {
                CastingMode::SurfaceGuided => {
                    cast_surface_rays(position, normal, config.rays_per_vertex, cast_stream)
                }
                CastingMode::Random => {
                    cast_random_rays(&geometry, config.rays_per_vertex, cast_stream)
                }
            };
            let cast = rays.len();
            let kept: Vec<Ray> = if config.use_visibility_check {
                rays.into_iter()
                    .filter(|r| {
                        ray_march_visibility(
                            &geometry,
                            &r.origin,
                            &r.direction,
                            march.eps,
                            march.lift,
                            march.max_steps,
                        )
                        .visible
                    })
                    .collect()
            } else {
                rays
            };
            let rejected = cast - kept.len();

            let mut emitted = Vec::new();
            let mut dropped = 0usize;
            let mut outcomes = Vec::new();
            match config.casting {
                CastingMode::SurfaceGuided => {
                    let observations = gather_observations(
                        position,
                        &cameras,
                        &images,
                        &geometry,
                        &march,
                        config.use_visibility_check,
                    );
                    let (labeled, outcome) =
                        label_rays(&kept, &observations, config, vi, label_stream);
                    if outcome == LabelOutcome::SkippedNoObservations {
                        dropped = kept.len();
                    }
                    outcomes.push(outcome);
                    emitted = labeled;
                }
                CastingMode::Random => {
                    // Random rays have independent origins; each gathers and
                    // labels on its own.
                    for (ri, ray) in kept.iter().enumerate() {
                        let observations = gather_observations(
                            &ray.origin,
                            &cameras,
                            &images,
                            &geometry,
                            &march,
                            config.use_visibility_check,
                        );
                        let ray_stream =
                            derive_stream(label_stream, ri as u64, 4);
                        let (labeled, outcome) = label_rays(
                            std::slice::from_ref(ray),
                            &observations,
                            config,
                            vi,
                            ray_stream,
                        );
                        if outcome == LabelOutcome::SkippedNoObservations {
                            dropped += 1;
                        }
                        outcomes.push(outcome);
                        emitted.extend(labeled);
                    }
                }
            }
            VertexResult { rays: emitted, cast, rejected, dropped, outcomes }
        })
        .collect();

    let mut rays_out = Vec::new();
    for vr in per_vertex {
        report.vertices_processed += 1;
        report.rays_cast += vr.cast;
        report.rays_rejected_visibility += vr.rejected;
        report.rays_dropped_no_observations += vr.dropped;
        report.rays_emitted += vr.rays.len();
        for outcome in vr.outcomes {
            match outcome {
                LabelOutcome::Sh => report.vertices_sh_fitted += 1,
                LabelOutcome::SingleView => report.vertices_single_view += 1,
                LabelOutcome::Interpolated => report.vertices_interpolated += 1,
                LabelOutcome::SkippedNoObservations => {
                    report.vertices_skipped_no_observations += 1
                }
            }
        }
        rays_out.extend(vr.rays);
    }
    debug_assert_eq!(report.rays_rejected() + report.rays_emitted, report.rays_cast);
    report.wall_time_ms = start.elapsed().as_millis();
    Ok((rays_out, report))
}

/// Serializes augmented rays to the plain-text record format:
/// `vx vy vz dx dy dz r g b label_kind source_vertex`, one ray per line.
pub fn rays_to_text(rays: &[AugmentedRay]) -> String {
    let mut s = String::new();
    for r in rays {
        s.push_str(&format!(
            "{} {} {} {} {} {} {} {} {} {} {}\n",
            r.ray.origin.x,
            r.ray.origin.y,
            r.ray.origin.z,
            r.ray.direction.x(),
            r.ray.direction.y(),
            r.ray.direction.z(),
            r.pseudo_color.r,
            r.pseudo_color.g,
            r.pseudo_color.b,
            r.label_kind.as_str(),
            r.source_vertex
        ));
    }
    s
}

pub fn rays_from_text(text: &str) -> Result<Vec<AugmentedRay>> {
    text.lines()
        .enumerate()
        .map(|(ln, line)| {
            let parts: Vec<&str> = line.split_whitespace().collect();
            if parts.len() != 11 {
                return Err(Error::invalid(format!("ray line {ln} needs 11 fields")));
            }
            let num = |i: usize| -> Result<f64> {
                parts[i]
                    .parse()
                    .map_err(|_| Error::invalid(format!("bad number on ray line {ln}")))
            };
            Ok(AugmentedRay {
                ray: Ray::new(
                    Vec3::new(num(0)?, num(1)?, num(2)?),
                    UnitVec3::new(num(3)?, num(4)?, num(5)?)?,
                ),
                pseudo_color: Rgb::new(num(6)?, num(7)?, num(8)?),
                source_vertex: parts[10]
                    .parse()
                    .map_err(|_| Error::invalid(format!("bad vertex on ray line {ln}")))?,
                label_kind: LabelKind::from_str(parts[9])?,
            })
        })
        .collect()
}

pub fn write_rays(rays: &[AugmentedRay], path: &Path) -> Result<()> {
    std::fs::write(path, rays_to_text(rays))?;
    Ok(())
}

pub fn read_rays(path: &Path) -> Result<Vec<AugmentedRay>> {
    rays_from_text(&std::fs::read_to_string(path)?)
}

// ---------------------------------------------------------------------------
// Radiance split experiment

/// Mean novel-view MSE per method per known/unknown ratio.
#[derive(Debug, Clone)]
pub struct SplitTable {
    /// (known, unknown) ratio parts, e.g. (8, 2).
    pub ratios: Vec<(usize, usize)>,
    pub sh_mse: Vec<f64>,
    pub interp_mse: Vec<f64>,
    /// Points excluded per ratio (too few known samples to split).
    pub excluded: Vec<usize>,
}

impl SplitTable {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("method,known,unknown,mse\n");
        for (i, (k, u)) in self.ratios.iter().enumerate() {
            s.push_str(&format!("sh_fitting,{k},{u},{}\n", self.sh_mse[i]));
        }
        for (i, (k, u)) in self.ratios.iter().enumerate() {
            s.push_str(&format!("interpolation,{k},{u},{}\n", self.interp_mse[i]));
        }
        s
    }
}

fn channel_mse(a: &Rgb, b: &Rgb) -> f64 {
    ((a.r - b.r).powi(2) + (a.g - b.g).powi(2) + (a.b - b.b).powi(2)) / 3.0
}

/// For each point and ratio: seeded random known/unknown split, SH fit and
/// geodesic interpolation both trained on the known part, normalized MSE
/// evaluated on the unknown part; means reported per method per ratio.
pub fn radiance_split_experiment(
    points: &[RadianceSampleSet],
    ratios: &[(usize, usize)],
    config: &AugmentConfig,
    seed: u64,
) -> Result<SplitTable> {
    if points.is_empty() {
        return Err(Error::InsufficientSamples { got: 0, need: 1 });
    }
    let mut table = SplitTable {
        ratios: ratios.to_vec(),
        sh_mse: Vec::with_capacity(ratios.len()),
        interp_mse: Vec::with_capacity(ratios.len()),
        excluded: Vec::with_capacity(ratios.len()),
    };

    for (ri, &(known_part, unknown_part)) in ratios.iter().enumerate() {
        if known_part == 0 || unknown_part == 0 {
            return Err(Error::invalid("split ratio parts must be positive"));
        }
        let frac = known_part as f64 / (known_part + unknown_part) as f64;

        let per_point: Vec<Option<(f64, f64)>> = points
            .par_iter()
            .enumerate()
            .map(|(pi, set)| {
                let n = set.len();
                let n_known = ((n as f64 * frac).round() as usize).min(n.saturating_sub(1));
                if n_known < 2 {
                    return None;
                }
                let mut order: Vec<usize> = (0..n).collect();
                let mut rng = ChaCha8Rng::seed_from_u64(derive_stream(
                    seed,
                    pi as u64,
                    0x1000 + ri as u64,
                ));
                order.shuffle(&mut rng);
                let known = RadianceSampleSet::new(
                    order[..n_known].iter().map(|&i| set.samples[i]).collect(),
                );
                let unknown: Vec<&(Rgb, UnitVec3)> =
                    order[n_known..].iter().map(|&i| &set.samples[i]).collect();

                let fitted: ShExpansion = fit_sh(&known, config.l_max, config.ridge).ok()?;
                let mut sh_acc = 0.0;
                let mut interp_acc = 0.0;
                let mut count = 0usize;
                for (color, dir) in unknown {
                    let Ok(interp) = interpolate_from_set(dir, &known) else {
                        continue;
                    };
                    sh_acc += channel_mse(&query_sh(&fitted, dir), color);
                    interp_acc += channel_mse(&interp.clamped(), color);
                    count += 1;
                }
                if count == 0 {
                    return None;
                }
                Some((sh_acc / count as f64, interp_acc / count as f64))
            })
            .collect();

        let mut sh_sum = 0.0;
        let mut interp_sum = 0.0;
        let mut included = 0usize;
        for entry in &per_point {
            if let Some((s, i)) = entry {
                sh_sum += s;
                interp_sum += i;
                included += 1;
            }
        }
        if included == 0 {
            return Err(Error::InsufficientSamples { got: 0, need: 1 });
        }
        table.sh_mse.push(sh_sum / included as f64);
        table.interp_mse.push(interp_sum / included as f64);
        table.excluded.push(points.len() - included);
    }
    Ok(table)
}

/// Synthesizes per-point radiance sample sets from random band-limited
/// (ℓ ≤ `l_max`) expansions, with optional Gaussian observation noise —
/// the reproducible stand-in for multi-view color observations.
pub fn synthetic_radiance_points(
    n_points: usize,
    samples_per_point: usize,
    l_max: usize,
    amplitude: f64,
    noise_sigma: f64,
    seed: u64,
) -> Vec<RadianceSampleSet> {
    (0..n_points)
        .into_par_iter()
        .map(|pi| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_stream(seed, pi as u64, 0x9001));
            let n_basis = crate::sh::basis_count(l_max);
            let mut coeffs = Vec::with_capacity(n_basis);
            // DC term centers colors near 0.5; higher bands perturb.
            let dc = 2.0 * std::f64::consts::PI.sqrt();
            coeffs.push([
                rng.gen_range(0.35..0.65) * dc,
                rng.gen_range(0.35..0.65) * dc,
                rng.gen_range(0.35..0.65) * dc,
            ]);
            for _ in 1..n_basis {
                coeffs.push([
                    rng.gen_range(-amplitude..amplitude),
                    rng.gen_range(-amplitude..amplitude),
                    rng.gen_range(-amplitude..amplitude),
                ]);
            }
            let expansion = ShExpansion::new(l_max, coeffs).expect("finite coefficients");
            let samples = (0..samples_per_point)
                .map(|_| {
                    let d: [f64; 3] = UnitSphere.sample(&mut rng);
                    let dir = UnitVec3::new(d[0], d[1], d[2]).expect("unit sample");
                    let raw = expansion.eval_raw(&dir);
                    let noise = |rng: &mut ChaCha8Rng| -> f64 {
                        if noise_sigma > 0.0 {
                            let z: f64 = StandardNormal.sample(rng);
                            z * noise_sigma
                        } else {
                            0.0
                        }
                    };
                    let color = Rgb::new(
                        raw[0] + noise(&mut rng),
                        raw[1] + noise(&mut rng),
                        raw[2] + noise(&mut rng),
                    );
                    (color, dir)
                })
                .collect();
            RadianceSampleSet::new(samples)
        })
        .collect()
}
