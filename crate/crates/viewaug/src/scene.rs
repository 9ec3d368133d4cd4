//! Synthetic scene construction: SDF geometry plus an analytic
//! view-dependent radiance model, camera trajectory generation
//! (driving-style linear paths and orbits), ground-truth rendering along
//! two independent paths, and scene-bundle disk IO.
//!
//! Scenes are described by a single JSON file with `geometry`, `radiance`,
//! `trajectory`, and `render` sections; presets live in `presets/` at the
//! repository root.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::geom::{PinholeCamera, RigidTransform};
use crate::math::{Aabb, Rgb, UnitVec3, Vec3};
use crate::render::{composite, DepthMap, ImageBuffer, SamplePoint};
use crate::sdf::{sdf_normal, sphere_trace_first_hit, SdfField};
use crate::sh::eval_sh_basis;

// ---------------------------------------------------------------------------
// Scene description (JSON)

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SceneSpec {
    pub geometry: GeometrySpec,
    pub radiance: RadianceSpec,
    pub trajectory: TrajectorySpec,
    pub render: RenderSpec,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GeometrySpec {
    /// Required when any primitive is unbounded (a plane).
    #[serde(default)]
    pub bounds: Option<BoundsSpec>,
    pub primitives: Vec<PrimitiveSpec>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundsSpec {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PrimitiveSpec {
    Sphere { center: [f64; 3], radius: f64 },
    Box { center: [f64; 3], half_extents: [f64; 3] },
    Plane { normal: [f64; 3], offset: f64 },
    Capsule { a: [f64; 3], b: [f64; 3], radius: f64 },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RadianceSpec {
    pub background: [f64; 3],
    pub albedo: AlbedoSpec,
    /// Peak deviation of the view-dependent term (band-limited, ℓ ≤ 2).
    #[serde(default = "default_view_amplitude")]
    pub view_amplitude: f64,
    #[serde(default)]
    pub view_seed: u64,
    /// Optional non-band-limited highlight for stress tests.
    #[serde(default)]
    pub specular: Option<SpecularSpec>,
}

fn default_view_amplitude() -> f64 {
    0.12
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AlbedoSpec {
    Constant { color: [f64; 3] },
    /// One color per geometry primitive, matched by nearest member.
    PerPrimitive { colors: Vec<[f64; 3]> },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpecularSpec {
    pub strength: f64,
    pub sharpness: f64,
    pub light_dir: [f64; 3],
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TrajectorySpec {
    /// Driving-style path: positions interpolate start→end, looking along
    /// `look_dir` with optional per-camera orientation jitter.
    LinearPath {
        count: usize,
        start: [f64; 3],
        end: [f64; 3],
        look_dir: [f64; 3],
        #[serde(default)]
        jitter_deg: f64,
        #[serde(default)]
        jitter_seed: u64,
        #[serde(default = "default_sparsity")]
        sparsity: usize,
    },
    /// Object-centric ring at a fixed elevation angle, looking at the center.
    Orbit {
        count: usize,
        center: [f64; 3],
        radius: f64,
        #[serde(default)]
        elevation_deg: f64,
        #[serde(default = "default_sparsity")]
        sparsity: usize,
    },
}

fn default_sparsity() -> usize {
    1
}

impl TrajectorySpec {
    pub fn count(&self) -> usize {
        match self {
            TrajectorySpec::LinearPath { count, .. } => *count,
            TrajectorySpec::Orbit { count, .. } => *count,
        }
    }

    pub fn sparsity(&self) -> usize {
        match self {
            TrajectorySpec::LinearPath { sparsity, .. } => *sparsity,
            TrajectorySpec::Orbit { sparsity, .. } => *sparsity,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RenderSpec {
    pub width: usize,
    pub height: usize,
    #[serde(default = "default_fov")]
    pub fov_deg: f64,
    #[serde(default = "default_max_steps")]
    pub max_steps: usize,
    /// Samples per ray on the compositor path.
    #[serde(default = "default_composite_samples")]
    pub composite_samples: usize,
    /// Sharpness of the logistic opacity sections.
    #[serde(default = "default_sharpness")]
    pub composite_sharpness: f64,
}

fn default_fov() -> f64 {
    60.0
}
fn default_max_steps() -> usize {
    256
}
fn default_composite_samples() -> usize {
    64
}
fn default_sharpness() -> f64 {
    64.0
}

// ---------------------------------------------------------------------------
// Radiance model

/// Analytic per-point, view-dependent radiance: albedo plus a band-limited
/// (ℓ ≤ 2) spherical-harmonics view term whose coefficients vary smoothly
/// with position, plus an optional specular lobe. With the lobe disabled the
/// directional dependence is exactly band-limited, which the SH-recovery
/// tests rely on.
#[derive(Debug, Clone)]
pub struct RadianceModel {
    albedo: AlbedoSpec,
    background: Rgb,
    /// Per (basis index 1..9, channel) spatial wave parameters.
    view_waves: Vec<[(Vec3, f64); 3]>,
    view_amp: f64,
    specular: Option<SpecularSpec>,
    normal_step: f64,
}

/// Σ max|Y_i| over the ℓ = 1, 2 bands; bounds the view term so colors stay
/// inside [0, 1] for sensible albedos.
const VIEW_BASIS_MAX_SUM: f64 = 4.3;

impl RadianceModel {
    pub fn new(spec: &RadianceSpec, field: &SdfField) -> Self {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(spec.view_seed);
        let view_waves = (0..8)
            .map(|_| {
                let mut per_channel = [(Vec3::zeros(), 0.0); 3];
                for slot in &mut per_channel {
                    let w = Vec3::new(
                        rng.gen_range(-0.4..0.4),
                        rng.gen_range(-0.4..0.4),
                        rng.gen_range(-0.4..0.4),
                    );
                    let phase = rng.gen_range(0.0..std::f64::consts::TAU);
                    *slot = (w, phase);
                }
                per_channel
            })
            .collect();
        RadianceModel {
            albedo: spec.albedo.clone(),
            background: Rgb::from_array(spec.background),
            view_waves,
            view_amp: spec.view_amplitude / VIEW_BASIS_MAX_SUM,
            specular: spec.specular.clone(),
            normal_step: 1e-4 * field.bounds().diagonal(),
        }
    }

    pub fn background(&self) -> Rgb {
        self.background
    }

    fn albedo_at(&self, field: &SdfField, p: &Vec3) -> Rgb {
        match &self.albedo {
            AlbedoSpec::Constant { color } => Rgb::from_array(*color),
            AlbedoSpec::PerPrimitive { colors } => {
                let idx = field.nearest_member(p);
                Rgb::from_array(colors[idx % colors.len()])
            }
        }
    }

    /// ℓ ≤ 2 view-dependent coefficients at a position (basis indices 1..9).
    fn view_coeffs(&self, p: &Vec3) -> [[f64; 3]; 8] {
        let mut out = [[0.0; 3]; 8];
        for (i, waves) in self.view_waves.iter().enumerate() {
            for ch in 0..3 {
                let (w, phase) = waves[ch];
                out[i][ch] = self.view_amp * (w.dot(p) + phase).sin();
            }
        }
        out
    }

    /// Radiance of the point seen from direction `d` (pointing away from the
    /// surface, toward the viewer).
    pub fn eval(&self, field: &SdfField, p: &Vec3, d: &UnitVec3) -> Rgb {
        let albedo = self.albedo_at(field, p);
        let basis = eval_sh_basis(2, d).expect("l_max 2 is always valid");
        let coeffs = self.view_coeffs(p);
        let mut c = albedo.to_array();
        for (i, k) in coeffs.iter().enumerate() {
            let y = basis[i + 1];
            for ch in 0..3 {
                c[ch] += k[ch] * y;
            }
        }
        if let Some(spec) = &self.specular {
            if let Ok(n) = sdf_normal(field, p, self.normal_step) {
                let l = -Vec3::new(spec.light_dir[0], spec.light_dir[1], spec.light_dir[2])
                    .normalize();
                let r = n.as_vector() * (2.0 * n.as_vector().dot(&l)) - l;
                let lobe = spec.strength * r.dot(d.as_vector()).max(0.0).powf(spec.sharpness);
                for ch in &mut c {
                    *ch += lobe;
                }
            }
        }
        Rgb::from_array(c)
    }
}

// ---------------------------------------------------------------------------
// Scene bundle

/// A fully constructed synthetic scene: geometry, radiance, posed cameras,
/// ground-truth images and depth maps, and the train/test split (every tenth
/// camera is reserved for testing).
#[derive(Debug, Clone)]
pub struct SceneBundle {
    pub spec: SceneSpec,
    pub field: SdfField,
    pub radiance: RadianceModel,
    pub cameras: Vec<PinholeCamera>,
    pub images: Vec<ImageBuffer>,
    pub depths: Vec<DepthMap>,
    pub train_indices: Vec<usize>,
    pub test_indices: Vec<usize>,
}

impl SceneBundle {
    /// Training camera indices after keep-every-k thinning.
    pub fn sparse_train_indices(&self, k: usize) -> Vec<usize> {
        thin_trajectory(&self.train_indices, k)
    }
}

/// Keeps entries at positions ≡ 0 mod k (`k = 4` emulates a 25% sparse
/// capture).
pub fn thin_trajectory<T: Clone>(items: &[T], k: usize) -> Vec<T> {
    debug_assert!(k >= 1);
    items.iter().step_by(k.max(1)).cloned().collect()
}

fn build_field(geometry: &GeometrySpec) -> Result<SdfField> {
    if geometry.primitives.is_empty() {
        return Err(Error::SceneParse(
            "geometry.primitives must list at least one primitive".into(),
        ));
    }
    let declared = match &geometry.bounds {
        Some(b) => Some(
            Aabb::new(Vec3::from(b.min), Vec3::from(b.max))
                .map_err(|e| Error::SceneParse(format!("geometry.bounds invalid: {e}")))?,
        ),
        None => None,
    };
    let mut members = Vec::with_capacity(geometry.primitives.len());
    for (i, prim) in geometry.primitives.iter().enumerate() {
        let field = match prim {
            PrimitiveSpec::Sphere { center, radius } => {
                SdfField::sphere(Vec3::from(*center), *radius)
            }
            PrimitiveSpec::Box { center, half_extents } => {
                SdfField::cuboid(Vec3::from(*center), Vec3::from(*half_extents))
            }
            PrimitiveSpec::Plane { normal, offset } => {
                let bounds = declared.ok_or_else(|| {
                    Error::SceneParse(
                        "geometry.bounds is required when a plane primitive is present".into(),
                    )
                })?;
                UnitVec3::new(normal[0], normal[1], normal[2])
                    .map(|n| SdfField::plane(n, *offset, bounds))
                    .map_err(|e| {
                        Error::SceneParse(format!("geometry.primitives[{i}].normal: {e}"))
                    })
            }
            PrimitiveSpec::Capsule { a, b, radius } => {
                SdfField::capsule(Vec3::from(*a), Vec3::from(*b), *radius)
            }
        }
        .map_err(|e| Error::SceneParse(format!("geometry.primitives[{i}]: {e}")))?;
        members.push(field);
    }
    let mut field =
        SdfField::union(members).map_err(|e| Error::SceneParse(format!("geometry: {e}")))?;
    if let Some(b) = declared {
        field = field.with_bounds(b);
    }
    Ok(field)
}

/// Camera orientation looking along `forward` with world +z as up (camera
/// +y points world-down, the usual image convention).
fn look_rotation(forward: &UnitVec3) -> nalgebra::Matrix3<f64> {
    let f = *forward.as_vector();
    let up = Vec3::new(0.0, 0.0, 1.0);
    let mut x = f.cross(&up);
    if x.norm() < 1e-9 {
        x = f.cross(&Vec3::new(0.0, 1.0, 0.0));
    }
    let x = x.normalize();
    let y = f.cross(&x);
    nalgebra::Matrix3::from_columns(&[x, y, f])
}

fn build_cameras(traj: &TrajectorySpec, render: &RenderSpec) -> Result<Vec<PinholeCamera>> {
    use rand::{Rng, SeedableRng};
    if traj.count() < 2 {
        return Err(Error::SceneParse("trajectory.count must be at least 2".into()));
    }
    if traj.sparsity() < 1 {
        return Err(Error::SceneParse("trajectory.sparsity must be at least 1".into()));
    }
    let fov = render.fov_deg.to_radians();
    if !(fov > 0.0 && fov < std::f64::consts::PI) {
        return Err(Error::SceneParse("render.fov_deg must be in (0, 180)".into()));
    }
    let f = 0.5 * render.width as f64 / (0.5 * fov).tan();
    let cx = (render.width as f64 - 1.0) / 2.0;
    let cy = (render.height as f64 - 1.0) / 2.0;

    let poses: Vec<(Vec3, UnitVec3)> = match traj {
        TrajectorySpec::LinearPath {
            count,
            start,
            end,
            look_dir,
            jitter_deg,
            jitter_seed,
            ..
        } => {
            let start = Vec3::from(*start);
            let end = Vec3::from(*end);
            let base = UnitVec3::new(look_dir[0], look_dir[1], look_dir[2])
                .map_err(|e| Error::SceneParse(format!("trajectory.look_dir: {e}")))?;
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(*jitter_seed);
            (0..*count)
                .map(|i| {
                    let t = i as f64 / (*count - 1) as f64;
                    let pos = start + (end - start) * t;
                    let dir = if *jitter_deg > 0.0 {
                        let angle = rng.gen_range(0.0..jitter_deg.to_radians());
                        let axis = UnitVec3::new(
                            rng.gen_range(-1.0..1.0),
                            rng.gen_range(-1.0..1.0),
                            rng.gen_range(-1.0..1.0),
                        )
                        .unwrap_or_else(|_| UnitVec3::z_axis());
                        let rot = RigidTransform::from_axis_angle(&axis, angle, Vec3::zeros());
                        UnitVec3::from_vector(rot.transform_vector(base.as_vector()))
                            .unwrap_or(base)
                    } else {
                        base
                    };
                    (pos, dir)
                })
                .collect()
        }
        TrajectorySpec::Orbit { count, center, radius, elevation_deg, .. } => {
            if !(*radius > 0.0) {
                return Err(Error::SceneParse("trajectory.radius must be positive".into()));
            }
            let center = Vec3::from(*center);
            let elev = elevation_deg.to_radians();
            (0..*count)
                .map(|i| {
                    let theta = std::f64::consts::TAU * i as f64 / *count as f64;
                    let pos = center
                        + Vec3::new(
                            radius * elev.cos() * theta.cos(),
                            radius * elev.cos() * theta.sin(),
                            radius * elev.sin(),
                        );
                    let dir = UnitVec3::from_vector(center - pos)
                        .expect("orbit radius > 0 keeps cameras off the center");
                    (pos, dir)
                })
                .collect()
        }
    };

    poses
        .into_iter()
        .map(|(pos, forward)| {
            let rotation = look_rotation(&forward);
            let pose = RigidTransform::new(rotation, pos)
                .map_err(|e| Error::SceneParse(format!("trajectory produced bad pose: {e}")))?;
            PinholeCamera::new(f, f, cx, cy, render.width, render.height, pose)
                .map_err(|e| Error::SceneParse(format!("render intrinsics: {e}")))
        })
        .collect()
}

/// Ground-truth render of one camera along the primary path: sphere-trace
/// the first hit, evaluate the radiance model there toward the camera;
/// misses get the background color and an invalid depth.
pub fn render_ground_truth(
    field: &SdfField,
    radiance: &RadianceModel,
    cam: &PinholeCamera,
    max_steps: usize,
) -> (ImageBuffer, DepthMap) {
    let eps = field.default_eps();
    let cfw = cam.camera_from_world();
    let rows: Vec<(Vec<Rgb>, Vec<f64>)> = (0..cam.height)
        .into_par_iter()
        .map(|y| {
            let mut colors = Vec::with_capacity(cam.width);
            let mut depths = Vec::with_capacity(cam.width);
            for x in 0..cam.width {
                let ray = cam
                    .camera_ray(&[x as f64, y as f64])
                    .expect("lattice pixels are in bounds");
                match sphere_trace_first_hit(field, &ray, eps, max_steps) {
                    Some(hit) => {
                        let to_cam = UnitVec3::from_vector(cam.center() - hit.point)
                            .unwrap_or_else(|_| ray.direction.negated());
                        colors.push(radiance.eval(field, &hit.point, &to_cam));
                        depths.push(cfw.transform_point(&hit.point).z);
                    }
                    None => {
                        colors.push(radiance.background());
                        depths.push(f64::NAN);
                    }
                }
            }
            (colors, depths)
        })
        .collect();

    let mut pixels = Vec::with_capacity(cam.width * cam.height);
    let mut depth_values = Vec::with_capacity(cam.width * cam.height);
    for (c, d) in rows {
        pixels.extend(c);
        depth_values.extend(d);
    }
    let image = ImageBuffer::from_pixels(cam.width, cam.height, pixels)
        .expect("renderer produces finite colors");
    let depth = DepthMap::from_depths(cam.width, cam.height, depth_values)
        .expect("renderer produces positive depths");
    (image, depth)
}

/// Secondary render path for compositor testing: fixed-count uniform samples
/// per ray, opacity from logistic sections of the SDF
/// (`α_i = max(0, (Φ(d_i) − Φ(d_{i+1})) / Φ(d_i))` with `Φ(x) = σ(s·x)`),
/// composited front to back with the background behind the last sample.
pub fn render_composite_path(
    field: &SdfField,
    radiance: &RadianceModel,
    cam: &PinholeCamera,
    n_samples: usize,
    sharpness: f64,
) -> ImageBuffer {
    let phi = |d: f64| 1.0 / (1.0 + (-sharpness * d).exp());
    let rows: Vec<Vec<Rgb>> = (0..cam.height)
        .into_par_iter()
        .map(|y| {
            let mut colors = Vec::with_capacity(cam.width);
            for x in 0..cam.width {
                let ray = cam
                    .camera_ray(&[x as f64, y as f64])
                    .expect("lattice pixels are in bounds");
                let span = field
                    .bounds()
                    .intersect_ray(&ray.origin, ray.direction.as_vector());
                let Some((t0, t1)) = span else {
                    colors.push(radiance.background());
                    continue;
                };
                let t0 = t0.max(1e-6);
                if t1 <= t0 {
                    colors.push(radiance.background());
                    continue;
                }
                let dt = (t1 - t0) / n_samples as f64;
                let ts: Vec<f64> = (0..n_samples).map(|i| t0 + dt * (i as f64 + 0.5)).collect();
                let ds: Vec<f64> = ts.iter().map(|&t| field.distance(&ray.at(t))).collect();
                let mut samples = Vec::with_capacity(n_samples);
                for i in 0..n_samples {
                    let d_next = if i + 1 < n_samples { ds[i + 1] } else { ds[i] };
                    let alpha = ((phi(ds[i]) - phi(d_next)) / phi(ds[i])).clamp(0.0, 1.0);
                    let p = ray.at(ts[i]);
                    let to_cam = UnitVec3::from_vector(cam.center() - p)
                        .unwrap_or_else(|_| ray.direction.negated());
                    samples.push(SamplePoint {
                        t: ts[i],
                        alpha,
                        color: radiance.eval(field, &p, &to_cam),
                    });
                }
                let (fg, trans) =
                    composite(&samples).expect("strictly increasing sample parameters");
                let t_last = trans.last().copied().unwrap_or(1.0)
                    * (1.0 - samples.last().map_or(0.0, |s| s.alpha));
                colors.push(fg + radiance.background() * t_last);
            }
            colors
        })
        .collect();
    let pixels: Vec<Rgb> = rows.into_iter().flatten().collect();
    ImageBuffer::from_pixels(cam.width, cam.height, pixels)
        .expect("compositor produces finite colors")
}

/// Builds the full bundle from a parsed spec: field, radiance model,
/// trajectory cameras, ground-truth renders, and the every-tenth test split.
pub fn build_scene(spec: &SceneSpec) -> Result<SceneBundle> {
    let field = build_field(&spec.geometry)?;
    if let AlbedoSpec::PerPrimitive { colors } = &spec.radiance.albedo {
        if colors.len() != spec.geometry.primitives.len() {
            return Err(Error::SceneParse(format!(
                "radiance.albedo.colors has {} entries for {} primitives",
                colors.len(),
                spec.geometry.primitives.len()
            )));
        }
    }
    let radiance = RadianceModel::new(&spec.radiance, &field);
    let cameras = build_cameras(&spec.trajectory, &spec.render)?;

    let rendered: Vec<(ImageBuffer, DepthMap)> = cameras
        .iter()
        .map(|cam| render_ground_truth(&field, &radiance, cam, spec.render.max_steps))
        .collect();
    let (images, depths): (Vec<_>, Vec<_>) = rendered.into_iter().unzip();

    let mut train_indices = Vec::new();
    let mut test_indices = Vec::new();
    for i in 0..cameras.len() {
        if i % 10 == 0 {
            test_indices.push(i);
        } else {
            train_indices.push(i);
        }
    }
    Ok(SceneBundle {
        spec: spec.clone(),
        field,
        radiance,
        cameras,
        images,
        depths,
        train_indices,
        test_indices,
    })
}

/// Parses a scene-description JSON string.
pub fn parse_scene_spec(text: &str) -> Result<SceneSpec> {
    serde_json::from_str(text).map_err(|e| Error::SceneParse(e.to_string()))
}

pub fn load_scene_spec(path: &Path) -> Result<SceneSpec> {
    parse_scene_spec(&std::fs::read_to_string(path)?)
}

// ---------------------------------------------------------------------------
// Bundle disk format

fn camera_record(cam: &PinholeCamera) -> String {
    let m = cam.world_from_camera.to_row_major_3x4();
    let mut s = format!(
        "{} {} {} {} {} {}\n",
        cam.fx, cam.fy, cam.cx, cam.cy, cam.width, cam.height
    );
    s.push_str(&m.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" "));
    s.push('\n');
    s
}

fn camera_from_record(intrinsics: &str, pose: &str) -> Result<PinholeCamera> {
    let parts: Vec<&str> = intrinsics.split_whitespace().collect();
    if parts.len() != 6 {
        return Err(Error::invalid("camera record needs 6 intrinsic fields"));
    }
    let fx: f64 = parts[0].parse().map_err(|_| Error::invalid("bad fx"))?;
    let fy: f64 = parts[1].parse().map_err(|_| Error::invalid("bad fy"))?;
    let cx: f64 = parts[2].parse().map_err(|_| Error::invalid("bad cx"))?;
    let cy: f64 = parts[3].parse().map_err(|_| Error::invalid("bad cy"))?;
    let width: usize = parts[4].parse().map_err(|_| Error::invalid("bad width"))?;
    let height: usize = parts[5].parse().map_err(|_| Error::invalid("bad height"))?;
    let nums: Vec<f64> = pose
        .split_whitespace()
        .map(|t| t.parse().map_err(|_| Error::invalid("bad pose value")))
        .collect::<Result<_>>()?;
    if nums.len() != 12 {
        return Err(Error::invalid("camera pose needs 12 values"));
    }
    let mut m = [0.0; 12];
    m.copy_from_slice(&nums);
    PinholeCamera::new(fx, fy, cx, cy, width, height, RigidTransform::from_row_major_3x4(&m)?)
}

fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Writes the bundle to `dir`: the scene spec, camera records, per-camera
/// PPM + raw-float image + raw-float depth, the split, and a manifest of
/// sha256 hashes over every artifact.
pub fn save_bundle(bundle: &SceneBundle, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut artifacts: Vec<String> = Vec::new();

    let spec_json = serde_json::to_string_pretty(&bundle.spec)
        .map_err(|e| Error::SceneParse(e.to_string()))?;
    std::fs::write(dir.join("scene.json"), &spec_json)?;
    artifacts.push("scene.json".into());

    let mut cameras_txt = String::new();
    for cam in &bundle.cameras {
        cameras_txt.push_str(&camera_record(cam));
    }
    std::fs::write(dir.join("cameras.txt"), &cameras_txt)?;
    artifacts.push("cameras.txt".into());

    let split = format!(
        "train: {}\ntest: {}\n",
        bundle
            .train_indices
            .iter()
            .map(|i| i.to_string())
            .collect::<Vec<_>>()
            .join(" "),
        bundle
            .test_indices
            .iter()
            .map(|i| i.to_string())
            .collect::<Vec<_>>()
            .join(" ")
    );
    std::fs::write(dir.join("split.txt"), &split)?;
    artifacts.push("split.txt".into());

    for (i, (img, depth)) in bundle.images.iter().zip(&bundle.depths).enumerate() {
        let ppm = format!("image_{i:03}.ppm");
        let raw = format!("image_{i:03}.rawf32");
        let dep = format!("depth_{i:03}.rawdepth");
        img.write_ppm(&dir.join(&ppm))?;
        img.write_rawf32(&dir.join(&raw))?;
        depth.write_raw(&dir.join(&dep))?;
        artifacts.push(ppm);
        artifacts.push(raw);
        artifacts.push(dep);
    }

    artifacts.sort();
    let mut manifest = String::new();
    for name in &artifacts {
        let bytes = std::fs::read(dir.join(name))?;
        manifest.push_str(&format!("{}  {}\n", sha256_hex(&bytes), name));
    }
    std::fs::write(dir.join("manifest.txt"), manifest)?;
    Ok(())
}

/// Reloads a bundle saved by [`save_bundle`]: the field and radiance model
/// are rebuilt deterministically from the stored spec, everything else is
/// read from the artifacts.
pub fn load_bundle(dir: &Path) -> Result<SceneBundle> {
    let spec = load_scene_spec(&dir.join("scene.json"))?;
    let field = build_field(&spec.geometry)?;
    let radiance = RadianceModel::new(&spec.radiance, &field);

    let cameras_txt = std::fs::read_to_string(dir.join("cameras.txt"))?;
    let lines: Vec<&str> = cameras_txt.lines().collect();
    if lines.len() % 2 != 0 {
        return Err(Error::DataFormat {
            path: dir.join("cameras.txt").display().to_string(),
            msg: "expected two lines per camera".into(),
        });
    }
    let cameras: Vec<PinholeCamera> = lines
        .chunks(2)
        .map(|pair| camera_from_record(pair[0], pair[1]))
        .collect::<Result<_>>()?;

    let split_txt = std::fs::read_to_string(dir.join("split.txt"))?;
    let mut train_indices = Vec::new();
    let mut test_indices = Vec::new();
    for line in split_txt.lines() {
        let (target, rest) = if let Some(rest) = line.strip_prefix("train:") {
            (&mut train_indices, rest)
        } else if let Some(rest) = line.strip_prefix("test:") {
            (&mut test_indices, rest)
        } else {
            continue;
        };
        for tok in rest.split_whitespace() {
            target.push(tok.parse::<usize>().map_err(|_| Error::DataFormat {
                path: dir.join("split.txt").display().to_string(),
                msg: format!("bad index {tok}"),
            })?);
        }
    }

    let mut images = Vec::with_capacity(cameras.len());
    let mut depths = Vec::with_capacity(cameras.len());
    for i in 0..cameras.len() {
        images.push(ImageBuffer::read_rawf32(&dir.join(format!("image_{i:03}.rawf32")))?);
        depths.push(DepthMap::read_raw(&dir.join(format!("depth_{i:03}.rawdepth")))?);
    }
    Ok(SceneBundle {
        spec,
        field,
        radiance,
        cameras,
        images,
        depths,
        train_indices,
        test_indices,
    })
}
