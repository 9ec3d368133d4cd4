//! Marching-cubes surface extraction and the brute-force ray/triangle
//! intersection oracle used to validate sphere-traced visibility.

mod tables;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geom::Ray;
use crate::math::{UnitVec3, Vec3};
use crate::sdf::{sdf_normal, SdfField};
use tables::{CORNER_OFFSETS, EDGE_CORNERS, TRI_TABLE};

/// Indexed triangle mesh with per-vertex normals.
#[derive(Debug, Clone)]
pub struct TriangleMesh {
    pub vertices: Vec<Vec3>,
    pub triangles: Vec<[u32; 3]>,
    pub normals: Vec<UnitVec3>,
    /// Largest lattice spacing used during extraction (0 for hand-built
    /// meshes); the tolerance unit for vertex-accuracy checks.
    pub voxel_size: f64,
}

impl TriangleMesh {
    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    /// Wavefront OBJ export (`v`/`vn`/`f` records) for inspection.
    pub fn to_obj(&self) -> String {
        let mut s = String::new();
        for v in &self.vertices {
            s.push_str(&format!("v {} {} {}\n", v.x, v.y, v.z));
        }
        for n in &self.normals {
            s.push_str(&format!("vn {} {} {}\n", n.x(), n.y(), n.z()));
        }
        for t in &self.triangles {
            s.push_str(&format!(
                "f {}//{} {}//{} {}//{}\n",
                t[0] + 1,
                t[0] + 1,
                t[1] + 1,
                t[1] + 1,
                t[2] + 1,
                t[2] + 1
            ));
        }
        s
    }
}

/// Extracts the zero level set of `field` over a `resolution³` sample
/// lattice spanning the field's bounding box padded by one voxel. Vertex
/// positions interpolate linearly along crossed cell edges and are welded
/// across cells; normals come from `sdf_normal`. A field with no sign
/// change yields an empty mesh.
pub fn marching_cubes(field: &SdfField, resolution: usize) -> Result<TriangleMesh> {
    if resolution < 8 {
        return Err(Error::invalid("marching cubes needs resolution >= 8"));
    }
    if !field.bounds().is_finite() {
        return Err(Error::invalid("marching cubes needs a finite bounding box"));
    }
    let n = resolution;
    let raw = field.bounds();
    let pre = raw.extent() / (n - 1) as f64;
    let padded = raw.grown(pre);
    let step = padded.extent() / (n - 1) as f64;
    let voxel_size = step.x.max(step.y).max(step.z);

    let sample_pos = |i: usize, j: usize, k: usize| {
        Vec3::new(
            padded.min.x + step.x * i as f64,
            padded.min.y + step.y * j as f64,
            padded.min.z + step.z * k as f64,
        )
    };

    // Lattice values, x-fastest, filled slab-by-slab in parallel.
    let values: Vec<f64> = (0..n * n * n)
        .into_par_iter()
        .map(|idx| {
            let i = idx % n;
            let j = (idx / n) % n;
            let k = idx / (n * n);
            field.distance(&sample_pos(i, j, k))
        })
        .collect();
    let value = |i: usize, j: usize, k: usize| values[i + j * n + k * n * n];

    let mut vertices: Vec<Vec3> = Vec::new();
    let mut triangles: Vec<[u32; 3]> = Vec::new();
    // Welds shared edge vertices: key = (lower sample index, axis).
    let mut edge_vertex: std::collections::HashMap<(u32, u8), u32> =
        std::collections::HashMap::new();

    for k in 0..n - 1 {
        for j in 0..n - 1 {
            for i in 0..n - 1 {
                let mut case = 0usize;
                let mut corner_vals = [0.0; 8];
                for (c, &(dx, dy, dz)) in CORNER_OFFSETS.iter().enumerate() {
                    let v = value(i + dx, j + dy, k + dz);
                    corner_vals[c] = v;
                    if v < 0.0 {
                        case |= 1 << c;
                    }
                }
                let tri_row = &TRI_TABLE[case];
                if tri_row[0] < 0 {
                    continue;
                }

                let mut edge_index = |e: usize| -> u32 {
                    let (ca, cb) = EDGE_CORNERS[e];
                    let (ax, ay, az) = CORNER_OFFSETS[ca];
                    let (bx, by, bz) = CORNER_OFFSETS[cb];
                    let (sa, sb) = (
                        (i + ax) + (j + ay) * n + (k + az) * n * n,
                        (i + bx) + (j + by) * n + (k + bz) * n * n,
                    );
                    let (lo, hi, axis) = if sa < sb {
                        (sa, sb, axis_of(sa, sb, n))
                    } else {
                        (sb, sa, axis_of(sb, sa, n))
                    };
                    debug_assert!(hi > lo);
                    *edge_vertex.entry((lo as u32, axis)).or_insert_with(|| {
                        let (va, vb) = (corner_vals[ca], corner_vals[cb]);
                        let pa = sample_pos(i + ax, j + ay, k + az);
                        let pb = sample_pos(i + bx, j + by, k + bz);
                        // Guard the division: the edge is only requested when
                        // the corner signs differ, so |va − vb| > 0.
                        let t = (va / (va - vb)).clamp(0.0, 1.0);
                        let p = pa + (pb - pa) * t;
                        vertices.push(p);
                        (vertices.len() - 1) as u32
                    })
                };

                let mut e = 0;
                while tri_row[e] >= 0 {
                    let a = edge_index(tri_row[e] as usize);
                    let b = edge_index(tri_row[e + 1] as usize);
                    let c = edge_index(tri_row[e + 2] as usize);
                    triangles.push([a, b, c]);
                    e += 3;
                }
            }
        }
    }

    // Drop degenerates; vertices stay if referenced elsewhere.
    triangles.retain(|t| {
        let (a, b, c) = (
            vertices[t[0] as usize],
            vertices[t[1] as usize],
            vertices[t[2] as usize],
        );
        (b - a).cross(&(c - a)).norm() * 0.5 >= 1e-12
    });

    let h = 1e-4 * padded.diagonal();
    let center = padded.center();
    let normals: Vec<UnitVec3> = vertices
        .par_iter()
        .map(|v| {
            sdf_normal(field, v, h)
                .or_else(|_| sdf_normal(field, v, 10.0 * h))
                .or_else(|_| UnitVec3::from_vector(v - center))
                .unwrap_or_else(|_| UnitVec3::z_axis())
        })
        .collect();

    Ok(TriangleMesh { vertices, triangles, normals, voxel_size })
}

/// Axis (0 = x, 1 = y, 2 = z) of a lattice edge given its two sample
/// indices with `lo < hi`.
fn axis_of(lo: usize, hi: usize, n: usize) -> u8 {
    match hi - lo {
        1 => 0,
        d if d == n => 1,
        _ => 2,
    }
}

/// Deterministic surface-point sampling: all vertices in original order when
/// they fit the budget, otherwise a seeded uniform subsample without
/// replacement (indices sorted ascending).
pub fn surface_points(
    mesh: &TriangleMesh,
    max_points: usize,
    seed: u64,
) -> Vec<(Vec3, UnitVec3)> {
    use rand::SeedableRng;
    if max_points == 0 || mesh.vertices.is_empty() {
        return Vec::new();
    }
    if mesh.vertices.len() <= max_points {
        return mesh
            .vertices
            .iter()
            .zip(&mesh.normals)
            .map(|(v, n)| (*v, *n))
            .collect();
    }
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut picked =
        rand::seq::index::sample(&mut rng, mesh.vertices.len(), max_points).into_vec();
    picked.sort_unstable();
    picked
        .into_iter()
        .map(|i| (mesh.vertices[i], mesh.normals[i]))
        .collect()
}

/// A ray/mesh intersection: parametric distance and triangle index.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeshHit {
    pub t: f64,
    pub triangle: usize,
}

/// Watertight-enough Möller–Trumbore test for one triangle; no backface
/// culling. Returns the ray parameter of the hit.
fn ray_triangle(ray: &Ray, v0: &Vec3, v1: &Vec3, v2: &Vec3) -> Option<f64> {
    let e1 = v1 - v0;
    let e2 = v2 - v0;
    let p = ray.direction.as_vector().cross(&e2);
    let det = e1.dot(&p);
    if det.abs() < 1e-12 {
        return None;
    }
    let inv = 1.0 / det;
    let s = ray.origin - v0;
    let u = s.dot(&p) * inv;
    if !(0.0..=1.0).contains(&u) {
        return None;
    }
    let q = s.cross(&e1);
    let v = ray.direction.as_vector().dot(&q) * inv;
    if v < 0.0 || u + v > 1.0 {
        return None;
    }
    Some(e2.dot(&q) * inv)
}

/// Exhaustive nearest-hit scan over every triangle; the reference path the
/// accelerated search must match bit-for-bit.
pub fn mesh_ray_intersect_exhaustive(
    mesh: &TriangleMesh,
    ray: &Ray,
    t_min: f64,
) -> Option<MeshHit> {
    let mut best: Option<MeshHit> = None;
    for (idx, tri) in mesh.triangles.iter().enumerate() {
        let t = match ray_triangle(
            ray,
            &mesh.vertices[tri[0] as usize],
            &mesh.vertices[tri[1] as usize],
            &mesh.vertices[tri[2] as usize],
        ) {
            Some(t) if t > t_min => t,
            _ => continue,
        };
        if best.map_or(true, |b| t < b.t || (t == b.t && idx < b.triangle)) {
            best = Some(MeshHit { t, triangle: idx });
        }
    }
    best
}

/// Nearest hit beyond `t_min`, smallest-t-then-smallest-index tie break.
/// Goes through a BVH but returns exactly what the exhaustive scan would.
pub fn mesh_ray_intersect(mesh: &TriangleMesh, ray: &Ray, t_min: f64) -> Option<MeshHit> {
    BvhIndex::build(mesh).intersect(mesh, ray, t_min)
}

struct BvhNode {
    min: Vec3,
    max: Vec3,
    // Leaf: (first, count) into `order`; inner: child node ids.
    first: u32,
    count: u32,
    left: u32,
    right: u32,
}

/// Median-split BVH over triangle centroids. Build is deterministic, so
/// repeated queries agree across runs.
pub struct BvhIndex {
    nodes: Vec<BvhNode>,
    order: Vec<u32>,
}

impl BvhIndex {
    const LEAF_SIZE: usize = 8;

    pub fn build(mesh: &TriangleMesh) -> Self {
        let centroids: Vec<Vec3> = mesh
            .triangles
            .iter()
            .map(|t| {
                (mesh.vertices[t[0] as usize]
                    + mesh.vertices[t[1] as usize]
                    + mesh.vertices[t[2] as usize])
                    / 3.0
            })
            .collect();
        let mut order: Vec<u32> = (0..mesh.triangles.len() as u32).collect();
        let mut nodes = Vec::new();
        if !order.is_empty() {
            Self::split(mesh, &centroids, &mut order, 0, mesh.triangles.len(), &mut nodes);
        }
        BvhIndex { nodes, order }
    }

    fn bounds_of(mesh: &TriangleMesh, order: &[u32], start: usize, len: usize) -> (Vec3, Vec3) {
        let mut min = Vec3::from_element(f64::INFINITY);
        let mut max = Vec3::from_element(f64::NEG_INFINITY);
        for &ti in &order[start..start + len] {
            for &vi in &mesh.triangles[ti as usize] {
                let v = mesh.vertices[vi as usize];
                min = min.inf(&v);
                max = max.sup(&v);
            }
        }
        (min, max)
    }

    fn split(
        mesh: &TriangleMesh,
        centroids: &[Vec3],
        order: &mut [u32],
        start: usize,
        len: usize,
        nodes: &mut Vec<BvhNode>,
    ) -> u32 {
        let (min, max) = Self::bounds_of(mesh, order, start, len);
        let id = nodes.len() as u32;
        nodes.push(BvhNode { min, max, first: start as u32, count: len as u32, left: 0, right: 0 });
        if len > Self::LEAF_SIZE {
            let ext = max - min;
            let axis = if ext.x >= ext.y && ext.x >= ext.z {
                0
            } else if ext.y >= ext.z {
                1
            } else {
                2
            };
            let slice = &mut order[start..start + len];
            slice.sort_unstable_by(|&a, &b| {
                centroids[a as usize][axis]
                    .total_cmp(&centroids[b as usize][axis])
                    .then(a.cmp(&b))
            });
            let half = len / 2;
            let left = Self::split(mesh, centroids, order, start, half, nodes);
            let right = Self::split(mesh, centroids, order, start + half, len - half, nodes);
            nodes[id as usize].count = 0;
            nodes[id as usize].left = left;
            nodes[id as usize].right = right;
        }
        id
    }

    fn node_hit(node: &BvhNode, ray: &Ray, best_t: f64) -> bool {
        let mut t0 = 0.0f64;
        let mut t1 = best_t;
        for axis in 0..3 {
            let o = ray.origin[axis];
            let d = ray.direction.as_vector()[axis];
            if d.abs() < 1e-300 {
                if o < node.min[axis] || o > node.max[axis] {
                    return false;
                }
            } else {
                let mut a = (node.min[axis] - o) / d;
                let mut b = (node.max[axis] - o) / d;
                if a > b {
                    std::mem::swap(&mut a, &mut b);
                }
                t0 = t0.max(a);
                t1 = t1.min(b);
                if t0 > t1 {
                    return false;
                }
            }
        }
        true
    }

    pub fn intersect(&self, mesh: &TriangleMesh, ray: &Ray, t_min: f64) -> Option<MeshHit> {
        if self.nodes.is_empty() {
            return None;
        }
        let mut best: Option<MeshHit> = None;
        let mut stack = vec![0u32];
        while let Some(id) = stack.pop() {
            let node = &self.nodes[id as usize];
            let limit = best.map_or(f64::INFINITY, |b| b.t);
            if !Self::node_hit(node, ray, limit) {
                continue;
            }
            if node.count > 0 {
                for &ti in
                    &self.order[node.first as usize..(node.first + node.count) as usize]
                {
                    let tri = &mesh.triangles[ti as usize];
                    let t = match ray_triangle(
                        ray,
                        &mesh.vertices[tri[0] as usize],
                        &mesh.vertices[tri[1] as usize],
                        &mesh.vertices[tri[2] as usize],
                    ) {
                        Some(t) if t > t_min => t,
                        _ => continue,
                    };
                    let idx = ti as usize;
                    if best.map_or(true, |b| t < b.t || (t == b.t && idx < b.triangle)) {
                        best = Some(MeshHit { t, triangle: idx });
                    }
                }
            } else {
                stack.push(node.left);
                stack.push(node.right);
            }
        }
        best
    }
}
