//! Shared numeric primitives: unit vectors, linear-RGB triples, axis-aligned
//! boxes, and the deterministic stream derivation used to seed per-item RNGs.

use nalgebra::Vector3;

use crate::error::{Error, Result};

/// World-space vector/point type used throughout the crate (meters).
pub type Vec3 = Vector3<f64>;

/// A direction on the unit sphere. Construction normalizes and rejects
/// vectors too short to normalize, so a held `UnitVec3` always satisfies
/// `|x² + y² + z² − 1| ≤ 1e-9`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitVec3(Vec3);

impl UnitVec3 {
    pub fn new(x: f64, y: f64, z: f64) -> Result<Self> {
        Self::from_vector(Vec3::new(x, y, z))
    }

    pub fn from_vector(v: Vec3) -> Result<Self> {
        let n = v.norm();
        if !n.is_finite() || n < 1e-12 {
            return Err(Error::invalid(format!(
                "cannot normalize near-zero or non-finite vector ({}, {}, {})",
                v.x, v.y, v.z
            )));
        }
        Ok(UnitVec3(v / n))
    }

    /// Unit +x.
    pub fn x_axis() -> Self {
        UnitVec3(Vec3::new(1.0, 0.0, 0.0))
    }

    /// Unit +y.
    pub fn y_axis() -> Self {
        UnitVec3(Vec3::new(0.0, 1.0, 0.0))
    }

    /// Unit +z.
    pub fn z_axis() -> Self {
        UnitVec3(Vec3::new(0.0, 0.0, 1.0))
    }

    pub fn x(&self) -> f64 {
        self.0.x
    }

    pub fn y(&self) -> f64 {
        self.0.y
    }

    pub fn z(&self) -> f64 {
        self.0.z
    }

    pub fn as_vector(&self) -> &Vec3 {
        &self.0
    }

    pub fn into_vector(self) -> Vec3 {
        self.0
    }

    pub fn dot(&self, other: &UnitVec3) -> f64 {
        self.0.dot(&other.0)
    }

    pub fn cross(&self, other: &UnitVec3) -> Vec3 {
        self.0.cross(&other.0)
    }

    pub fn negated(&self) -> Self {
        UnitVec3(-self.0)
    }
}

impl std::ops::Mul<f64> for UnitVec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        self.0 * s
    }
}

/// Linear-radiance RGB triple. Values are nominally in `[0, 1]`; fitting
/// intermediates may leave that range, and clamping happens only where a
/// pseudo-label is emitted.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rgb {
    pub r: f64,
    pub g: f64,
    pub b: f64,
}

impl Rgb {
    pub const BLACK: Rgb = Rgb { r: 0.0, g: 0.0, b: 0.0 };

    pub fn new(r: f64, g: f64, b: f64) -> Self {
        debug_assert!(r.is_finite() && g.is_finite() && b.is_finite());
        Rgb { r, g, b }
    }

    pub fn splat(v: f64) -> Self {
        Rgb::new(v, v, v)
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        Rgb::new(a[0], a[1], a[2])
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.r, self.g, self.b]
    }

    pub fn clamped(self) -> Self {
        Rgb {
            r: self.r.clamp(0.0, 1.0),
            g: self.g.clamp(0.0, 1.0),
            b: self.b.clamp(0.0, 1.0),
        }
    }

    /// Rec. 709 luma of a linear-RGB triple.
    pub fn luma(self) -> f64 {
        0.2126 * self.r + 0.7152 * self.g + 0.0722 * self.b
    }

    pub fn is_finite(self) -> bool {
        self.r.is_finite() && self.g.is_finite() && self.b.is_finite()
    }
}

impl std::ops::Add for Rgb {
    type Output = Rgb;
    fn add(self, o: Rgb) -> Rgb {
        Rgb::new(self.r + o.r, self.g + o.g, self.b + o.b)
    }
}

impl std::ops::Sub for Rgb {
    type Output = Rgb;
    fn sub(self, o: Rgb) -> Rgb {
        Rgb::new(self.r - o.r, self.g - o.g, self.b - o.b)
    }
}

impl std::ops::Mul<f64> for Rgb {
    type Output = Rgb;
    fn mul(self, s: f64) -> Rgb {
        Rgb::new(self.r * s, self.g * s, self.b * s)
    }
}

/// Axis-aligned bounding box, inclusive on both faces.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb {
    pub fn new(min: Vec3, max: Vec3) -> Result<Self> {
        if !(min.x <= max.x && min.y <= max.y && min.z <= max.z) {
            return Err(Error::invalid("bounding box min must not exceed max"));
        }
        Ok(Aabb { min, max })
    }

    pub fn contains(&self, p: &Vec3) -> bool {
        p.x >= self.min.x
            && p.x <= self.max.x
            && p.y >= self.min.y
            && p.y <= self.max.y
            && p.z >= self.min.z
            && p.z <= self.max.z
    }

    pub fn center(&self) -> Vec3 {
        (self.min + self.max) * 0.5
    }

    pub fn extent(&self) -> Vec3 {
        self.max - self.min
    }

    pub fn diagonal(&self) -> f64 {
        self.extent().norm()
    }

    pub fn is_finite(&self) -> bool {
        self.min.iter().all(|v| v.is_finite()) && self.max.iter().all(|v| v.is_finite())
    }

    /// Box grown by `pad` on every face.
    pub fn grown(&self, pad: Vec3) -> Aabb {
        Aabb { min: self.min - pad, max: self.max + pad }
    }

    pub fn merged(&self, other: &Aabb) -> Aabb {
        Aabb {
            min: self.min.inf(&other.min),
            max: self.max.sup(&other.max),
        }
    }

    /// Distance from `p` to the box (0 inside).
    pub fn distance(&self, p: &Vec3) -> f64 {
        let dx = (self.min.x - p.x).max(0.0).max(p.x - self.max.x);
        let dy = (self.min.y - p.y).max(0.0).max(p.y - self.max.y);
        let dz = (self.min.z - p.z).max(0.0).max(p.z - self.max.z);
        (dx * dx + dy * dy + dz * dz).sqrt()
    }

    /// Slab test; returns the parametric `[t_enter, t_exit]` overlap of a ray
    /// with the box, or `None` when the ray misses entirely.
    pub fn intersect_ray(&self, origin: &Vec3, dir: &Vec3) -> Option<(f64, f64)> {
        let mut t0 = f64::NEG_INFINITY;
        let mut t1 = f64::INFINITY;
        for axis in 0..3 {
            let o = origin[axis];
            let d = dir[axis];
            if d.abs() < 1e-300 {
                if o < self.min[axis] || o > self.max[axis] {
                    return None;
                }
            } else {
                let mut a = (self.min[axis] - o) / d;
                let mut b = (self.max[axis] - o) / d;
                if a > b {
                    std::mem::swap(&mut a, &mut b);
                }
                t0 = t0.max(a);
                t1 = t1.min(b);
                if t0 > t1 {
                    return None;
                }
            }
        }
        Some((t0, t1))
    }
}

/// splitmix64 step; the standard 64-bit finalizer mix.
pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E3779B97F4A7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

/// Derives an independent RNG stream id from a base seed, an item index, and
/// a per-call-site salt. Used so parallel per-vertex work stays deterministic
/// regardless of scheduling.
pub fn derive_stream(seed: u64, index: u64, salt: u64) -> u64 {
    splitmix64(seed ^ splitmix64(index.wrapping_add(1) ^ splitmix64(salt)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_vec_normalizes_and_rejects_zero() {
        let u = UnitVec3::new(3.0, 0.0, 4.0).unwrap();
        assert!((u.as_vector().norm() - 1.0).abs() < 1e-12);
        assert!(UnitVec3::new(0.0, 0.0, 0.0).is_err());
        assert!(UnitVec3::new(f64::NAN, 0.0, 0.0).is_err());
    }

    #[test]
    fn aabb_ray_slab() {
        let b = Aabb::new(Vec3::new(-1.0, -1.0, -1.0), Vec3::new(1.0, 1.0, 1.0)).unwrap();
        let (t0, t1) = b
            .intersect_ray(&Vec3::new(0.0, 0.0, -3.0), &Vec3::new(0.0, 0.0, 1.0))
            .unwrap();
        assert!((t0 - 2.0).abs() < 1e-12 && (t1 - 4.0).abs() < 1e-12);
        assert!(b
            .intersect_ray(&Vec3::new(0.0, 5.0, -3.0), &Vec3::new(0.0, 0.0, 1.0))
            .is_none());
    }

    #[test]
    fn aabb_distance_outside() {
        let b = Aabb::new(Vec3::zeros(), Vec3::new(1.0, 1.0, 1.0)).unwrap();
        assert_eq!(b.distance(&Vec3::new(0.5, 0.5, 0.5)), 0.0);
        assert!((b.distance(&Vec3::new(2.0, 0.5, 0.5)) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn streams_differ_across_indices_and_salts() {
        let a = derive_stream(42, 0, 1);
        let b = derive_stream(42, 1, 1);
        let c = derive_stream(42, 0, 2);
        assert_ne!(a, b);
        assert_ne!(a, c);
        assert_eq!(a, derive_stream(42, 0, 1));
    }
}
