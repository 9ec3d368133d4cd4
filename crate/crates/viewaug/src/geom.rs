//! Rays, rigid transforms, and pinhole cameras.
//!
//! Conventions: world units are meters, camera frames are +x right, +y down,
//! +z forward (optical axis), and pixel centers sit at integer coordinates
//! with `(0, 0)` the center of the top-left pixel. Poses are stored
//! world-from-camera.

use nalgebra::Matrix3;

use crate::error::{Error, Result};
use crate::math::{UnitVec3, Vec3};

/// A ray `r(t) = origin + t · direction`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ray {
    pub origin: Vec3,
    pub direction: UnitVec3,
}

impl Ray {
    pub fn new(origin: Vec3, direction: UnitVec3) -> Self {
        Ray { origin, direction }
    }

    pub fn at(&self, t: f64) -> Vec3 {
        self.origin + self.direction * t
    }
}

/// A proper rigid motion: orthonormal rotation (det +1) plus translation.
#[derive(Debug, Clone, PartialEq)]
pub struct RigidTransform {
    rotation: Matrix3<f64>,
    translation: Vec3,
}

impl RigidTransform {
    /// Validates orthonormality (`RᵀR = I` within 1e-9) and positive
    /// determinant before accepting the matrix.
    pub fn new(rotation: Matrix3<f64>, translation: Vec3) -> Result<Self> {
        let gram = rotation.transpose() * rotation;
        let eye = Matrix3::identity();
        let max_dev = (gram - eye).abs().max();
        if max_dev > 1e-9 {
            return Err(Error::invalid(format!(
                "rotation not orthonormal (max deviation {max_dev:.3e})"
            )));
        }
        let det = rotation.determinant();
        if (det - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!("rotation has determinant {det}")));
        }
        Ok(RigidTransform { rotation, translation })
    }

    pub fn identity() -> Self {
        RigidTransform {
            rotation: Matrix3::identity(),
            translation: Vec3::zeros(),
        }
    }

    pub fn from_translation(translation: Vec3) -> Self {
        RigidTransform { rotation: Matrix3::identity(), translation }
    }

    /// Rotation about a unit axis by an angle in radians (Rodrigues form).
    pub fn from_axis_angle(axis: &UnitVec3, angle: f64, translation: Vec3) -> Self {
        let rotation = nalgebra::Rotation3::from_axis_angle(
            &nalgebra::Unit::new_unchecked(*axis.as_vector()),
            angle,
        )
        .into_inner();
        RigidTransform { rotation, translation }
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vec3 {
        &self.translation
    }

    pub fn transform_point(&self, p: &Vec3) -> Vec3 {
        self.rotation * p + self.translation
    }

    pub fn transform_vector(&self, v: &Vec3) -> Vec3 {
        self.rotation * v
    }

    /// `self ∘ other`: applies `other` first.
    pub fn compose(&self, other: &RigidTransform) -> RigidTransform {
        RigidTransform {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    pub fn inverse(&self) -> RigidTransform {
        let rt = self.rotation.transpose();
        RigidTransform {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }

    /// Row-major `[R | t]` flattening used by the camera record format.
    pub fn to_row_major_3x4(&self) -> [f64; 12] {
        let r = &self.rotation;
        let t = &self.translation;
        [
            r[(0, 0)], r[(0, 1)], r[(0, 2)], t.x,
            r[(1, 0)], r[(1, 1)], r[(1, 2)], t.y,
            r[(2, 0)], r[(2, 1)], r[(2, 2)], t.z,
        ]
    }

    pub fn from_row_major_3x4(m: &[f64; 12]) -> Result<Self> {
        let rotation = Matrix3::new(m[0], m[1], m[2], m[4], m[5], m[6], m[8], m[9], m[10]);
        let translation = Vec3::new(m[3], m[7], m[11]);
        RigidTransform::new(rotation, translation)
    }
}

/// Pinhole camera: intrinsics in pixels plus a world-from-camera pose.
#[derive(Debug, Clone, PartialEq)]
pub struct PinholeCamera {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
    pub world_from_camera: RigidTransform,
}

impl PinholeCamera {
    pub fn new(
        fx: f64,
        fy: f64,
        cx: f64,
        cy: f64,
        width: usize,
        height: usize,
        world_from_camera: RigidTransform,
    ) -> Result<Self> {
        if !(fx > 0.0 && fy > 0.0) {
            return Err(Error::invalid("focal lengths must be positive"));
        }
        if !(cx > 0.0 && cx < width as f64 && cy > 0.0 && cy < height as f64) {
            return Err(Error::invalid("principal point outside image"));
        }
        Ok(PinholeCamera { fx, fy, cx, cy, width, height, world_from_camera })
    }

    /// Camera center in world coordinates.
    pub fn center(&self) -> Vec3 {
        *self.world_from_camera.translation()
    }

    pub fn camera_from_world(&self) -> RigidTransform {
        self.world_from_camera.inverse()
    }

    /// True when a continuous pixel coordinate rounds into the image.
    pub fn contains_pixel(&self, pixel: &[f64; 2]) -> bool {
        pixel[0] >= -0.5
            && pixel[0] < self.width as f64 - 0.5
            && pixel[1] >= -0.5
            && pixel[1] < self.height as f64 - 0.5
    }

    /// Projects a world point; `None` signals the point lies at or behind
    /// the camera plane (z ≤ 0), which callers filter rather than handle as
    /// an error. The returned pixel may be outside the image.
    pub fn project(&self, p_world: &Vec3) -> Option<([f64; 2], f64)> {
        let p = self.camera_from_world().transform_point(p_world);
        if p.z <= 0.0 {
            return None;
        }
        let px = self.fx * p.x / p.z + self.cx;
        let py = self.fy * p.y / p.z + self.cy;
        Some(([px, py], p.z))
    }

    /// World point at `depth` along the camera ray through a pixel.
    pub fn back_project(&self, pixel: &[f64; 2], depth: f64) -> Result<Vec3> {
        if !(depth > 0.0) {
            return Err(Error::invalid(format!("depth must be positive, got {depth}")));
        }
        let x = (pixel[0] - self.cx) / self.fx * depth;
        let y = (pixel[1] - self.cy) / self.fy * depth;
        Ok(self.world_from_camera.transform_point(&Vec3::new(x, y, depth)))
    }

    /// World-space ray through a pixel, origin at the camera center.
    pub fn camera_ray(&self, pixel: &[f64; 2]) -> Result<Ray> {
        if !self.contains_pixel(pixel) {
            return Err(Error::invalid(format!(
                "pixel ({}, {}) outside {}x{} image",
                pixel[0], pixel[1], self.width, self.height
            )));
        }
        let dir_cam = Vec3::new(
            (pixel[0] - self.cx) / self.fx,
            (pixel[1] - self.cy) / self.fy,
            1.0,
        );
        let dir_world = self.world_from_camera.transform_vector(&dir_cam);
        Ok(Ray::new(self.center(), UnitVec3::from_vector(dir_world)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, UnitSphere};

    fn random_pose(rng: &mut ChaCha8Rng) -> RigidTransform {
        let axis: [f64; 3] = UnitSphere.sample(rng);
        let axis = UnitVec3::new(axis[0], axis[1], axis[2]).unwrap();
        let angle = rng.gen_range(-3.0..3.0);
        let t = Vec3::new(
            rng.gen_range(-5.0..5.0),
            rng.gen_range(-5.0..5.0),
            rng.gen_range(-5.0..5.0),
        );
        RigidTransform::from_axis_angle(&axis, angle, t)
    }

    fn test_camera(pose: RigidTransform) -> PinholeCamera {
        PinholeCamera::new(100.0, 100.0, 50.0, 50.0, 100, 100, pose).unwrap()
    }

    #[test]
    fn rigid_transform_rejects_non_rotation() {
        let mut m = Matrix3::identity();
        m[(0, 0)] = 2.0;
        assert!(RigidTransform::new(m, Vec3::zeros()).is_err());
        // Reflection: orthonormal but det −1.
        let mut refl = Matrix3::identity();
        refl[(2, 2)] = -1.0;
        assert!(RigidTransform::new(refl, Vec3::zeros()).is_err());
    }

    #[test]
    fn inverse_compose_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..100 {
            let t = random_pose(&mut rng);
            let round = t.inverse().compose(&t);
            let p = Vec3::new(rng.gen_range(-10.0..10.0), rng.gen(), rng.gen());
            assert!((round.transform_point(&p) - p).norm() < 1e-9);
        }
    }

    #[test]
    fn compose_is_associative() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let (a, b, c) = (random_pose(&mut rng), random_pose(&mut rng), random_pose(&mut rng));
            let p = Vec3::new(rng.gen(), rng.gen(), rng.gen());
            let left = a.compose(&b).compose(&c).transform_point(&p);
            let right = a.compose(&b.compose(&c)).transform_point(&p);
            assert!((left - right).norm() < 1e-9);
        }
    }

    #[test]
    fn project_on_axis_point() {
        let cam = test_camera(RigidTransform::identity());
        let (px, depth) = cam.project(&Vec3::new(0.0, 0.0, 1.0)).unwrap();
        assert_eq!(px, [50.0, 50.0]);
        assert_eq!(depth, 1.0);
    }

    #[test]
    fn project_similar_triangles() {
        let cam = test_camera(RigidTransform::identity());
        let (px, depth) = cam.project(&Vec3::new(0.5, 0.0, 1.0)).unwrap();
        assert_eq!(px, [100.0, 50.0]);
        assert_eq!(depth, 1.0);
    }

    #[test]
    fn project_behind_camera_signals_none() {
        let cam = test_camera(RigidTransform::identity());
        assert!(cam.project(&Vec3::new(0.0, 0.0, -1.0)).is_none());
        assert!(cam.project(&Vec3::new(0.0, 0.0, 0.0)).is_none());
    }

    #[test]
    fn back_project_center_pixel() {
        let cam = test_camera(RigidTransform::identity());
        let p = cam.back_project(&[50.0, 50.0], 3.0).unwrap();
        assert!((p - Vec3::new(0.0, 0.0, 3.0)).norm() < 1e-15);
        assert!(cam.back_project(&[50.0, 50.0], 0.0).is_err());
    }

    #[test]
    fn back_project_translated_camera() {
        // Camera shifted +1 in x: the center pixel at depth 2 lands on
        // (1, 0, 2) in world coordinates.
        let cam = test_camera(RigidTransform::from_translation(Vec3::new(1.0, 0.0, 0.0)));
        let p = cam.back_project(&[50.0, 50.0], 2.0).unwrap();
        assert!((p - Vec3::new(1.0, 0.0, 2.0)).norm() < 1e-12);
    }

    #[test]
    fn project_back_project_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let cam = test_camera(random_pose(&mut rng));
            let pixel = [rng.gen_range(0.0..99.0), rng.gen_range(0.0..99.0)];
            let depth = rng.gen_range(0.1..100.0);
            let world = cam.back_project(&pixel, depth).unwrap();
            let (px, z) = cam.project(&world).unwrap();
            assert!((px[0] - pixel[0]).abs() < 1e-6);
            assert!((px[1] - pixel[1]).abs() < 1e-6);
            assert!((z - depth).abs() < 1e-6 * depth.max(1.0));
        }
    }

    #[test]
    fn camera_ray_center_and_collinearity() {
        let cam = test_camera(RigidTransform::identity());
        let ray = cam.camera_ray(&[50.0, 50.0]).unwrap();
        assert_eq!(ray.origin, Vec3::zeros());
        assert!((ray.direction.as_vector() - Vec3::new(0.0, 0.0, 1.0)).norm() < 1e-15);

        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..100 {
            let cam = test_camera(random_pose(&mut rng));
            let pixel = [rng.gen_range(0.0..99.0), rng.gen_range(0.0..99.0)];
            let ray = cam.camera_ray(&pixel).unwrap();
            for depth in [0.3, 1.0, 7.5] {
                let p = cam.back_project(&pixel, depth).unwrap();
                let off = (p - ray.origin).cross(ray.direction.as_vector()).norm();
                assert!(off < 1e-9 * (p - ray.origin).norm().max(1.0));
            }
        }
    }

    #[test]
    fn camera_ray_corner_matches_direct_formula() {
        let cam = test_camera(RigidTransform::identity());
        let ray = cam.camera_ray(&[0.0, 0.0]).unwrap();
        let expect = Vec3::new((0.0 - 50.0) / 100.0, (0.0 - 50.0) / 100.0, 1.0).normalize();
        assert!((ray.direction.as_vector() - expect).norm() < 1e-12);
        assert!(cam.camera_ray(&[120.0, 50.0]).is_err());
    }

    #[test]
    fn pose_record_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let pose = random_pose(&mut rng);
        let rec = pose.to_row_major_3x4();
        let back = RigidTransform::from_row_major_3x4(&rec).unwrap();
        assert_eq!(pose, back);
    }
}
