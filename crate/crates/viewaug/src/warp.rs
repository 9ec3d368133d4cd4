//! Forward depth warping between posed views with painter's-style occlusion
//! resolution, and the edge-aware depth smoothness loss.

use crate::error::{Error, Result};
use crate::geom::{PinholeCamera, RigidTransform};
use crate::math::Vec3;
use crate::render::{DepthMap, ImageBuffer};

/// Result of warping a depth map into another view.
#[derive(Debug, Clone)]
pub struct WarpResult {
    pub depth: DepthMap,
    /// How many source pixels landed on each target pixel (row-major);
    /// pixels with count 0 carry the invalid marker in `depth`.
    pub hit_count: Vec<u32>,
}

/// Splat-warps every valid reference pixel into the unseen view: each pixel
/// back-projects at its depth, reprojects through the target camera, and
/// lands on the nearest pixel center. Collisions keep the smallest target
/// depth (painter's rule); behind-camera and out-of-bounds projections are
/// dropped. Fully invalid input yields fully invalid output.
pub fn warp_depth(
    ref_depth: &DepthMap,
    ref_cam: &PinholeCamera,
    unseen_cam: &PinholeCamera,
) -> Result<WarpResult> {
    if ref_depth.width != ref_cam.width || ref_depth.height != ref_cam.height {
        return Err(Error::DimensionMismatch(
            ref_depth.width,
            ref_depth.height,
            ref_cam.width,
            ref_cam.height,
        ));
    }
    // Relative motion composed once. Identical cameras short-circuit to the
    // exact identity so the identity warp stays bitwise on depth values.
    let rel = if ref_cam == unseen_cam {
        RigidTransform::identity()
    } else {
        unseen_cam
            .camera_from_world()
            .compose(&ref_cam.world_from_camera)
    };

    let (tw, th) = (unseen_cam.width, unseen_cam.height);
    let mut depth = DepthMap::new_invalid(tw, th);
    let mut hit_count = vec![0u32; tw * th];

    for sy in 0..ref_depth.height {
        for sx in 0..ref_depth.width {
            let z = ref_depth.get(sx, sy);
            if z.is_nan() {
                continue;
            }
            let p_ref = Vec3::new(
                (sx as f64 - ref_cam.cx) / ref_cam.fx * z,
                (sy as f64 - ref_cam.cy) / ref_cam.fy * z,
                z,
            );
            let p = rel.transform_point(&p_ref);
            if p.z <= 0.0 {
                continue;
            }
            let u = unseen_cam.fx * (p.x / p.z) + unseen_cam.cx;
            let v = unseen_cam.fy * (p.y / p.z) + unseen_cam.cy;
            let tx = u.round();
            let ty = v.round();
            if tx < 0.0 || ty < 0.0 || tx >= tw as f64 || ty >= th as f64 {
                continue;
            }
            let (tx, ty) = (tx as usize, ty as usize);
            hit_count[ty * tw + tx] += 1;
            let cur = depth.get(tx, ty);
            if cur.is_nan() || p.z < cur {
                depth.set(tx, ty, p.z);
            }
        }
    }
    Ok(WarpResult { depth, hit_count })
}

/// Which values the smoothness stencil differentiates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SmoothnessDomain {
    /// Second differences of the depth values themselves.
    Depth,
    /// Second differences of `1 / depth`.
    InverseDepth,
}

/// Edge-aware second-order smoothness of a depth map: the mean over interior
/// pixels of `exp(−|∇²I|) · (|∂xx d| + |∂xy d| + |∂yy d|)`, where `|∇²I|` is
/// the channel-mean absolute 5-point image Laplacian. A stencil that touches
/// any invalid depth pixel contributes nothing. Zero iff depth is locally
/// affine wherever the stencil is valid.
pub fn smoothness_loss(depth: &DepthMap, image: &ImageBuffer) -> Result<f64> {
    smoothness_loss_in(SmoothnessDomain::Depth, depth, image)
}

pub fn smoothness_loss_in(
    domain: SmoothnessDomain,
    depth: &DepthMap,
    image: &ImageBuffer,
) -> Result<f64> {
    if depth.width != image.width || depth.height != image.height {
        return Err(Error::DimensionMismatch(
            depth.width,
            depth.height,
            image.width,
            image.height,
        ));
    }
    if depth.width < 3 || depth.height < 3 {
        return Err(Error::invalid("smoothness needs at least a 3x3 map"));
    }
    let value = |x: usize, y: usize| -> f64 {
        let d = depth.get(x, y);
        match domain {
            SmoothnessDomain::Depth => d,
            SmoothnessDomain::InverseDepth => 1.0 / d,
        }
    };

    let mut acc = 0.0;
    let mut count = 0usize;
    for y in 1..depth.height - 1 {
        for x in 1..depth.width - 1 {
            let stencil_valid = (-1i64..=1).all(|dy| {
                (-1i64..=1).all(|dx| {
                    depth.is_valid((x as i64 + dx) as usize, (y as i64 + dy) as usize)
                })
            });
            if !stencil_valid {
                continue;
            }
            let dxx = value(x - 1, y) - 2.0 * value(x, y) + value(x + 1, y);
            let dyy = value(x, y - 1) - 2.0 * value(x, y) + value(x, y + 1);
            let dxy = (value(x + 1, y + 1) - value(x + 1, y - 1) - value(x - 1, y + 1)
                + value(x - 1, y - 1))
                / 4.0;

            let lap = {
                let c = image.pixel(x, y);
                let l = image.pixel(x - 1, y);
                let r = image.pixel(x + 1, y);
                let u = image.pixel(x, y - 1);
                let d = image.pixel(x, y + 1);
                let lr = l.r + r.r + u.r + d.r - 4.0 * c.r;
                let lg = l.g + r.g + u.g + d.g - 4.0 * c.g;
                let lb = l.b + r.b + u.b + d.b - 4.0 * c.b;
                (lr.abs() + lg.abs() + lb.abs()) / 3.0
            };
            acc += (-lap).exp() * (dxx.abs() + dxy.abs() + dyy.abs());
            count += 1;
        }
    }
    Ok(if count == 0 { 0.0 } else { acc / count as f64 })
}
