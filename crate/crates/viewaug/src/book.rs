// The guide chapters under book/src/ double as doc-tests: each include
// turns a chapter's ```rust blocks into runnable tests, so the book cannot
// drift from the API. (mdbook itself cannot run example blocks against a
// local crate; `cargo test --doc` can.)

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/spherical-harmonics.md")]
pub mod spherical_harmonics {}

#[doc = include_str!("../../../book/src/cameras-and-rays.md")]
pub mod cameras_and_rays {}

#[doc = include_str!("../../../book/src/signed-distance-fields.md")]
pub mod signed_distance_fields {}

#[doc = include_str!("../../../book/src/surface-meshing.md")]
pub mod surface_meshing {}

#[doc = include_str!("../../../book/src/volume-rendering.md")]
pub mod volume_rendering {}

#[doc = include_str!("../../../book/src/depth-warping.md")]
pub mod depth_warping {}

#[doc = include_str!("../../../book/src/augmentation-pipeline.md")]
pub mod augmentation_pipeline {}

#[doc = include_str!("../../../book/src/synthetic-scenes.md")]
pub mod synthetic_scenes {}
