//! Geometry, flow, and metric kernels for temporally consistent face-video
//! editing pipelines.
//!
//! The crate covers the non-neural core of such a pipeline:
//!
//! - [`model3d`]: linear morphable models, coefficient recombination, and
//!   weak-perspective projection into image space,
//! - [`raster`]: a z-buffered software rasterizer that also emits the
//!   per-pixel triangle/barycentric buffers downstream stages consume,
//! - [`flow`]: dense mesh-derived optical flow with two-frame visibility
//!   reasoning,
//! - [`temporal`]: backward warping and warped-error temporal metrics,
//! - [`neuralmath`]: AdaIN, masked bidirectional normalization, and loss
//!   algebra on dense feature maps,
//! - [`sampler`]: the hybrid image/video training-sample selection policy,
//! - [`imgio`]: bit-exact codecs for every on-disk format the pipeline uses,
//! - [`synth`]: seeded synthetic scenes (icospheres, textures, pose tracks)
//!   used by the CLI and the verification suites.
//!
//! All numerics are `f64` in memory; the interchange formats store `f32`.

pub mod flow;
pub mod imgio;
pub mod model3d;
pub mod neuralmath;
pub mod raster;
pub mod sampler;
pub mod synth;
pub mod temporal;

mod error;

pub use error::{Error, Result};

// nalgebra types appear throughout the public API.
pub use nalgebra;
