// `!(x > 0.0)` style checks are used on purpose: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod motion;
pub mod noise;
pub mod rotmath;
pub mod skeleton;

pub use error::{Error, Result};
pub use motion::MotionSequence;
pub use noise::{NoiseField, PerlinParams};
pub use skeleton::{Chain, SkeletonConfig};
pub mod analysis;
pub mod cli;
pub mod io;
pub mod metrics;
pub mod smoothing;
