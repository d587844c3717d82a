// Negated float comparisons are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod geom;
pub mod image;
pub mod imgproc;

pub use error::{Error, Result};
pub use image::{Image, PixelFormat};
pub mod line_detect;
pub mod laser_detect;
pub mod guidance;
pub mod par;
pub mod synth;
pub mod pipeline;
pub mod eval;
pub mod wire;
